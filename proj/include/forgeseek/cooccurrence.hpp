#pragma once

#include "forgeseek/image.hpp"
#include "forgeseek/residuals.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace forgeseek {

/// A 4-tuple of quantized residuals, each in [-2, 2].
using CoocTuple = std::array<int, 4>;

inline constexpr int kCoocSymbols = 5;
inline constexpr int kCoocCells = 625;
inline constexpr int kLinearFeatureDim = 169;
inline constexpr int kMinMaxFeatureDim = 325;

/// Cell index of a tuple: base-5 digits (d + 2), first element most significant.
constexpr int cooc_index(const CoocTuple& t) noexcept {
    return (((t[0] + 2) * 5 + (t[1] + 2)) * 5 + (t[2] + 2)) * 5 + (t[3] + 2);
}
CoocTuple cooc_tuple(int index) noexcept;

/// Joint histogram of four consecutive quantized residuals.
struct CoocTensor {
    std::array<std::uint64_t, kCoocCells> counts{};
    std::uint64_t total = 0;

    std::uint64_t at(const CoocTuple& t) const { return counts[static_cast<std::size_t>(cooc_index(t))]; }
    void add(const CoocTuple& t, std::uint64_t n = 1) {
        counts[static_cast<std::size_t>(cooc_index(t))] += n;
        total += n;
    }
    CoocTensor& operator+=(const CoocTensor& other);

    friend bool operator==(const CoocTensor&, const CoocTensor&) = default;
};

/// Counts every horizontal and every vertical window of four consecutive
/// samples into one tensor.
CoocTensor count_cooc(const QuantizedResidualField& field);

/// Orbit tables; representatives are the lexicographically smallest member
/// and orbits are ordered by representative.
struct OrbitTable {
    std::array<int, kCoocCells> orbit_of{};
    std::vector<CoocTuple> representatives;

    std::size_t size() const noexcept { return representatives.size(); }
};

/// Orbits under {identity, negation, reversal, negation+reversal}: 169.
const OrbitTable& linear_orbits();
/// Orbits under {identity, reversal}: 325.
const OrbitTable& minmax_orbits();

/// Unnormalized folds (mass preserving).
std::vector<double> fold_linear(const CoocTensor& c);
std::vector<double> fold_minmax(const CoocTensor& c_min, const CoocTensor& c_max);

struct FeatureVector {
    ModelId model_id;
    std::vector<double> values;

    std::size_t dim() const noexcept { return values.size(); }
};

FeatureVector symmetrize_linear(const CoocTensor& c, ModelId model_id = ModelId::L1);
FeatureVector symmetrize_minmax(const CoocTensor& c_min, const CoocTensor& c_max,
                                ModelId model_id = ModelId::N1);

std::size_t feature_dim(ResidualKind kind) noexcept;
std::size_t feature_dim(ModelId id) noexcept;

/// Residuals, quantization, co-occurrence and folding for each model.
/// Linear models pool all kernel directions into one tensor before folding.
std::vector<FeatureVector> extract_features(const GrayImage& img, std::span<const ResidualModel> models);
FeatureVector extract_feature(const GrayImage& img, const ResidualModel& model);

/// Concatenation of the selected blocks in selection order.
struct MergedFeatures {
    std::vector<ModelId> selection;
    std::vector<double> values;
};

MergedFeatures merge_features(std::span<const FeatureVector> features, std::span<const ModelId> selection);

}  // namespace forgeseek
