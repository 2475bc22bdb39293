#pragma once

#include "forgeseek/image.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace forgeseek {

/// Keys of the built-in residual bank, in bank order.
enum class ModelId : std::uint8_t { L1, L2, L3, LSQ, N1, N2, N3, NSQ };

inline constexpr int kBankSize = 8;

std::string_view model_name(ModelId id) noexcept;
std::optional<ModelId> parse_model_id(std::string_view name) noexcept;

enum class ResidualKind { Linear, MinMax };
enum class FilterOrder { First, Second, Third, Square5 };

/// Integer-weight correlation stencil. The residual at pixel p is
/// sum_{r,c} weights[r*cols+c] * x[p.y - anchor_row + r][p.x - anchor_col + c].
struct Stencil {
    int rows = 0;
    int cols = 0;
    int anchor_row = 0;
    int anchor_col = 0;
    std::vector<int> weights;

    int at(int r, int c) const { return weights[static_cast<std::size_t>(r) * cols + c]; }
    int anchor_weight() const { return at(anchor_row, anchor_col); }
    int weight_sum() const;
};

struct ResidualModel {
    ModelId id;
    ResidualKind kind;
    FilterOrder order;
    std::vector<Stencil> kernels;
    int normalizer;
};

/// The eight-model bank: L1, L2, L3, LSQ (linear) and N1, N2, N3, NSQ
/// (min/max). See docs/residual_bank.md for the stencil tables.
const std::vector<ResidualModel>& builtin_bank();
const ResidualModel& bank_model(ModelId id);

/// Real-valued residual on the valid region of the model's kernels.
struct ResidualField {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// One field per kernel for linear models; {min, max} for min/max models.
/// All fields share the intersection of the kernels' valid regions.
std::vector<ResidualField> compute_residual(const GrayImage& img, const ResidualModel& model);

struct QuantizedResidualField {
    int width = 0;
    int height = 0;
    int bound = 2;  // T
    std::vector<std::int8_t> data;

    int at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

inline constexpr double kQuantStep = 1.0;
inline constexpr int kTruncBound = 2;

/// trunc_T(round(r / q)) with ties rounded away from zero.
int quantize_sample(double r, double q = kQuantStep, int bound = kTruncBound);

QuantizedResidualField quantize_truncate(const ResidualField& field, double q = kQuantStep,
                                         int bound = kTruncBound);

}  // namespace forgeseek
