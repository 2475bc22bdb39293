#include "forgeseek/cooccurrence.hpp"

#include "forgeseek/error.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

namespace forgeseek {

namespace {

CoocTuple negated(const CoocTuple& t) {
    return {-t[0], -t[1], -t[2], -t[3]};
}

CoocTuple reversed(const CoocTuple& t) {
    return {t[3], t[2], t[1], t[0]};
}

OrbitTable build_orbits(const std::vector<std::function<CoocTuple(const CoocTuple&)>>& group,
                        std::size_t expected) {
    // Representative (smallest member) -> cells of the orbit.
    std::map<CoocTuple, std::vector<int>> orbits;
    for (int i = 0; i < kCoocCells; ++i) {
        const CoocTuple t = cooc_tuple(i);
        CoocTuple rep = t;
        for (const auto& g : group) {
            rep = std::min(rep, g(t));
        }
        orbits[rep].push_back(i);
    }
    if (orbits.size() != expected) {
        throw std::logic_error("orbit enumeration produced " + std::to_string(orbits.size()) +
                               " orbits, expected " + std::to_string(expected));
    }
    OrbitTable table;
    int next = 0;
    for (const auto& [rep, cells] : orbits) {
        table.representatives.push_back(rep);
        for (int cell : cells) {
            table.orbit_of[static_cast<std::size_t>(cell)] = next;
        }
        ++next;
    }
    return table;
}

std::vector<double> normalized(std::vector<double> v) {
    const double total = std::accumulate(v.begin(), v.end(), 0.0);
    if (!(total > 0.0)) {
        throw Error(ErrorCode::DegenerateInput, "empty co-occurrence tensor");
    }
    for (double& x : v) {
        x /= total;
    }
    return v;
}

}  // namespace

CoocTuple cooc_tuple(int index) noexcept {
    CoocTuple t{};
    for (int k = 3; k >= 0; --k) {
        t[static_cast<std::size_t>(k)] = index % 5 - 2;
        index /= 5;
    }
    return t;
}

CoocTensor& CoocTensor::operator+=(const CoocTensor& other) {
    for (std::size_t i = 0; i < counts.size(); ++i) {
        counts[i] += other.counts[i];
    }
    total += other.total;
    return *this;
}

CoocTensor count_cooc(const QuantizedResidualField& field) {
    if (field.bound != kTruncBound) {
        throw Error(ErrorCode::InvalidArgument, "co-occurrence tensor requires T = 2");
    }
    const int w = field.width;
    const int h = field.height;
    if (w < 4 && h < 4) {
        throw Error(ErrorCode::DegenerateInput, "residual field too small for 4-sample windows");
    }
    CoocTensor c;
    auto cell = [&](int x, int y) { return field.at(x, y) + 2; };
    if (w >= 4) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x + 3 < w; ++x) {
                const int idx = ((cell(x, y) * 5 + cell(x + 1, y)) * 5 + cell(x + 2, y)) * 5 + cell(x + 3, y);
                ++c.counts[static_cast<std::size_t>(idx)];
            }
        }
        c.total += static_cast<std::uint64_t>(h) * static_cast<std::uint64_t>(w - 3);
    }
    if (h >= 4) {
        for (int y = 0; y + 3 < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const int idx = ((cell(x, y) * 5 + cell(x, y + 1)) * 5 + cell(x, y + 2)) * 5 + cell(x, y + 3);
                ++c.counts[static_cast<std::size_t>(idx)];
            }
        }
        c.total += static_cast<std::uint64_t>(w) * static_cast<std::uint64_t>(h - 3);
    }
    return c;
}

const OrbitTable& linear_orbits() {
    static const OrbitTable table = build_orbits(
        {negated, reversed, [](const CoocTuple& t) { return negated(reversed(t)); }}, kLinearFeatureDim);
    return table;
}

const OrbitTable& minmax_orbits() {
    static const OrbitTable table = build_orbits({reversed}, kMinMaxFeatureDim);
    return table;
}

std::vector<double> fold_linear(const CoocTensor& c) {
    const auto& orbits = linear_orbits();
    std::vector<double> out(orbits.size(), 0.0);
    for (std::size_t i = 0; i < c.counts.size(); ++i) {
        out[static_cast<std::size_t>(orbits.orbit_of[i])] += static_cast<double>(c.counts[i]);
    }
    return out;
}

std::vector<double> fold_minmax(const CoocTensor& c_min, const CoocTensor& c_max) {
    const auto& orbits = minmax_orbits();
    std::vector<double> out(orbits.size(), 0.0);
    for (int i = 0; i < kCoocCells; ++i) {
        const CoocTuple d = cooc_tuple(i);
        const double mass = static_cast<double>(c_min.counts[static_cast<std::size_t>(i)]) +
                            static_cast<double>(c_max.at(reversed(negated(d))));
        out[static_cast<std::size_t>(orbits.orbit_of[static_cast<std::size_t>(i)])] += mass;
    }
    return out;
}

FeatureVector symmetrize_linear(const CoocTensor& c, ModelId model_id) {
    return {model_id, normalized(fold_linear(c))};
}

FeatureVector symmetrize_minmax(const CoocTensor& c_min, const CoocTensor& c_max, ModelId model_id) {
    return {model_id, normalized(fold_minmax(c_min, c_max))};
}

std::size_t feature_dim(ResidualKind kind) noexcept {
    return kind == ResidualKind::Linear ? kLinearFeatureDim : kMinMaxFeatureDim;
}

std::size_t feature_dim(ModelId id) noexcept {
    return feature_dim(bank_model(id).kind);
}

FeatureVector extract_feature(const GrayImage& img, const ResidualModel& model) {
    const auto fields = compute_residual(img, model);
    if (model.kind == ResidualKind::Linear) {
        CoocTensor pooled;
        for (const auto& f : fields) {
            pooled += count_cooc(quantize_truncate(f));
        }
        return symmetrize_linear(pooled, model.id);
    }
    return symmetrize_minmax(count_cooc(quantize_truncate(fields[0])),
                             count_cooc(quantize_truncate(fields[1])), model.id);
}

std::vector<FeatureVector> extract_features(const GrayImage& img, std::span<const ResidualModel> models) {
    std::vector<FeatureVector> out;
    out.reserve(models.size());
    for (const auto& m : models) {
        out.push_back(extract_feature(img, m));
    }
    return out;
}

MergedFeatures merge_features(std::span<const FeatureVector> features, std::span<const ModelId> selection) {
    if (selection.empty()) {
        throw Error(ErrorCode::Selection, "empty model selection");
    }
    MergedFeatures merged;
    for (std::size_t i = 0; i < selection.size(); ++i) {
        const ModelId id = selection[i];
        if (std::find(selection.begin(), selection.begin() + static_cast<std::ptrdiff_t>(i), id) !=
            selection.begin() + static_cast<std::ptrdiff_t>(i)) {
            throw Error(ErrorCode::Selection, "duplicate model in selection: " + std::string(model_name(id)));
        }
        const auto it = std::find_if(features.begin(), features.end(),
                                     [id](const FeatureVector& f) { return f.model_id == id; });
        if (it == features.end()) {
            throw Error(ErrorCode::Selection, "model not present in features: " + std::string(model_name(id)));
        }
        merged.selection.push_back(id);
        merged.values.insert(merged.values.end(), it->values.begin(), it->values.end());
    }
    return merged;
}

}  // namespace forgeseek
