#include "forgeseek/residuals.hpp"

#include "forgeseek/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace forgeseek {

namespace {

constexpr std::array<std::string_view, kBankSize> kNames = {"L1", "L2", "L3", "LSQ", "N1", "N2", "N3", "NSQ"};

Stencil row_stencil(std::vector<int> taps, int anchor_col) {
    Stencil s;
    s.rows = 1;
    s.cols = static_cast<int>(taps.size());
    s.anchor_row = 0;
    s.anchor_col = anchor_col;
    s.weights = std::move(taps);
    return s;
}

Stencil transposed(const Stencil& s) {
    Stencil t;
    t.rows = s.cols;
    t.cols = s.rows;
    t.anchor_row = s.anchor_col;
    t.anchor_col = s.anchor_row;
    t.weights.resize(s.weights.size());
    for (int r = 0; r < s.rows; ++r) {
        for (int c = 0; c < s.cols; ++c) {
            t.weights[static_cast<std::size_t>(c) * t.cols + r] = s.at(r, c);
        }
    }
    return t;
}

// 5x5 "KV" stencil, center -12.
const std::array<int, 25> kSquare5 = {
    -1,  2,  -2,  2, -1,
     2, -6,   8, -6,  2,
    -2,  8, -12,  8, -2,
     2, -6,   8, -6,  2,
    -1,  2,  -2,  2, -1,
};

Stencil square5() {
    Stencil s;
    s.rows = 5;
    s.cols = 5;
    s.anchor_row = 2;
    s.anchor_col = 2;
    s.weights.assign(kSquare5.begin(), kSquare5.end());
    return s;
}

// Half-plane split of the 5x5 stencil: rows (or columns) on one side of the
// center are zeroed; the center row/column stays, so the kernel remains
// zero-sum with anchor weight -12.
enum class Half { Top, Bottom, Left, Right };

Stencil square5_half(Half half) {
    Stencil s = square5();
    for (int r = 0; r < 5; ++r) {
        for (int c = 0; c < 5; ++c) {
            const bool drop = (half == Half::Top && r > 2) || (half == Half::Bottom && r < 2) ||
                              (half == Half::Left && c > 2) || (half == Half::Right && c < 2);
            if (drop) {
                s.weights[static_cast<std::size_t>(r) * 5 + c] = 0;
            }
        }
    }
    return s;
}

ResidualModel directional(ModelId id, ResidualKind kind, FilterOrder order, const Stencil& horizontal) {
    return {id, kind, order, {horizontal, transposed(horizontal)}, std::abs(horizontal.anchor_weight())};
}

std::vector<ResidualModel> make_bank() {
    const Stencil first = row_stencil({-1, 1}, 0);
    const Stencil second = row_stencil({1, -2, 1}, 1);
    const Stencil third = row_stencil({1, -3, 3, -1}, 1);

    std::vector<ResidualModel> bank;
    bank.push_back(directional(ModelId::L1, ResidualKind::Linear, FilterOrder::First, first));
    bank.push_back(directional(ModelId::L2, ResidualKind::Linear, FilterOrder::Second, second));
    bank.push_back(directional(ModelId::L3, ResidualKind::Linear, FilterOrder::Third, third));
    bank.push_back({ModelId::LSQ, ResidualKind::Linear, FilterOrder::Square5, {square5()}, 12});
    bank.push_back(directional(ModelId::N1, ResidualKind::MinMax, FilterOrder::First, first));
    bank.push_back(directional(ModelId::N2, ResidualKind::MinMax, FilterOrder::Second, second));
    bank.push_back(directional(ModelId::N3, ResidualKind::MinMax, FilterOrder::Third, third));
    bank.push_back({ModelId::NSQ,
                    ResidualKind::MinMax,
                    FilterOrder::Square5,
                    {square5_half(Half::Top), square5_half(Half::Bottom), square5_half(Half::Left),
                     square5_half(Half::Right)},
                    12});
    return bank;
}

struct Tap {
    int dy;
    int dx;
    double w;
};

std::vector<Tap> taps_of(const Stencil& s) {
    std::vector<Tap> taps;
    for (int r = 0; r < s.rows; ++r) {
        for (int c = 0; c < s.cols; ++c) {
            if (s.at(r, c) != 0) {
                taps.push_back({r - s.anchor_row, c - s.anchor_col, static_cast<double>(s.at(r, c))});
            }
        }
    }
    return taps;
}

}  // namespace

int Stencil::weight_sum() const {
    return std::accumulate(weights.begin(), weights.end(), 0);
}

std::string_view model_name(ModelId id) noexcept {
    return kNames[static_cast<std::size_t>(id)];
}

std::optional<ModelId> parse_model_id(std::string_view name) noexcept {
    for (std::size_t i = 0; i < kNames.size(); ++i) {
        if (kNames[i] == name) {
            return static_cast<ModelId>(i);
        }
    }
    return std::nullopt;
}

const std::vector<ResidualModel>& builtin_bank() {
    static const std::vector<ResidualModel> bank = make_bank();
    return bank;
}

const ResidualModel& bank_model(ModelId id) {
    return builtin_bank()[static_cast<std::size_t>(id)];
}

std::vector<ResidualField> compute_residual(const GrayImage& img, const ResidualModel& model) {
    int top = 0, bottom = 0, left = 0, right = 0;
    for (const auto& k : model.kernels) {
        top = std::max(top, k.anchor_row);
        bottom = std::max(bottom, k.rows - 1 - k.anchor_row);
        left = std::max(left, k.anchor_col);
        right = std::max(right, k.cols - 1 - k.anchor_col);
    }
    const int out_w = img.width() - left - right;
    const int out_h = img.height() - top - bottom;
    if (out_w < 1 || out_h < 1) {
        throw Error(ErrorCode::DegenerateInput, "image smaller than residual kernel support");
    }

    const double inv_norm = 1.0 / model.normalizer;
    std::vector<ResidualField> per_kernel;
    per_kernel.reserve(model.kernels.size());
    for (const auto& k : model.kernels) {
        const auto taps = taps_of(k);
        ResidualField f{out_w, out_h, std::vector<double>(static_cast<std::size_t>(out_w) * out_h)};
        for (int y = 0; y < out_h; ++y) {
            for (int x = 0; x < out_w; ++x) {
                double acc = 0.0;
                for (const auto& t : taps) {
                    acc += t.w * img.at(x + left + t.dx, y + top + t.dy);
                }
                f.data[static_cast<std::size_t>(y) * out_w + x] = acc * inv_norm;
            }
        }
        per_kernel.push_back(std::move(f));
    }

    if (model.kind == ResidualKind::Linear) {
        return per_kernel;
    }

    ResidualField lo{out_w, out_h, per_kernel.front().data};
    ResidualField hi{out_w, out_h, per_kernel.front().data};
    for (std::size_t k = 1; k < per_kernel.size(); ++k) {
        for (std::size_t i = 0; i < lo.data.size(); ++i) {
            lo.data[i] = std::min(lo.data[i], per_kernel[k].data[i]);
            hi.data[i] = std::max(hi.data[i], per_kernel[k].data[i]);
        }
    }
    return {std::move(lo), std::move(hi)};
}

int quantize_sample(double r, double q, int bound) {
    const double v = std::round(r / q);  // half away from zero
    return static_cast<int>(std::clamp(v, static_cast<double>(-bound), static_cast<double>(bound)));
}

QuantizedResidualField quantize_truncate(const ResidualField& field, double q, int bound) {
    if (!(q > 0.0) || bound < 1 || bound > std::numeric_limits<std::int8_t>::max()) {
        throw Error(ErrorCode::InvalidArgument, "quantizer needs q > 0 and 1 <= T <= 127");
    }
    QuantizedResidualField out{field.width, field.height, bound, {}};
    out.data.resize(field.data.size());
    std::transform(field.data.begin(), field.data.end(), out.data.begin(),
                   [&](double r) { return static_cast<std::int8_t>(quantize_sample(r, q, bound)); });
    return out;
}

}  // namespace forgeseek
