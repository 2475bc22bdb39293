#include "forgeseek/copymove.hpp"

#include "forgeseek/error.hpp"
#include "forgeseek/rng.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace forgeseek {

void PatchMatchConfig::validate() const {
    if (patch_size < 3 || patch_size % 2 == 0) {
        throw Error(ErrorCode::InvalidArgument, "patch size must be odd and >= 3");
    }
    if (iterations < 1) {
        throw Error(ErrorCode::InvalidArgument, "patchmatch needs at least one iteration");
    }
    if (min_offset <= patch_size / 2) {
        throw Error(ErrorCode::InvalidArgument, "min offset must exceed the patch radius");
    }
    if (!(search_alpha > 0.0 && search_alpha < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "search alpha must lie in (0, 1)");
    }
}

void CopyMoveConfig::validate() const {
    if (median_window < 1 || median_window % 2 == 0) {
        throw Error(ErrorCode::InvalidArgument, "median window must be odd and positive");
    }
    if (homogeneity_tol < 0 || open_radius < 0 || min_region_area < 0) {
        throw Error(ErrorCode::InvalidArgument, "copy-move thresholds must be non-negative");
    }
    if (rotation_step < 1 || 360 % rotation_step != 0) {
        throw Error(ErrorCode::InvalidArgument, "rotation step must divide 360");
    }
}

namespace {

/// Patch anchors of one image with cached inverse norms and validity. Pixels
/// are kept as float so the hot loop stays in cache.
class PatchSpace {
public:
    PatchSpace(const GrayImage& img, const BinaryMask* valid, int patch)
        : patch_(patch), w_(img.width()), aw_(img.width() - patch + 1), ah_(img.height() - patch + 1) {
        pixels_.assign(img.data().begin(), img.data().end());
        inv_norm_.assign(static_cast<std::size_t>(aw_) * ah_, 0.0f);
        ok_.assign(inv_norm_.size(), 1);
        if (valid) {
            // Integral image of invalid pixels.
            const int w = img.width();
            std::vector<int> integ(static_cast<std::size_t>(w + 1) * (img.height() + 1), 0);
            for (int y = 0; y < img.height(); ++y) {
                for (int x = 0; x < w; ++x) {
                    integ[(y + 1) * (w + 1) + x + 1] = integ[y * (w + 1) + x + 1] + integ[(y + 1) * (w + 1) + x] -
                                                        integ[y * (w + 1) + x] + (valid->at(x, y) ? 0 : 1);
                }
            }
            for (int y = 0; y < ah_; ++y) {
                for (int x = 0; x < aw_; ++x) {
                    const int bad = integ[(y + patch) * (w + 1) + x + patch] - integ[y * (w + 1) + x + patch] -
                                    integ[(y + patch) * (w + 1) + x] + integ[y * (w + 1) + x];
                    ok_[index(x, y)] = bad == 0;
                }
            }
        }
        for (int y = 0; y < ah_; ++y) {
            for (int x = 0; x < aw_; ++x) {
                if (!ok_[index(x, y)]) continue;
                double ss = 0.0;
                for (int r = 0; r < patch; ++r) {
                    for (int c = 0; c < patch; ++c) ss += img.at(x + c, y + r) * img.at(x + c, y + r);
                }
                inv_norm_[index(x, y)] = ss > 0.0 ? static_cast<float>(1.0 / std::sqrt(ss)) : 0.0f;
            }
        }
    }

    int anchors_w() const { return aw_; }
    int anchors_h() const { return ah_; }
    int patch() const { return patch_; }
    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * aw_ + x; }
    bool inside(int x, int y) const { return x >= 0 && y >= 0 && x < aw_ && y < ah_; }
    bool usable(int x, int y) const { return inside(x, y) && ok_[index(x, y)]; }
    float inv_norm(int x, int y) const { return inv_norm_[index(x, y)]; }
    const float* pixel_row(int x, int y) const { return pixels_.data() + static_cast<std::size_t>(y) * w_ + x; }

private:
    int patch_;
    int w_;
    int aw_;
    int ah_;
    std::vector<float> pixels_;
    std::vector<float> inv_norm_;
    std::vector<std::uint8_t> ok_;
};

// Unit-norm squared distance; stops accumulating once `cutoff` is exceeded.
double distance(const PatchSpace& a, int ax, int ay, const PatchSpace& b, int bx, int by,
                double cutoff = std::numeric_limits<double>::infinity()) {
    const float ia = a.inv_norm(ax, ay);
    const float ib = b.inv_norm(bx, by);
    const int p = a.patch();
    float acc = 0.0f;
    for (int r = 0; r < p; ++r) {
        const float* ra = a.pixel_row(ax, ay + r);
        const float* rb = b.pixel_row(bx, by + r);
        for (int c = 0; c < p; ++c) {
            const float d = ra[c] * ia - rb[c] * ib;
            acc += d * d;
        }
        if (acc > cutoff) return acc;
    }
    return acc;
}

class Matcher {
public:
    Matcher(const PatchSpace& src, const PatchSpace& dst, const RotationFrame& frame, const PatchMatchConfig& cfg)
        : src_(src), dst_(dst), cfg_(cfg), min_sq_(static_cast<double>(cfg.min_offset) * cfg.min_offset),
          self_(&src == &dst) {
        const double r = cfg.patch_size / 2;
        self_x_.resize(static_cast<std::size_t>(src.anchors_w()) * src.anchors_h());
        self_y_.resize(self_x_.size());
        for (int y = 0; y < src.anchors_h(); ++y) {
            for (int x = 0; x < src.anchors_w(); ++x) {
                const Point2 c = frame.to_dst({x + r, y + r});
                self_x_[src.index(x, y)] = c.x - r;
                self_y_[src.index(x, y)] = c.y - r;
            }
        }
        for (int y = 0; y < dst.anchors_h(); ++y) {
            for (int x = 0; x < dst.anchors_w(); ++x) {
                if (dst.usable(x, y)) usable_.push_back({x, y});
            }
        }
        if (usable_.empty()) {
            throw Error(ErrorCode::DegenerateInput, "target image has no complete patches");
        }
    }

    bool allowed(int ax, int ay, int bx, int by) const {
        if (!dst_.usable(bx, by)) return false;
        const std::size_t i = src_.index(ax, ay);
        const double ex = bx - self_x_[i];
        const double ey = by - self_y_[i];
        return ex * ex + ey * ey >= min_sq_;
    }

    OffsetField run() {
        const int w = src_.anchors_w();
        const int h = src_.anchors_h();
        OffsetField f;
        f.width = w;
        f.height = h;
        f.patch_size = cfg_.patch_size;
        f.dx.assign(static_cast<std::size_t>(w) * h, 0);
        f.dy.assign(f.dx.size(), 0);
        f.dist.assign(f.dx.size(), 0.0);
        Rng rng(mix_seed(cfg_.seed));

        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const auto [bx, by] = random_target(x, y, rng);
                const std::size_t i = f.index(x, y);
                f.dx[i] = bx - x;
                f.dy[i] = by - y;
                f.dist[i] = distance(src_, x, y, dst_, bx, by);
            }
        }

        const double max_radius = std::max(dst_.anchors_w(), dst_.anchors_h());
        for (int it = 0; it < cfg_.iterations; ++it) {
            const bool forward = it % 2 == 0;
            const int step = forward ? 1 : -1;
            const int y0 = forward ? 0 : h - 1;
            const int x0 = forward ? 0 : w - 1;
            for (int y = y0; y >= 0 && y < h; y += step) {
                for (int x = x0; x >= 0 && x < w; x += step) {
                    const std::size_t i = f.index(x, y);
                    // Propagation from the already-visited neighbours.
                    const int nx = x - step;
                    const int ny = y - step;
                    if (nx >= 0 && nx < w) {
                        const std::size_t n = f.index(nx, y);
                        try_candidate(f, i, x, y, x + f.dx[n], y + f.dy[n]);
                    }
                    if (ny >= 0 && ny < h) {
                        const std::size_t n = f.index(x, ny);
                        try_candidate(f, i, x, y, x + f.dx[n], y + f.dy[n]);
                    }
                    // Random search around the current best, shrinking radius.
                    for (double radius = max_radius; radius >= 1.0; radius *= cfg_.search_alpha) {
                        const int r = static_cast<int>(radius);
                        const int cx = x + f.dx[i];
                        const int cy = y + f.dy[i];
                        const int bx = std::clamp(cx + uniform_int(rng, -r, r), 0, dst_.anchors_w() - 1);
                        const int by = std::clamp(cy + uniform_int(rng, -r, r), 0, dst_.anchors_h() - 1);
                        try_candidate(f, i, x, y, bx, by);
                    }
                }
            }
            if (self_) enrich(f);
        }
        return f;
    }

private:
    struct Anchor {
        int x;
        int y;
    };

    Anchor random_target(int x, int y, Rng& rng) const {
        for (int attempt = 0; attempt < 256; ++attempt) {
            const Anchor c = usable_[uniform_below(rng, usable_.size())];
            if (allowed(x, y, c.x, c.y)) return c;
        }
        const std::size_t start = uniform_below(rng, usable_.size());
        for (std::size_t k = 0; k < usable_.size(); ++k) {
            const Anchor c = usable_[(start + k) % usable_.size()];
            if (allowed(x, y, c.x, c.y)) return c;
        }
        throw Error(ErrorCode::DegenerateInput, "no admissible match outside the minimum offset");
    }

    // Inverse enrichment: when matching an image against itself, a match
    // a -> b suggests b -> a.
    void enrich(OffsetField& f) const {
        for (int y = 0; y < f.height; ++y) {
            for (int x = 0; x < f.width; ++x) {
                const std::size_t i = f.index(x, y);
                const int bx = x + f.dx[i];
                const int by = y + f.dy[i];
                if (f.dist[i] < f.dist[f.index(bx, by)]) try_candidate(f, f.index(bx, by), bx, by, x, y);
            }
        }
    }

    void try_candidate(OffsetField& f, std::size_t i, int x, int y, int bx, int by) const {
        if (bx == x + f.dx[i] && by == y + f.dy[i]) return;
        if (!allowed(x, y, bx, by)) return;
        const double d = distance(src_, x, y, dst_, bx, by, f.dist[i]);
        if (d < f.dist[i]) {
            f.dist[i] = d;
            f.dx[i] = bx - x;
            f.dy[i] = by - y;
        }
    }

    const PatchSpace& src_;
    const PatchSpace& dst_;
    const PatchMatchConfig& cfg_;
    double min_sq_;
    bool self_;
    std::vector<double> self_x_;
    std::vector<double> self_y_;
    std::vector<Anchor> usable_;
};

void require_size(const GrayImage& img, const PatchMatchConfig& cfg) {
    const int need = cfg.patch_size + 2 * cfg.min_offset;
    if (img.width() < need || img.height() < need) {
        throw Error(ErrorCode::DegenerateInput,
                    "image must be at least " + std::to_string(need) + " pixels in each dimension");
    }
}

}  // namespace

double patch_distance(const GrayImage& a, int ax, int ay, const GrayImage& b, int bx, int by, int patch_size) {
    auto fits = [&](const GrayImage& img, int x, int y) {
        return x >= 0 && y >= 0 && x + patch_size <= img.width() && y + patch_size <= img.height();
    };
    if (patch_size < 1 || !fits(a, ax, ay) || !fits(b, bx, by)) {
        throw Error(ErrorCode::InvalidArgument, "patch anchor outside the image");
    }
    double na = 0.0, nb = 0.0;
    for (int r = 0; r < patch_size; ++r) {
        for (int c = 0; c < patch_size; ++c) {
            na += a.at(ax + c, ay + r) * a.at(ax + c, ay + r);
            nb += b.at(bx + c, by + r) * b.at(bx + c, by + r);
        }
    }
    const double ia = na > 0.0 ? 1.0 / std::sqrt(na) : 0.0;
    const double ib = nb > 0.0 ? 1.0 / std::sqrt(nb) : 0.0;
    double acc = 0.0;
    for (int r = 0; r < patch_size; ++r) {
        for (int c = 0; c < patch_size; ++c) {
            const double d = a.at(ax + c, ay + r) * ia - b.at(bx + c, by + r) * ib;
            acc += d * d;
        }
    }
    return acc;
}

OffsetField patchmatch(const GrayImage& img, const PatchMatchConfig& cfg) {
    const BinaryMask all_valid(img.width(), img.height(), true);
    const RotationFrame identity(img.width(), img.height(), 0.0);
    return patchmatch(img, MatchTarget{img, all_valid, identity}, cfg);
}

OffsetField patchmatch(const GrayImage& source, const MatchTarget& target, const PatchMatchConfig& cfg) {
    cfg.validate();
    require_size(source, cfg);
    if (target.frame.src_width() != source.width() || target.frame.src_height() != source.height() ||
        target.frame.dst_width() != target.image.width() || target.frame.dst_height() != target.image.height() ||
        target.valid.width() != target.image.width() || target.valid.height() != target.image.height()) {
        throw Error(ErrorCode::InconsistentDims, "match target does not fit the rotation frame");
    }
    const PatchSpace src(source, nullptr, cfg.patch_size);
    const bool same = &source == &target.image;
    std::optional<PatchSpace> dst_storage;
    if (!same) dst_storage.emplace(target.image, &target.valid, cfg.patch_size);
    const PatchSpace& dst = same ? src : *dst_storage;
    return Matcher(src, dst, target.frame, cfg).run();
}

// ---------------------------------------------------------------------------
// Segmentation
// ---------------------------------------------------------------------------

namespace {

// Window median (element of rank n/2) over the window clipped to the field,
// by a sliding histogram along each row.
std::vector<int> median_filter(const std::vector<int>& v, int w, int h, int window) {
    const int r = window / 2;
    const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
    const int lo = *lo_it;
    std::vector<int> hist(static_cast<std::size_t>(*hi_it - lo + 1));
    std::vector<int> out(v.size());
    auto at = [&](int x, int y) { return v[static_cast<std::size_t>(y) * w + x] - lo; };
    for (int y = 0; y < h; ++y) {
        const int y0 = std::max(0, y - r);
        const int y1 = std::min(h - 1, y + r);
        std::fill(hist.begin(), hist.end(), 0);
        int count = 0;
        int med = 0;
        int below = 0;  // elements < med
        auto column = [&](int x, int sign) {
            for (int yy = y0; yy <= y1; ++yy) {
                const int b = at(x, yy);
                hist[static_cast<std::size_t>(b)] += sign;
                count += sign;
                if (b < med) below += sign;
            }
        };
        for (int x = 0; x <= std::min(w - 1, r); ++x) column(x, 1);
        for (int x = 0; x < w; ++x) {
            if (x > 0) {
                if (x + r < w) column(x + r, 1);
                if (x - r - 1 >= 0) column(x - r - 1, -1);
            }
            const int k = count / 2;
            while (below > k) {
                --med;
                below -= hist[static_cast<std::size_t>(med)];
            }
            while (below + hist[static_cast<std::size_t>(med)] <= k) {
                below += hist[static_cast<std::size_t>(med)];
                ++med;
            }
            out[static_cast<std::size_t>(y) * w + x] = med + lo;
        }
    }
    return out;
}

int median_of(std::vector<int> v) {
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

}  // namespace

BinaryMask segment_offsets(const OffsetField& field, const CopyMoveConfig& cfg) {
    cfg.validate();
    const auto mdx = median_filter(field.dx, field.width, field.height, cfg.median_window);
    const auto mdy = median_filter(field.dy, field.width, field.height, cfg.median_window);
    BinaryMask out(field.width, field.height);
    for (std::size_t i = 0; i < field.dx.size(); ++i) {
        out.data()[i] = std::abs(field.dx[i] - mdx[i]) <= cfg.homogeneity_tol &&
                        std::abs(field.dy[i] - mdy[i]) <= cfg.homogeneity_tol;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Candidate elimination
// ---------------------------------------------------------------------------

namespace {

cv::Mat to_mat(const BinaryMask& m) {
    cv::Mat out(m.height(), m.width(), CV_8UC1);
    std::copy(m.data().begin(), m.data().end(), out.ptr<std::uint8_t>(0));
    return out;
}

cv::Mat disk(int radius) {
    cv::Mat k(2 * radius + 1, 2 * radius + 1, CV_8UC1, cv::Scalar(0));
    for (int y = -radius; y <= radius; ++y) {
        for (int x = -radius; x <= radius; ++x) {
            if (x * x + y * y <= radius * radius) k.at<std::uint8_t>(y + radius, x + radius) = 1;
        }
    }
    return k;
}

void mark_patch(BinaryMask& m, int x, int y, int p) {
    for (int r = 0; r < p; ++r) {
        for (int c = 0; c < p; ++c) m.set(x + c, y + r, true);
    }
}

}  // namespace

CopyMoveResult eliminate_candidates(const GrayImage& img, const OffsetField& field, const BinaryMask& candidates,
                                    const CopyMoveConfig& cfg) {
    const BinaryMask all_valid(img.width(), img.height(), true);
    const RotationFrame identity(img.width(), img.height(), 0.0);
    return eliminate_candidates(img, MatchTarget{img, all_valid, identity}, field, candidates, cfg);
}

CopyMoveResult eliminate_candidates(const GrayImage& img, const MatchTarget& target, const OffsetField& field,
                                    const BinaryMask& candidates, const CopyMoveConfig& cfg) {
    cfg.validate();
    const int p = field.patch_size;
    if (field.width != img.width() - p + 1 || field.height != img.height() - p + 1 ||
        candidates.width() != field.width || candidates.height() != field.height) {
        throw Error(ErrorCode::InconsistentDims, "offset field, candidates and image disagree in size");
    }
    const int w = field.width;
    const int h = field.height;

    // (1) Flat and saturated patches.
    cv::Mat integ, integ_sq;
    {
        cv::Mat src(img.height(), img.width(), CV_64FC1, const_cast<double*>(img.data().data()));
        cv::integral(src, integ, integ_sq, CV_64F, CV_64F);
    }
    const double n_pix = static_cast<double>(p) * p;
    BinaryMask kept(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!candidates.at(x, y)) continue;
            auto box = [&](const cv::Mat& m) {
                return m.at<double>(y + p, x + p) - m.at<double>(y, x + p) - m.at<double>(y + p, x) + m.at<double>(y, x);
            };
            const double mean = box(integ) / n_pix;
            const double var = std::max(0.0, box(integ_sq) / n_pix - mean * mean);
            const bool saturated = var < 1e-9 && (mean < 1e-9 || mean > 255.0 - 1e-9);
            if (var < cfg.flat_var_threshold || saturated) continue;
            kept.set(x, y, true);
        }
    }

    // (2) Opening, (3) 8-connected components.
    cv::Mat mask = to_mat(kept);
    if (cfg.open_radius > 0) {
        cv::morphologyEx(mask, mask, cv::MORPH_OPEN, disk(cfg.open_radius));
    }
    cv::Mat labels;
    const int n_labels = cv::connectedComponents(mask, labels, 8, CV_32S);
    std::vector<std::vector<int>> members(static_cast<std::size_t>(std::max(n_labels, 1)));
    for (int y = 0; y < h; ++y) {
        const int* row = labels.ptr<int>(y);
        for (int x = 0; x < w; ++x) {
            if (row[x] > 0) members[static_cast<std::size_t>(row[x])].push_back(y * w + x);
        }
    }

    const PatchSpace src(img, nullptr, p);
    const bool same = &img == &target.image;
    std::optional<PatchSpace> dst_storage;
    if (!same) dst_storage.emplace(target.image, &target.valid, p);
    const PatchSpace& dst = same ? src : *dst_storage;

    CopyMoveResult result;
    result.map = BinaryMask(img.width(), img.height());
    for (int label = 1; label < n_labels; ++label) {
        const auto& comp = members[static_cast<std::size_t>(label)];
        // (4) Size over the patch footprint.
        BinaryMask footprint(img.width(), img.height());
        for (int a : comp) mark_patch(footprint, a % w, a / w, p);
        if (footprint.count() < static_cast<std::size_t>(cfg.min_region_area)) continue;

        // (5) Mirror consistency under the dominant offset.
        std::vector<int> dxs, dys;
        double dist_sum = 0.0;
        for (int a : comp) {
            dxs.push_back(field.dx[static_cast<std::size_t>(a)]);
            dys.push_back(field.dy[static_cast<std::size_t>(a)]);
            dist_sum += field.dist[static_cast<std::size_t>(a)];
        }
        const int odx = median_of(std::move(dxs));
        const int ody = median_of(std::move(dys));
        std::size_t inside = 0, matched = 0;
        std::vector<int> landed;
        for (int a : comp) {
            const int ax = a % w;
            const int ay = a / w;
            const int bx = ax + odx;
            const int by = ay + ody;
            if (!dst.usable(bx, by)) continue;
            ++inside;
            landed.push_back(by * dst.anchors_w() + bx);
            if (distance(src, ax, ay, dst, bx, by, cfg.max_match_distance) <= cfg.max_match_distance) ++matched;
        }
        const double n = static_cast<double>(comp.size());
        if (inside < cfg.mirror_inside_fraction * n) continue;
        if (matched < cfg.match_back_fraction * static_cast<double>(inside)) continue;

        // (6) Accept. The partner of an accepted region (the other half of
        // the same pair) lands inside that region's mirror; it widens the map
        // but is not reported separately.
        BinaryMask mirrored(target.image.width(), target.image.height());
        for (int t : landed) mark_patch(mirrored, t % dst.anchors_w(), t / dst.anchors_w(), p);
        const BinaryMask back = unrotate_mask(mirrored, target.frame);
        std::size_t covered = 0;
        for (std::size_t k = 0; k < footprint.data().size(); ++k) {
            covered += footprint.data()[k] && result.map.data()[k];
        }
        for (std::size_t k = 0; k < footprint.data().size(); ++k) {
            if (footprint.data()[k] || back.data()[k]) result.map.data()[k] = 1;
        }
        if (2 * covered >= footprint.count()) continue;
        result.regions.push_back({std::move(footprint), odx, ody, dist_sum / n});
    }
    result.is_fake = !result.regions.empty();
    return result;
}

// ---------------------------------------------------------------------------
// Rotation sweep
// ---------------------------------------------------------------------------

CopyMoveResult detect_copymove(const GrayImage& img, const PatchMatchConfig& pm, const CopyMoveConfig& cm) {
    pm.validate();
    cm.validate();
    {
        const OffsetField field = patchmatch(img, pm);
        CopyMoveResult res = eliminate_candidates(img, field, segment_offsets(field, cm), cm);
        if (res.is_fake || !cm.rotations_enabled) {
            if (res.is_fake) res.rotation_found = 0.0;
            return res;
        }
    }
    for (int step = 1; step * cm.rotation_step < 360; ++step) {
        const double theta = step * cm.rotation_step;
        const RotatedImage rot = rotate_image(img, theta);
        const RotationFrame frame(img.width(), img.height(), theta);
        const MatchTarget target{rot.image, rot.valid, frame};
        PatchMatchConfig cfg = pm;
        cfg.seed = mix_seed(pm.seed, static_cast<std::uint64_t>(step));
        const OffsetField field = patchmatch(img, target, cfg);
        CopyMoveResult res = eliminate_candidates(img, target, field, segment_offsets(field, cm), cm);
        if (res.is_fake) {
            res.rotation_found = theta;
            return res;
        }
    }
    return CopyMoveResult{false, BinaryMask(img.width(), img.height()), {}, std::nullopt};
}

}  // namespace forgeseek
