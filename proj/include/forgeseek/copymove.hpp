#pragma once

#include "forgeseek/image.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace forgeseek {

struct PatchMatchConfig {
    int patch_size = 7;
    int iterations = 5;
    int min_offset = 8;
    double search_alpha = 0.5;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Dense nearest-neighbour field over patch anchors (top-left corners) of the
/// source image. Offsets point into the target image's anchor grid, which is
/// the source itself except during the rotation sweep.
struct OffsetField {
    int width = 0;
    int height = 0;
    int patch_size = 7;
    std::vector<int> dx;
    std::vector<int> dy;
    std::vector<double> dist;

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }

    friend bool operator==(const OffsetField&, const OffsetField&) = default;
};

/// Target of a cross-image match: an image, the pixels that carry real data,
/// and the frame relating source coordinates to target coordinates (used to
/// exclude each patch's own position).
struct MatchTarget {
    const GrayImage& image;
    const BinaryMask& valid;
    const RotationFrame& frame;
};

/// Unit-norm patch distance: || a/|a| - b/|b| ||^2, with all-zero patches
/// mapped to the zero vector.
double patch_distance(const GrayImage& a, int ax, int ay, const GrayImage& b, int bx, int by, int patch_size);

OffsetField patchmatch(const GrayImage& img, const PatchMatchConfig& cfg);
OffsetField patchmatch(const GrayImage& source, const MatchTarget& target, const PatchMatchConfig& cfg);

struct CopyMoveConfig {
    int median_window = 7;
    int homogeneity_tol = 1;
    double flat_var_threshold = 1.0;
    int min_region_area = 1200;  // pixels covered by the component's patches
    int open_radius = 3;
    int rotation_step = 15;
    bool rotations_enabled = true;
    double max_match_distance = 5e-3;  // unit-norm patch distance under the dominant offset
    double match_back_fraction = 0.5;
    double mirror_inside_fraction = 0.8;

    void validate() const;
};

/// Anchors whose offset stays within homogeneity_tol of the median-filtered
/// field in both components.
BinaryMask segment_offsets(const OffsetField& field, const CopyMoveConfig& cfg);

struct CopyMoveRegion {
    BinaryMask mask;  // source-image pixels covered by the component's patches
    int dx = 0;
    int dy = 0;
    double mean_distance = 0.0;
};

struct CopyMoveResult {
    bool is_fake = false;
    BinaryMask map;
    std::vector<CopyMoveRegion> regions;
    std::optional<double> rotation_found;
};

CopyMoveResult eliminate_candidates(const GrayImage& img, const OffsetField& field, const BinaryMask& candidates,
                                    const CopyMoveConfig& cfg);
CopyMoveResult eliminate_candidates(const GrayImage& img, const MatchTarget& target, const OffsetField& field,
                                    const BinaryMask& candidates, const CopyMoveConfig& cfg);

/// Full pipeline with the rotation sweep; the first angle that yields a
/// region ends the sweep.
CopyMoveResult detect_copymove(const GrayImage& img, const PatchMatchConfig& pm, const CopyMoveConfig& cm);

}  // namespace forgeseek
