#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace forgeseek {

/// Row-major luminance raster with samples in [0, 255].
class GrayImage {
public:
    GrayImage() = default;
    GrayImage(int width, int height, double fill = 0.0);
    GrayImage(int width, int height, std::vector<double> data);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool empty() const noexcept { return data_.empty(); }

    double at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    double& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

/// Row-major boolean raster; true marks forged / duplicated / valid pixels
/// depending on context.
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int width, int height, bool fill = false);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }

    bool at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x] != 0; }
    void set(int x, int y, bool v) { data_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }

    std::span<const std::uint8_t> data() const noexcept { return data_; }
    std::span<std::uint8_t> data() noexcept { return data_; }

    std::size_t count() const noexcept;

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> data_;
};

/// BT.601 luma.
constexpr double to_grayscale(double r, double g, double b) noexcept {
    return 0.299 * r + 0.587 * g + 0.114 * b;
}

GrayImage load_image(const std::filesystem::path& path);

/// Writes an 8-bit grayscale PNG; samples are rounded and clamped to [0, 255].
void write_image(const GrayImage& img, const std::filesystem::path& path);

BinaryMask read_mask(const std::filesystem::path& path);
void write_mask(const BinaryMask& mask, const std::filesystem::path& path);

/// Encodes `img` as baseline JPEG at `quality` (1..100) and decodes it back.
GrayImage jpeg_roundtrip(const GrayImage& img, int quality);

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// Geometry of a rotation about the image center onto an enlarged canvas.
/// Positive angles rotate counter-clockwise as displayed (y axis down).
/// Multiples of 90 degrees use exact trigonometry so they reduce to sample
/// permutations.
class RotationFrame {
public:
    RotationFrame(int src_width, int src_height, double theta_deg);

    int src_width() const noexcept { return src_w_; }
    int src_height() const noexcept { return src_h_; }
    int dst_width() const noexcept { return dst_w_; }
    int dst_height() const noexcept { return dst_h_; }
    double theta() const noexcept { return theta_; }
    bool is_identity() const noexcept { return identity_; }

    Point2 to_dst(Point2 src) const noexcept;
    Point2 to_src(Point2 dst) const noexcept;

private:
    int src_w_, src_h_, dst_w_, dst_h_;
    double theta_;
    double cos_, sin_;
    double scx_, scy_, dcx_, dcy_;
    bool identity_;
};

struct RotatedImage {
    GrayImage image;
    BinaryMask valid;  // false where the canvas lies outside the source frame
};

/// Bilinear rotation about the center; the canvas grows to hold the whole
/// rotated frame. Angles outside [0, 360) are wrapped.
RotatedImage rotate_image(const GrayImage& img, double theta_deg);

/// Resamples a mask living on a rotated canvas back onto the source frame
/// (nearest neighbour).
BinaryMask unrotate_mask(const BinaryMask& dst_mask, const RotationFrame& frame);

}  // namespace forgeseek
