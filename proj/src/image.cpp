#include "forgeseek/image.hpp"

#include "forgeseek/error.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>

namespace forgeseek {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::FileNotFound: return "file not found";
        case ErrorCode::UnsupportedFormat: return "unsupported format";
        case ErrorCode::CorruptStream: return "corrupt stream";
        case ErrorCode::IoFailure: return "i/o failure";
        case ErrorCode::DegenerateInput: return "degenerate input";
        case ErrorCode::InvalidArgument: return "invalid argument";
        case ErrorCode::SingleClass: return "single-class data";
        case ErrorCode::InconsistentDims: return "inconsistent dimensions";
        case ErrorCode::Selection: return "selection error";
        case ErrorCode::ClassTooSmall: return "class too small";
        case ErrorCode::ParseFailure: return "parse failure";
    }
    return "unknown error";
}

GrayImage::GrayImage(int width, int height, double fill)
    : GrayImage(width, height,
                std::vector<double>(static_cast<std::size_t>(std::max(width, 0)) *
                                        static_cast<std::size_t>(std::max(height, 0)),
                                    fill)) {}

GrayImage::GrayImage(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
    if (width < 1 || height < 1) {
        throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
    }
    if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw Error(ErrorCode::InvalidArgument, "image data length does not match dimensions");
    }
    for (double v : data_) {
        if (!std::isfinite(v) || v < 0.0 || v > 255.0) {
            throw Error(ErrorCode::InvalidArgument, "image sample outside [0, 255]");
        }
    }
}

BinaryMask::BinaryMask(int width, int height, bool fill)
    : width_(width), height_(height),
      data_(static_cast<std::size_t>(std::max(width, 0)) * static_cast<std::size_t>(std::max(height, 0)),
            fill ? 1 : 0) {
    if (width < 1 || height < 1) {
        throw Error(ErrorCode::InvalidArgument, "mask dimensions must be positive");
    }
}

std::size_t BinaryMask::count() const noexcept {
    return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

namespace {

enum class Container { Png, Jpeg, Unknown };

Container sniff(const std::vector<unsigned char>& bytes) {
    static constexpr std::array<unsigned char, 8> png_magic = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (bytes.size() >= png_magic.size() && std::equal(png_magic.begin(), png_magic.end(), bytes.begin())) {
        return Container::Png;
    }
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) {
        return Container::Jpeg;
    }
    return Container::Unknown;
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        throw Error(ErrorCode::FileNotFound, "no such file: " + path.string());
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoFailure, "cannot open: " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Decodes PNG/JPEG into an 8-bit matrix with 1, 3 or 4 channels.
cv::Mat decode(const std::filesystem::path& path, bool png_only) {
    auto bytes = read_bytes(path);
    const Container kind = sniff(bytes);
    if (kind == Container::Unknown || (png_only && kind != Container::Png)) {
        throw Error(ErrorCode::UnsupportedFormat, "not a supported image: " + path.string());
    }
    cv::Mat raw;
    try {
        raw = cv::imdecode(bytes, cv::IMREAD_UNCHANGED);
    } catch (const cv::Exception&) {
        raw.release();
    }
    if (raw.empty()) {
        throw Error(ErrorCode::CorruptStream, "cannot decode: " + path.string());
    }
    if (raw.depth() == CV_16U) {
        raw.convertTo(raw, CV_8U, 1.0 / 257.0);
    } else if (raw.depth() != CV_8U) {
        throw Error(ErrorCode::UnsupportedFormat, "unsupported sample depth: " + path.string());
    }
    return raw;
}

// Luminance of pixel (x, y) in a decoded 8-bit matrix (OpenCV stores BGR).
double luminance_at(const cv::Mat& m, int x, int y) {
    const unsigned char* px = m.ptr<unsigned char>(y) + static_cast<std::ptrdiff_t>(x) * m.channels();
    switch (m.channels()) {
        case 1:
        case 2: return px[0];
        default: return to_grayscale(px[2], px[1], px[0]);
    }
}

void encode_to(const cv::Mat& m, const std::filesystem::path& path) {
    std::vector<unsigned char> buf;
    if (!cv::imencode(".png", m, buf)) {
        throw Error(ErrorCode::IoFailure, "png encoding failed: " + path.string());
    }
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) {
        throw Error(ErrorCode::IoFailure, "cannot write: " + path.string());
    }
}

cv::Mat to_u8(const GrayImage& img) {
    cv::Mat m(img.height(), img.width(), CV_8UC1);
    for (int y = 0; y < img.height(); ++y) {
        auto* row = m.ptr<unsigned char>(y);
        for (int x = 0; x < img.width(); ++x) {
            row[x] = static_cast<unsigned char>(std::clamp(std::round(img.at(x, y)), 0.0, 255.0));
        }
    }
    return m;
}

GrayImage from_u8(const cv::Mat& m) {
    GrayImage img(m.cols, m.rows);
    for (int y = 0; y < m.rows; ++y) {
        for (int x = 0; x < m.cols; ++x) {
            img.at(x, y) = luminance_at(m, x, y);
        }
    }
    return img;
}

}  // namespace

GrayImage load_image(const std::filesystem::path& path) {
    return from_u8(decode(path, false));
}

void write_image(const GrayImage& img, const std::filesystem::path& path) {
    encode_to(to_u8(img), path);
}

BinaryMask read_mask(const std::filesystem::path& path) {
    const cv::Mat m = decode(path, true);
    BinaryMask mask(m.cols, m.rows);
    for (int y = 0; y < m.rows; ++y) {
        for (int x = 0; x < m.cols; ++x) {
            mask.set(x, y, luminance_at(m, x, y) > 127.0);
        }
    }
    return mask;
}

void write_mask(const BinaryMask& mask, const std::filesystem::path& path) {
    cv::Mat m(mask.height(), mask.width(), CV_8UC1);
    for (int y = 0; y < mask.height(); ++y) {
        auto* row = m.ptr<unsigned char>(y);
        for (int x = 0; x < mask.width(); ++x) {
            row[x] = mask.at(x, y) ? 255 : 0;
        }
    }
    encode_to(m, path);
}

GrayImage jpeg_roundtrip(const GrayImage& img, int quality) {
    if (quality < 1 || quality > 100) {
        throw Error(ErrorCode::InvalidArgument, "jpeg quality must be in [1, 100]");
    }
    std::vector<unsigned char> buf;
    const std::vector<int> params = {cv::IMWRITE_JPEG_QUALITY, quality};
    if (!cv::imencode(".jpg", to_u8(img), buf, params)) {
        throw Error(ErrorCode::IoFailure, "jpeg encoding failed");
    }
    const cv::Mat back = cv::imdecode(buf, cv::IMREAD_GRAYSCALE);
    if (back.empty()) {
        throw Error(ErrorCode::CorruptStream, "jpeg decoding failed");
    }
    return from_u8(back);
}

// ---------------------------------------------------------------------------
// Rotation
// ---------------------------------------------------------------------------

namespace {

// Smallest canvas extent >= `exact` with the parity of `ref`, so the canvas
// center sits an integer number of pixels away from the source center.
int canvas_extent(double exact, int ref) {
    int n = static_cast<int>(std::ceil(exact - 1e-9));
    if ((n - ref) % 2 != 0) {
        ++n;
    }
    return std::max(n, 1);
}

}  // namespace

RotationFrame::RotationFrame(int src_width, int src_height, double theta_deg)
    : src_w_(src_width), src_h_(src_height) {
    double t = std::fmod(theta_deg, 360.0);
    if (t < 0.0) {
        t += 360.0;
    }
    const double quarter = t / 90.0;
    const double nearest = std::round(quarter);
    const bool right_angle = std::abs(quarter - nearest) < 1e-12;
    if (right_angle) {
        const int q = static_cast<int>(nearest) % 4;
        t = 90.0 * q;
        static constexpr int cos_tab[4] = {1, 0, -1, 0};
        static constexpr int sin_tab[4] = {0, 1, 0, -1};
        cos_ = cos_tab[q];
        sin_ = sin_tab[q];
        dst_w_ = (q % 2 == 0) ? src_w_ : src_h_;
        dst_h_ = (q % 2 == 0) ? src_h_ : src_w_;
    } else {
        const double rad = t * std::numbers::pi / 180.0;
        cos_ = std::cos(rad);
        sin_ = std::sin(rad);
        const double ac = std::abs(cos_);
        const double as = std::abs(sin_);
        dst_w_ = canvas_extent(src_w_ * ac + src_h_ * as, src_w_);
        dst_h_ = canvas_extent(src_w_ * as + src_h_ * ac, src_h_);
    }
    theta_ = t;
    identity_ = right_angle && t == 0.0;
    scx_ = (src_w_ - 1) / 2.0;
    scy_ = (src_h_ - 1) / 2.0;
    dcx_ = (dst_w_ - 1) / 2.0;
    dcy_ = (dst_h_ - 1) / 2.0;
}

Point2 RotationFrame::to_dst(Point2 p) const noexcept {
    const double x = p.x - scx_;
    const double y = p.y - scy_;
    return {cos_ * x + sin_ * y + dcx_, -sin_ * x + cos_ * y + dcy_};
}

Point2 RotationFrame::to_src(Point2 p) const noexcept {
    const double x = p.x - dcx_;
    const double y = p.y - dcy_;
    return {cos_ * x - sin_ * y + scx_, sin_ * x + cos_ * y + scy_};
}

RotatedImage rotate_image(const GrayImage& img, double theta_deg) {
    const RotationFrame frame(img.width(), img.height(), theta_deg);
    if (frame.is_identity()) {
        return {img, BinaryMask(img.width(), img.height(), true)};
    }
    constexpr double eps = 1e-9;
    const int w = img.width();
    const int h = img.height();
    GrayImage out(frame.dst_width(), frame.dst_height());
    BinaryMask valid(frame.dst_width(), frame.dst_height());
    for (int y = 0; y < frame.dst_height(); ++y) {
        for (int x = 0; x < frame.dst_width(); ++x) {
            Point2 s = frame.to_src({static_cast<double>(x), static_cast<double>(y)});
            if (s.x < -eps || s.y < -eps || s.x > w - 1 + eps || s.y > h - 1 + eps) {
                continue;
            }
            s.x = std::clamp(s.x, 0.0, static_cast<double>(w - 1));
            s.y = std::clamp(s.y, 0.0, static_cast<double>(h - 1));
            int x0 = static_cast<int>(std::floor(s.x));
            int y0 = static_cast<int>(std::floor(s.y));
            double fx = s.x - x0;
            double fy = s.y - y0;
            // Snap near-integer coordinates so exact permutations stay exact.
            if (fx < eps) fx = 0.0;
            if (fy < eps) fy = 0.0;
            if (fx > 1.0 - eps) { fx = 0.0; x0 = std::min(x0 + 1, w - 1); }
            if (fy > 1.0 - eps) { fy = 0.0; y0 = std::min(y0 + 1, h - 1); }
            const int x1 = std::min(x0 + 1, w - 1);
            const int y1 = std::min(y0 + 1, h - 1);
            const double top = (1.0 - fx) * img.at(x0, y0) + fx * img.at(x1, y0);
            const double bottom = (1.0 - fx) * img.at(x0, y1) + fx * img.at(x1, y1);
            out.at(x, y) = std::clamp((1.0 - fy) * top + fy * bottom, 0.0, 255.0);
            valid.set(x, y, true);
        }
    }
    return {std::move(out), std::move(valid)};
}

BinaryMask unrotate_mask(const BinaryMask& dst_mask, const RotationFrame& frame) {
    if (dst_mask.width() != frame.dst_width() || dst_mask.height() != frame.dst_height()) {
        throw Error(ErrorCode::InconsistentDims, "mask does not match rotation canvas");
    }
    BinaryMask out(frame.src_width(), frame.src_height());
    for (int y = 0; y < frame.src_height(); ++y) {
        for (int x = 0; x < frame.src_width(); ++x) {
            const Point2 d = frame.to_dst({static_cast<double>(x), static_cast<double>(y)});
            const int dx = static_cast<int>(std::lround(d.x));
            const int dy = static_cast<int>(std::lround(d.y));
            if (dx >= 0 && dy >= 0 && dx < frame.dst_width() && dy < frame.dst_height()) {
                out.set(x, y, dst_mask.at(dx, dy));
            }
        }
    }
    return out;
}

}  // namespace forgeseek
