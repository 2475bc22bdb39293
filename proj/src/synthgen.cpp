#include "forgeseek/synthgen.hpp"

#include "forgeseek/error.hpp"
#include "forgeseek/parallel.hpp"

#include <json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace forgeseek {

void CorpusSpec::validate() const {
    if (n_pristine < 0 || n_copymove < 0 || n_splice < 0) {
        throw Error(ErrorCode::InvalidArgument, "corpus counts must be non-negative");
    }
    if (block_min < 8 || block_max < block_min) {
        throw Error(ErrorCode::InvalidArgument, "block size range must satisfy 8 <= min <= max");
    }
    // A rotated copy samples a disk of radius block/sqrt(2); source and target
    // must both fit side by side with min_offset between them.
    const int diag = static_cast<int>(std::ceil(block_max * std::numbers::sqrt2));
    if (diag + block_max + min_offset + 2 > image_size) {
        throw Error(ErrorCode::InvalidArgument, "blocks do not fit the image with the required margin");
    }
    if (!(rotation_prob >= 0.0 && rotation_prob <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "rotation probability must lie in [0, 1]");
    }
    if (max_rotation < 0 || max_rotation >= 360) {
        throw Error(ErrorCode::InvalidArgument, "max rotation must lie in [0, 360)");
    }
    if (source_quality < 0 || source_quality > 100 || paste_quality < 0 || paste_quality > 100) {
        throw Error(ErrorCode::InvalidArgument, "jpeg qualities must lie in [0, 100]");
    }
}

CorpusSpec corpus_spec_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        CorpusSpec s;
        s.n_pristine = j.value("n_pristine", s.n_pristine);
        s.n_copymove = j.value("n_copymove", s.n_copymove);
        s.n_splice = j.value("n_splice", s.n_splice);
        s.image_size = j.value("image_size", s.image_size);
        if (j.contains("block_size_range")) {
            s.block_min = j.at("block_size_range").at(0).get<int>();
            s.block_max = j.at("block_size_range").at(1).get<int>();
        }
        s.rotation_prob = j.value("rotation_prob", s.rotation_prob);
        s.max_rotation = j.value("max_rotation", s.max_rotation);
        if (j.contains("jpeg_quality_pair")) {
            s.source_quality = j.at("jpeg_quality_pair").at(0).get<int>();
            s.paste_quality = j.at("jpeg_quality_pair").at(1).get<int>();
        }
        s.min_offset = j.value("min_offset", s.min_offset);
        s.seed = j.value("seed", s.seed);
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseFailure, std::string("malformed corpus spec: ") + e.what());
    }
}

CorpusSpec load_corpus_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::FileNotFound, "cannot open: " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return corpus_spec_from_json(ss.str());
}

std::string_view kind_name(ItemKind kind) noexcept {
    switch (kind) {
        case ItemKind::Pristine: return "pristine";
        case ItemKind::CopyMove: return "copymove";
        case ItemKind::Splice: return "splice";
    }
    return "pristine";
}

namespace {

std::optional<ItemKind> parse_kind(std::string_view s) {
    if (s == "pristine") return ItemKind::Pristine;
    if (s == "copymove") return ItemKind::CopyMove;
    if (s == "splice") return ItemKind::Splice;
    return std::nullopt;
}

GrayImage from_mat(const cv::Mat& m) {
    GrayImage img(m.cols, m.rows);
    for (int y = 0; y < m.rows; ++y) {
        const double* row = m.ptr<double>(y);
        for (int x = 0; x < m.cols; ++x) {
            img.at(x, y) = std::clamp(std::round(row[x]), 0.0, 255.0);
        }
    }
    return img;
}

GrayImage rounded(GrayImage img) {
    for (double& v : img.data()) v = std::clamp(std::round(v), 0.0, 255.0);
    return img;
}

GrayImage camera(const GrayImage& img, int quality) {
    return quality > 0 ? jpeg_roundtrip(img, quality) : img;
}

double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

std::string pos(int x, int y) {
    return std::to_string(x) + ":" + std::to_string(y);
}

// Bilinear sample with edge clamping.
double sample(const GrayImage& img, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
    y = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, img.width() - 1);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    return (1 - fy) * ((1 - fx) * img.at(x0, y0) + fx * img.at(x1, y0)) +
           fy * ((1 - fx) * img.at(x0, y1) + fx * img.at(x1, y1));
}

CorpusItem make_copymove(const CorpusSpec& spec, Rng& rng, CorpusItem item) {
    const int n = spec.image_size;
    const int b = uniform_int(rng, spec.block_min, spec.block_max);
    int rotation = 0;
    if (spec.max_rotation >= 15 && uniform01(rng) < spec.rotation_prob) {
        rotation = 15 * uniform_int(rng, 1, spec.max_rotation / 15);
        if (uniform01(rng) < 0.5) rotation = 360 - rotation;
    }
    // The copy is a b x b square; its source is that square rotated about the
    // source center, contained in a disk of radius b / sqrt(2).
    const double radius = b / std::numbers::sqrt2;
    const int reach = static_cast<int>(std::ceil(radius)) + 1;
    const double half = (b - 1) / 2.0;
    int sx = 0, sy = 0, tx = 0, ty = 0;
    for (int attempt = 0;; ++attempt) {
        const double scx = uniform_int(rng, reach, n - 1 - reach);
        const double scy = uniform_int(rng, reach, n - 1 - reach);
        tx = uniform_int(rng, 0, n - b);
        ty = uniform_int(rng, 0, n - b);
        const double tcx = tx + half;
        const double tcy = ty + half;
        // Keep the source disk and the target square apart by min_offset.
        const double gap_x = std::abs(scx - tcx) - radius - half;
        const double gap_y = std::abs(scy - tcy) - radius - half;
        if (std::max(gap_x, gap_y) >= spec.min_offset) {
            sx = static_cast<int>(scx - half);
            sy = static_cast<int>(scy - half);
            break;
        }
        if (attempt > 10000) {
            throw Error(ErrorCode::InvalidArgument, "cannot place copy-move blocks; enlarge the image");
        }
    }
    GrayImage img = item.base;
    BinaryMask mask(n, n);
    const double scx = sx + half;
    const double scy = sy + half;
    const double tcx = tx + half;
    const double tcy = ty + half;
    const double rad = rotation * std::numbers::pi / 180.0;
    const double c = std::cos(rad);
    const double s = std::sin(rad);
    for (int y = 0; y < b; ++y) {
        for (int x = 0; x < b; ++x) {
            const int px = tx + x;
            const int py = ty + y;
            if (rotation == 0) {
                img.at(px, py) = item.base.at(sx + x, sy + y);
            } else {
                // Inverse rotation of the target offset into the source frame.
                const double ux = px - tcx;
                const double uy = py - tcy;
                img.at(px, py) = sample(item.base, c * ux - s * uy + scx, s * ux + c * uy + scy);
            }
            mask.set(px, py, true);
        }
    }
    // Source footprint: pixels whose forward image falls inside the target square.
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const double vx = x - scx;
            const double vy = y - scy;
            const double fx = c * vx + s * vy;
            const double fy = -s * vx + c * vy;
            if (std::abs(fx) <= half + 0.5 && std::abs(fy) <= half + 0.5) mask.set(x, y, true);
        }
    }
    item.image = rounded(std::move(img));
    item.mask = std::move(mask);
    item.block = b;
    item.rotation = rotation;
    item.params = "block=" + std::to_string(b) + ";src=" + pos(sx, sy) + ";dst=" + pos(tx, ty) +
                  ";rot=" + std::to_string(rotation);
    return item;
}

CorpusItem make_splice(const CorpusSpec& spec, Rng& rng, CorpusItem item) {
    const int n = spec.image_size;
    const int b = uniform_int(rng, spec.block_min, spec.block_max);
    const GrayImage donor = camera(synth_texture(n, n, rng), spec.paste_quality);
    const int dx = uniform_int(rng, 0, n - b);
    const int dy = uniform_int(rng, 0, n - b);
    const int tx = uniform_int(rng, 0, n - b);
    const int ty = uniform_int(rng, 0, n - b);
    GrayImage img = item.base;
    BinaryMask mask(n, n);
    for (int y = 0; y < b; ++y) {
        for (int x = 0; x < b; ++x) {
            img.at(tx + x, ty + y) = donor.at(dx + x, dy + y);
            mask.set(tx + x, ty + y, true);
        }
    }
    item.image = std::move(img);
    item.mask = std::move(mask);
    item.block = b;
    item.params = "block=" + std::to_string(b) + ";donor=" + pos(dx, dy) + ";dst=" + pos(tx, ty) +
                  ";q=" + std::to_string(spec.source_quality) + "/" + std::to_string(spec.paste_quality);
    return item;
}

}  // namespace

GrayImage synth_texture(int width, int height, Rng& rng) {
    struct Octave {
        double sigma;
        double lo;
        double hi;
    };
    static constexpr Octave octaves[] = {
        {0.8, 3.0, 8.0}, {1.6, 4.0, 10.0}, {3.2, 6.0, 14.0}, {6.4, 8.0, 18.0}, {12.8, 10.0, 24.0},
    };
    cv::Mat acc(height, width, CV_64FC1, cv::Scalar(uniform(rng, 90.0, 165.0)));
    cv::Mat noise(height, width, CV_64FC1);
    for (const auto& o : octaves) {
        for (int y = 0; y < height; ++y) {
            double* row = noise.ptr<double>(y);
            for (int x = 0; x < width; ++x) row[x] = standard_normal(rng);
        }
        cv::Mat smooth;
        cv::GaussianBlur(noise, smooth, cv::Size(0, 0), o.sigma, o.sigma, cv::BORDER_REFLECT101);
        cv::Scalar mean, stddev;
        cv::meanStdDev(smooth, mean, stddev);
        const double amp = uniform(rng, o.lo, o.hi);
        acc += (smooth - mean[0]) * (amp / std::max(stddev[0], 1e-12));
    }
    return from_mat(acc);
}

CorpusItem generate_item(const CorpusSpec& spec, std::size_t index) {
    spec.validate();
    const auto n_pr = static_cast<std::size_t>(spec.n_pristine);
    const auto n_cm = static_cast<std::size_t>(spec.n_copymove);
    const auto n_sp = static_cast<std::size_t>(spec.n_splice);
    if (index >= n_pr + n_cm + n_sp) {
        throw Error(ErrorCode::InvalidArgument, "corpus item index out of range");
    }
    Rng rng(mix_seed(spec.seed, index));
    char id[32];
    std::snprintf(id, sizeof id, "img%05zu", index);

    CorpusItem item;
    item.id = id;
    item.base = camera(synth_texture(spec.image_size, spec.image_size, rng), spec.source_quality);
    if (index < n_pr) {
        item.kind = ItemKind::Pristine;
        item.image = item.base;
        item.mask = BinaryMask(spec.image_size, spec.image_size);
        item.params = "q=" + std::to_string(spec.source_quality);
        return item;
    }
    if (index < n_pr + n_cm) {
        item.kind = ItemKind::CopyMove;
        return make_copymove(spec, rng, std::move(item));
    }
    item.kind = ItemKind::Splice;
    return make_splice(spec, rng, std::move(item));
}

std::vector<ManifestEntry> generate_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir,
                                           int threads) {
    spec.validate();
    const std::size_t total = static_cast<std::size_t>(spec.n_pristine) + spec.n_copymove + spec.n_splice;
    std::vector<ManifestEntry> entries(total);
    if (total == 0) {
        return {};
    }
    std::error_code ec;
    for (const char* sub : {"pristine", "fake", "masks"}) {
        std::filesystem::create_directories(out_dir / sub, ec);
        if (ec) {
            throw Error(ErrorCode::IoFailure, "cannot create " + (out_dir / sub).string());
        }
    }
    parallel_for(total, threads, [&](std::size_t i) {
        const CorpusItem item = generate_item(spec, i);
        const char* dir = item.label() == Label::Fake ? "fake" : "pristine";
        write_image(item.image, out_dir / dir / (item.id + ".png"));
        write_mask(item.mask, out_dir / "masks" / (item.id + ".png"));
        entries[i] = {item.id, item.label(), item.kind, item.params};
    });
    write_manifest(entries, out_dir / "manifest.csv");
    return entries;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
    std::ofstream out(path);
    out << "id,class,kind,params\n";
    for (const auto& e : entries) {
        out << e.id << ',' << label_name(e.label) << ',' << kind_name(e.kind) << ',' << e.params << '\n';
    }
    if (!out) {
        throw Error(ErrorCode::IoFailure, "cannot write: " + path.string());
    }
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::FileNotFound, "cannot open: " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || line.rfind("id,class", 0) != 0) {
        throw Error(ErrorCode::ParseFailure, path.string() + ": missing manifest header");
    }
    std::vector<ManifestEntry> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() < 2) {
            throw Error(ErrorCode::ParseFailure, path.string() + ": short manifest row");
        }
        const auto label = parse_label(cells[1]);
        if (!label) {
            throw Error(ErrorCode::ParseFailure, path.string() + ": bad class '" + cells[1] + "'");
        }
        ManifestEntry e{cells[0], *label, *label == Label::Fake ? ItemKind::Splice : ItemKind::Pristine, ""};
        if (cells.size() > 2) {
            const auto kind = parse_kind(cells[2]);
            if (!kind) throw Error(ErrorCode::ParseFailure, path.string() + ": bad kind '" + cells[2] + "'");
            e.kind = *kind;
        }
        if (cells.size() > 3) e.params = cells[3];
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace forgeseek
