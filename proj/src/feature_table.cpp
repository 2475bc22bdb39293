#include "forgeseek/feature_table.hpp"

#include "forgeseek/error.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace forgeseek {

std::string_view label_name(Label label) noexcept {
    return label == Label::Fake ? "fake" : "pristine";
}

std::optional<Label> parse_label(std::string_view text) noexcept {
    if (text == "fake") return Label::Fake;
    if (text == "pristine") return Label::Pristine;
    return std::nullopt;
}

std::size_t LabeledSet::count(Label label) const noexcept {
    return static_cast<std::size_t>(
        std::count_if(items.begin(), items.end(), [label](const LabeledItem& it) { return it.label == label; }));
}

LabeledSet FeatureTable::labeled(std::span<const ModelId> selection) const {
    LabeledSet set;
    set.selection.assign(selection.begin(), selection.end());
    set.items.reserve(rows.size());
    for (const auto& row : rows) {
        set.items.push_back({row.image_id, row.label, merge_features(row.blocks, selection).values});
    }
    return set;
}

namespace {

std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

double parse_double(std::string_view text, const std::filesystem::path& path, std::size_t line_no) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw Error(ErrorCode::ParseFailure,
                    path.string() + ":" + std::to_string(line_no) + ": bad number '" + std::string(text) + "'");
    }
    return v;
}

}  // namespace

void write_feature_csv(const FeatureTable& table, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::IoFailure, "cannot write: " + path.string());
    }
    std::size_t total_dim = 0;
    for (ModelId id : table.models) {
        total_dim += feature_dim(id);
    }
    out << "image_id,label";
    for (std::size_t i = 0; i < total_dim; ++i) {
        out << ",f" << i;
    }
    out << '\n';
    char buf[32];
    for (const auto& row : table.rows) {
        out << row.image_id << ',' << label_name(row.label);
        for (const auto& block : row.blocks) {
            for (double v : block.values) {
                std::snprintf(buf, sizeof buf, "%.17g", v);
                out << ',' << buf;
            }
        }
        out << '\n';
    }
    if (!out) {
        throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
    }
}

FeatureTable read_feature_csv(const std::filesystem::path& path, std::span<const ModelId> models) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::FileNotFound, "cannot open: " + path.string());
    }
    FeatureTable table;
    table.models.assign(models.begin(), models.end());
    std::vector<std::size_t> dims;
    std::size_t total_dim = 0;
    for (ModelId id : models) {
        dims.push_back(feature_dim(id));
        total_dim += dims.back();
    }

    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) {
        throw Error(ErrorCode::ParseFailure, path.string() + ": empty feature file");
    }
    ++line_no;
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "image_id" || header[1] != "label") {
        throw Error(ErrorCode::ParseFailure, path.string() + ": missing image_id,label header");
    }
    if (header.size() - 2 != total_dim) {
        throw Error(ErrorCode::InconsistentDims,
                    path.string() + ": " + std::to_string(header.size() - 2) +
                        " feature columns do not match the model layout (" + std::to_string(total_dim) + ")");
    }
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw Error(ErrorCode::ParseFailure, path.string() + ":" + std::to_string(line_no) + ": wrong column count");
        }
        const auto label = parse_label(cells[1]);
        if (!label) {
            throw Error(ErrorCode::ParseFailure, path.string() + ":" + std::to_string(line_no) + ": bad label");
        }
        FeatureRow row{std::string(cells[0]), *label, {}};
        std::size_t col = 2;
        for (std::size_t m = 0; m < models.size(); ++m) {
            FeatureVector block{models[m], {}};
            block.values.reserve(dims[m]);
            for (std::size_t k = 0; k < dims[m]; ++k) {
                block.values.push_back(parse_double(cells[col++], path, line_no));
            }
            row.blocks.push_back(std::move(block));
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace forgeseek
