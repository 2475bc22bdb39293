#include "forgeseek/fusion.hpp"

#include "forgeseek/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace forgeseek {

Verdict make_verdict(std::string image_id, Label splice, double margin, Label copymove) {
    return {std::move(image_id), splice, margin, copymove, fuse(splice, copymove), std::nullopt};
}

void write_verdicts(std::span<const Verdict> verdicts, const std::filesystem::path& path) {
    bool with_maps = false;
    for (const auto& v : verdicts) with_maps = with_maps || v.map_path.has_value();
    std::ofstream out(path);
    out << "id,splice,margin,copymove,fused" << (with_maps ? ",map" : "") << '\n';
    char margin[64];
    for (const auto& v : verdicts) {
        std::snprintf(margin, sizeof margin, "%.17g", v.splice_margin);
        out << v.image_id << ',' << label_name(v.splice) << ',' << margin << ',' << label_name(v.copymove) << ','
            << label_name(v.fused);
        if (with_maps) out << ',' << (v.map_path ? v.map_path->string() : "");
        out << '\n';
    }
    if (!out) {
        throw Error(ErrorCode::IoFailure, "cannot write: " + path.string());
    }
}

std::vector<Verdict> read_verdicts(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::FileNotFound, "cannot open: " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || line.rfind("id,splice,margin,copymove,fused", 0) != 0) {
        throw Error(ErrorCode::ParseFailure, path.string() + ": missing verdict header");
    }
    auto label = [&](const std::string& s) {
        const auto l = parse_label(s);
        if (!l) throw Error(ErrorCode::ParseFailure, path.string() + ": bad label '" + s + "'");
        return *l;
    };
    std::vector<Verdict> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() < 5) {
            throw Error(ErrorCode::ParseFailure, path.string() + ": short verdict row");
        }
        Verdict v;
        v.image_id = cells[0];
        v.splice = label(cells[1]);
        const auto [ptr, ec] = std::from_chars(cells[2].data(), cells[2].data() + cells[2].size(), v.splice_margin);
        if (ec != std::errc() || ptr != cells[2].data() + cells[2].size()) {
            throw Error(ErrorCode::ParseFailure, path.string() + ": bad margin '" + cells[2] + "'");
        }
        v.copymove = label(cells[3]);
        v.fused = label(cells[4]);
        if (cells.size() > 5 && !cells[5].empty()) v.map_path = cells[5];
        out.push_back(std::move(v));
    }
    return out;
}

double Confusion::tpr() const noexcept {
    const auto n = true_fake + false_pristine;
    return n == 0 ? 0.0 : static_cast<double>(true_fake) / static_cast<double>(n);
}

double Confusion::tnr() const noexcept {
    const auto n = true_pristine + false_fake;
    return n == 0 ? 0.0 : static_cast<double>(true_pristine) / static_cast<double>(n);
}

Confusion evaluate(std::span<const Verdict> verdicts, std::span<const Truth> truth, VerdictField field) {
    std::unordered_map<std::string, Label> by_id;
    for (const auto& t : truth) by_id.emplace(t.image_id, t.label);
    Confusion c;
    for (const auto& v : verdicts) {
        const auto it = by_id.find(v.image_id);
        if (it == by_id.end()) {
            throw Error(ErrorCode::InvalidArgument, "no ground truth for " + v.image_id);
        }
        const Label call = field == VerdictField::Splice     ? v.splice
                           : field == VerdictField::CopyMove ? v.copymove
                                                             : v.fused;
        if (it->second == Label::Fake) {
            (call == Label::Fake ? c.true_fake : c.false_pristine)++;
        } else {
            (call == Label::Fake ? c.false_fake : c.true_pristine)++;
        }
    }
    return c;
}

Verdict detect_image(std::string image_id, const GrayImage& img, const SvmModel& model, const DetectOptions& opts,
                     CopyMoveResult* copymove_out) {
    std::vector<ResidualModel> models;
    for (ModelId id : model.selection) models.push_back(bank_model(id));
    const auto features = extract_features(img, models);
    const auto merged = merge_features(features, model.selection);
    const double margin = model.decision(merged.values);
    const Label splice = margin > 0.0 ? Label::Fake : Label::Pristine;
    Label copymove = Label::Pristine;
    if (opts.copymove_enabled) {
        CopyMoveResult cm = detect_copymove(img, opts.patchmatch, opts.copymove);
        copymove = cm.is_fake ? Label::Fake : Label::Pristine;
        if (copymove_out) *copymove_out = std::move(cm);
    }
    return make_verdict(std::move(image_id), splice, margin, copymove);
}

}  // namespace forgeseek
