#pragma once

#include "forgeseek/classifier.hpp"
#include "forgeseek/copymove.hpp"
#include "forgeseek/feature_table.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace forgeseek {

/// A detector's call on one image.
struct Verdict {
    std::string image_id;
    Label splice = Label::Pristine;
    double splice_margin = 0.0;  // SVM decision value; recorded, not used in fusion
    Label copymove = Label::Pristine;
    Label fused = Label::Pristine;
    std::optional<std::filesystem::path> map_path;

    friend bool operator==(const Verdict&, const Verdict&) = default;
};

/// Fake when either detector says fake.
constexpr Label fuse(Label splice, Label copymove) noexcept {
    return splice == Label::Fake || copymove == Label::Fake ? Label::Fake : Label::Pristine;
}

Verdict make_verdict(std::string image_id, Label splice, double margin, Label copymove);

/// `id,splice,margin,copymove,fused` with a trailing `map` column when any
/// verdict carries a map path.
void write_verdicts(std::span<const Verdict> verdicts, const std::filesystem::path& path);
std::vector<Verdict> read_verdicts(const std::filesystem::path& path);

struct Confusion {
    std::size_t true_fake = 0;
    std::size_t false_pristine = 0;  // fakes called pristine
    std::size_t false_fake = 0;      // pristine called fake
    std::size_t true_pristine = 0;

    double tpr() const noexcept;
    double tnr() const noexcept;
    double score() const noexcept { return (tpr() + tnr()) / 2.0; }
};

/// Which decision of a verdict to evaluate.
enum class VerdictField { Splice, CopyMove, Fused };

struct Truth {
    std::string image_id;
    Label label;
};

/// Confusion of `field` against ground truth, joined on image id. Every
/// verdict must have a truth row; truth rows without verdicts are ignored.
Confusion evaluate(std::span<const Verdict> verdicts, std::span<const Truth> truth, VerdictField field);

struct DetectOptions {
    PatchMatchConfig patchmatch;
    CopyMoveConfig copymove;
    bool copymove_enabled = true;
};

/// Both detectors on one image. `copymove_out`, when given, receives the
/// copy-move result (map and regions).
Verdict detect_image(std::string image_id, const GrayImage& img, const SvmModel& model, const DetectOptions& opts,
                     CopyMoveResult* copymove_out = nullptr);

}  // namespace forgeseek
