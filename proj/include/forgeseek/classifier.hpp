#pragma once

#include "forgeseek/feature_table.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace forgeseek {

/// Linear SVM on z-scored features. Decision f(x) = <weights, (x - mean) / spread> + bias;
/// positive means fake.
struct SvmModel {
    std::vector<ModelId> selection;
    std::vector<double> mean;
    std::vector<double> spread;  // > 0; constant dimensions carry spread 1 and weight 0
    std::vector<double> weights;
    double bias = 0.0;
    double C = 1.0;

    double decision(std::span<const double> x) const;
    Label predict(std::span<const double> x) const { return decision(x) > 0.0 ? Label::Fake : Label::Pristine; }

    friend bool operator==(const SvmModel&, const SvmModel&) = default;
};

struct SvmOptions {
    double tolerance = 1e-6;         // KKT violation gap at termination
    std::size_t max_iterations = 0;  // 0: max(10^7, 100 n)
};

/// Soft-margin linear SVM solved in the dual by SMO with second-order
/// working-set selection.
SvmModel train_svm(const LabeledSet& data, double C, const SvmOptions& opts = {});

inline constexpr double kDefaultCGrid[] = {0.01, 0.1, 1.0, 10.0};

/// Picks C from `grid` by stratified inner cross-validation on `data`
/// (balanced score, ties to the smaller C), then trains on all of `data`.
SvmModel train_svm_grid(const LabeledSet& data, std::span<const double> grid, std::uint64_t seed,
                        int inner_folds = 3, const SvmOptions& opts = {});

/// (tpr + tnr) / 2.
constexpr double score(double tpr, double tnr) noexcept { return (tpr + tnr) / 2.0; }

struct RocPoint {
    double fpr;
    double tpr;
};

struct RocResult {
    double auc = 0.0;
    std::vector<RocPoint> curve;  // from (0,0) to (1,1)
};

/// ROC by sweeping the threshold over all decision values; tied values move
/// together, which gives ties half credit in the trapezoidal area.
RocResult roc_from_scores(std::span<const double> scores, std::span<const Label> labels);
RocResult roc_auc(const SvmModel& model, const LabeledSet& data);

struct EvalReport {
    double score = 0.0;
    double auc = 0.0;
    double tpr = 0.0;
    double tnr = 0.0;
    int repetitions = 0;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

struct CvOptions {
    std::optional<double> C;  // nullopt: nested grid search per training fold
    std::vector<double> c_grid{std::begin(kDefaultCGrid), std::end(kDefaultCGrid)};
    int inner_folds = 3;
    int reps = 18;
    std::uint64_t seed = 0;
    int threads = 1;
    SvmOptions svm;
};

/// Repeated stratified 5/6 - 1/6 hold-out. Averages tpr, tnr and AUC over
/// repetitions; score is computed from the averaged rates.
EvalReport cross_validate(const LabeledSet& data, const CvOptions& opts);
EvalReport cross_validate(const FeatureTable& table, std::span<const ModelId> selection, const CvOptions& opts);

enum class Criterion { Score, Auc };

struct RankedModel {
    ModelId id;
    EvalReport report;
};

struct SelectionReport {
    Criterion criterion;
    std::vector<RankedModel> ranking;  // all table models, best first
    std::vector<EvalReport> merged;    // merged[i]: merge of the top i+1 models
    std::vector<ModelId> selection;    // top k
};

SelectionReport select_models(const FeatureTable& table, int k, Criterion criterion, const CvOptions& opts);

/// JSON model document; see docs/formats.md.
std::string model_to_json(const SvmModel& model);
SvmModel model_from_json(const std::string& text);
void save_model(const SvmModel& model, const std::filesystem::path& path);
SvmModel load_model(const std::filesystem::path& path);

}  // namespace forgeseek
