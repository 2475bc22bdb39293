#include "forgeseek/classifier.hpp"

#include "forgeseek/error.hpp"
#include "forgeseek/parallel.hpp"
#include "forgeseek/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace forgeseek {

double SvmModel::decision(std::span<const double> x) const {
    if (x.size() != weights.size()) {
        throw Error(ErrorCode::InconsistentDims, "feature dimension does not match the model");
    }
    double f = bias;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (weights[k] != 0.0) {
            f += weights[k] * (x[k] - mean[k]) / spread[k];
        }
    }
    return f;
}

namespace {

// ---------------------------------------------------------------------------
// Standardization and Gram matrix over a subset of items
// ---------------------------------------------------------------------------

struct Scaling {
    std::vector<double> mean;
    std::vector<double> spread;
    std::vector<bool> active;
};

Scaling fit_scaling(const LabeledSet& data, std::span<const std::size_t> rows) {
    const std::size_t d = data.dim();
    Scaling s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0), std::vector<bool>(d, false)};
    const double n = static_cast<double>(rows.size());
    for (std::size_t r : rows) {
        const auto& f = data.items[r].features;
        for (std::size_t k = 0; k < d; ++k) s.mean[k] += f[k];
    }
    for (double& m : s.mean) m /= n;
    std::vector<double> var(d, 0.0);
    for (std::size_t r : rows) {
        const auto& f = data.items[r].features;
        for (std::size_t k = 0; k < d; ++k) {
            const double dv = f[k] - s.mean[k];
            var[k] += dv * dv;
        }
    }
    for (std::size_t k = 0; k < d; ++k) {
        const double sd = std::sqrt(var[k] / n);
        // Rounding in the mean leaves ~1e-17 spread on constant columns.
        if (sd > 1e-12 * std::abs(s.mean[k]) && sd > 0.0) {
            s.spread[k] = sd;
            s.active[k] = true;
        }
    }
    return s;
}

struct Problem {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> z;     // n x d standardized rows
    std::vector<double> gram;  // n x n
    std::vector<int> y;        // +1 fake, -1 pristine

    const double* row(std::size_t i) const { return z.data() + i * d; }
    double k(std::size_t i, std::size_t j) const { return gram[i * n + j]; }
};

Problem build_problem(const LabeledSet& data, std::span<const std::size_t> rows, const Scaling& s) {
    Problem p;
    p.n = rows.size();
    p.d = data.dim();
    p.z.assign(p.n * p.d, 0.0);
    p.y.resize(p.n);
    for (std::size_t i = 0; i < p.n; ++i) {
        const auto& item = data.items[rows[i]];
        p.y[i] = item.label == Label::Fake ? 1 : -1;
        double* zi = p.z.data() + i * p.d;
        for (std::size_t k = 0; k < p.d; ++k) {
            if (s.active[k]) zi[k] = (item.features[k] - s.mean[k]) / s.spread[k];
        }
    }
    p.gram.assign(p.n * p.n, 0.0);
    for (std::size_t i = 0; i < p.n; ++i) {
        const double* zi = p.row(i);
        for (std::size_t j = i; j < p.n; ++j) {
            const double* zj = p.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < p.d; ++k) acc += zi[k] * zj[k];
            p.gram[i * p.n + j] = acc;
            p.gram[j * p.n + i] = acc;
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// SMO on a subset of the problem's rows
// ---------------------------------------------------------------------------

struct DualSolution {
    std::vector<double> alpha;  // aligned with the subset
    double rho = 0.0;           // decision = sum alpha_i y_i K(i, x) - rho
};

DualSolution smo(const Problem& p, std::span<const std::size_t> subset, double C, const SvmOptions& opts) {
    constexpr double tau = 1e-12;
    const std::size_t m = subset.size();
    std::vector<double> alpha(m, 0.0);
    std::vector<double> grad(m, -1.0);
    std::vector<int> y(m);
    std::vector<double> qd(m);
    for (std::size_t a = 0; a < m; ++a) {
        y[a] = p.y[subset[a]];
        qd[a] = p.k(subset[a], subset[a]);
    }
    auto q = [&](std::size_t a, std::size_t b) { return y[a] * y[b] * p.k(subset[a], subset[b]); };

    const std::size_t max_iter =
        opts.max_iterations ? opts.max_iterations : std::max<std::size_t>(10'000'000, 100 * m);
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        // Maximal violating i, then second-order choice of j.
        double gmax = -std::numeric_limits<double>::infinity();
        std::ptrdiff_t i = -1;
        for (std::size_t t = 0; t < m; ++t) {
            if (y[t] == 1) {
                if (alpha[t] < C && -grad[t] >= gmax) { gmax = -grad[t]; i = static_cast<std::ptrdiff_t>(t); }
            } else if (alpha[t] > 0.0 && grad[t] >= gmax) {
                gmax = grad[t];
                i = static_cast<std::ptrdiff_t>(t);
            }
        }
        if (i < 0) break;
        const auto ii = static_cast<std::size_t>(i);
        double gmax2 = -std::numeric_limits<double>::infinity();
        double best_obj = std::numeric_limits<double>::infinity();
        std::ptrdiff_t j = -1;
        for (std::size_t t = 0; t < m; ++t) {
            double grad_diff;
            if (y[t] == 1) {
                if (!(alpha[t] > 0.0)) continue;
                grad_diff = gmax + grad[t];
                gmax2 = std::max(gmax2, grad[t]);
            } else {
                if (!(alpha[t] < C)) continue;
                grad_diff = gmax - grad[t];
                gmax2 = std::max(gmax2, -grad[t]);
            }
            if (grad_diff > 0.0) {
                double quad = qd[ii] + qd[t] - 2.0 * y[ii] * q(ii, t);
                if (quad <= 0.0) quad = tau;
                const double obj = -(grad_diff * grad_diff) / quad;
                if (obj <= best_obj) { best_obj = obj; j = static_cast<std::ptrdiff_t>(t); }
            }
        }
        if (j < 0 || gmax + gmax2 < opts.tolerance) break;
        const auto jj = static_cast<std::size_t>(j);

        const double old_ai = alpha[ii];
        const double old_aj = alpha[jj];
        double& ai = alpha[ii];
        double& aj = alpha[jj];
        if (y[ii] != y[jj]) {
            double quad = qd[ii] + qd[jj] + 2.0 * q(ii, jj);
            if (quad <= 0.0) quad = tau;
            const double delta = (-grad[ii] - grad[jj]) / quad;
            const double diff = ai - aj;
            ai += delta;
            aj += delta;
            if (diff > 0.0) {
                if (aj < 0.0) { aj = 0.0; ai = diff; }
            } else if (ai < 0.0) {
                ai = 0.0;
                aj = -diff;
            }
            if (diff > 0.0) {
                if (ai > C) { ai = C; aj = C - diff; }
            } else if (aj > C) {
                aj = C;
                ai = C + diff;
            }
        } else {
            double quad = qd[ii] + qd[jj] - 2.0 * q(ii, jj);
            if (quad <= 0.0) quad = tau;
            const double delta = (grad[ii] - grad[jj]) / quad;
            const double sum = ai + aj;
            ai -= delta;
            aj += delta;
            if (sum > C) {
                if (ai > C) { ai = C; aj = sum - C; }
            } else if (aj < 0.0) {
                aj = 0.0;
                ai = sum;
            }
            if (sum > C) {
                if (aj > C) { aj = C; ai = sum - C; }
            } else if (ai < 0.0) {
                ai = 0.0;
                aj = sum;
            }
        }
        const double dai = ai - old_ai;
        const double daj = aj - old_aj;
        for (std::size_t t = 0; t < m; ++t) {
            grad[t] += q(ii, t) * dai + q(jj, t) * daj;
        }
    }

    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < m; ++t) {
        const double yg = y[t] * grad[t];
        if (alpha[t] >= C) {
            if (y[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else if (alpha[t] <= 0.0) {
            if (y[t] == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    DualSolution sol;
    sol.rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
    sol.alpha = std::move(alpha);
    return sol;
}

double dual_decision(const Problem& p, std::span<const std::size_t> subset, const DualSolution& sol,
                     std::size_t row) {
    double f = -sol.rho;
    for (std::size_t a = 0; a < subset.size(); ++a) {
        if (sol.alpha[a] != 0.0) f += sol.alpha[a] * p.y[subset[a]] * p.k(subset[a], row);
    }
    return f;
}

SvmModel primal_model(const LabeledSet& data, const Problem& p, const Scaling& s, const DualSolution& sol,
                      double C) {
    SvmModel model;
    model.selection = data.selection;
    model.mean = s.mean;
    model.spread = s.spread;
    model.weights.assign(p.d, 0.0);
    for (std::size_t i = 0; i < p.n; ++i) {
        if (sol.alpha[i] == 0.0) continue;
        const double coef = sol.alpha[i] * p.y[i];
        const double* zi = p.row(i);
        for (std::size_t k = 0; k < p.d; ++k) model.weights[k] += coef * zi[k];
    }
    for (std::size_t k = 0; k < p.d; ++k) {
        if (!s.active[k]) {
            model.weights[k] = 0.0;
            model.mean[k] = 0.0;
        }
    }
    model.bias = -sol.rho;
    model.C = C;
    return model;
}

void validate_training_set(const LabeledSet& data, std::span<const std::size_t> rows) {
    if (rows.empty()) {
        throw Error(ErrorCode::SingleClass, "empty training set");
    }
    const std::size_t d = data.items[rows.front()].features.size();
    bool has_fake = false;
    bool has_pristine = false;
    for (std::size_t r : rows) {
        if (data.items[r].features.size() != d) {
            throw Error(ErrorCode::InconsistentDims, "feature vectors differ in dimension");
        }
        (data.items[r].label == Label::Fake ? has_fake : has_pristine) = true;
    }
    if (!has_fake || !has_pristine) {
        throw Error(ErrorCode::SingleClass, "training data needs both pristine and fake items");
    }
}

std::vector<std::size_t> all_rows(const LabeledSet& data) {
    std::vector<std::size_t> rows(data.items.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
}

// Stratified k-fold assignment over positions [0, n) of the problem.
std::vector<int> stratified_folds(const Problem& p, int k, Rng& rng) {
    std::vector<int> fold(p.n, 0);
    for (int cls : {1, -1}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < p.n; ++i) {
            if (p.y[i] == cls) members.push_back(i);
        }
        shuffle(std::span(members), rng);
        for (std::size_t pos = 0; pos < members.size(); ++pos) {
            fold[members[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
        }
    }
    return fold;
}

// Balanced inner-CV score of each grid value; returns the best C.
double choose_c(const Problem& p, std::span<const double> grid, int folds, Rng& rng, const SvmOptions& opts) {
    if (grid.empty()) {
        throw Error(ErrorCode::InvalidArgument, "empty C grid");
    }
    std::vector<double> sorted(grid.begin(), grid.end());
    std::sort(sorted.begin(), sorted.end());
    if (sorted.size() == 1) return sorted.front();

    std::size_t n_pos = 0;
    for (int yi : p.y) n_pos += yi == 1;
    const int k = static_cast<int>(std::clamp<std::size_t>(
        std::min<std::size_t>(n_pos, p.n - n_pos), 2, static_cast<std::size_t>(std::max(folds, 2))));
    const auto fold = stratified_folds(p, k, rng);

    double best_c = sorted.front();
    double best_score = -1.0;
    for (double c : sorted) {
        std::size_t tp = 0, tn = 0, pos = 0, neg = 0;
        for (int f = 0; f < k; ++f) {
            std::vector<std::size_t> train, held;
            for (std::size_t i = 0; i < p.n; ++i) (fold[i] == f ? held : train).push_back(i);
            bool two_classes = false;
            for (std::size_t t : train) two_classes |= p.y[t] != p.y[train.front()];
            if (train.empty() || !two_classes) continue;
            const auto sol = smo(p, train, c, opts);
            for (std::size_t h : held) {
                const bool fake = dual_decision(p, train, sol, h) > 0.0;
                if (p.y[h] == 1) { ++pos; tp += fake; } else { ++neg; tn += !fake; }
            }
        }
        const double s = score(pos ? static_cast<double>(tp) / pos : 0.0, neg ? static_cast<double>(tn) / neg : 0.0);
        if (s > best_score) {
            best_score = s;
            best_c = c;
        }
    }
    return best_c;
}

SvmModel fit(const LabeledSet& data, std::span<const std::size_t> rows, std::optional<double> fixed_c,
             std::span<const double> grid, int inner_folds, std::uint64_t seed, const SvmOptions& opts) {
    validate_training_set(data, rows);
    if (fixed_c && !(*fixed_c > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "C must be positive");
    }
    const Scaling s = fit_scaling(data, rows);
    const Problem p = build_problem(data, rows, s);
    double c = 0.0;
    if (fixed_c) {
        c = *fixed_c;
    } else {
        Rng rng(mix_seed(seed, 0xC0FFEE));
        c = choose_c(p, grid, inner_folds, rng, opts);
    }
    std::vector<std::size_t> subset(p.n);
    std::iota(subset.begin(), subset.end(), std::size_t{0});
    return primal_model(data, p, s, smo(p, subset, c, opts), c);
}

}  // namespace

SvmModel train_svm(const LabeledSet& data, double C, const SvmOptions& opts) {
    const auto rows = all_rows(data);
    return fit(data, rows, C, {}, 0, 0, opts);
}

SvmModel train_svm_grid(const LabeledSet& data, std::span<const double> grid, std::uint64_t seed, int inner_folds,
                        const SvmOptions& opts) {
    const auto rows = all_rows(data);
    return fit(data, rows, std::nullopt, grid, inner_folds, seed, opts);
}

// ---------------------------------------------------------------------------
// ROC / AUC
// ---------------------------------------------------------------------------

RocResult roc_from_scores(std::span<const double> scores, std::span<const Label> labels) {
    if (scores.size() != labels.size()) {
        throw Error(ErrorCode::InconsistentDims, "scores and labels differ in length");
    }
    const std::size_t n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Label::Fake));
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw Error(ErrorCode::SingleClass, "ROC needs both pristine and fake items");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocResult roc;
    roc.curve.push_back({0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    // Twice the trapezoid area in units of (1/n_neg) x (1/n_pos); integral.
    double twice_area = 0.0;
    for (std::size_t a = 0; a < order.size();) {
        std::size_t b = a;
        const std::size_t prev_tp = tp, prev_fp = fp;
        while (b < order.size() && scores[order[b]] == scores[order[a]]) {
            (labels[order[b]] == Label::Fake ? tp : fp) += 1;
            ++b;
        }
        twice_area += static_cast<double>(fp - prev_fp) * static_cast<double>(tp + prev_tp);
        roc.curve.push_back({static_cast<double>(fp) / n_neg, static_cast<double>(tp) / n_pos});
        a = b;
    }
    roc.auc = twice_area / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
    return roc;
}

RocResult roc_auc(const SvmModel& model, const LabeledSet& data) {
    std::vector<double> scores;
    std::vector<Label> labels;
    for (const auto& item : data.items) {
        scores.push_back(model.decision(item.features));
        labels.push_back(item.label);
    }
    return roc_from_scores(scores, labels);
}

// ---------------------------------------------------------------------------
// Cross-validation and model selection
// ---------------------------------------------------------------------------

namespace {

struct RepResult {
    double tpr = 0.0;
    double tnr = 0.0;
    double auc = 0.0;
};

RepResult run_repetition(const LabeledSet& data, const CvOptions& opts, int rep) {
    Rng rng(mix_seed(opts.seed, static_cast<std::uint64_t>(rep)));
    std::vector<std::size_t> train, test;
    for (Label cls : {Label::Pristine, Label::Fake}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < data.items.size(); ++i) {
            if (data.items[i].label == cls) members.push_back(i);
        }
        shuffle(std::span(members), rng);
        const std::size_t n_train = members.size() * 5 / 6;
        train.insert(train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
        test.insert(test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
    }
    const SvmModel model = fit(data, train, opts.C, opts.c_grid, opts.inner_folds,
                               mix_seed(opts.seed ^ 0x5EEDull, static_cast<std::uint64_t>(rep)), opts.svm);
    std::vector<double> scores;
    std::vector<Label> labels;
    std::size_t tp = 0, tn = 0, pos = 0, neg = 0;
    for (std::size_t t : test) {
        const auto& item = data.items[t];
        const double f = model.decision(item.features);
        scores.push_back(f);
        labels.push_back(item.label);
        if (item.label == Label::Fake) { ++pos; tp += f > 0.0; } else { ++neg; tn += !(f > 0.0); }
    }
    return {static_cast<double>(tp) / pos, static_cast<double>(tn) / neg, roc_from_scores(scores, labels).auc};
}

}  // namespace

EvalReport cross_validate(const LabeledSet& data, const CvOptions& opts) {
    if (opts.reps < 1) {
        throw Error(ErrorCode::InvalidArgument, "repetitions must be >= 1");
    }
    if (data.count(Label::Fake) < 6 || data.count(Label::Pristine) < 6) {
        throw Error(ErrorCode::ClassTooSmall, "cross-validation needs at least 6 items per class");
    }
    std::vector<RepResult> results(static_cast<std::size_t>(opts.reps));
    parallel_for(results.size(), opts.threads,
                 [&](std::size_t r) { results[r] = run_repetition(data, opts, static_cast<int>(r)); });
    EvalReport report;
    for (const auto& r : results) {
        report.tpr += r.tpr;
        report.tnr += r.tnr;
        report.auc += r.auc;
    }
    const double n = static_cast<double>(opts.reps);
    report.tpr /= n;
    report.tnr /= n;
    report.auc /= n;
    report.score = score(report.tpr, report.tnr);
    report.repetitions = opts.reps;
    return report;
}

EvalReport cross_validate(const FeatureTable& table, std::span<const ModelId> selection, const CvOptions& opts) {
    return cross_validate(table.labeled(selection), opts);
}

SelectionReport select_models(const FeatureTable& table, int k, Criterion criterion, const CvOptions& opts) {
    if (table.models.empty()) {
        throw Error(ErrorCode::Selection, "feature table holds no models");
    }
    if (k < 1 || static_cast<std::size_t>(k) > table.models.size()) {
        throw Error(ErrorCode::InvalidArgument, "k must be between 1 and the number of models");
    }
    SelectionReport out;
    out.criterion = criterion;
    for (ModelId id : table.models) {
        const ModelId single[] = {id};
        out.ranking.push_back({id, cross_validate(table, single, opts)});
    }
    auto key = [criterion](const EvalReport& r) { return criterion == Criterion::Auc ? r.auc : r.score; };
    std::stable_sort(out.ranking.begin(), out.ranking.end(),
                     [&](const RankedModel& a, const RankedModel& b) { return key(a.report) > key(b.report); });
    for (int i = 0; i < k; ++i) {
        out.selection.push_back(out.ranking[static_cast<std::size_t>(i)].id);
        out.merged.push_back(i == 0 ? out.ranking.front().report : cross_validate(table, out.selection, opts));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model file
// ---------------------------------------------------------------------------

namespace {
constexpr const char* kModelFormat = "forgeseek-svm";
constexpr int kModelVersion = 1;
}  // namespace

std::string model_to_json(const SvmModel& model) {
    nlohmann::json j;
    j["format"] = kModelFormat;
    j["version"] = kModelVersion;
    auto& sel = j["selection"] = nlohmann::json::array();
    for (ModelId id : model.selection) sel.push_back(std::string(model_name(id)));
    j["C"] = model.C;
    j["bias"] = model.bias;
    j["scaling"] = {{"mean", model.mean}, {"spread", model.spread}};
    j["weights"] = model.weights;
    return j.dump(1) + "\n";
}

SvmModel model_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("format").get<std::string>() != kModelFormat) {
            throw Error(ErrorCode::ParseFailure, "not a forgeseek model file");
        }
        if (j.at("version").get<int>() != kModelVersion) {
            throw Error(ErrorCode::ParseFailure, "unsupported model version");
        }
        SvmModel m;
        for (const auto& name : j.at("selection")) {
            const auto id = parse_model_id(name.get<std::string>());
            if (!id) throw Error(ErrorCode::ParseFailure, "unknown model id in model file");
            m.selection.push_back(*id);
        }
        m.C = j.at("C").get<double>();
        m.bias = j.at("bias").get<double>();
        m.mean = j.at("scaling").at("mean").get<std::vector<double>>();
        m.spread = j.at("scaling").at("spread").get<std::vector<double>>();
        m.weights = j.at("weights").get<std::vector<double>>();
        std::size_t dim = 0;
        for (ModelId id : m.selection) dim += feature_dim(id);
        if (m.mean.size() != dim || m.spread.size() != dim || m.weights.size() != dim) {
            throw Error(ErrorCode::InconsistentDims, "model vectors do not match the selection dimension");
        }
        if (std::any_of(m.spread.begin(), m.spread.end(), [](double s) { return !(s > 0.0); })) {
            throw Error(ErrorCode::ParseFailure, "model spread entries must be positive");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseFailure, std::string("malformed model file: ") + e.what());
    }
}

void save_model(const SvmModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    out << model_to_json(model);
    if (!out) {
        throw Error(ErrorCode::IoFailure, "cannot write: " + path.string());
    }
}

SvmModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::FileNotFound, "cannot open: " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

}  // namespace forgeseek
