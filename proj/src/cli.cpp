#include "forgeseek/cli.hpp"

#include "forgeseek/classifier.hpp"
#include "forgeseek/copymove.hpp"
#include "forgeseek/error.hpp"
#include "forgeseek/fusion.hpp"
#include "forgeseek/parallel.hpp"
#include "forgeseek/synthgen.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace forgeseek {

namespace fs = std::filesystem;

namespace {

// Parse failures that CLI11 cannot see (bad model names, unreadable layouts).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<ModelId> parse_models(const std::string& list) {
    std::vector<ModelId> out;
    if (list == "all") {
        for (const auto& m : builtin_bank()) out.push_back(m.id);
        return out;
    }
    std::stringstream ss(list);
    std::string name;
    while (std::getline(ss, name, ',')) {
        const auto id = parse_model_id(name);
        if (!id) throw UsageError("unknown model '" + name + "'");
        if (std::find(out.begin(), out.end(), *id) != out.end()) throw UsageError("model listed twice: " + name);
        out.push_back(*id);
    }
    if (out.empty()) throw UsageError("empty model list");
    return out;
}

std::string join_models(std::span<const ModelId> ids) {
    std::string s;
    for (ModelId id : ids) {
        if (!s.empty()) s += ',';
        s += model_name(id);
    }
    return s;
}

bool is_image(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

// Files as given; directories expand to their images in sorted order.
std::vector<fs::path> collect_images(const std::vector<std::string>& inputs) {
    std::vector<fs::path> out;
    for (const auto& in : inputs) {
        const fs::path p(in);
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::recursive_directory_iterator(p)) {
                if (e.is_regular_file() && is_image(e.path())) found.push_back(e.path());
            }
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else {
            out.push_back(p);
        }
    }
    return out;
}

struct Fmt {
    char buf[64];
    explicit Fmt(double v, const char* f = "%.4f") { std::snprintf(buf, sizeof buf, f, v); }
};

std::ostream& operator<<(std::ostream& os, const Fmt& f) { return os << f.buf; }

void add_copymove_flags(CLI::App* cmd, PatchMatchConfig& pm, CopyMoveConfig& cm) {
    cmd->add_option("--patch-size", pm.patch_size, "PatchMatch patch side")->capture_default_str();
    cmd->add_option("--iterations", pm.iterations, "PatchMatch iterations")->capture_default_str();
    cmd->add_option("--min-offset", pm.min_offset, "smallest admissible match offset")->capture_default_str();
    cmd->add_option("--search-alpha", pm.search_alpha, "random search radius ratio")->capture_default_str();
    cmd->add_option("--pm-seed", pm.seed, "PatchMatch seed")->capture_default_str();
    cmd->add_option("--median-window", cm.median_window, "offset median filter side")->capture_default_str();
    cmd->add_option("--homogeneity-tol", cm.homogeneity_tol, "offset tolerance vs median")->capture_default_str();
    cmd->add_option("--flat-var", cm.flat_var_threshold, "patch variance below which a patch is flat")
        ->capture_default_str();
    cmd->add_option("--min-area", cm.min_region_area, "smallest region, pixels")->capture_default_str();
    cmd->add_option("--open-radius", cm.open_radius, "opening disk radius")->capture_default_str();
    cmd->add_option("--rotation-step", cm.rotation_step, "rotation sweep step, degrees")->capture_default_str();
    cmd->add_flag("!--no-rotations", cm.rotations_enabled, "skip the rotation sweep");
    cmd->add_option("--max-match-distance", cm.max_match_distance, "patch distance bound under the region offset")
        ->capture_default_str();
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir, int threads, std::ostream& out) {
    const CorpusSpec spec = load_corpus_spec(spec_path);
    const auto entries = generate_corpus(spec, out_dir, threads);
    std::size_t fakes = 0;
    for (const auto& e : entries) fakes += e.label == Label::Fake;
    out << "wrote " << entries.size() << " images (" << entries.size() - fakes << " pristine, " << fakes
        << " fake) to " << out_dir << '\n';
    return kExitOk;
}

int cmd_features(const std::vector<std::string>& inputs, const std::string& models_arg, const std::string& out_path,
                 const std::string& label_arg, int threads, std::ostream& out) {
    const auto models = parse_models(models_arg);
    std::optional<Label> forced;
    if (!label_arg.empty()) {
        forced = parse_label(label_arg);
        if (!forced) throw UsageError("--label must be pristine or fake");
    }
    const auto paths = collect_images(inputs);
    if (paths.empty()) throw UsageError("no images found");
    std::vector<Label> labels;
    for (const auto& p : paths) {
        if (forced) {
            labels.push_back(*forced);
            continue;
        }
        const auto l = parse_label(p.parent_path().filename().string());
        if (!l) throw UsageError("cannot infer label of " + p.string() + "; pass --label");
        labels.push_back(*l);
    }
    std::vector<ResidualModel> bank;
    for (ModelId id : models) bank.push_back(bank_model(id));
    FeatureTable table{models, std::vector<FeatureRow>(paths.size())};
    parallel_for(paths.size(), threads, [&](std::size_t i) {
        const GrayImage img = load_image(paths[i]);
        table.rows[i] = {paths[i].stem().string(), labels[i], extract_features(img, bank)};
    });
    write_feature_csv(table, out_path);
    out << "wrote " << table.rows.size() << " rows x " << table.labeled(models).dim() << " features to " << out_path
        << '\n';
    return kExitOk;
}

CvOptions cv_options(const std::optional<double>& C, int reps, std::uint64_t seed, int threads) {
    CvOptions o;
    o.C = C;
    o.reps = reps;
    o.seed = seed;
    o.threads = threads;
    return o;
}

Criterion parse_criterion(const std::string& s) {
    if (s == "score") return Criterion::Score;
    if (s == "auc") return Criterion::Auc;
    throw UsageError("--select must be score or auc");
}

int cmd_train(const std::string& csv, const std::string& layout, const std::string& out_path,
              const std::optional<double>& C, const std::string& select, int k, int reps, std::uint64_t seed,
              int threads, std::ostream& out) {
    const auto models = parse_models(layout);
    const FeatureTable table = read_feature_csv(csv, models);
    std::vector<ModelId> selection = models;
    if (!select.empty()) {
        const auto report = select_models(table, k, parse_criterion(select), cv_options(C, reps, seed, threads));
        selection = report.selection;
    }
    const LabeledSet data = table.labeled(selection);
    const SvmModel model =
        C ? train_svm(data, *C) : train_svm_grid(data, kDefaultCGrid, mix_seed(seed, 0x7261696eULL));
    save_model(model, out_path);
    out << "models " << join_models(model.selection) << ", C " << model.C << ", " << data.items.size()
        << " images -> " << out_path << '\n';
    return kExitOk;
}

int cmd_cv(const std::string& csv, const std::string& layout, const std::optional<double>& C,
           const std::string& select, int k, int reps, std::uint64_t seed, int threads, std::ostream& out) {
    const auto models = parse_models(layout);
    const FeatureTable table = read_feature_csv(csv, models);
    const Criterion crit = parse_criterion(select);
    k = std::min<int>(k, static_cast<int>(models.size()));
    const auto report = select_models(table, k, crit, cv_options(C, reps, seed, threads));
    out << "repetitions: " << reps << '\n';
    out << "selection criterion: " << select << '\n';
    out << "\nper-model\nmodel  score   auc     tpr     tnr\n";
    for (const auto& r : report.ranking) {
        char name[8];
        std::snprintf(name, sizeof name, "%-6s", std::string(model_name(r.id)).c_str());
        out << name << ' ' << Fmt(r.report.score) << "  " << Fmt(r.report.auc) << "  " << Fmt(r.report.tpr) << "  "
            << Fmt(r.report.tnr) << '\n';
    }
    out << "\nmerged\ntop  score   auc     models\n";
    for (std::size_t i = 0; i < report.merged.size(); ++i) {
        std::vector<ModelId> top;
        for (std::size_t j = 0; j <= i; ++j) top.push_back(report.ranking[j].id);
        char n[8];
        std::snprintf(n, sizeof n, "%-4zu", i + 1);
        out << n << ' ' << Fmt(report.merged[i].score) << "  " << Fmt(report.merged[i].auc) << "  "
            << join_models(top) << '\n';
    }
    return kExitOk;
}

struct CopyMoveRow {
    std::string id;
    CopyMoveResult result;
};

void write_map(const fs::path& maps_dir, const std::string& id, const BinaryMask& map) {
    write_mask(map, maps_dir / (id + ".png"));
}

int cmd_copymove(const std::vector<std::string>& inputs, const PatchMatchConfig& pm, const CopyMoveConfig& cm,
                 const std::string& out_path, const std::string& maps_dir, int threads, std::ostream& out) {
    pm.validate();
    cm.validate();
    const auto paths = collect_images(inputs);
    if (paths.empty()) throw UsageError("no images found");
    if (!maps_dir.empty()) fs::create_directories(maps_dir);
    std::vector<CopyMoveRow> rows(paths.size());
    parallel_for(paths.size(), threads, [&](std::size_t i) {
        const GrayImage img = load_image(paths[i]);
        rows[i] = {paths[i].stem().string(), detect_copymove(img, pm, cm)};
        if (!maps_dir.empty()) write_map(maps_dir, rows[i].id, rows[i].result.map);
    });
    std::ofstream file;
    std::ostream* dst = &out;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw Error(ErrorCode::IoFailure, "cannot write: " + out_path);
        dst = &file;
    }
    *dst << "id,copymove,rotation,regions,area\n";
    for (const auto& r : rows) {
        *dst << r.id << ',' << label_name(r.result.is_fake ? Label::Fake : Label::Pristine) << ',';
        if (r.result.rotation_found) *dst << *r.result.rotation_found;
        *dst << ',' << r.result.regions.size() << ',' << r.result.map.count() << '\n';
    }
    return kExitOk;
}

int cmd_detect(const std::string& model_path, const std::vector<std::string>& inputs, const DetectOptions& opts,
               const std::string& out_path, const std::string& maps_dir, int threads, std::ostream& out) {
    opts.patchmatch.validate();
    opts.copymove.validate();
    const SvmModel model = load_model(model_path);
    const auto paths = collect_images(inputs);
    if (paths.empty()) throw UsageError("no images found");
    if (!maps_dir.empty()) fs::create_directories(maps_dir);
    std::vector<Verdict> verdicts(paths.size());
    parallel_for(paths.size(), threads, [&](std::size_t i) {
        const GrayImage img = load_image(paths[i]);
        CopyMoveResult cm;
        verdicts[i] = detect_image(paths[i].stem().string(), img, model, opts, &cm);
        if (!maps_dir.empty() && opts.copymove_enabled) {
            write_map(maps_dir, verdicts[i].image_id, cm.map);
            verdicts[i].map_path = fs::path(maps_dir) / (verdicts[i].image_id + ".png");
        }
    });
    write_verdicts(verdicts, out_path);
    std::size_t fused = 0;
    for (const auto& v : verdicts) fused += v.fused == Label::Fake;
    out << verdicts.size() << " images, " << fused << " fused fake -> " << out_path << '\n';
    return kExitOk;
}

int cmd_eval(const std::string& verdict_path, const std::string& manifest_path, std::ostream& out) {
    const auto verdicts = read_verdicts(verdict_path);
    std::vector<Truth> truth;
    for (const auto& e : read_manifest(manifest_path)) truth.push_back({e.id, e.label});
    struct Row {
        const char* name;
        VerdictField field;
    };
    out << "images: " << verdicts.size() << '\n';
    out << "\ndetector  score   tpr     tnr     specificity\n";
    for (const Row r : {Row{"splice  ", VerdictField::Splice}, Row{"copymove", VerdictField::CopyMove},
                        Row{"fused   ", VerdictField::Fused}}) {
        const Confusion c = evaluate(verdicts, truth, r.field);
        out << r.name << "  " << Fmt(c.score()) << "  " << Fmt(c.tpr()) << "  " << Fmt(c.tnr()) << "  "
            << Fmt(c.tnr()) << '\n';
    }
    const Confusion c = evaluate(verdicts, truth, VerdictField::Fused);
    out << "\nfused confusion (rows: truth, columns: verdict)\n";
    out << "          fake  pristine\n";
    char line[96];
    std::snprintf(line, sizeof line, "fake      %-5zu %zu\n", c.true_fake, c.false_pristine);
    out << line;
    std::snprintf(line, sizeof line, "pristine  %-5zu %zu\n", c.false_fake, c.true_pristine);
    out << line;
    out << "\nscore: " << Fmt(c.score()) << '\n';
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"forgeseek: image forgery detection (splicing and copy-move)", "forgeseek"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker count (default: FORGESEEK_THREADS or all cores)");

    std::string spec_path, out_dir;
    auto* synth = app.add_subcommand("synth", "generate a synthetic forgery corpus");
    synth->add_option("spec", spec_path, "corpus spec JSON")->required()->check(CLI::ExistingFile);
    synth->add_option("--out", out_dir, "output directory")->required();

    std::vector<std::string> inputs;
    std::string models_arg = "all", out_path, label_arg;
    auto* features = app.add_subcommand("features", "extract residual co-occurrence features to CSV");
    features->add_option("inputs", inputs, "images or directories")->required()->check(CLI::ExistingPath);
    features->add_option("--models", models_arg, "comma-separated models or 'all'")->capture_default_str();
    features->add_option("--out", out_path, "feature CSV")->required();
    features->add_option("--label", label_arg, "label for every input (default: parent directory name)");

    std::string csv;
    std::optional<double> C;
    std::string select;
    int k = 4;
    int reps = 18;
    std::uint64_t seed = 0;
    auto* train = app.add_subcommand("train", "train the splicing SVM from a feature CSV");
    train->add_option("features", csv, "feature CSV")->required()->check(CLI::ExistingFile);
    train->add_option("--models", models_arg, "model layout of the CSV")->capture_default_str();
    train->add_option("--out", out_path, "model JSON")->required();
    train->add_option("--C", C, "soft-margin constant (default: grid search)");
    train->add_option("--select", select, "select the top --k models by cross-validated score or auc")
        ->check(CLI::IsMember({"score", "auc"}));
    train->add_option("--k", k, "models to merge when selecting")->capture_default_str()->check(CLI::PositiveNumber);
    train->add_option("--reps", reps, "cross-validation repetitions")->capture_default_str()
        ->check(CLI::PositiveNumber);
    train->add_option("--seed", seed, "seed")->capture_default_str();

    std::string cv_select = "auc";
    auto* cv = app.add_subcommand("cv", "per-model and merged cross-validation report");
    cv->add_option("features", csv, "feature CSV")->required()->check(CLI::ExistingFile);
    cv->add_option("--models", models_arg, "model layout of the CSV")->capture_default_str();
    cv->add_option("--C", C, "soft-margin constant (default: grid search)");
    cv->add_option("--select", cv_select, "ranking criterion")->capture_default_str()
        ->check(CLI::IsMember({"score", "auc"}));
    cv->add_option("--k", k, "largest merge reported")->capture_default_str()->check(CLI::PositiveNumber);
    cv->add_option("--reps", reps, "repetitions")->capture_default_str()->check(CLI::PositiveNumber);
    cv->add_option("--seed", seed, "seed")->capture_default_str();

    PatchMatchConfig pm;
    CopyMoveConfig cm;
    std::string maps_dir;
    auto* copymove = app.add_subcommand("copymove", "copy-move detection with localization maps");
    copymove->add_option("inputs", inputs, "images or directories")->required()->check(CLI::ExistingPath);
    copymove->add_option("--out", out_path, "verdict CSV (default: stdout)");
    copymove->add_option("--maps", maps_dir, "directory for localization maps");
    add_copymove_flags(copymove, pm, cm);

    std::string model_path;
    bool no_copymove = false;
    auto* detect = app.add_subcommand("detect", "fused splicing and copy-move detection");
    detect->add_option("--model", model_path, "model JSON")->required()->check(CLI::ExistingFile);
    detect->add_option("inputs", inputs, "images or directories")->required()->check(CLI::ExistingPath);
    detect->add_option("--out", out_path, "verdict CSV")->required();
    detect->add_option("--maps", maps_dir, "directory for copy-move maps");
    detect->add_flag("--no-copymove", no_copymove, "splicing detector only");
    add_copymove_flags(detect, pm, cm);

    std::string verdict_path, manifest_path;
    auto* eval = app.add_subcommand("eval", "score verdicts against a corpus manifest");
    eval->add_option("verdicts", verdict_path, "verdict CSV")->required()->check(CLI::ExistingFile);
    eval->add_option("--manifest", manifest_path, "manifest CSV")->required()->check(CLI::ExistingFile);

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }
    if (threads <= 0) threads = default_thread_count();

    try {
        if (*synth) return cmd_synth(spec_path, out_dir, threads, out);
        if (*features) return cmd_features(inputs, models_arg, out_path, label_arg, threads, out);
        if (*train) return cmd_train(csv, models_arg, out_path, C, select, k, reps, seed, threads, out);
        if (*cv) return cmd_cv(csv, models_arg, C, cv_select, k, reps, seed, threads, out);
        if (*copymove) return cmd_copymove(inputs, pm, cm, out_path, maps_dir, threads, out);
        if (*detect) {
            return cmd_detect(model_path, inputs, DetectOptions{pm, cm, !no_copymove}, out_path, maps_dir, threads,
                              out);
        }
        if (*eval) return cmd_eval(verdict_path, manifest_path, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        err << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
        return e.code() == ErrorCode::FileNotFound ? kExitUsage : kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace forgeseek
