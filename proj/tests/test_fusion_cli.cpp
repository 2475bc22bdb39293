#include "forgeseek/classifier.hpp"
#include "forgeseek/cli.hpp"
#include "forgeseek/cooccurrence.hpp"
#include "forgeseek/error.hpp"
#include "forgeseek/fusion.hpp"
#include "forgeseek/synthgen.hpp"
#include "testkit.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

using namespace forgeseek;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

// A model over L1 that calls everything pristine.
SvmModel always_pristine() {
    SvmModel m;
    m.selection = {ModelId::L1};
    const std::size_t d = feature_dim(ModelId::L1);
    m.mean.assign(d, 0.0);
    m.spread.assign(d, 1.0);
    m.weights.assign(d, 0.0);
    m.bias = -1.0;
    return m;
}

}  // namespace

TEST(Fuse, TruthTable) {
    static_assert(fuse(Label::Pristine, Label::Pristine) == Label::Pristine);
    static_assert(fuse(Label::Fake, Label::Pristine) == Label::Fake);
    static_assert(fuse(Label::Pristine, Label::Fake) == Label::Fake);
    static_assert(fuse(Label::Fake, Label::Fake) == Label::Fake);
    EXPECT_EQ(make_verdict("x", Label::Pristine, -0.3, Label::Fake).fused, Label::Fake);
}

TEST(Fuse, DetectionSetIsUnionOfDetectors) {
    std::mt19937 gen(3);
    std::vector<Verdict> vs;
    std::vector<Truth> truth;
    for (int i = 0; i < 200; ++i) {
        const Label s = gen() % 2 ? Label::Fake : Label::Pristine;
        const Label c = gen() % 3 == 0 ? Label::Fake : Label::Pristine;
        vs.push_back(make_verdict("i" + std::to_string(i), s, 0.0, c));
        truth.push_back({vs.back().image_id, gen() % 2 ? Label::Fake : Label::Pristine});
    }
    std::size_t union_count = 0;
    for (const auto& v : vs) {
        const bool u = v.splice == Label::Fake || v.copymove == Label::Fake;
        union_count += u;
        EXPECT_EQ(v.fused == Label::Fake, u);
    }
    const Confusion f = evaluate(vs, truth, VerdictField::Fused);
    const Confusion s = evaluate(vs, truth, VerdictField::Splice);
    const Confusion c = evaluate(vs, truth, VerdictField::CopyMove);
    EXPECT_EQ(f.true_fake + f.false_fake, union_count);
    // Superset: OR can only add detections.
    EXPECT_GE(f.true_fake, std::max(s.true_fake, c.true_fake));
    EXPECT_LE(f.true_pristine, std::min(s.true_pristine, c.true_pristine));
}

TEST(Evaluate, CountsAndErrors) {
    const std::vector<Verdict> vs = {
        make_verdict("a", Label::Fake, 1.0, Label::Pristine),
        make_verdict("b", Label::Pristine, -1.0, Label::Pristine),
        make_verdict("c", Label::Pristine, -1.0, Label::Fake),
        make_verdict("d", Label::Pristine, -1.0, Label::Pristine),
    };
    const std::vector<Truth> truth = {
        {"a", Label::Fake}, {"b", Label::Fake}, {"c", Label::Pristine}, {"d", Label::Pristine}, {"e", Label::Fake}};
    const Confusion f = evaluate(vs, truth, VerdictField::Fused);
    EXPECT_EQ(f.true_fake, 1u);
    EXPECT_EQ(f.false_pristine, 1u);
    EXPECT_EQ(f.false_fake, 1u);
    EXPECT_EQ(f.true_pristine, 1u);
    EXPECT_DOUBLE_EQ(f.score(), 0.5);
    const std::vector<Truth> partial = {{"a", Label::Fake}};
    EXPECT_THROW(evaluate(vs, partial, VerdictField::Fused), Error);
}

TEST(Verdicts, CsvRoundTrip) {
    const auto dir = testkit::scratch_dir("verdict");
    std::vector<Verdict> vs = {
        make_verdict("a", Label::Fake, 0.1234567890123, Label::Pristine),
        make_verdict("b", Label::Pristine, -7.5e-9, Label::Fake),
    };
    write_verdicts(vs, dir / "v.csv");
    EXPECT_EQ(read_verdicts(dir / "v.csv"), vs);
    vs[1].map_path = dir / "maps" / "b.png";
    write_verdicts(vs, dir / "w.csv");
    EXPECT_EQ(read_verdicts(dir / "w.csv"), vs);
    {
        std::ofstream(dir / "bad.csv") << "id,splice,margin,copymove,fused\na,fake,x,pristine,fake\n";
    }
    EXPECT_THROW(read_verdicts(dir / "bad.csv"), Error);
}

TEST(DetectImage, CopyMoveRescuesMissedSplice) {
    GrayImage img = [] {
        Rng rng(21);
        return synth_texture(128, 128, rng);
    }();
    testkit::plant_copy(img, 8, 10, 70, 66, 44);
    DetectOptions opts;
    opts.copymove.rotations_enabled = false;
    CopyMoveResult cm;
    const Verdict v = detect_image("x", img, always_pristine(), opts, &cm);
    EXPECT_EQ(v.splice, Label::Pristine);
    EXPECT_DOUBLE_EQ(v.splice_margin, -1.0);
    EXPECT_EQ(v.copymove, Label::Fake);
    EXPECT_EQ(v.fused, Label::Fake);
    EXPECT_TRUE(cm.is_fake);

    opts.copymove_enabled = false;
    const Verdict off = detect_image("x", img, always_pristine(), opts);
    EXPECT_EQ(off.copymove, Label::Pristine);
    EXPECT_EQ(off.fused, Label::Pristine);
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(cli({"--help"}).code, kExitOk);
    EXPECT_EQ(cli({}).code, kExitUsage);
    EXPECT_EQ(cli({"bogus"}).code, kExitUsage);
    EXPECT_EQ(cli({"eval", "--frobnicate"}).code, kExitUsage);
    EXPECT_EQ(cli({"synth", "/nonexistent/spec.json", "--out", "/tmp/x"}).code, kExitUsage);
    const auto dir = testkit::scratch_dir("cli");
    {
        std::ofstream(dir / "img.png") << "garbage";
    }
    const CliRun bad_models = cli({"features", (dir / "img.png").string(), "--models", "L9", "--out", "f.csv"});
    EXPECT_EQ(bad_models.code, kExitUsage);
    const CliRun corrupt = cli({"features", (dir / "img.png").string(), "--label", "fake", "--out",
                                (dir / "f.csv").string()});
    EXPECT_EQ(corrupt.code, kExitRuntime);
    EXPECT_FALSE(corrupt.err.empty());
}

// synth -> features -> cv -> train -> detect -> eval on a tiny corpus.
TEST(Cli, EndToEnd) {
    const auto dir = testkit::scratch_dir("cli");
    {
        std::ofstream(dir / "spec.json") << R"({"n_pristine": 6, "n_copymove": 2, "n_splice": 6,
            "image_size": 112, "block_size_range": [32, 36], "rotation_prob": 0.0, "seed": 5})";
    }
    const std::string corpus = (dir / "corpus").string();
    const CliRun syn = cli({"synth", (dir / "spec.json").string(), "--out", corpus});
    ASSERT_EQ(syn.code, kExitOk) << syn.err;

    const std::string feats = (dir / "f.csv").string();
    const CliRun f = cli({"--threads", "2", "features", corpus + "/pristine", corpus + "/fake", "--models", "L1,N1",
                          "--out", feats});
    ASSERT_EQ(f.code, kExitOk) << f.err;

    const CliRun cv = cli({"cv", feats, "--models", "L1,N1", "--C", "1", "--reps", "18", "--k", "2"});
    ASSERT_EQ(cv.code, kExitOk) << cv.err;
    EXPECT_NE(cv.out.find("repetitions: 18"), std::string::npos) << cv.out;

    const std::string model = (dir / "m.json").string();
    const CliRun tr = cli({"train", feats, "--models", "L1,N1", "--C", "1", "--out", model});
    ASSERT_EQ(tr.code, kExitOk) << tr.err;
    EXPECT_EQ(load_model(model).selection, (std::vector<ModelId>{ModelId::L1, ModelId::N1}));

    const std::string verdicts = (dir / "v.csv").string();
    const CliRun det = cli({"detect", "--model", model, corpus + "/pristine", corpus + "/fake", "--out", verdicts,
                            "--no-rotations", "--maps", (dir / "maps").string()});
    ASSERT_EQ(det.code, kExitOk) << det.err;
    const auto vs = read_verdicts(verdicts);
    ASSERT_EQ(vs.size(), 14u);
    for (const auto& v : vs) EXPECT_EQ(v.fused, fuse(v.splice, v.copymove));

    const CliRun ev = cli({"eval", verdicts, "--manifest", corpus + "/manifest.csv"});
    ASSERT_EQ(ev.code, kExitOk) << ev.err;
    EXPECT_NE(ev.out.find("score:"), std::string::npos);
}

TEST(Cli, EvalPerfectVerdicts) {
    const auto dir = testkit::scratch_dir("cli");
    const std::vector<ManifestEntry> rows = {
        {"a", Label::Fake, ItemKind::CopyMove, ""},
        {"b", Label::Pristine, ItemKind::Pristine, ""},
        {"c", Label::Fake, ItemKind::Splice, ""},
    };
    write_manifest(rows, dir / "manifest.csv");
    const std::vector<Verdict> vs = {
        make_verdict("a", Label::Pristine, -1.0, Label::Fake),
        make_verdict("b", Label::Pristine, -1.0, Label::Pristine),
        make_verdict("c", Label::Fake, 2.0, Label::Pristine),
    };
    write_verdicts(vs, dir / "v.csv");
    const CliRun ev = cli({"eval", (dir / "v.csv").string(), "--manifest", (dir / "manifest.csv").string()});
    ASSERT_EQ(ev.code, kExitOk) << ev.err;
    EXPECT_NE(ev.out.find("score: 1.0000"), std::string::npos) << ev.out;
}
