#include "forgeseek/cooccurrence.hpp"
#include "forgeseek/error.hpp"
#include "testkit.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <random>

using namespace forgeseek;

namespace {

QuantizedResidualField field_of(int w, int h, const std::vector<int>& v) {
    QuantizedResidualField f{w, h, 2, {}};
    for (int x : v) f.data.push_back(static_cast<std::int8_t>(x));
    return f;
}

std::vector<int> random_symbols(int n, std::mt19937& gen) {
    std::uniform_int_distribution<int> pick(-2, 2);
    std::vector<int> v(static_cast<std::size_t>(n));
    for (int& x : v) x = pick(gen);
    return v;
}

double sum(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0);
}

}  // namespace

TEST(CoocIndex, Bijection) {
    for (int i = 0; i < kCoocCells; ++i) EXPECT_EQ(cooc_index(cooc_tuple(i)), i);
    EXPECT_EQ(cooc_index({-2, -2, -2, -2}), 0);
    EXPECT_EQ(cooc_index({2, 2, 2, 2}), 624);
}

TEST(CountCooc, AllZeroField) {
    const auto c = count_cooc(field_of(10, 10, std::vector<int>(100, 0)));
    EXPECT_EQ(c.at({0, 0, 0, 0}), 140u);
    EXPECT_EQ(c.total, 140u);
}

TEST(CountCooc, SingleRow) {
    const auto c = count_cooc(field_of(6, 1, {0, 1, 2, -1, 0, 1}));
    EXPECT_EQ(c.total, 3u);
    EXPECT_EQ(c.at({0, 1, 2, -1}), 1u);
    EXPECT_EQ(c.at({1, 2, -1, 0}), 1u);
    EXPECT_EQ(c.at({2, -1, 0, 1}), 1u);
}

TEST(CountCooc, MatchesBruteForce) {
    std::mt19937 gen(11);
    for (int trial = 0; trial < 50; ++trial) {
        const int w = 4 + trial % 29;
        const int h = 1 + (trial * 7) % 32;
        const auto v = random_symbols(w * h, gen);
        const auto c = count_cooc(field_of(w, h, v));
        const auto want = testkit::brute_cooc(v, w, h);
        std::uint64_t total = 0;
        for (int i = 0; i < kCoocCells; ++i) {
            const auto t = cooc_tuple(i);
            const auto it = want.find(t);
            ASSERT_EQ(c.counts[static_cast<std::size_t>(i)], it == want.end() ? 0u : it->second);
            total += c.counts[static_cast<std::size_t>(i)];
        }
        EXPECT_EQ(total, c.total);
    }
}

TEST(CountCooc, Errors) {
    EXPECT_THROW(count_cooc(field_of(3, 3, std::vector<int>(9, 0))), Error);
    auto f = field_of(4, 4, std::vector<int>(16, 0));
    f.bound = 3;
    EXPECT_THROW(count_cooc(f), Error);
    // A column of four still yields vertical windows.
    EXPECT_EQ(count_cooc(field_of(1, 4, {0, 0, 0, 0})).total, 1u);
}

TEST(Orbits, CountsMatchEnumeration) {
    const testkit::TupleMap lin[] = {testkit::negate, testkit::reverse};
    const testkit::TupleMap mm[] = {testkit::reverse};
    EXPECT_EQ(testkit::count_orbits(lin), 169);
    EXPECT_EQ(testkit::count_orbits(mm), 325);
    EXPECT_EQ((625 + 1 + 25 + 25) / 4, 169);  // Burnside
    EXPECT_EQ(linear_orbits().size(), 169u);
    EXPECT_EQ(minmax_orbits().size(), 325u);
}

TEST(Orbits, ClosedUnderGroup) {
    for (int i = 0; i < kCoocCells; ++i) {
        const auto t = cooc_tuple(i);
        const int o = linear_orbits().orbit_of[static_cast<std::size_t>(i)];
        EXPECT_EQ(linear_orbits().orbit_of[static_cast<std::size_t>(cooc_index(testkit::negate(t)))], o);
        EXPECT_EQ(linear_orbits().orbit_of[static_cast<std::size_t>(cooc_index(testkit::reverse(t)))], o);
        const int m = minmax_orbits().orbit_of[static_cast<std::size_t>(i)];
        EXPECT_EQ(minmax_orbits().orbit_of[static_cast<std::size_t>(cooc_index(testkit::reverse(t)))], m);
        // The representative is the smallest member.
        const auto rep = linear_orbits().representatives[static_cast<std::size_t>(o)];
        EXPECT_LE(rep, t);
        EXPECT_LE(rep, testkit::negate(t));
    }
}

TEST(Symmetrize, AllZeroMass) {
    CoocTensor c;
    c.add({0, 0, 0, 0}, 17);
    const auto f = symmetrize_linear(c);
    ASSERT_EQ(f.dim(), 169u);
    const int zero = linear_orbits().orbit_of[static_cast<std::size_t>(cooc_index({0, 0, 0, 0}))];
    for (std::size_t i = 0; i < f.dim(); ++i) EXPECT_EQ(f.values[i], i == std::size_t(zero) ? 1.0 : 0.0);

    const auto g = symmetrize_minmax(c, c);
    ASSERT_EQ(g.dim(), 325u);
    const int mz = minmax_orbits().orbit_of[static_cast<std::size_t>(cooc_index({0, 0, 0, 0}))];
    for (std::size_t i = 0; i < g.dim(); ++i) EXPECT_EQ(g.values[i], i == std::size_t(mz) ? 1.0 : 0.0);
}

TEST(Symmetrize, SizeTwoOrbit) {
    const int a = linear_orbits().orbit_of[static_cast<std::size_t>(cooc_index({1, 0, 0, -1}))];
    const int b = linear_orbits().orbit_of[static_cast<std::size_t>(cooc_index({-1, 0, 0, 1}))];
    EXPECT_EQ(a, b);
    const auto rep = linear_orbits().representatives[static_cast<std::size_t>(a)];
    EXPECT_EQ(rep, (CoocTuple{-1, 0, 0, 1}));
    int members = 0;
    for (int i = 0; i < kCoocCells; ++i) members += linear_orbits().orbit_of[static_cast<std::size_t>(i)] == a;
    EXPECT_EQ(members, 2);
    CoocTensor c;
    c.add({1, 0, 0, -1}, 3);
    const auto f = symmetrize_linear(c);
    EXPECT_EQ(f.values[static_cast<std::size_t>(a)], 1.0);
}

TEST(Symmetrize, MaxMassFoldsToReversedNegation) {
    CoocTensor cmin, cmax;
    cmax.add({2, 1, 0, -1});
    const auto folded = fold_minmax(cmin, cmax);
    // rev(-(2,1,0,-1)) = (1,0,-1,-2), whose reversal orbit is {(1,0,-1,-2), (-2,-1,0,1)}.
    const int cell = minmax_orbits().orbit_of[static_cast<std::size_t>(cooc_index({1, 0, -1, -2}))];
    EXPECT_EQ(cell, minmax_orbits().orbit_of[static_cast<std::size_t>(cooc_index({-2, -1, 0, 1}))]);
    EXPECT_EQ(minmax_orbits().representatives[static_cast<std::size_t>(cell)], (CoocTuple{-2, -1, 0, 1}));
    for (std::size_t i = 0; i < folded.size(); ++i) EXPECT_EQ(folded[i], i == std::size_t(cell) ? 1.0 : 0.0);
}

TEST(Symmetrize, ConservesMass) {
    std::mt19937 gen(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto v = random_symbols(24 * 24, gen);
        const auto w = random_symbols(24 * 24, gen);
        const auto c = count_cooc(field_of(24, 24, v));
        const auto d = count_cooc(field_of(24, 24, w));
        EXPECT_DOUBLE_EQ(sum(fold_linear(c)), static_cast<double>(c.total));
        EXPECT_DOUBLE_EQ(sum(fold_minmax(c, d)), static_cast<double>(c.total + d.total));
        EXPECT_NEAR(sum(symmetrize_linear(c).values), 1.0, 1e-12);
        EXPECT_NEAR(sum(symmetrize_minmax(c, d).values), 1.0, 1e-12);
    }
}

TEST(Symmetrize, InvariantUnderNegatedField) {
    // Negating every residual maps each tuple to its negation, which the
    // linear fold identifies.
    std::mt19937 gen(9);
    const auto v = random_symbols(20 * 20, gen);
    std::vector<int> neg(v.size());
    std::transform(v.begin(), v.end(), neg.begin(), [](int x) { return -x; });
    EXPECT_EQ(symmetrize_linear(count_cooc(field_of(20, 20, v))).values,
              symmetrize_linear(count_cooc(field_of(20, 20, neg))).values);
}

TEST(Symmetrize, EmptyTensorRejected) {
    EXPECT_THROW(symmetrize_linear(CoocTensor{}), Error);
}

TEST(Extract, ConstantImage) {
    const GrayImage img(64, 64, 90.0);
    const auto features = extract_features(img, builtin_bank());
    ASSERT_EQ(features.size(), 8u);
    const std::size_t dims[] = {169, 169, 169, 169, 325, 325, 325, 325};
    for (std::size_t k = 0; k < 8; ++k) {
        EXPECT_EQ(features[k].dim(), dims[k]);
        EXPECT_EQ(features[k].dim(), feature_dim(features[k].model_id));
        const auto& orbits = features[k].dim() == 169 ? linear_orbits() : minmax_orbits();
        const int zero = orbits.orbit_of[static_cast<std::size_t>(cooc_index({0, 0, 0, 0}))];
        for (std::size_t i = 0; i < features[k].dim(); ++i) {
            EXPECT_EQ(features[k].values[i], i == std::size_t(zero) ? 1.0 : 0.0);
        }
    }
}

TEST(Extract, NormalizedOnRandomImages) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const GrayImage img = testkit::smooth_texture(48, 40, seed, 1, 3.0);
        for (const auto& f : extract_features(img, builtin_bank())) EXPECT_NEAR(sum(f.values), 1.0, 1e-9);
    }
}

TEST(Extract, LinearPoolsBothDirections) {
    // A ramp has horizontal L1 residual 1 and vertical 0: pooled mass is split.
    GrayImage img(12, 12);
    for (int y = 0; y < 12; ++y) {
        for (int x = 0; x < 12; ++x) img.at(x, y) = x;
    }
    const auto f = extract_feature(img, bank_model(ModelId::L1));
    const int ones = linear_orbits().orbit_of[static_cast<std::size_t>(cooc_index({1, 1, 1, 1}))];
    const int zeros = linear_orbits().orbit_of[static_cast<std::size_t>(cooc_index({0, 0, 0, 0}))];
    EXPECT_DOUBLE_EQ(f.values[static_cast<std::size_t>(ones)], 0.5);
    EXPECT_DOUBLE_EQ(f.values[static_cast<std::size_t>(zeros)], 0.5);
}

TEST(Merge, Examples) {
    const GrayImage img = testkit::smooth_texture(40, 40, 1);
    const auto features = extract_features(img, builtin_bank());
    const ModelId one[] = {ModelId::L1};
    const auto m1 = merge_features(features, one);
    EXPECT_EQ(m1.values, features[0].values);
    const ModelId four[] = {ModelId::L3, ModelId::L1, ModelId::N3, ModelId::NSQ};
    const auto m4 = merge_features(features, four);
    EXPECT_EQ(m4.values.size(), 988u);
    EXPECT_TRUE(std::equal(features[2].values.begin(), features[2].values.end(), m4.values.begin()));
    EXPECT_THROW(merge_features(features, std::span<const ModelId>{}), Error);
    const ModelId dup[] = {ModelId::L1, ModelId::L1};
    EXPECT_THROW(merge_features(features, dup), Error);
    const std::vector<FeatureVector> only_l1{features[0]};
    const ModelId missing[] = {ModelId::N1};
    EXPECT_THROW(merge_features(only_l1, missing), Error);
}
