#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "dloc/refine.hpp"

using namespace dloc;

namespace {

const TargetArea grid15{-20, 20, -20, 20, 15, 15};

// The two-row instance from the refinement example; all other rows zero.
CMat example_rows(Index k1, Index k2)
{
    CMat X = CMat::Zero(225, 4);
    X.row(k1) << 1.6, 1.5, 1.7, 0.1;
    X.row(k2) << 1.55, 1.45, 1.7, 0.25;
    return X;
}

RowClusters cluster(std::vector<double> v) { return cluster_row(std::span<const double>(v)); }

} // namespace

TEST(ClusterRow, ExampleRowK1)
{
    const auto rc = cluster({1.6, 1.5, 1.7, 0.1});
    EXPECT_EQ(rc.high, (std::vector<int>{0, 1, 2}));
    EXPECT_EQ(rc.low, (std::vector<int>{3}));
    EXPECT_NEAR(rc.high_mean, 1.6, 1e-15);
    EXPECT_NEAR(rc.low_mean, 0.1, 1e-15);
}

TEST(ClusterRow, ExampleRowK2)
{
    const auto rc = cluster({1.55, 1.45, 1.7, 0.25});
    EXPECT_EQ(rc.high, (std::vector<int>{0, 1, 2}));
    EXPECT_EQ(rc.low, (std::vector<int>{3}));
    EXPECT_NEAR(rc.high_mean, 4.7 / 3.0, 1e-15);
    EXPECT_NEAR(rc.low_mean, 0.25, 1e-15);
}

TEST(ClusterRow, AllEqualGoesHigh)
{
    for (double v : {0.0, 1.0, 3.5}) {
        const auto rc = cluster({v, v, v, v, v});
        EXPECT_EQ(rc.high.size(), 5u);
        EXPECT_TRUE(rc.low.empty());
    }
}

TEST(ClusterRow, SingleStation)
{
    const auto rc = cluster({2.0});
    EXPECT_EQ(rc.high, (std::vector<int>{0}));
    EXPECT_TRUE(rc.low.empty());
}

TEST(ClusterRow, EmptyRowThrows) { EXPECT_THROW(cluster({}), ConfigError); }

TEST(ClusterRow, PropertiesOnRandomRows)
{
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> msize(1, 8);
    std::exponential_distribution<double> mag(1.0);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<double> v(std::size_t(msize(rng)));
        for (auto& x : v)
            x = mag(rng);
        const auto rc = cluster(v);
        // Partition of {0..M-1}.
        std::vector<int> all = rc.high;
        all.insert(all.end(), rc.low.begin(), rc.low.end());
        std::sort(all.begin(), all.end());
        std::vector<int> expect(v.size());
        std::iota(expect.begin(), expect.end(), 0);
        EXPECT_EQ(all, expect);
        EXPECT_GE(rc.high_mean, rc.low_mean);
        EXPECT_LE(rc.sweeps, 10);
        // Every member is at least as close to its own mean.
        for (int i : rc.high)
            EXPECT_LE(std::abs(v[std::size_t(i)] - rc.high_mean), std::abs(v[std::size_t(i)] - rc.low_mean) + 1e-12);
        for (int i : rc.low)
            EXPECT_LE(std::abs(v[std::size_t(i)] - rc.low_mean), std::abs(v[std::size_t(i)] - rc.high_mean) + 1e-12);
        // The high cluster holds the largest values.
        if (!rc.high.empty() && !rc.low.empty()) {
            double min_high = 1e300, max_low = -1.0;
            for (int i : rc.high)
                min_high = std::min(min_high, v[std::size_t(i)]);
            for (int i : rc.low)
                max_low = std::max(max_low, v[std::size_t(i)]);
            EXPECT_GE(min_high, max_low);
        }
    }
}

TEST(ClusterRow, PermutationCovariant)
{
    std::mt19937_64 rng(2);
    std::exponential_distribution<double> mag(1.0);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> v(5);
        for (auto& x : v)
            x = mag(rng);
        std::vector<int> perm(5);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<double> pv(5);
        for (int i = 0; i < 5; ++i)
            pv[std::size_t(i)] = v[std::size_t(perm[std::size_t(i)])];
        const auto a = cluster(v), b = cluster(pv);
        std::vector<int> mapped;
        for (int i : b.high)
            mapped.push_back(perm[std::size_t(i)]);
        std::sort(mapped.begin(), mapped.end());
        EXPECT_EQ(mapped, a.high);
    }
}

TEST(SelectNaive, ExampleAndEdgeCases)
{
    const auto e = select_naive(example_rows(40, 41), grid15);
    EXPECT_EQ(e.index, 40);
    EXPECT_EQ(e.method, SelectionMethod::naive);
    EXPECT_NEAR(example_rows(40, 41).row(40).norm(), 2.7767, 5e-5);
    EXPECT_NEAR(example_rows(40, 41).row(41).norm(), 2.7308, 5e-5);

    CMat X = CMat::Zero(225, 4);
    X(17, 2) = cplx(0.0, -3.0);
    EXPECT_EQ(select_naive(X, grid15).index, 17);

    const auto z = select_naive(CMat::Zero(225, 4), grid15);
    EXPECT_EQ(z.index, 0);
    EXPECT_TRUE(z.degenerate);

    CMat tie = CMat::Zero(225, 4);
    tie(9, 0) = 1.0;
    tie(5, 3) = 1.0;
    EXPECT_EQ(select_naive(tie, grid15).index, 5);
    EXPECT_THROW(select_naive(CMat::Zero(10, 4), grid15), ConfigError);
}

TEST(SelectRefined, ExamplePicksK1ViaRestrictedNorms)
{
    // Both orders, so the result does not depend on index tie-breaking.
    for (auto [k1, k2] : {std::pair<Index, Index>{40, 41}, {41, 40}}) {
        const CMat X = example_rows(k1, k2);
        const auto e = select_refined(X, grid15);
        EXPECT_EQ(e.index, k1);
        EXPECT_TRUE(e.in_active_set);
        EXPECT_FALSE(e.fallback);
    }
    EXPECT_NEAR(std::sqrt(1.6 * 1.6 + 1.5 * 1.5 + 1.7 * 1.7), 2.7749, 5e-5);
    EXPECT_NEAR(std::sqrt(1.55 * 1.55 + 1.45 * 1.45 + 1.7 * 1.7), 2.7194, 5e-5);
}

TEST(SelectRefined, RestrictionChangesTheWinner)
{
    // Row 3 has the largest full norm thanks to one inactive-station entry;
    // its high cluster is that single entry, so F = {row 7}.
    CMat X = CMat::Zero(225, 4);
    X.row(3) << 0.2, 0.1, 0.1, 5.0;
    X.row(7) << 1.0, 1.1, 0.9, 0.05;
    EXPECT_EQ(select_naive(X, grid15).index, 3);
    const auto e = select_refined(X, grid15);
    EXPECT_EQ(e.index, 7);
    EXPECT_TRUE(e.in_active_set);
}

TEST(SelectRefined, FallbackWhenNoRowQualifies)
{
    CMat X = CMat::Zero(225, 4);
    // Zero rows cluster as all-high; give every row one dominant entry.
    for (Index k = 0; k < 225; ++k)
        X(k, k % 4) = 1.0 + 0.001 * double(k);
    const auto e = select_refined(X, grid15);
    EXPECT_TRUE(e.fallback);
    EXPECT_EQ(e.index, select_naive(X, grid15).index);
    EXPECT_EQ(e.method, SelectionMethod::refined);
}

TEST(SelectRefined, ScaleInvariantAndIndexInF)
{
    std::mt19937_64 rng(3);
    std::exponential_distribution<double> mag(1.0);
    std::uniform_real_distribution<double> ph(-pi, pi), sc(1e-3, 1e3);
    for (int trial = 0; trial < 50; ++trial) {
        CMat X(225, 4);
        for (Index k = 0; k < 225; ++k)
            for (Index m = 0; m < 4; ++m)
                X(k, m) = std::polar(mag(rng), ph(rng));
        const double c = sc(rng);
        const auto a = select_refined(X, grid15), b = select_refined(CMat(c * X), grid15);
        EXPECT_EQ(a.index, b.index);
        EXPECT_EQ(select_naive(X, grid15).index, select_naive(CMat(c * X), grid15).index);
        if (!a.fallback) {
            const auto rows = cluster_rows(X);
            EXPECT_GE(rows[std::size_t(a.index)].high.size(), 3u);
        }
    }
}

TEST(IndexToPosition, GridLookup)
{
    const Point2 first = index_to_position(0, grid15);
    EXPECT_NEAR(first.x, -20.0 + 40.0 / 30.0, 1e-12);
    EXPECT_NEAR(first.y, -20.0 + 40.0 / 30.0, 1e-12);
    const Point2 centre = index_to_position(112, grid15);
    EXPECT_NEAR(centre.x, 0.0, 1e-12);
    EXPECT_NEAR(centre.y, 0.0, 1e-12);
    for (Index k = 0; k < 225; ++k)
        EXPECT_EQ(grid15.nearest_index(index_to_position(k, grid15)), k);
}
