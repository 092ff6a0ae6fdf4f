#include <gtest/gtest.h>

#include <random>
#include <set>

#include "samodal/sampling.hpp"
#include "support/oracles.hpp"

using namespace samodal;

namespace {

const SamplingStrategy kAll[] = {SamplingStrategy::random(), SamplingStrategy::saliency(),
                                 SamplingStrategy::erosion(3), SamplingStrategy::erosion(7)};

}  // namespace

TEST(Rng, SplitMix64ReferenceSequence)
{
    // First outputs for seed 0 (reference values of the published algorithm).
    SplitMix64 rng(0);
    EXPECT_EQ(rng.next(), 0xE220A8397B1DCDAFULL);
    EXPECT_EQ(rng.next(), 0x6E789E6AA1B965F4ULL);
    EXPECT_EQ(rng.next(), 0x06C45D188009454FULL);
}

TEST(Rng, BelowStaysInRange)
{
    SplitMix64 rng(5);
    for (int i = 0; i < 1000; ++i)
        EXPECT_LT(rng.below(7), 7u);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform();
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
    }
}

TEST(Sampling, SinglePixelMask)
{
    const GridDims d{4, 4};
    BinaryMask m(d);
    m.set(Coord{2, 3});
    for (const auto& s : kAll) {
        const auto t = sample_points(m, 1, s, 99);
        ASSERT_EQ(t.size(), 1u);
        EXPECT_EQ(t.points[0], to_index(d, {2, 3})) << s.name();
        EXPECT_EQ(t.labels[0], 1);
    }
}

TEST(Sampling, ErosionOnFullMaskPicksInterior)
{
    const GridDims d{5, 5};
    const auto inner = BinaryMask::rect(d, {2, 2}, 3, 3);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto t = sample_points(BinaryMask::full(d), 1, SamplingStrategy::erosion(3), seed);
        EXPECT_TRUE(inner.test(t.points[0]));
    }
}

TEST(Sampling, ErosionFallsBackToMaskWhenErosionEmpty)
{
    const GridDims d{6, 6};
    const auto line = BinaryMask::rect(d, {3, 1}, 1, 6);
    const auto t = sample_points(line, 4, SamplingStrategy::erosion(3), 1);
    for (auto p : t.points)
        EXPECT_TRUE(line.test(p));
}

TEST(Sampling, SaliencyMap)
{
    const GridDims d{5, 5};
    const auto full = saliency_map(BinaryMask::full(d));
    EXPECT_EQ(full[to_index(d, {3, 3}).value - 1], 3.0);
    for (Coord c : {Coord{1, 1}, Coord{1, 5}, Coord{5, 1}, Coord{5, 5}})
        EXPECT_EQ(full[to_index(d, c).value - 1], 1.0);

    BinaryMask dot(d);
    dot.set(Coord{2, 4});
    const auto one = saliency_map(dot);
    for (std::size_t i = 0; i < one.size(); ++i)
        EXPECT_EQ(one[i], i + 1 == to_index(d, {2, 4}).value ? 1.0 : 0.0);

    for (double v : saliency_map(BinaryMask(d)))
        EXPECT_EQ(v, 0.0);
}

TEST(Sampling, SaliencyMatchesBruteForceDistance)
{
    std::mt19937_64 rng(30);
    for (int trial = 0; trial < 60; ++trial) {
        const GridDims d{1 + static_cast<int>(rng() % 14), 1 + static_cast<int>(rng() % 14)};
        const auto m = oracle::random_blob(rng, d);
        const auto s = saliency_map(m);
        for (int h = 1; h <= d.height; ++h)
            for (int w = 1; w <= d.width; ++w) {
                const double expect = m.test(Coord{h, w}) ? oracle::chebyshev_depth(m, h, w) : 0.0;
                EXPECT_EQ(s[to_index(d, {h, w}).value - 1], expect);
            }
    }
}

TEST(Sampling, SaliencyTopKAndCycling)
{
    const GridDims d{5, 5};
    const auto t = sample_points(BinaryMask::full(d), 2, SamplingStrategy::saliency(), 0);
    EXPECT_EQ(t.points[0], to_index(d, {3, 3}));
    EXPECT_EQ(t.points[1], to_index(d, {2, 2}));  // first of the depth-2 ring

    BinaryMask pair(d);
    pair.set(Coord{1, 1});
    pair.set(Coord{1, 2});
    const auto cyc = sample_points(pair, 5, SamplingStrategy::saliency(), 0);
    const std::vector<PixelIndex> expect{{1}, {2}, {1}, {2}, {1}};
    EXPECT_EQ(cyc.points, expect);
}

TEST(Sampling, RandomWithoutReplacementUnlessTooSmall)
{
    const GridDims d{8, 8};
    const auto m = BinaryMask::rect(d, {2, 2}, 2, 3);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto t = sample_points(m, 6, SamplingStrategy::random(), seed);
        const std::set<PixelIndex> distinct(t.points.begin(), t.points.end());
        EXPECT_EQ(distinct.size(), 6u);
        const auto big = sample_points(m, 9, SamplingStrategy::random(), seed);
        EXPECT_EQ(big.size(), 9u);
    }
}

TEST(Sampling, RejectsBadArguments)
{
    const GridDims d{3, 3};
    EXPECT_THROW(sample_points(BinaryMask(d), 1, SamplingStrategy::random(), 0), InvalidArgument);
    EXPECT_THROW(sample_points(BinaryMask::full(d), 0, SamplingStrategy::random(), 0), InvalidArgument);
    EXPECT_THROW(SamplingStrategy::erosion(4), InvalidArgument);
    EXPECT_THROW(SamplingStrategy::erosion(1), InvalidArgument);
}

TEST(Sampling, ParseNames)
{
    EXPECT_EQ(SamplingStrategy::parse("random"), SamplingStrategy::random());
    EXPECT_EQ(SamplingStrategy::parse("saliency"), SamplingStrategy::saliency());
    EXPECT_EQ(SamplingStrategy::parse("erosion"), SamplingStrategy::erosion(3));
    EXPECT_EQ(SamplingStrategy::parse("erosion:7").kernel(), 7);
    EXPECT_THROW(SamplingStrategy::parse("erosion:x"), InvalidArgument);
    EXPECT_THROW(SamplingStrategy::parse("center"), InvalidArgument);
    for (const auto& s : kAll)
        EXPECT_EQ(SamplingStrategy::parse(s.name()), s);
}

TEST(SamplingProperty, PointsInsideMaskAndSeedDeterministic)
{
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 300; ++trial) {
        const GridDims d{1 + static_cast<int>(rng() % 20), 1 + static_cast<int>(rng() % 20)};
        const auto m = oracle::random_blob(rng, d);
        const int k = 1 + static_cast<int>(rng() % 5);
        const auto seed = rng();
        for (const auto& s : kAll) {
            const auto t = sample_points(m, k, s, seed);
            ASSERT_EQ(t.size(), static_cast<std::size_t>(k));
            for (auto p : t.points)
                EXPECT_TRUE(m.test(p));
            EXPECT_EQ(t, sample_points(m, k, s, seed));
        }
        EXPECT_EQ(sample_points(m, k, SamplingStrategy::saliency(), seed),
                  sample_points(m, k, SamplingStrategy::saliency(), seed + 1));
    }
}

TEST(SamplingProperty, ErosionWindowInsideMask)
{
    std::mt19937_64 rng(32);
    for (int trial = 0; trial < 200; ++trial) {
        const GridDims d{4 + static_cast<int>(rng() % 28), 4 + static_cast<int>(rng() % 28)};
        const auto m = trial % 2 ? oracle::random_blob(rng, d, 4) : oracle::random_mask(rng, d, 0.9);
        for (int k : {3, 7}) {
            if (erode(m, k).empty())
                continue;
            const auto t = sample_points(m, 4, SamplingStrategy::erosion(k), rng());
            for (auto p : t.points) {
                const auto c = to_coord(d, p);
                EXPECT_GE(oracle::chebyshev_depth(m, c.h, c.w), k / 2 + 1);
            }
        }
    }
}
