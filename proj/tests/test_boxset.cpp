#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "attrlab/boxset.hpp"
#include "oracles.hpp"

using namespace attrlab;

namespace {

GridSpec grid2d(std::size_t n = 32) { return GridSpec({-1.0, -2.0}, {1.0, 2.0}, {n, n}); }

BoxCover cells_of(const GridSpec& g, std::initializer_list<CellIndex> idx) {
    std::vector<std::uint64_t> cells;
    for (const auto& i : idx) cells.push_back(g.linear(i));
    return BoxCover(g, cells);
}

}  // namespace

TEST(Grid, CellCenterAndContainingCell) {
    const GridSpec g({-1.0}, {1.0}, {2});
    EXPECT_EQ(cell_center(g, {0})[0], -0.5);
    EXPECT_EQ(containing_cell(g, State{0.0}), (CellIndex{0}));
    EXPECT_EQ(containing_cell(g, State{1.0}), (CellIndex{1}));
    EXPECT_EQ(containing_cell(g, State{-1.0}), (CellIndex{0}));
    EXPECT_THROW(containing_cell(g, State{1.5}), OutOfDomain);
}

TEST(Grid, ContainingCellInvertsCenter) {
    const GridSpec g({-3.0, 0.0, 5.0}, {3.0, 1.0, 9.0}, {7, 5, 3});
    for (std::uint64_t l = 0; l < g.total_cells(); ++l) {
        const CellIndex idx = g.multi(l);
        EXPECT_EQ(g.linear(idx), l);
        EXPECT_EQ(containing_cell(g, cell_center(g, idx)), idx);
    }
}

TEST(Grid, RejectsInvalidSpecs) {
    EXPECT_THROW(GridSpec({0.0}, {1.0}, {0}), UsageError);
    EXPECT_THROW(GridSpec({1.0}, {0.0}, {4}), UsageError);
    EXPECT_THROW(GridSpec({0.0, 0.0}, {1.0}, {4}), UsageError);
}

TEST(SemiDistance, IntervalAgainstSingleCell) {
    const GridSpec g({-2.0}, {2.0}, {400});
    const BoxCover a = BoxCover::covering(g, Box{{-1.0}, {1.0}});
    const BoxCover b(g, {g.linear(containing_cell(g, State{0.0}))});
    const double oracle_ab = oracle::semi_distance(a, b);
    EXPECT_NEAR(semi_distance(a, b), 1.0, 0.01);
    EXPECT_NEAR(semi_distance(a, b), oracle_ab, 1e-12);
    EXPECT_EQ(semi_distance(b, a), 0.0);
    EXPECT_NEAR(hausdorff(a, b), 1.0, 0.01);
    EXPECT_EQ(semi_distance(a, a), 0.0);
}

TEST(SemiDistance, EmptyConventions) {
    const GridSpec g = grid2d();
    const BoxCover a = cells_of(g, {{1, 1}});
    EXPECT_EQ(semi_distance(BoxCover::empty(g), a), 0.0);
    EXPECT_THROW(semi_distance(a, BoxCover::empty(g)), EmptyTarget);
}

TEST(SemiDistance, GridMismatchIsUsageError) {
    const BoxCover a = BoxCover::full(grid2d(8));
    const BoxCover b = BoxCover::full(grid2d(16));
    EXPECT_THROW(semi_distance(a, b), UsageError);
    EXPECT_THROW(subset(a, b), UsageError);
    EXPECT_THROW(unite(a, b), UsageError);
}

TEST(SemiDistance, MatchesBruteForceOnRandomCovers) {
    std::mt19937_64 rng(2024);
    const GridSpec g({-1.0, -2.0}, {1.0, 3.0}, {40, 70});
    for (int trial = 0; trial < 60; ++trial) {
        const BoxCover a = trial % 2 ? oracle::random_cover(g, rng, 300) : oracle::random_blob_cover(g, rng, 300);
        const BoxCover b = trial % 3 ? oracle::random_blob_cover(g, rng, 300) : oracle::random_cover(g, rng, 300);
        EXPECT_NEAR(semi_distance(a, b), oracle::semi_distance(a, b), 1e-12);
        EXPECT_NEAR(semi_distance(b, a), oracle::semi_distance(b, a), 1e-12);
    }
}

TEST(SemiDistance, MatchesBruteForceIn3d) {
    std::mt19937_64 rng(77);
    const GridSpec g({0.0, 0.0, 0.0}, {1.0, 2.0, 3.0}, {9, 11, 13});
    for (int trial = 0; trial < 30; ++trial) {
        const BoxCover a = oracle::random_cover(g, rng, 100);
        const BoxCover b = oracle::random_blob_cover(g, rng, 100);
        EXPECT_NEAR(semi_distance(a, b), oracle::semi_distance(a, b), 1e-12);
    }
}

TEST(SemiDistance, ZeroExactlyForSubsets) {
    std::mt19937_64 rng(5);
    const GridSpec g = grid2d();
    for (int trial = 0; trial < 50; ++trial) {
        const BoxCover a = oracle::random_cover(g, rng, 50);
        const BoxCover b = oracle::random_cover(g, rng, 50);
        EXPECT_EQ(semi_distance(a, unite(a, b)), 0.0);
        EXPECT_EQ(semi_distance(a, b) == 0.0, subset(a, b));
    }
}

TEST(SemiDistance, ThreadCountDoesNotChangeResult) {
    std::mt19937_64 rng(8);
    const GridSpec g({-1.0, -1.0}, {1.0, 1.0}, {300, 300});
    const BoxCover a = oracle::random_cover(g, rng, 2000);
    const BoxCover b = oracle::random_blob_cover(g, rng, 2000);
    EXPECT_EQ(semi_distance(a, b, 1), semi_distance(a, b, 4));
}

TEST(Hausdorff, MetricAxiomsOnRandomCovers) {
    std::mt19937_64 rng(31);
    const GridSpec g = grid2d(24);
    for (int trial = 0; trial < 200; ++trial) {
        const BoxCover a = oracle::random_blob_cover(g, rng, 80);
        const BoxCover b = oracle::random_cover(g, rng, 80);
        const BoxCover c = oracle::random_blob_cover(g, rng, 80);
        EXPECT_EQ(hausdorff(a, a), 0.0);
        EXPECT_EQ(hausdorff(a, b), hausdorff(b, a));
        EXPECT_EQ(hausdorff(a, b) == 0.0, a == b);
        EXPECT_LE(hausdorff(a, c), hausdorff(a, b) + hausdorff(b, c) + 1e-12);
    }
}

TEST(SemiDistance, MonotoneInTarget) {
    std::mt19937_64 rng(41);
    const GridSpec g = grid2d(24);
    for (int trial = 0; trial < 100; ++trial) {
        const BoxCover a = oracle::random_cover(g, rng, 60);
        const BoxCover b = oracle::random_cover(g, rng, 60);
        const BoxCover bigger = unite(b, oracle::random_cover(g, rng, 60));
        EXPECT_LE(semi_distance(a, bigger), semi_distance(a, b));
    }
}

TEST(Fatten, ZeroRadiusIsIdentity) {
    std::mt19937_64 rng(1);
    const GridSpec g = grid2d();
    const BoxCover a = oracle::random_cover(g, rng, 100);
    EXPECT_EQ(fatten(a, 0.0), a);
}

TEST(Fatten, OneCellGivesThreeByThreeBlock) {
    const GridSpec g({0.0, 0.0}, {8.0, 8.0}, {8, 8});
    const BoxCover interior = fatten(cells_of(g, {{4, 5}}), 1.0);
    // Hand enumeration: centres within sup distance 1 of (4.5, 5.5).
    BoxCover expected = cells_of(g, {{3, 4}, {3, 5}, {3, 6}, {4, 4}, {4, 5}, {4, 6}, {5, 4}, {5, 5}, {5, 6}});
    EXPECT_EQ(interior, expected);

    const BoxCover corner = fatten(cells_of(g, {{0, 7}}), 1.0);
    EXPECT_EQ(corner, cells_of(g, {{0, 6}, {0, 7}, {1, 6}, {1, 7}}));
}

TEST(Fatten, AnisotropicCells) {
    const GridSpec g({0.0, 0.0}, {4.0, 2.0}, {4, 8});  // widths 1 and 0.25
    const BoxCover out = fatten(cells_of(g, {{2, 4}}), 0.5);
    // Centres within r plus half a cell of (2.5, 1.125): axis 0 up to 1.0 away
    // (cells 1..3), axis 1 up to 0.625 away (cells 2..6).
    std::vector<std::uint64_t> expect;
    for (std::size_t i = 1; i <= 3; ++i)
        for (std::size_t j = 2; j <= 6; ++j) expect.push_back(g.linear({i, j}));
    EXPECT_EQ(out, BoxCover(g, expect));
}

TEST(Fatten, FullGridStaysFull) {
    const GridSpec g = grid2d(10);
    EXPECT_EQ(fatten(BoxCover::full(g), 3.7), BoxCover::full(g));
}

TEST(SetOps, UnionSubsetCount) {
    std::mt19937_64 rng(12);
    const GridSpec g = grid2d();
    for (int trial = 0; trial < 50; ++trial) {
        const BoxCover a = oracle::random_cover(g, rng, 100);
        const BoxCover b = oracle::random_cover(g, rng, 100);
        EXPECT_TRUE(subset(a, unite(a, b)));
        EXPECT_EQ(unite(a, BoxCover::empty(g)), a);
        EXPECT_LE(count(unite(a, b)), count(a) + count(b));
    }
}

TEST(Covering, RasterisesClosedBox) {
    const GridSpec g({-2.0}, {2.0}, {4});
    EXPECT_EQ(BoxCover::covering(g, Box{{-0.5}, {0.5}}).count(), 2u);
    EXPECT_EQ(BoxCover::covering(g, Box{{-5.0}, {5.0}}).count(), 4u);
    EXPECT_TRUE(BoxCover::covering(g, Box{{3.0}, {5.0}}).is_empty());
}

TEST(CoverDump, RoundTripIsBitExact) {
    std::mt19937_64 rng(3);
    const GridSpec g({-0.1, 1.0 / 3.0, -25.0}, {0.7, 2.0, 55.0}, {13, 7, 9});
    for (int trial = 0; trial < 20; ++trial) {
        const BoxCover a = oracle::random_cover(g, rng, 200);
        std::stringstream ss;
        write_cover(ss, a);
        const std::string text = ss.str();
        const BoxCover b = read_cover(ss);
        EXPECT_EQ(a, b);
        std::stringstream again;
        write_cover(again, b);
        EXPECT_EQ(text, again.str());
    }
}

TEST(CoverDump, HeaderAndSortedLines) {
    const GridSpec g({0.0, 0.0}, {1.0, 1.0}, {2, 3});
    std::stringstream ss;
    write_cover(ss, cells_of(g, {{1, 0}, {0, 2}}));
    EXPECT_EQ(ss.str(), "2 0 0 1 1 2 3\n0 2\n1 0\n");
}

TEST(CoverDump, RejectsMalformedInput) {
    std::stringstream bad("1 0 1 4\n7\n");
    EXPECT_THROW(read_cover(bad), UsageError);
}
