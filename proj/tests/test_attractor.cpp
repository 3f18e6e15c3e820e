#include <gtest/gtest.h>

#include <random>

#include "attrlab/attractor.hpp"
#include "oracles.hpp"

using namespace attrlab;

namespace {

GridSpec line_grid(std::size_t n = 1024) { return GridSpec({-3.0}, {3.0}, {n}); }

BoxCover cell_at(const GridSpec& g, double x) { return BoxCover(g, {g.linear(containing_cell(g, State{x}))}); }

SystemFamily constant_drift() {
    SystemFamily f;
    f.name = "drift";
    f.state_dim = 1;
    f.default_domain = Box{{-1.0}, {1.0}};
    f.field = [](std::span<const double>, std::span<const double>, std::span<double> dx) { dx[0] = 1.0; };
    return f;
}

AttractorSettings settings_for(const GridSpec& g, double t_step, double dt = 1e-2) {
    AttractorSettings s;
    s.t_step = t_step;
    s.tol = 2.0 * g.cell_width();
    s.image.integrator.dt = dt;
    return s;
}

}  // namespace

TEST(Image, EquilibriumCellSurvives) {
    const GridSpec g = line_grid();
    const BoxCover c = cell_at(g, 1.0);
    const BoxCover img = image(c, families::pitchfork(), 1.0, 1.0);
    EXPECT_TRUE(subset(c, img));
}

TEST(Image, ContractsOntoStableEquilibrium) {
    const GridSpec g = line_grid();
    const BoxCover c = BoxCover::covering(g, Box{{1.5}, {2.5}});
    // Closed form: [1.5, 2.5] lands inside (1, 1.0005) at t = 5.
    EXPECT_LT(oracle::pitchfork_flow(1.0, 2.5, 5.0), 1.0005);
    const BoxCover img = image(c, families::pitchfork(), 1.0, 5.0);
    EXPECT_LE(semi_distance(img, cell_at(g, 1.0)), 2.0 * g.cell_width());
}

TEST(Image, ShortTimeKeepsEquilibria) {
    const GridSpec g = line_grid();
    const BoxCover c = BoxCover::covering(g, Box{{-2.0}, {2.0}});
    const BoxCover img = image(c, families::pitchfork(), 1.0, 1e-2);
    for (double x : {-1.0, 0.0, 1.0}) { EXPECT_TRUE(subset(cell_at(g, x), img)) << x; }
}

TEST(Image, MonotoneInInput) {
    std::mt19937_64 rng(4);
    const GridSpec g = line_grid(256);
    for (int trial = 0; trial < 20; ++trial) {
        const BoxCover a = oracle::random_cover(g, rng, 40);
        const BoxCover b = unite(a, oracle::random_cover(g, rng, 40));
        for (const char* name : {"pitchfork", "semistable"}) {
            const SystemFamily f = family_by_name(name);
            EXPECT_TRUE(subset(image(a, f, 0.3, 0.7), image(b, f, 0.3, 0.7))) << name;
        }
    }
}

TEST(Image, MonotoneInInputLorenz) {
    std::mt19937_64 rng(6);
    const GridSpec g(Box{{-25.0, -30.0, -5.0}, {25.0, 30.0, 55.0}}, {12, 12, 12});
    const SystemFamily f = families::lorenz();
    for (int trial = 0; trial < 5; ++trial) {
        const BoxCover a = oracle::random_cover(g, rng, 30);
        const BoxCover b = unite(a, oracle::random_cover(g, rng, 30));
        EXPECT_TRUE(subset(image(a, f, 28.0, 0.05), image(b, f, 28.0, 0.05)));
    }
}

TEST(Image, SameResultForAnyThreadCount) {
    const GridSpec g(Box{{-25.0, -30.0, -5.0}, {25.0, 30.0, 55.0}}, {16, 16, 16});
    const BoxCover full = BoxCover::full(g);
    ImageSettings one;
    ImageSettings many;
    many.threads = 4;
    EXPECT_EQ(image(full, families::lorenz(), 28.0, 0.3, one), image(full, families::lorenz(), 28.0, 0.3, many));
}

TEST(Image, IncrementalAdvanceMatchesDirectImage) {
    const GridSpec g = line_grid(512);
    const BoxCover c = BoxCover::full(g);
    const SystemFamily f = families::semistable();
    SampleFlow flow(c, f, 0.05, {});
    flow.advance(1.0).advance(2.0);
    EXPECT_EQ(flow.cover(), image(c, f, 0.05, 3.0));
}

TEST(Image, EscapeCarriesContext) {
    const GridSpec g({-1.0}, {1.0}, {4});
    try {
        image(BoxCover::full(g), constant_drift(), 0.0, 5.0);
        FAIL() << "expected DomainEscape";
    } catch (const DomainEscape& e) {
        EXPECT_EQ(e.lambda, std::vector<double>{0.0});
        ASSERT_EQ(e.cell.size(), 1u);
        ASSERT_EQ(e.sample.size(), 1u);
        EXPECT_EQ(e.cell[0], 0u);
        EXPECT_EQ(e.sample[0], -1.0);
    }
}

TEST(Image, DiscardsSamplesOutsideGridButInsideEscapeBox) {
    const GridSpec g({-1.0}, {1.0}, {8});
    std::size_t dropped = 0;
    const BoxCover img = image(BoxCover::full(g), constant_drift(), 0.0, 0.45, {}, &dropped);
    EXPECT_EQ(dropped, 4u);  // lattice points 0.55 < x <= 1 out of 17
    EXPECT_FALSE(img.is_empty());
    ImageSettings wide;
    wide.integrator.escape_box = Box{{-10.0}, {10.0}};
    EXPECT_THROW(image(BoxCover::full(g), constant_drift(), 0.0, 2.5, wide, &dropped), InternalError);
}

TEST(Image, RejectsBadArguments) {
    const GridSpec g = line_grid(16);
    EXPECT_THROW(image(BoxCover::empty(g), families::pitchfork(), 1.0, 1.0), UsageError);
    EXPECT_THROW(image(BoxCover::full(g), families::pitchfork(), 1.0, 0.0), UsageError);
    ImageSettings one_sample;
    one_sample.samples_per_axis = 1;
    EXPECT_THROW(image(BoxCover::full(g), families::pitchfork(), 1.0, 1.0, one_sample), UsageError);
    EXPECT_THROW(image(BoxCover::full(g), families::lorenz(), 1.0, 1.0), UsageError);
}

TEST(Attractor, PitchforkIntervalForPositiveLambda) {
    const GridSpec g = line_grid();
    const double w = g.cell_width();
    for (double lambda : {0.25, 1.0, 2.0}) {
        // One unit of lambda*t per step: expansion e at the origin keeps the
        // sample spacing below the fattening margin.
        const AttractorApprox a =
            approximate_attractor(families::pitchfork(), lambda, BoxCover::full(g), settings_for(g, 1.0 / lambda));
        const double r = std::sqrt(lambda);
        EXPECT_LE(hausdorff(a.cover, oracle::rasterize_interval(g, -r, r)), 2.0 * w) << lambda;
    }
}

TEST(Attractor, PitchforkPointForZeroLambda) {
    // Algebraic decay: each image step must bring x=3 within a cell of 0.
    const GridSpec g = line_grid(256);
    const double w = g.cell_width();
    const double t_step = 2.0 / (w * w);
    EXPECT_LT(oracle::pitchfork_flow(0.0, 3.0, t_step), 0.5 * w);
    const AttractorApprox a =
        approximate_attractor(families::pitchfork(), 0.0, BoxCover::full(g), settings_for(g, t_step, 0.1));
    EXPECT_LE(hausdorff(a.cover, cell_at(g, 0.0)), 2.0 * w);
}

TEST(Attractor, TraceInvariants) {
    const GridSpec g = line_grid();
    const AttractorSettings s = settings_for(g, 1.0);
    const AttractorApprox a = approximate_attractor(families::semistable(), 0.2, BoxCover::full(g), s);
    ASSERT_FALSE(a.trace.empty());
    EXPECT_FALSE(a.cover.is_empty());
    EXPECT_LE(a.trace.back().step_dist, s.tol);
    for (std::size_t n = 0; n < a.trace.size(); ++n) {
        EXPECT_EQ(a.trace[n].n, n + 1);
        EXPECT_GE(a.trace[n].step_dist, 0.0);
        if (n) { EXPECT_GT(a.trace[n].t, a.trace[n - 1].t); }
    }
    EXPECT_EQ(a.trace.back().cells, a.cover.count());
    EXPECT_LE(a.invariance_defect, s.tol + 2.0 * g.cell_width());
}

TEST(Attractor, IteratesApproachKnownAttractor) {
    const GridSpec g = line_grid();
    const BoxCover exact = oracle::rasterize_interval(g, -1.0, 1.0);
    std::vector<double> dist;
    approximate_attractor(families::pitchfork(), 1.0, BoxCover::full(g), settings_for(g, 1.0),
                          [&](const BoxCover& c, const TraceEntry&) { dist.push_back(hausdorff(c, exact)); });
    ASSERT_FALSE(dist.empty());
    EXPECT_LE(dist.back(), 4.0 * g.cell_width());
    EXPECT_GT(dist.front(), dist.back());
}

TEST(Attractor, LorenzStableOriginOnCoarseGrid) {
    const GridSpec g(Box{{-25.0, -25.0, -5.0}, {25.0, 25.0, 50.0}}, {16, 16, 16});
    AttractorSettings s = settings_for(g, 5.0, 0.02);
    const AttractorApprox a = approximate_attractor(families::lorenz(), 0.5, BoxCover::full(g), s);
    const State origin{0.0, 0.0, 0.0};
    EXPECT_LE(hausdorff(a.cover, BoxCover(g, {g.linear(containing_cell(g, origin))})), 2.0 * g.cell_width());
}

TEST(Attractor, NonConvergenceKeepsTrace) {
    const GridSpec g = line_grid();
    AttractorSettings s = settings_for(g, 0.1);
    s.max_iter = 3;
    try {
        approximate_attractor(families::pitchfork(), 1.0, BoxCover::full(g), s);
        FAIL() << "expected NonConvergence";
    } catch (const NonConvergence& e) {
        EXPECT_EQ(e.trace.size(), 3u);
        EXPECT_EQ(e.lambda, ParamPoint(1.0));
    }
}

TEST(Attractor, RejectsToleranceBelowOneCell) {
    const GridSpec g = line_grid();
    AttractorSettings s = settings_for(g, 1.0);
    s.tol = 0.5 * g.cell_width();
    EXPECT_THROW(approximate_attractor(families::pitchfork(), 1.0, BoxCover::full(g), s), UsageError);
}

TEST(AbsorbingTime, ImmediateWhenAlreadyInside) {
    const GridSpec g = line_grid();
    const BoxCover target = BoxCover::covering(g, Box{{-2.0}, {2.0}});
    const BoxCover source = BoxCover::covering(g, Box{{-1.5}, {1.5}});
    EXPECT_EQ(absorbing_time(families::pitchfork(), 1.0, source, target, 1.0, 10), 1u);
}

TEST(AbsorbingTime, PitchforkMatchesClosedForm) {
    const GridSpec g = line_grid();
    const double w = g.cell_width();
    const BoxCover d = BoxCover::covering(g, Box{{-1.5}, {1.5}});
    const BoxCover source = fatten(d, 1.0);
    const std::size_t n = absorbing_time(families::pitchfork(), 1.0, source, d, 1.0, 10);
    // Slowest point: the outermost sample, which must land a cell inside D.
    const double x_far = g.upper()[0];
    std::size_t oracle_n = 0;
    while (oracle::pitchfork_flow(1.0, x_far, static_cast<double>(oracle_n)) > 1.5 - w) ++oracle_n;
    EXPECT_LE(n, 10u);
    EXPECT_GE(n + 1, oracle_n);
    EXPECT_LE(n, oracle_n + 1);
}

TEST(AbsorbingTime, SemistableGhostPassage) {
    const GridSpec g = line_grid();
    const double lambda = -0.01;
    const BoxCover source = BoxCover::full(g);
    const BoxCover target = BoxCover::covering(g, Box{{-1.3}, {-0.7}});
    const SystemFamily f = families::semistable();
    EXPECT_THROW(absorbing_time(f, lambda, source, target, 1.0, 5), NotAbsorbed);

    const std::size_t n = absorbing_time(f, lambda, source, target, 1.0, 200);
    const double t_pass =
        oracle::passage_time([&](double x) { return oracle::semistable_rhs(lambda, x); }, 3.0, -0.7);
    // Bottleneck scale pi / sqrt(2 * 0.01) is about 22.
    EXPECT_GT(t_pass, 20.0);
    EXPECT_NEAR(static_cast<double>(n), t_pass, 2.0);
}

TEST(Invariance, ConvergedCoverIsNearlyInvariant) {
    const GridSpec g = line_grid();
    const AttractorApprox a =
        approximate_attractor(families::pitchfork(), 1.0, BoxCover::full(g), settings_for(g, 1.0));
    EXPECT_LE(check_invariance(a, families::pitchfork(), 1.0), 3.0 * g.cell_width());
}

TEST(Invariance, SingleEquilibriumCover) {
    const GridSpec g = line_grid();
    AttractorApprox a;
    a.lambda = 0.0;
    a.cover = cell_at(g, 0.0);
    for (double t : {0.5, 3.0, 40.0}) { EXPECT_LE(check_invariance(a, families::pitchfork(), t), 2.0 * g.cell_width()); }
}

TEST(Invariance, TruncatedCoverIsNotInvariant) {
    const GridSpec g = line_grid();
    AttractorApprox a;
    a.lambda = 1.0;
    a.cover = BoxCover::covering(g, Box{{-0.5}, {1.0}});
    // Closed form: -0.5 reaches about -0.84 at t = 1.
    const double moved = 0.5 - std::abs(oracle::pitchfork_flow(1.0, -0.5, 1.0));
    EXPECT_LT(moved, -0.3);
    EXPECT_GT(check_invariance(a, families::pitchfork(), 1.0), 5.0 * g.cell_width());
    EXPECT_NEAR(check_invariance(a, families::pitchfork(), 1.0), -moved, 2.0 * g.cell_width());
}

TEST(Invariance, HalfIntervalEndingAtEquilibriumIsInvariant) {
    // [-1, 0] is bounded by equilibria, so it is itself invariant.
    const GridSpec g = line_grid();
    AttractorApprox a;
    a.lambda = 1.0;
    a.cover = BoxCover::covering(g, Box{{-1.0}, {0.0}});
    EXPECT_LE(check_invariance(a, families::pitchfork(), 1.0), 2.0 * g.cell_width());
}
