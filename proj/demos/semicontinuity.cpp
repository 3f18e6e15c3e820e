// Upper and lower deviations of the semistable family's attractors around
// the saddle-node at lambda = 0. The upper deviation stays small while the
// lower one jumps: the attractor is upper but not lower semicontinuous there.

#include <cstdio>

#include "attrlab/continuity.hpp"

int main() {
    using namespace attrlab;
    const GridSpec grid({-3.0}, {3.0}, {2048});
    AttractorSettings s;
    s.t_step = 1.0;
    s.tol = 2.0 * grid.cell_width();

    const ParamGrid params = ParamGrid::uniform(-0.2, 0.2, 9);
    const SweepResult sr = sweep(families::semistable(), params, BoxCover::full(grid), s, 1);

    std::printf("%10s %10s %10s %10s\n", "lambda", "cells", "upper", "lower");
    for (std::size_t i = 0; i + 1 < params.size(); ++i) {
        // lambda_0 = params[i + 1], neighbour params[i]
        const auto d = sr.distance(i + 1, i);
        std::printf("%10.3f %10zu %10.4f %10.4f\n", params[i + 1], sr.approxs[i + 1]->cover.count(), d->rho_ji,
                    d->rho_ij);
    }

    const ContinuityReport rep = discontinuity_scan(sr, 0.3, 1);
    std::printf("\nflagged at delta=0.3:");
    for (const auto& p : rep.points)
        if (p.flagged) std::printf(" %.3f", p.lambda);
    std::printf("\n");
}
