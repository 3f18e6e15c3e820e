// Box cover of the Lorenz attractor at rho = 28 on a 64^3 grid, written in
// the cover dump format.

#include <fstream>
#include <iostream>

#include "attrlab/attractor.hpp"

int main(int argc, char** argv) {
    using namespace attrlab;
    const SystemFamily lorenz = families::lorenz();
    const GridSpec grid(lorenz.default_domain, {64, 64, 64});

    AttractorSettings s;
    s.t_step = 0.5;
    s.tol = 2.0 * grid.cell_width();

    const AttractorApprox a = approximate_attractor(lorenz, 28.0, BoxCover::full(grid), s,
                                                    [](const BoxCover&, const TraceEntry& e) {
                                                        std::cerr << "n=" << e.n << " cells=" << e.cells
                                                                  << " step=" << e.step_dist << '\n';
                                                    });
    std::cerr << a.cover.count() << " cells, invariance defect " << a.invariance_defect << '\n';

    if (argc > 1) {
        std::ofstream os(argv[1]);
        write_cover(os, a.cover);
    }
}
