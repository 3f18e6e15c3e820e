#pragma once

// Forward images S_lambda(t)C of box covers, and the fixed-point iteration
// C_{n+1} = image(C_n, t_step) that approximates the global attractor as the
// limit of images of an absorbing seed set.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "attrlab/boxset.hpp"
#include "attrlab/errors.hpp"
#include "attrlab/flow.hpp"
#include "attrlab/parallel.hpp"

namespace attrlab {

struct ImageSettings {
    /// Sample lattice points per axis inside each cell, corners included.
    /// 0 selects the dimension default: 3 for d <= 2, 2 otherwise.
    std::size_t samples_per_axis = 0;
    /// If the escape box is unset, the grid domain widened by 50% per side is used.
    IntegratorConfig integrator;
    unsigned threads = 1;

    std::size_t samples_for(std::size_t dim) const {
        if (samples_per_axis != 0) return samples_per_axis;
        return dim <= 2 ? 3 : 2;
    }
};

/// Sample points of a cover carried forward in time. Neighbouring cells share
/// their corner samples, so every lattice point is integrated once.
///
/// Advancing by t1 and then t2 gives bit-identical positions to advancing by
/// t1 + t2 whenever t1 is a whole number of integrator steps.
class SampleFlow {
public:
    SampleFlow(const BoxCover& source, const SystemFamily& family, const ParamPoint& lambda,
               const ImageSettings& settings)
        : grid_(source.grid()), family_(&family), lambda_(lambda), settings_(settings) {
        check_param(family, lambda);
        validate(family, settings.integrator);
        if (family.state_dim != grid_.dim()) throw UsageError("image: grid dimension does not match the family");
        if (source.is_empty()) throw UsageError("image: source cover is empty");
        k_ = settings.samples_for(grid_.dim());
        if (k_ < 2) throw UsageError("image: samples_per_axis must be at least 2");
        escape_ = settings.integrator.escape_box ? *settings.integrator.escape_box : grid_.domain().widened(0.5);
        if (escape_.dim() != grid_.dim()) throw UsageError("image: escape box dimension mismatch");

        const std::size_t d = grid_.dim();
        fine_dims_.resize(d);
        std::uint64_t fine_total = 1;
        for (std::size_t i = 0; i < d; ++i) {
            fine_dims_[i] = grid_.cells_per_axis()[i] * (k_ - 1) + 1;
            fine_total *= fine_dims_[i];
        }
        if (fine_total > (std::uint64_t{1} << 32)) throw UsageError("image: sample lattice too large");

        std::vector<std::uint8_t> mark(fine_total, 0);
        std::vector<std::size_t> fine(d), s(d);
        for (std::uint64_t lin : source.cells()) {
            const CellIndex c = grid_.multi(lin);
            std::fill(s.begin(), s.end(), 0);
            for (;;) {
                std::uint64_t f = 0;
                for (std::size_t i = 0; i < d; ++i) f = f * fine_dims_[i] + c[i] * (k_ - 1) + s[i];
                mark[f] = 1;
                std::size_t axis = d;
                while (axis-- > 0) {
                    if (++s[axis] < k_) break;
                    s[axis] = 0;
                }
                if (axis == static_cast<std::size_t>(-1)) break;
            }
        }
        for (std::uint64_t f = 0; f < fine_total; ++f)
            if (mark[f]) fine_ids_.push_back(f);

        positions_.resize(fine_ids_.size() * d);
        for (std::size_t p = 0; p < fine_ids_.size(); ++p) {
            const auto fi = fine_multi(fine_ids_[p]);
            for (std::size_t i = 0; i < d; ++i) positions_[p * d + i] = lattice_coord(i, fi[i]);
        }
    }

    std::size_t sample_count() const noexcept { return fine_ids_.size(); }
    double elapsed() const noexcept { return elapsed_; }

    SampleFlow& advance(double t) {
        if (!(t > 0.0) || !std::isfinite(t)) throw UsageError("image: time must be positive");
        const std::size_t d = grid_.dim();
        std::vector<EvolveOutcome> outcome(sample_count());
        parallel_for(
            sample_count(), settings_.threads,
            [&](std::size_t p) {
                std::span<double> x(positions_.data() + p * d, d);
                outcome[p] = evolve_in_place(*family_, lambda_.coords, x, t, settings_.integrator.dt, escape_);
            },
            16);
        for (std::size_t p = 0; p < outcome.size(); ++p) {
            if (outcome[p].status == EvolveStatus::escaped) throw escape_error(p, elapsed_ + outcome[p].exit_time);
        }
        elapsed_ += t;
        return *this;
    }

    /// Cells hit by the current sample positions, fattened by one cell.
    /// Samples outside the grid but inside the escape box are dropped and counted.
    BoxCover cover(std::size_t* discarded = nullptr) const {
        const std::size_t d = grid_.dim();
        std::vector<std::uint8_t> bits(grid_.total_cells(), 0);
        std::size_t dropped = 0;
        for (std::size_t p = 0; p < sample_count(); ++p) {
            auto idx = try_containing_cell(grid_, std::span<const double>(positions_.data() + p * d, d));
            if (!idx) {
                ++dropped;
                continue;
            }
            bits[grid_.linear(*idx)] = 1;
        }
        if (discarded) *discarded = dropped;
        BoxCover hits = BoxCover::from_bitmap(grid_, std::move(bits));
        if (hits.is_empty()) throw InternalError("image: every sample left the grid domain");
        return fatten_cells(hits, std::vector<std::size_t>(d, 1));
    }

private:
    std::vector<std::size_t> fine_multi(std::uint64_t f) const {
        std::vector<std::size_t> fi(grid_.dim());
        for (std::size_t i = grid_.dim(); i-- > 0;) {
            fi[i] = static_cast<std::size_t>(f % fine_dims_[i]);
            f /= fine_dims_[i];
        }
        return fi;
    }

    double lattice_coord(std::size_t axis, std::size_t f) const {
        const double lo = grid_.lower()[axis];
        const double hi = grid_.upper()[axis];
        if (f + 1 == fine_dims_[axis]) return hi;
        return lo + static_cast<double>(f) * (hi - lo) / static_cast<double>(fine_dims_[axis] - 1);
    }

    DomainEscape escape_error(std::size_t p, double when) const {
        const std::size_t d = grid_.dim();
        const auto fi = fine_multi(fine_ids_[p]);
        CellIndex cell(d);
        State sample(d);
        for (std::size_t i = 0; i < d; ++i) {
            cell[i] = std::min(fi[i] / (k_ - 1), grid_.cells_per_axis()[i] - 1);
            sample[i] = lattice_coord(i, fi[i]);
        }
        State where(positions_.begin() + static_cast<std::ptrdiff_t>(p * d),
                    positions_.begin() + static_cast<std::ptrdiff_t>((p + 1) * d));
        std::string msg = family_->name + ": sample left the escape box at t=" + format_double(when) +
                          " (lambda=" + format_double(lambda_.coords.at(0)) + ", sample=(";
        for (std::size_t i = 0; i < d; ++i) msg += (i ? "," : "") + format_double(sample[i]);
        msg += "))";
        DomainEscape e(msg, when, std::move(where));
        e.lambda = lambda_.coords;
        e.cell = std::move(cell);
        e.sample = std::move(sample);
        return e;
    }

    GridSpec grid_;
    const SystemFamily* family_;
    ParamPoint lambda_;
    ImageSettings settings_;
    Box escape_;
    std::size_t k_ = 0;
    std::vector<std::size_t> fine_dims_;
    std::vector<std::uint64_t> fine_ids_;
    std::vector<double> positions_;
    double elapsed_ = 0.0;
};

/// Point-sampled forward image of C at time t, fattened by one cell.
inline BoxCover image(const BoxCover& c, const SystemFamily& family, const ParamPoint& lambda, double t,
                      const ImageSettings& settings = {}, std::size_t* discarded = nullptr) {
    if (!(t > 0.0)) throw UsageError("image: time must be positive");
    SampleFlow flow(c, family, lambda, settings);
    flow.advance(t);
    return flow.cover(discarded);
}

// ---------------------------------------------------------------------------

struct TraceEntry {
    std::size_t n;
    double t;
    double step_dist;
    std::size_t cells;
};

using ConvergenceTrace = std::vector<TraceEntry>;

struct AttractorSettings {
    double t_step = 1.0;
    /// Absolute stopping tolerance on d_H(C_{n+1}, C_n); at least one cell width.
    double tol = 0.0;
    std::size_t max_iter = 500;
    /// Consecutive sub-tolerance steps required to stop.
    std::size_t consecutive = 3;
    ImageSettings image;
};

struct AttractorApprox {
    ParamPoint lambda;
    BoxCover cover;
    ConvergenceTrace trace;
    double t_total = 0.0;
    AttractorSettings settings;
    /// d_H(image(cover, t_step), cover) measured by the post-convergence check.
    double invariance_defect = 0.0;
    std::size_t discarded_samples = 0;
};

class NonConvergence : public Error {
public:
    NonConvergence(std::string what, ParamPoint lambda, ConvergenceTrace trace)
        : Error(std::move(what)), lambda(std::move(lambda)), trace(std::move(trace)) {}
    ParamPoint lambda;
    ConvergenceTrace trace;
};

using IterateObserver = std::function<void(const BoxCover&, const TraceEntry&)>;

inline void validate(const AttractorSettings& s, const GridSpec& grid) {
    if (!(s.t_step > 0.0)) throw UsageError("attractor: t_step must be positive");
    if (!(s.tol >= grid.cell_width() * (1.0 - 1e-12)))
        throw UsageError("attractor: tol must be at least one cell width");
    if (s.consecutive == 0) throw UsageError("attractor: consecutive must be positive");
    if (s.max_iter == 0) throw UsageError("attractor: max_iter must be positive");
}

/// Iterates C_{n+1} = image(C_n, t_step) from the seed until m consecutive
/// steps move less than tol in d_H, then checks the invariance defect of the
/// final cover against tol + 2 cells. A failed check keeps iterating.
inline AttractorApprox approximate_attractor(const SystemFamily& family, const ParamPoint& lambda,
                                             const BoxCover& seed, const AttractorSettings& settings,
                                             const IterateObserver& observer = {}) {
    validate(settings, seed.grid());
    if (seed.is_empty()) throw UsageError("attractor: seed cover is empty");
    const double w = seed.grid().cell_width();
    const unsigned threads = settings.image.threads;

    AttractorApprox out;
    out.lambda = lambda;
    out.settings = settings;

    BoxCover current = seed;
    double t = 0.0;
    std::size_t streak = 0;
    for (std::size_t n = 1; n <= settings.max_iter; ++n) {
        std::size_t dropped = 0;
        BoxCover next = image(current, family, lambda, settings.t_step, settings.image, &dropped);
        const double step = hausdorff(next, current, threads);
        t += settings.t_step;
        out.discarded_samples += dropped;

        if (streak >= settings.consecutive) {
            // `next` is the invariance check for `current`.
            if (step <= settings.tol + 2.0 * w) {
                out.cover = std::move(current);
                out.t_total = t - settings.t_step;
                out.invariance_defect = step;
                return out;
            }
            streak = 0;
        }

        const TraceEntry entry{n, t, step, next.count()};
        out.trace.push_back(entry);
        if (observer) observer(next, entry);
        streak = step <= settings.tol ? streak + 1 : 0;
        current = std::move(next);
    }
    if (streak >= settings.consecutive) {
        // Converged on the last allowed iteration; the invariance check is extra.
        const BoxCover check = image(current, family, lambda, settings.t_step, settings.image);
        const double defect = hausdorff(check, current, threads);
        if (defect <= settings.tol + 2.0 * w) {
            out.cover = std::move(current);
            out.t_total = t;
            out.invariance_defect = defect;
            return out;
        }
    }
    throw NonConvergence(family.name + ": no convergence after " + std::to_string(settings.max_iter) +
                             " iterations (lambda=" + format_double(lambda.coords.at(0)) + ")",
                         lambda, std::move(out.trace));
}

/// Smallest n <= max_steps such that the images of `source` at n*t_unit and
/// (n+1)*t_unit both lie inside `target`.
inline std::size_t absorbing_time(const SystemFamily& family, const ParamPoint& lambda, const BoxCover& source,
                                  const BoxCover& target, double t_unit, std::size_t max_steps,
                                  const ImageSettings& settings = {}) {
    require_same_grid(source, target, "absorbing_time");
    if (target.is_empty()) throw UsageError("absorbing_time: target cover is empty");
    if (!(t_unit > 0.0)) throw UsageError("absorbing_time: t_unit must be positive");
    SampleFlow flow(source, family, lambda, settings);
    flow.advance(t_unit);
    bool inside_prev = subset(flow.cover(), target);
    for (std::size_t n = 1; n <= max_steps; ++n) {
        flow.advance(t_unit);
        const bool inside_next = subset(flow.cover(), target);
        if (inside_prev && inside_next) return n;
        inside_prev = inside_next;
    }
    throw NotAbsorbed(family.name + ": source not absorbed into target within " + std::to_string(max_steps) +
                          " steps (lambda=" + format_double(lambda.coords.at(0)) + ")",
                      lambda.coords);
}

inline double check_invariance(const AttractorApprox& a, const SystemFamily& family, double t,
                               const ImageSettings& settings) {
    if (!(t > 0.0)) throw UsageError("check_invariance: t must be positive");
    return hausdorff(image(a.cover, family, a.lambda, t, settings), a.cover, settings.threads);
}

inline double check_invariance(const AttractorApprox& a, const SystemFamily& family, double t) {
    return check_invariance(a, family, t, a.settings.image);
}

}  // namespace attrlab
