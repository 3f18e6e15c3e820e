#pragma once

// Parameter-sweep analytics for lambda -> A_lambda: pairwise distances along a
// 1-D parameter grid, upper/lower semicontinuity deviations, the
// equi-attraction curve, monotone (Dini) convergence checks, and the
// 3*delta oscillation scan.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "attrlab/attractor.hpp"
#include "attrlab/boxset.hpp"
#include "attrlab/errors.hpp"
#include "attrlab/flow.hpp"
#include "attrlab/parallel.hpp"

namespace attrlab {

/// Finite set of parameter values, normally a uniform grid including both ends.
class ParamGrid {
public:
    static ParamGrid uniform(double lo, double hi, std::size_t m) {
        if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
            throw UsageError("parameter grid: need lambda_min < lambda_max");
        if (m < 2) throw UsageError("parameter grid: need at least 2 points");
        ParamGrid g;
        g.points_.resize(m);
        for (std::size_t i = 0; i < m; ++i)
            g.points_[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(m - 1);
        g.points_.back() = hi;
        return g;
    }

    /// Arbitrary list, e.g. a single parameter or a repeated one.
    static ParamGrid from_points(std::vector<double> pts) {
        if (pts.empty()) throw UsageError("parameter grid: empty point list");
        for (double p : pts)
            if (!std::isfinite(p)) throw UsageError("parameter grid: non-finite point");
        ParamGrid g;
        g.points_ = std::move(pts);
        return g;
    }

    std::size_t size() const noexcept { return points_.size(); }
    double operator[](std::size_t i) const { return points_[i]; }
    const std::vector<double>& points() const noexcept { return points_; }

    /// Index of the grid point closest to `value`.
    std::size_t nearest(double value) const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < points_.size(); ++i)
            if (std::abs(points_[i] - value) < std::abs(points_[best] - value)) best = i;
        return best;
    }

private:
    std::vector<double> points_;
};

struct DistEntry {
    std::size_t i = 0;
    std::size_t j = 0;
    double dH = 0.0;
    double rho_ij = 0.0;  ///< rho(A_i, A_j)
    double rho_ji = 0.0;  ///< rho(A_j, A_i)
};

struct SweepFailure {
    std::size_t index;
    double lambda;
    std::string kind;
    std::string message;
};

struct SweepResult {
    ParamGrid grid;
    std::size_t window = 1;
    std::vector<std::optional<AttractorApprox>> approxs;
    std::map<std::pair<std::size_t, std::size_t>, DistEntry> dist;  ///< keyed by (i, j) with i < j
    std::vector<SweepFailure> failures;

    /// Entry oriented so that rho_ij = rho(A_i, A_j). Diagonal is zero.
    std::optional<DistEntry> distance(std::size_t i, std::size_t j) const {
        if (i == j) {
            if (!approxs.at(i)) return std::nullopt;
            return DistEntry{i, i, 0.0, 0.0, 0.0};
        }
        auto it = dist.find({std::min(i, j), std::max(i, j)});
        if (it == dist.end()) return std::nullopt;
        DistEntry e = it->second;
        if (i > j) {
            std::swap(e.i, e.j);
            std::swap(e.rho_ij, e.rho_ji);
        }
        return e;
    }
};

namespace detail {

inline std::string failure_kind(const std::exception& e) {
    if (dynamic_cast<const NonConvergence*>(&e)) return "NonConvergence";
    if (dynamic_cast<const DomainEscape*>(&e)) return "DomainEscape";
    if (dynamic_cast<const NotAbsorbed*>(&e)) return "NotAbsorbed";
    if (dynamic_cast<const InternalError*>(&e)) return "InternalError";
    return "Error";
}

/// Work split for a parameter loop: parallel across parameters, serial inside.
inline ImageSettings inner_settings(ImageSettings s, unsigned outer_threads) {
    if (outer_threads > 1) s.threads = 1;
    return s;
}

}  // namespace detail

/// Runs approximate_attractor at every grid point and fills d_H, rho for all
/// pairs with |i - j| <= window. Individual failures are recorded.
inline SweepResult sweep(const SystemFamily& family, const ParamGrid& grid, const BoxCover& seed,
                         const AttractorSettings& settings, std::size_t window, unsigned threads = 1) {
    if (seed.is_empty()) throw UsageError("sweep: seed cover is empty");
    validate(settings, seed.grid());
    SweepResult out;
    out.grid = grid;
    out.window = window;
    out.approxs.resize(grid.size());

    AttractorSettings inner = settings;
    inner.image = detail::inner_settings(settings.image, threads);
    std::vector<std::optional<SweepFailure>> failed(grid.size());
    parallel_for(
        grid.size(), threads,
        [&](std::size_t i) {
            try {
                out.approxs[i] = approximate_attractor(family, grid[i], seed, inner);
            } catch (const UsageError&) {
                throw;
            } catch (const Error& e) {
                failed[i] = SweepFailure{i, grid[i], detail::failure_kind(e), e.what()};
            }
        },
        1);
    for (auto& f : failed)
        if (f) out.failures.push_back(std::move(*f));
    if (out.failures.size() == grid.size()) throw AllFailed("sweep: every grid point failed");

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (std::size_t j = i + 1; j < grid.size() && j - i <= window; ++j)
            if (out.approxs[i] && out.approxs[j]) pairs.emplace_back(i, j);
    std::vector<DistEntry> entries(pairs.size());
    parallel_for(
        pairs.size(), threads,
        [&](std::size_t k) {
            const auto [i, j] = pairs[k];
            const BoxCover& a = out.approxs[i]->cover;
            const BoxCover& b = out.approxs[j]->cover;
            DistEntry e{i, j, 0.0, semi_distance(a, b), semi_distance(b, a)};
            e.dH = std::max(e.rho_ij, e.rho_ji);
            entries[k] = e;
        },
        1);
    for (const auto& e : entries) out.dist[{e.i, e.j}] = e;
    return out;
}

struct NeighborDeviation {
    std::size_t j;
    double lambda_j;
    std::optional<double> upper;  ///< rho(A_j, A_i); vanishes as lambda_j -> lambda_i under upper semicontinuity
    std::optional<double> lower;  ///< rho(A_i, A_j)
};

/// Deviations of the neighbours of grid point i within the sweep window,
/// including i itself. Missing attractors leave gaps (nullopt).
inline std::vector<NeighborDeviation> continuity_moduli(const SweepResult& sr, std::size_t i,
                                                        std::optional<std::size_t> window = std::nullopt) {
    if (i >= sr.grid.size()) throw UsageError("continuity_moduli: index out of range");
    const std::size_t w = window.value_or(sr.window);
    if (w > sr.window) throw UsageError("continuity_moduli: window exceeds the sweep's distance window");
    std::vector<NeighborDeviation> out;
    const std::size_t lo = i >= w ? i - w : 0;
    const std::size_t hi = std::min(sr.grid.size() - 1, i + w);
    for (std::size_t j = lo; j <= hi; ++j) {
        NeighborDeviation nd{j, sr.grid[j], std::nullopt, std::nullopt};
        if (auto e = sr.distance(i, j)) {
            nd.upper = e->rho_ji;
            nd.lower = e->rho_ij;
        }
        out.push_back(nd);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Equi-attraction

struct EquiAttractionCurve {
    std::vector<double> times;
    /// e(t_n) = max_i rho(image(D, t_n, lambda_i), A_i) over surviving parameters.
    std::vector<double> values;
    /// Grid index attaining the max at each time (smallest on ties).
    std::vector<std::size_t> argmax;
    /// per_lambda[i][n] = rho(image(D, t_n, lambda_i), A_i); empty row if lambda_i failed.
    std::vector<std::vector<double>> per_lambda;
    std::vector<SweepFailure> failures;
    std::size_t survivors = 0;
    std::string coverage_note;
};

namespace detail {

inline void check_times(const std::vector<double>& times) {
    if (times.empty()) throw UsageError("equi_attraction_curve: empty times list");
    double prev = 0.0;
    for (double t : times) {
        if (!(t > prev)) throw UsageError("equi_attraction_curve: times must be positive and increasing");
        prev = t;
    }
}

}  // namespace detail

/// Equi-attraction curve against precomputed attractors (a sweep). Images are
/// advanced incrementally: the cover at t_{n+1} is the image of the cover at t_n.
inline EquiAttractionCurve equi_attraction_curve(const SystemFamily& family, const SweepResult& attractors,
                                                 const BoxCover& seed, const std::vector<double>& times,
                                                 const ImageSettings& settings, unsigned threads = 1) {
    detail::check_times(times);
    const ParamGrid& grid = attractors.grid;
    EquiAttractionCurve out;
    out.times = times;
    out.per_lambda.resize(grid.size());
    out.failures = attractors.failures;

    const ImageSettings inner = detail::inner_settings(settings, threads);
    std::vector<std::optional<SweepFailure>> failed(grid.size());
    parallel_for(
        grid.size(), threads,
        [&](std::size_t i) {
            if (!attractors.approxs[i]) return;
            const BoxCover& target = attractors.approxs[i]->cover;
            std::vector<double> row;
            try {
                BoxCover c = seed;
                double t_prev = 0.0;
                for (double t : times) {
                    c = image(c, family, grid[i], t - t_prev, inner);
                    t_prev = t;
                    row.push_back(semi_distance(c, target));
                }
                out.per_lambda[i] = std::move(row);
            } catch (const UsageError&) {
                throw;
            } catch (const Error& e) {
                failed[i] = SweepFailure{i, grid[i], detail::failure_kind(e), e.what()};
            }
        },
        1);
    for (auto& f : failed)
        if (f) out.failures.push_back(std::move(*f));
    std::sort(out.failures.begin(), out.failures.end(),
              [](const SweepFailure& a, const SweepFailure& b) { return a.index < b.index; });

    for (const auto& row : out.per_lambda)
        if (!row.empty()) ++out.survivors;
    if (out.survivors == 0) throw AllFailed("equi_attraction_curve: no parameter survived");
    out.coverage_note = std::to_string(out.survivors) + " of " + std::to_string(grid.size()) + " parameters";

    for (std::size_t n = 0; n < times.size(); ++n) {
        double best = -1.0;
        std::size_t arg = 0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (out.per_lambda[i].empty()) continue;
            if (out.per_lambda[i][n] > best) {
                best = out.per_lambda[i][n];
                arg = i;
            }
        }
        out.values.push_back(best);
        out.argmax.push_back(arg);
    }
    return out;
}

/// Computes the attractors first (a sweep with window 0), then the curve.
inline EquiAttractionCurve equi_attraction_curve(const SystemFamily& family, const ParamGrid& grid,
                                                 const BoxCover& seed, const std::vector<double>& times,
                                                 const AttractorSettings& settings, unsigned threads = 1) {
    detail::check_times(times);
    const SweepResult sr = sweep(family, grid, seed, settings, 0, threads);
    return equi_attraction_curve(family, sr, seed, times, settings.image, threads);
}

// ---------------------------------------------------------------------------
// Common absorbing time and Dini monotonicity

/// D_1: cells within distance 1 of D.
inline BoxCover unit_neighborhood(const BoxCover& d) { return fatten(d, 1.0); }

struct SelectTResult {
    double T = 0.0;
    std::vector<std::size_t> steps;  ///< n(lambda_i)
    std::string note;
};

/// Common time T with image(D_1, T) inside D_1 for every grid parameter:
/// T = t_unit * max_i n(lambda_i), where n is the absorbing time of D_1 into
/// itself, followed by a direct re-check at every lambda.
inline SelectTResult select_T(const SystemFamily& family, const ParamGrid& grid, const BoxCover& d, double t_unit,
                              std::size_t max_steps, const ImageSettings& settings = {}, unsigned threads = 1) {
    const BoxCover d1 = unit_neighborhood(d);
    const ImageSettings inner = detail::inner_settings(settings, threads);
    SelectTResult out;
    out.steps.resize(grid.size());
    parallel_for(
        grid.size(), threads,
        [&](std::size_t i) { out.steps[i] = absorbing_time(family, grid[i], d1, d1, t_unit, max_steps, inner); }, 1);
    const std::size_t n_max = *std::max_element(out.steps.begin(), out.steps.end());
    out.T = t_unit * static_cast<double>(n_max);

    std::vector<std::uint8_t> ok(grid.size(), 0);
    parallel_for(
        grid.size(), threads, [&](std::size_t i) { ok[i] = subset(image(d1, family, grid[i], out.T, inner), d1); },
        1);
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (!ok[i])
            throw NotAbsorbed("select_T: common time " + format_double(out.T) + " fails at lambda=" +
                                  format_double(grid[i]),
                              {grid[i]});
    out.note = "common time = t_unit * max_i n(lambda_i) = " + format_double(t_unit) + " * " +
               std::to_string(n_max) + ", re-verified at every grid point";
    return out;
}

struct DiniRow {
    std::size_t n;
    double dH_to_final;
    bool subset_ok;  ///< image(D_1, nT) inside image(D_1, (n-1)T)
};

struct DiniLambda {
    double lambda;
    std::vector<DiniRow> rows;
    double max_violation = 0.0;  ///< largest increase of dH_to_final between consecutive n
    bool nested = true;
    std::optional<SweepFailure> failure;
};

struct DiniReport {
    enum class Status { ok, unabsorbed, failed };
    Status status = Status::ok;
    std::optional<double> unabsorbed_lambda;
    double T = 0.0;
    std::vector<DiniLambda> per_lambda;
    double max_violation = 0.0;
    bool all_nested = true;

    /// Nested chain everywhere and dH_to_final non-increasing within `slack`.
    bool passed(double slack) const {
        return status == Status::ok && all_nested && max_violation <= slack;
    }
};

/// Checks, for every grid parameter, that the iterates C_n = image(C_{n-1}, T)
/// from C_0 = D_1 form a nested chain and that d_H(C_n, A) is non-increasing,
/// where A is the converged limit of the same chain. Stops with status
/// `unabsorbed` if image(D_1, T) is not inside D_1 at some parameter.
inline DiniReport dini_check(const SystemFamily& family, const ParamGrid& grid, const BoxCover& d, double T,
                             std::size_t iterations, const AttractorSettings& settings, unsigned threads = 1) {
    if (!(T > 0.0)) throw UsageError("dini_check: T must be positive");
    if (iterations == 0) throw UsageError("dini_check: need at least one iteration");
    const BoxCover d1 = unit_neighborhood(d);
    AttractorSettings inner = settings;
    inner.t_step = T;
    inner.image = detail::inner_settings(settings.image, threads);
    validate(inner, d.grid());

    DiniReport report;
    report.T = T;

    std::vector<std::uint8_t> absorbed(grid.size(), 0);
    std::vector<std::optional<SweepFailure>> early(grid.size());
    parallel_for(
        grid.size(), threads,
        [&](std::size_t i) {
            try {
                absorbed[i] = subset(image(d1, family, grid[i], T, inner.image), d1);
            } catch (const UsageError&) {
                throw;
            } catch (const Error& e) {
                early[i] = SweepFailure{i, grid[i], detail::failure_kind(e), e.what()};
            }
        },
        1);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (early[i]) {
            report.status = DiniReport::Status::failed;
            DiniLambda dl{grid[i], {}, 0.0, false, early[i]};
            report.per_lambda.push_back(dl);
            return report;
        }
        if (!absorbed[i]) {
            report.status = DiniReport::Status::unabsorbed;
            report.unabsorbed_lambda = grid[i];
            return report;
        }
    }

    report.per_lambda.resize(grid.size());
    parallel_for(
        grid.size(), threads,
        [&](std::size_t i) {
            DiniLambda& out = report.per_lambda[i];
            out.lambda = grid[i];
            try {
                std::vector<BoxCover> chain;
                chain.reserve(iterations);
                const auto keep = [&](const BoxCover& c, const TraceEntry&) {
                    if (chain.size() < iterations) chain.push_back(c);
                };
                const AttractorApprox limit = approximate_attractor(family, grid[i], d1, inner, keep);
                while (chain.size() < iterations)
                    chain.push_back(image(chain.empty() ? d1 : chain.back(), family, grid[i], T, inner.image));

                const BoxCover* prev = &d1;
                for (std::size_t n = 0; n < chain.size(); ++n) {
                    const bool nested = subset(chain[n], *prev);
                    out.nested = out.nested && nested;
                    out.rows.push_back({n + 1, hausdorff(chain[n], limit.cover), nested});
                    if (n > 0)
                        out.max_violation =
                            std::max(out.max_violation, out.rows[n].dH_to_final - out.rows[n - 1].dH_to_final);
                    prev = &chain[n];
                }
            } catch (const UsageError&) {
                throw;
            } catch (const Error& e) {
                out.failure = SweepFailure{i, grid[i], detail::failure_kind(e), e.what()};
                out.nested = false;
            }
        },
        1);

    for (const auto& dl : report.per_lambda) {
        if (dl.failure) report.status = DiniReport::Status::failed;
        report.all_nested = report.all_nested && dl.nested;
        report.max_violation = std::max(report.max_violation, dl.max_violation);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Oscillation scan

struct ScanPoint {
    double lambda;
    std::optional<double> osc;  ///< max windowed d_H; nullopt if this point failed
    bool flagged = false;
    std::size_t neighbors_used = 0;
    std::size_t gaps = 0;  ///< neighbours in the window without an attractor
    std::vector<NeighborDeviation> deviations;
};

struct ContinuityReport {
    double delta = 0.0;
    std::size_t window = 1;
    std::vector<ScanPoint> points;
    std::size_t flagged = 0;
    double flagged_fraction = 0.0;
};

/// Flags grid point i when max_{|j-i|<=w} d_H(A_i, A_j) >= 3*delta.
inline ContinuityReport discontinuity_scan(const SweepResult& sr, double delta, std::size_t window) {
    double w_cell = 0.0;
    for (const auto& a : sr.approxs)
        if (a) {
            w_cell = a->cover.grid().cell_width();
            break;
        }
    if (!(delta >= 2.0 * w_cell * (1.0 - 1e-12)) || !std::isfinite(delta))
        throw UsageError("discontinuity_scan: delta must be at least two cell widths");
    if (window > sr.window) throw UsageError("discontinuity_scan: window exceeds the sweep's distance window");

    ContinuityReport rep;
    rep.delta = delta;
    rep.window = window;
    for (std::size_t i = 0; i < sr.grid.size(); ++i) {
        ScanPoint p;
        p.lambda = sr.grid[i];
        p.deviations = continuity_moduli(sr, i, window);
        if (sr.approxs[i]) {
            double osc = 0.0;
            for (const auto& nd : p.deviations) {
                if (nd.j == i) continue;
                if (!nd.upper) {
                    ++p.gaps;
                    continue;
                }
                ++p.neighbors_used;
                osc = std::max({osc, *nd.upper, *nd.lower});
            }
            p.osc = osc;
            p.flagged = osc >= 3.0 * delta;
        }
        if (p.flagged) ++rep.flagged;
        rep.points.push_back(std::move(p));
    }
    rep.flagged_fraction = static_cast<double>(rep.flagged) / static_cast<double>(sr.grid.size());
    return rep;
}

}  // namespace attrlab
