#pragma once

// Finite unions of grid cells over a rectangular domain, with the
// semi-distance rho(A, B) = max_a min_b |a - b| and the symmetric Hausdorff
// distance d_H(A, B) = max(rho(A, B), rho(B, A)). Distances are measured
// between cell centers in the sup metric.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "attrlab/errors.hpp"
#include "attrlab/flow.hpp"
#include "attrlab/parallel.hpp"

namespace attrlab {

using CellIndex = std::vector<std::size_t>;

inline constexpr std::uint64_t kMaxGridCells = std::uint64_t{1} << 28;

class GridSpec {
public:
    GridSpec() = default;

    GridSpec(std::vector<double> lower, std::vector<double> upper, std::vector<std::size_t> cells)
        : lower_(std::move(lower)), upper_(std::move(upper)), cells_(std::move(cells)) {
        if (lower_.empty() || lower_.size() != upper_.size() || lower_.size() != cells_.size())
            throw UsageError("grid: lower, upper and cells_per_axis must have the same nonzero length");
        total_ = 1;
        for (std::size_t i = 0; i < dim(); ++i) {
            if (!std::isfinite(lower_[i]) || !std::isfinite(upper_[i]) || !(lower_[i] < upper_[i]))
                throw UsageError("grid: need lower < upper on every axis");
            if (cells_[i] == 0) throw UsageError("grid: cells_per_axis must be positive");
            if (!(width(i) > 0.0)) throw UsageError("grid: degenerate cell width");
            if (total_ > kMaxGridCells / cells_[i]) throw UsageError("grid: too many cells");
            total_ *= cells_[i];
        }
    }

    GridSpec(const Box& domain, std::vector<std::size_t> cells) : GridSpec(domain.lower, domain.upper, std::move(cells)) {}

    std::size_t dim() const noexcept { return lower_.size(); }
    const std::vector<double>& lower() const noexcept { return lower_; }
    const std::vector<double>& upper() const noexcept { return upper_; }
    const std::vector<std::size_t>& cells_per_axis() const noexcept { return cells_; }
    std::uint64_t total_cells() const noexcept { return total_; }
    Box domain() const { return Box{lower_, upper_}; }

    double width(std::size_t axis) const { return (upper_[axis] - lower_[axis]) / static_cast<double>(cells_[axis]); }

    /// Sup-metric diameter of one cell: the unit for "cell widths" in tolerances.
    double cell_width() const {
        double w = 0.0;
        for (std::size_t i = 0; i < dim(); ++i) w = std::max(w, width(i));
        return w;
    }

    /// Row-major with axis 0 most significant, so sorting linear indices sorts
    /// multi-indices lexicographically.
    std::uint64_t linear(const CellIndex& idx) const {
        std::uint64_t l = 0;
        for (std::size_t i = 0; i < dim(); ++i) {
            if (idx[i] >= cells_[i]) throw UsageError("cell index out of range");
            l = l * cells_[i] + idx[i];
        }
        return l;
    }

    CellIndex multi(std::uint64_t l) const {
        CellIndex idx(dim());
        for (std::size_t i = dim(); i-- > 0;) {
            idx[i] = static_cast<std::size_t>(l % cells_[i]);
            l /= cells_[i];
        }
        return idx;
    }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;

private:
    std::vector<double> lower_;
    std::vector<double> upper_;
    std::vector<std::size_t> cells_;
    std::uint64_t total_ = 0;
};

inline State cell_center(const GridSpec& grid, const CellIndex& idx) {
    if (idx.size() != grid.dim()) throw UsageError("cell_center: index dimension mismatch");
    State c(grid.dim());
    for (std::size_t i = 0; i < grid.dim(); ++i) {
        if (idx[i] >= grid.cells_per_axis()[i]) throw UsageError("cell_center: index out of range");
        c[i] = grid.lower()[i] + (static_cast<double>(idx[i]) + 0.5) * grid.width(i);
    }
    return c;
}

/// Axis coordinate -> cell along that axis; a point on a shared face goes to
/// the lower-index cell, the upper domain face to the last cell.
inline std::optional<std::size_t> axis_cell(const GridSpec& grid, std::size_t axis, double x) {
    const double lo = grid.lower()[axis];
    const double hi = grid.upper()[axis];
    if (!(x >= lo && x <= hi)) return std::nullopt;
    const auto n = grid.cells_per_axis()[axis];
    const double q = (x - lo) / (hi - lo) * static_cast<double>(n);
    double c = std::ceil(q) - 1.0;
    if (c < 0.0) c = 0.0;
    if (c > static_cast<double>(n - 1)) c = static_cast<double>(n - 1);
    return static_cast<std::size_t>(c);
}

inline std::optional<CellIndex> try_containing_cell(const GridSpec& grid, std::span<const double> x) {
    if (x.size() != grid.dim()) throw UsageError("containing_cell: point dimension mismatch");
    CellIndex idx(grid.dim());
    for (std::size_t i = 0; i < grid.dim(); ++i) {
        const auto c = axis_cell(grid, i, x[i]);
        if (!c) return std::nullopt;
        idx[i] = *c;
    }
    return idx;
}

inline CellIndex containing_cell(const GridSpec& grid, std::span<const double> x) {
    auto idx = try_containing_cell(grid, x);
    if (!idx) throw OutOfDomain("containing_cell: point lies outside the grid domain");
    return *idx;
}

/// Immutable set of active cells on a grid. Storage is a sorted index list
/// plus a dense membership bitmap, both shared between copies.
class BoxCover {
public:
    BoxCover() = default;

    /// Takes any list of linear indices; sorts and deduplicates.
    BoxCover(GridSpec grid, std::vector<std::uint64_t> cells) : grid_(std::move(grid)) {
        std::sort(cells.begin(), cells.end());
        cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
        if (!cells.empty() && cells.back() >= grid_.total_cells())
            throw UsageError("BoxCover: cell index out of range");
        auto bits = std::make_shared<std::vector<std::uint8_t>>(grid_.total_cells(), std::uint8_t{0});
        for (auto c : cells) (*bits)[c] = 1;
        cells_ = std::make_shared<const std::vector<std::uint64_t>>(std::move(cells));
        bitmap_ = std::move(bits);
    }

    static BoxCover empty(const GridSpec& grid) { return BoxCover(grid, {}); }

    static BoxCover full(const GridSpec& grid) {
        std::vector<std::uint64_t> all(grid.total_cells());
        std::iota(all.begin(), all.end(), std::uint64_t{0});
        return BoxCover(grid, std::move(all));
    }

    static BoxCover from_bitmap(GridSpec grid, std::vector<std::uint8_t> bits) {
        BoxCover c;
        c.grid_ = std::move(grid);
        if (bits.size() != c.grid_.total_cells()) throw InternalError("bitmap size mismatch");
        std::vector<std::uint64_t> cells;
        for (std::uint64_t i = 0; i < bits.size(); ++i)
            if (bits[i]) cells.push_back(i);
        c.cells_ = std::make_shared<const std::vector<std::uint64_t>>(std::move(cells));
        c.bitmap_ = std::make_shared<const std::vector<std::uint8_t>>(std::move(bits));
        return c;
    }

    /// Cells containing some point of the box (box clipped to the domain).
    static BoxCover covering(const GridSpec& grid, const Box& box) {
        if (box.dim() != grid.dim()) throw UsageError("covering: box dimension mismatch");
        std::vector<std::size_t> lo(grid.dim()), hi(grid.dim());
        for (std::size_t i = 0; i < grid.dim(); ++i) {
            const double a = std::max(box.lower[i], grid.lower()[i]);
            const double b = std::min(box.upper[i], grid.upper()[i]);
            if (a > b) return empty(grid);
            lo[i] = *axis_cell(grid, i, a);
            hi[i] = *axis_cell(grid, i, b);
        }
        std::vector<std::uint64_t> cells;
        CellIndex idx = lo;
        for (;;) {
            cells.push_back(grid.linear(idx));
            std::size_t axis = grid.dim();
            while (axis-- > 0) {
                if (idx[axis] < hi[axis]) {
                    ++idx[axis];
                    break;
                }
                idx[axis] = lo[axis];
            }
            if (axis == static_cast<std::size_t>(-1)) break;
        }
        return BoxCover(grid, std::move(cells));
    }

    const GridSpec& grid() const noexcept { return grid_; }
    const std::vector<std::uint64_t>& cells() const noexcept { return *cells_; }
    std::size_t count() const noexcept { return cells_ ? cells_->size() : 0; }
    bool is_empty() const noexcept { return count() == 0; }
    bool contains(std::uint64_t linear) const noexcept {
        return bitmap_ && linear < bitmap_->size() && (*bitmap_)[linear] != 0;
    }
    const std::vector<std::uint8_t>& bitmap() const noexcept { return *bitmap_; }

    friend bool operator==(const BoxCover& a, const BoxCover& b) {
        return a.grid_ == b.grid_ && a.cells() == b.cells();
    }

private:
    GridSpec grid_;
    std::shared_ptr<const std::vector<std::uint64_t>> cells_ = std::make_shared<const std::vector<std::uint64_t>>();
    std::shared_ptr<const std::vector<std::uint8_t>> bitmap_ = std::make_shared<const std::vector<std::uint8_t>>();
};

inline std::size_t count(const BoxCover& a) { return a.count(); }

inline void require_same_grid(const BoxCover& a, const BoxCover& b, const char* op) {
    if (!(a.grid() == b.grid())) throw UsageError(std::string(op) + ": covers live on different grids");
}

inline bool subset(const BoxCover& a, const BoxCover& b) {
    require_same_grid(a, b, "subset");
    return std::all_of(a.cells().begin(), a.cells().end(), [&](std::uint64_t c) { return b.contains(c); });
}

inline BoxCover unite(const BoxCover& a, const BoxCover& b) {
    require_same_grid(a, b, "union");
    std::vector<std::uint64_t> out;
    out.reserve(a.count() + b.count());
    std::set_union(a.cells().begin(), a.cells().end(), b.cells().begin(), b.cells().end(), std::back_inserter(out));
    return BoxCover(a.grid(), std::move(out));
}

/// Adds every cell within `steps[i]` cells of an active cell along each axis.
inline BoxCover fatten_cells(const BoxCover& a, const std::vector<std::size_t>& steps) {
    const GridSpec& g = a.grid();
    if (steps.size() != g.dim()) throw UsageError("fatten: step vector has wrong dimension");
    if (std::all_of(steps.begin(), steps.end(), [](std::size_t s) { return s == 0; })) return a;

    const std::size_t d = g.dim();
    std::vector<std::uint8_t> bits(g.total_cells(), 0);
    std::vector<std::size_t> lo(d), hi(d);
    CellIndex idx(d);
    for (std::uint64_t lin : a.cells()) {
        const CellIndex c = g.multi(lin);
        for (std::size_t i = 0; i < d; ++i) {
            lo[i] = c[i] >= steps[i] ? c[i] - steps[i] : 0;
            hi[i] = std::min(g.cells_per_axis()[i] - 1, c[i] + steps[i]);
        }
        idx = lo;
        for (;;) {
            bits[g.linear(idx)] = 1;
            std::size_t axis = d;
            while (axis-- > 0) {
                if (idx[axis] < hi[axis]) {
                    ++idx[axis];
                    break;
                }
                idx[axis] = lo[axis];
            }
            if (axis == static_cast<std::size_t>(-1)) break;
        }
    }
    return BoxCover::from_bitmap(g, std::move(bits));
}

/// Activates every cell whose center is within sup-distance r of some active
/// cell (center within r + half a cell width per axis), clipped to the grid.
inline BoxCover fatten(const BoxCover& a, double r) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw UsageError("fatten: radius must be finite and non-negative");
    const GridSpec& g = a.grid();
    std::vector<std::size_t> steps(g.dim());
    for (std::size_t i = 0; i < g.dim(); ++i) {
        const double k = std::floor(r / g.width(i) + 0.5 + 1e-9);
        steps[i] = static_cast<std::size_t>(std::min(k, static_cast<double>(g.cells_per_axis()[i])));
    }
    return fatten_cells(a, steps);
}

// ---------------------------------------------------------------------------
// Distances

namespace detail {

/// Exact distance transform of a cover in the weighted sup metric:
/// out[c] = min over active b of max_i w_i |c_i - b_i|. The metric is a max
/// of per-axis terms, so the transform factorises into one 1-D pass per axis.
inline std::vector<double> distance_transform(const BoxCover& b, unsigned threads) {
    const GridSpec& g = b.grid();
    const std::size_t d = g.dim();
    const auto& n = g.cells_per_axis();
    constexpr double inf = std::numeric_limits<double>::infinity();

    std::vector<double> field(g.total_cells(), inf);
    for (auto c : b.cells()) field[c] = 0.0;

    std::vector<std::uint64_t> stride(d, 1);
    for (std::size_t i = d - 1; i-- > 0;) stride[i] = stride[i + 1] * n[i + 1];

    for (std::size_t axis = 0; axis < d; ++axis) {
        const std::size_t len = n[axis];
        const std::uint64_t st = stride[axis];
        const std::uint64_t lines = g.total_cells() / len;
        const double w = g.width(axis);
        // Line k starts at the k-th index with a zero coordinate on `axis`.
        parallel_for(
            lines, threads,
            [&](std::size_t k) {
                const std::uint64_t hi = k / st;
                const std::uint64_t lo = k % st;
                const std::uint64_t base = hi * (st * len) + lo;
                std::vector<double> h(len);
                bool any = false;
                for (std::size_t x = 0; x < len; ++x) {
                    h[x] = field[base + x * st];
                    any = any || h[x] < inf;
                }
                if (!any) return;
                for (std::size_t x = 0; x < len; ++x) {
                    double best = h[x];
                    for (std::size_t r = 1; r < len; ++r) {
                        const double reach = static_cast<double>(r) * w;
                        if (reach >= best) break;
                        if (x >= r) best = std::min(best, std::max(reach, h[x - r]));
                        if (x + r < len) best = std::min(best, std::max(reach, h[x + r]));
                    }
                    field[base + x * st] = best;
                }
            },
            64);
    }
    return field;
}

inline double semi_distance(const BoxCover& a, const BoxCover& b, unsigned threads) {
    require_same_grid(a, b, "semi_distance");
    if (b.is_empty()) throw EmptyTarget("semi_distance: target cover is empty");
    if (a.is_empty() || subset(a, b)) return 0.0;
    const std::vector<double> field = distance_transform(b, threads);
    double m = 0.0;
    for (auto c : a.cells()) m = std::max(m, field[c]);
    return m;
}

}  // namespace detail

/// rho(A, B): how far A sticks out of B. Zero iff every cell of A is in B.
/// An empty A gives 0; an empty B raises EmptyTarget.
inline double semi_distance(const BoxCover& a, const BoxCover& b, unsigned threads = 1) {
    return detail::semi_distance(a, b, threads);
}

inline double hausdorff(const BoxCover& a, const BoxCover& b, unsigned threads = 1) {
    require_same_grid(a, b, "hausdorff");
    if (a.is_empty() || b.is_empty()) throw EmptyTarget("hausdorff: both covers must be nonempty");
    return std::max(semi_distance(a, b, threads), semi_distance(b, a, threads));
}

// ---------------------------------------------------------------------------
// Text dump: header `dim lower... upper... cells...`, then one sorted
// multi-index per line.

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_cover(std::ostream& os, const BoxCover& c) {
    const GridSpec& g = c.grid();
    os << g.dim();
    for (double v : g.lower()) os << ' ' << format_double(v);
    for (double v : g.upper()) os << ' ' << format_double(v);
    for (auto n : g.cells_per_axis()) os << ' ' << n;
    os << '\n';
    for (auto lin : c.cells()) {
        const CellIndex idx = g.multi(lin);
        for (std::size_t i = 0; i < idx.size(); ++i) os << (i ? " " : "") << idx[i];
        os << '\n';
    }
}

inline BoxCover read_cover(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw UsageError("cover dump: missing header");
    std::istringstream hs(line);
    std::size_t d = 0;
    if (!(hs >> d) || d == 0 || d > kMaxStateDim) throw UsageError("cover dump: bad dimension");
    auto read_double = [&](std::istringstream& s) {
        std::string tok;
        if (!(s >> tok)) throw UsageError("cover dump: truncated header");
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') throw UsageError("cover dump: bad number '" + tok + "'");
        return v;
    };
    std::vector<double> lo(d), hi(d);
    std::vector<std::size_t> n(d);
    for (auto& v : lo) v = read_double(hs);
    for (auto& v : hi) v = read_double(hs);
    for (auto& v : n)
        if (!(hs >> v)) throw UsageError("cover dump: truncated header");
    GridSpec grid(lo, hi, n);

    std::vector<std::uint64_t> cells;
    CellIndex idx(d);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        for (auto& v : idx)
            if (!(ls >> v)) throw UsageError("cover dump: bad cell line '" + line + "'");
        cells.push_back(grid.linear(idx));
    }
    return BoxCover(std::move(grid), std::move(cells));
}

}  // namespace attrlab
