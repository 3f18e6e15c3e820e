#pragma once

// Parametrized vector-field families and the semigroup S_lambda(t) they
// generate through fixed-step classical Runge-Kutta integration.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attrlab/errors.hpp"

namespace attrlab {

inline constexpr std::size_t kMaxStateDim = 16;

using State = std::vector<double>;

/// Axis-aligned box [lower, upper] in R^d.
struct Box {
    std::vector<double> lower;
    std::vector<double> upper;

    std::size_t dim() const noexcept { return lower.size(); }

    bool contains(std::span<const double> x) const noexcept {
        for (std::size_t i = 0; i < lower.size(); ++i)
            if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
        return true;
    }

    /// Each side pushed out by `fraction` of that side's width.
    Box widened(double fraction) const {
        Box b = *this;
        for (std::size_t i = 0; i < lower.size(); ++i) {
            const double pad = fraction * (upper[i] - lower[i]);
            b.lower[i] -= pad;
            b.upper[i] += pad;
        }
        return b;
    }

    friend bool operator==(const Box&, const Box&) = default;
};

/// A point lambda of the parameter space.
struct ParamPoint {
    std::vector<double> coords;

    ParamPoint() = default;
    ParamPoint(double v) : coords{v} {}  // NOLINT: scalar families are the common case
    explicit ParamPoint(std::vector<double> c) : coords(std::move(c)) {}

    double operator[](std::size_t i) const { return coords[i]; }
    std::size_t size() const noexcept { return coords.size(); }
    friend bool operator==(const ParamPoint&, const ParamPoint&) = default;
};

/// Splits [0, t] into whole steps of dt plus an optional shorter final step.
/// Durations within 1e-9 (relative) of a whole number of steps use whole
/// steps only, so S(t)S(s) and S(t+s) follow the same step sequence.
struct StepPlan {
    std::size_t full_steps = 0;
    double remainder = 0.0;
};

inline StepPlan plan_steps(double t, double dt) {
    const double q = t / dt;
    const double nearest = std::round(q);
    if (std::abs(q - nearest) <= 1e-9 * std::max(1.0, q))
        return {static_cast<std::size_t>(nearest), 0.0};
    const double whole = std::floor(q);
    return {static_cast<std::size_t>(whole), t - whole * dt};
}

enum class EvolveStatus { ok, escaped };

struct EvolveOutcome {
    EvolveStatus status = EvolveStatus::ok;
    double exit_time = 0.0;
};

using VectorField =
    std::function<void(std::span<const double> lambda, std::span<const double> x, std::span<double> dx)>;

struct SystemFamily {
    std::string name;
    std::size_t state_dim = 0;
    std::size_t param_dim = 1;
    Box default_domain;
    double param_min = -std::numeric_limits<double>::infinity();
    double param_max = std::numeric_limits<double>::infinity();
    VectorField field;
    /// Optional compiled integrator equivalent to RK4 over `field`; built-in
    /// families provide one so the field is inlined into the step loop.
    std::function<EvolveOutcome(std::span<const double> lambda, std::span<double> x, double t, double dt,
                                const Box& escape)>
        kernel;
    std::string description;
};

namespace detail {

/// Fixed-dimension RK4 loop around a raw field f(p, x, dx). Performs exactly
/// the same arithmetic as the generic path, so results are bit-identical.
template <std::size_t D, class F>
EvolveOutcome rk4_kernel(const F& f, std::span<const double> lambda, std::span<double> xs, double t, double dt,
                         const Box& escape) {
    std::array<double, D> x, k1, k2, k3, k4, y;
    for (std::size_t i = 0; i < D; ++i) x[i] = xs[i];
    const double* p = lambda.data();
    auto step = [&](double h) {
        f(p, x.data(), k1.data());
        for (std::size_t i = 0; i < D; ++i) y[i] = x[i] + 0.5 * h * k1[i];
        f(p, y.data(), k2.data());
        for (std::size_t i = 0; i < D; ++i) y[i] = x[i] + 0.5 * h * k2[i];
        f(p, y.data(), k3.data());
        for (std::size_t i = 0; i < D; ++i) y[i] = x[i] + h * k3[i];
        f(p, y.data(), k4.data());
        for (std::size_t i = 0; i < D; ++i) x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    };
    auto inside = [&] {
        for (std::size_t i = 0; i < D; ++i)
            if (!(x[i] >= escape.lower[i] && x[i] <= escape.upper[i])) return false;
        return true;
    };
    auto store = [&] {
        for (std::size_t i = 0; i < D; ++i) xs[i] = x[i];
    };
    const StepPlan plan = plan_steps(t, dt);
    for (std::size_t n = 0; n < plan.full_steps; ++n) {
        step(dt);
        if (!inside()) {
            store();
            return {EvolveStatus::escaped, static_cast<double>(n + 1) * dt};
        }
    }
    if (plan.remainder > 0.0) {
        step(plan.remainder);
        if (!inside()) {
            store();
            return {EvolveStatus::escaped, t};
        }
    }
    store();
    return {};
}

/// Fills both the generic field and the compiled kernel from one raw field.
template <std::size_t D, class F>
void attach_field(SystemFamily& family, F f) {
    family.field = [f](std::span<const double> p, std::span<const double> x, std::span<double> dx) {
        f(p.data(), x.data(), dx.data());
    };
    family.kernel = [f](std::span<const double> p, std::span<double> x, double t, double dt, const Box& escape) {
        return rk4_kernel<D>(f, p, x, t, dt, escape);
    };
}

}  // namespace detail

struct IntegratorConfig {
    double dt = 1e-2;
    /// Trajectories leaving this box raise DomainEscape. When unset, evolve()
    /// uses the family's default domain widened by 50% of each side.
    std::optional<Box> escape_box;
};

// ---------------------------------------------------------------------------
// Built-in families

namespace families {

/// dx/dt = lambda x - x^3 on [-3, 3].
inline SystemFamily pitchfork() {
    SystemFamily f;
    f.name = "pitchfork";
    f.state_dim = 1;
    f.default_domain = Box{{-3.0}, {3.0}};
    f.param_min = -1.0;
    f.param_max = 4.0;
    f.description = "dx/dt = lambda*x - x^3";
    detail::attach_field<1>(f, [](const double* p, const double* x, double* dx) {
        dx[0] = p[0] * x[0] - x[0] * x[0] * x[0];
    });
    return f;
}

/// dx/dt = -(x-1)^2 (x+1) + lambda on [-3, 3]. Saddle-node at x=1 when lambda=0.
inline SystemFamily semistable() {
    SystemFamily f;
    f.name = "semistable";
    f.state_dim = 1;
    f.default_domain = Box{{-3.0}, {3.0}};
    f.param_min = -1.0;
    f.param_max = 1.0;
    f.description = "dx/dt = -(x-1)^2 (x+1) + lambda";
    detail::attach_field<1>(f, [](const double* p, const double* x, double* dx) {
        const double a = x[0] - 1.0;
        dx[0] = -a * a * (x[0] + 1.0) + p[0];
    });
    return f;
}

/// Lorenz equations with sigma = 10, beta = 8/3 and parameter rho.
inline SystemFamily lorenz() {
    SystemFamily f;
    f.name = "lorenz";
    f.state_dim = 3;
    f.default_domain = Box{{-25.0, -30.0, -5.0}, {25.0, 30.0, 55.0}};
    f.param_min = 0.0;
    f.param_max = 30.0;
    f.description = "Lorenz system, sigma=10, beta=8/3, parameter rho";
    detail::attach_field<3>(f, [](const double* p, const double* x, double* dx) {
        constexpr double sigma = 10.0;
        constexpr double beta = 8.0 / 3.0;
        dx[0] = sigma * (x[1] - x[0]);
        dx[1] = x[0] * (p[0] - x[2]) - x[1];
        dx[2] = x[0] * x[1] - beta * x[2];
    });
    return f;
}

inline std::vector<std::string> names() { return {"pitchfork", "semistable", "lorenz"}; }

}  // namespace families

inline SystemFamily family_by_name(std::string_view name) {
    if (name == "pitchfork") return families::pitchfork();
    if (name == "semistable") return families::semistable();
    if (name == "lorenz") return families::lorenz();
    throw UsageError("unknown family '" + std::string(name) + "' (expected pitchfork, semistable or lorenz)");
}

// ---------------------------------------------------------------------------
// Evaluation and integration

inline void check_param(const SystemFamily& family, const ParamPoint& lambda) {
    if (lambda.size() != family.param_dim)
        throw UsageError(family.name + ": parameter has dimension " + std::to_string(lambda.size()) +
                         ", expected " + std::to_string(family.param_dim));
    for (double v : lambda.coords)
        if (!std::isfinite(v)) throw UsageError(family.name + ": non-finite parameter");
}

inline State vector_field(const SystemFamily& family, const ParamPoint& lambda, std::span<const double> x) {
    check_param(family, lambda);
    if (x.size() != family.state_dim)
        throw UsageError(family.name + ": state has dimension " + std::to_string(x.size()) + ", expected " +
                         std::to_string(family.state_dim));
    State dx(family.state_dim);
    family.field(lambda.coords, x, dx);
    return dx;
}

namespace detail {

inline void rk4_step(const VectorField& f, std::span<const double> p, std::span<double> x, double h,
                     std::size_t d) {
    std::array<double, kMaxStateDim> k1, k2, k3, k4, tmp;
    std::span<double> s1(k1.data(), d), s2(k2.data(), d), s3(k3.data(), d), s4(k4.data(), d);
    std::span<const double> y(tmp.data(), d);
    f(p, x, s1);
    for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
    f(p, y, s2);
    for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
    f(p, y, s3);
    for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + h * k3[i];
    f(p, y, s4);
    for (std::size_t i = 0; i < d; ++i) x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

inline bool inside(const Box& b, std::span<const double> x) {
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!(x[i] >= b.lower[i] && x[i] <= b.upper[i])) return false;  // also rejects NaN
    return true;
}

}  // namespace detail

inline Box escape_box_for(const SystemFamily& family, const IntegratorConfig& cfg) {
    return cfg.escape_box ? *cfg.escape_box : family.default_domain.widened(0.5);
}

/// Non-throwing core of evolve(). Integrates x in place; on escape, x holds
/// the first state outside the box. No argument validation.
inline EvolveOutcome evolve_in_place(const SystemFamily& family, std::span<const double> lambda,
                                     std::span<double> x, double t, double dt, const Box& escape) {
    if (family.kernel) return family.kernel(lambda, x, t, dt, escape);
    const std::size_t d = x.size();
    const StepPlan plan = plan_steps(t, dt);
    double time = 0.0;
    for (std::size_t n = 0; n < plan.full_steps; ++n) {
        detail::rk4_step(family.field, lambda, x, dt, d);
        time = static_cast<double>(n + 1) * dt;
        if (!detail::inside(escape, x)) return {EvolveStatus::escaped, time};
    }
    if (plan.remainder > 0.0) {
        detail::rk4_step(family.field, lambda, x, plan.remainder, d);
        if (!detail::inside(escape, x)) return {EvolveStatus::escaped, t};
    }
    return {};
}

inline void validate(const SystemFamily& family, const IntegratorConfig& cfg) {
    if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) throw UsageError("dt must be positive");
    if (cfg.dt > 0.1) throw UsageError("dt must not exceed 0.1");
    if (family.state_dim == 0 || family.state_dim > kMaxStateDim)
        throw UsageError(family.name + ": unsupported state dimension");
    if (cfg.escape_box && cfg.escape_box->dim() != family.state_dim)
        throw UsageError("escape box dimension does not match the family");
}

/// Approximates S_lambda(t) x0. t = 0 returns x0 unchanged.
inline State evolve(const SystemFamily& family, const ParamPoint& lambda, std::span<const double> x0, double t,
                    const IntegratorConfig& cfg) {
    check_param(family, lambda);
    validate(family, cfg);
    if (x0.size() != family.state_dim) throw UsageError(family.name + ": initial state has wrong dimension");
    if (!(t >= 0.0) || !std::isfinite(t)) throw UsageError("evolve: time must be finite and non-negative");
    State x(x0.begin(), x0.end());
    if (t == 0.0) return x;
    const Box escape = escape_box_for(family, cfg);
    const EvolveOutcome out = evolve_in_place(family, lambda.coords, x, t, cfg.dt, escape);
    if (out.status == EvolveStatus::escaped)
        throw DomainEscape(family.name + ": trajectory left the escape box at t=" + std::to_string(out.exit_time),
                           out.exit_time, x);
    return x;
}

inline double sup_distance(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// max over samples of |S(t+s)x - S(t)S(s)x| in the sup metric.
inline double check_semigroup(const SystemFamily& family, const ParamPoint& lambda,
                              std::span<const State> samples, double t, double s, const IntegratorConfig& cfg) {
    if (t < 0.0 || s < 0.0) throw UsageError("check_semigroup: times must be non-negative");
    double defect = 0.0;
    for (const State& x : samples) {
        const State direct = evolve(family, lambda, x, t + s, cfg);
        const State composed = evolve(family, lambda, evolve(family, lambda, x, s, cfg), t, cfg);
        defect = std::max(defect, sup_distance(direct, composed));
    }
    return defect;
}

struct ModulusEntry {
    double offset;
    double modulus;
};

/// For each offset h: sup over samples of |S_{lambda0+h}(t)x - S_{lambda0}(t)x|.
/// Offsets shift the first parameter coordinate.
inline std::vector<ModulusEntry> check_param_continuity(const SystemFamily& family, const ParamPoint& lambda0,
                                                        std::span<const double> offsets,
                                                        std::span<const State> samples, double t,
                                                        const IntegratorConfig& cfg) {
    if (!(t > 0.0)) throw UsageError("check_param_continuity: t must be positive");
    std::vector<State> base;
    base.reserve(samples.size());
    for (const State& x : samples) base.push_back(evolve(family, lambda0, x, t, cfg));

    std::vector<ModulusEntry> table;
    for (double h : offsets) {
        ParamPoint shifted = lambda0;
        shifted.coords.at(0) += h;
        double m = 0.0;
        for (std::size_t k = 0; k < samples.size(); ++k)
            m = std::max(m, sup_distance(evolve(family, shifted, samples[k], t, cfg), base[k]));
        table.push_back({h, m});
    }
    return table;
}

}  // namespace attrlab
