#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>

#include "entrain/error.hpp"
#include "entrain/smallmat.hpp"

namespace entrain {

using StateFn = std::function<Vector(double t, std::span<const double> x)>;
using JacobianFn = std::function<SquareMatrix(double t, std::span<const double> x)>;
using EnvelopeFn = std::function<double(double t)>;
using ScalarFn = std::function<double(double t)>;

struct StateBox {
    Vector lower;
    Vector upper;

    std::size_t dimension() const noexcept { return lower.size(); }
};

/// Affine-in-control system  x' = f(t,x) + u(t) G(t,x).
///
/// The envelope callables bound the eigenvalues of the symmetric parts
/// A = J_f^T + J_f and R = J_G^T + J_G uniformly over the state space:
///   envelope_r_min(t) <= lambda_min(R(t,x)),  lambda_max(R(t,x)) <= envelope_r_max(t),
///   lambda_max(A(t,x)) <= envelope_a_max(t).
/// They are supplied with the model. When they come from sampling a state
/// box instead, `heuristic_envelopes` is set and every report says so.
///
/// All callables must be pure; a model is shared read-only between workers.
struct SystemModel {
    std::string name;
    std::size_t dimension = 0;
    StateFn drift;
    StateFn control_dir;
    JacobianFn drift_jacobian;
    JacobianFn control_jacobian;
    EnvelopeFn envelope_r_min;
    EnvelopeFn envelope_r_max;
    EnvelopeFn envelope_a_max;
    std::optional<double> period;
    std::optional<StateBox> state_box;
    bool heuristic_envelopes = false;
};

struct AugmentedState {
    Vector base;
    Vector displacement;
};

namespace detail {

inline std::string describe_point(double t, std::span<const double> x) {
    std::ostringstream os;
    os << "t=" << t << ", x=[";
    for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << "]";
    return os.str();
}

inline void check_state(const SystemModel& sys, std::span<const double> x) {
    if (x.size() != sys.dimension) {
        throw Error(ErrorKind::InvalidInput, "state has length " + std::to_string(x.size()) + ", system " +
                                                 sys.name + " has dimension " + std::to_string(sys.dimension));
    }
}

inline SymmetricMatrix sym_of(const SquareMatrix& j, const char* what, double t, std::span<const double> x) {
    if (!j.all_finite()) {
        throw Error(ErrorKind::Evaluation, std::string("non-finite ") + what + " at " + describe_point(t, x));
    }
    return sym_part(j);
}

}  // namespace detail

inline SymmetricMatrix eval_a(const SystemModel& sys, double t, std::span<const double> x) {
    detail::check_state(sys, x);
    return detail::sym_of(sys.drift_jacobian(t, x), "drift Jacobian", t, x);
}

inline SymmetricMatrix eval_r(const SystemModel& sys, double t, std::span<const double> x) {
    detail::check_state(sys, x);
    return detail::sym_of(sys.control_jacobian(t, x), "control Jacobian", t, x);
}

/// Writes the right-hand side of the joint system
///   x'  = f(t,x) + u G(t,x)
///   dx' = (J_f(t,x) + u J_G(t,x)) dx
/// into `dy`. `y` holds x followed (optionally) by dx.
inline void augmented_rhs_into(const SystemModel& sys, double u, double t, std::span<const double> y,
                               std::span<double> dy) {
    const std::size_t n = sys.dimension;
    const auto x = y.subspan(0, n);
    const Vector f = sys.drift(t, x);
    const Vector g = sys.control_dir(t, x);
    for (std::size_t i = 0; i < n; ++i) dy[i] = f[i] + u * g[i];
    if (y.size() == 2 * n) {
        const auto dx = y.subspan(n, n);
        const SquareMatrix jf = sys.drift_jacobian(t, x);
        const SquareMatrix jg = sys.control_jacobian(t, x);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += (jf(i, j) + u * jg(i, j)) * dx[j];
            dy[n + i] = s;
        }
    }
}

inline AugmentedState augmented_rhs(const SystemModel& sys, double u, double t, const AugmentedState& s) {
    detail::check_state(sys, s.base);
    if (s.displacement.size() != sys.dimension) {
        throw Error(ErrorKind::InvalidInput, "displacement dimension mismatch");
    }
    const std::size_t n = sys.dimension;
    Vector y(2 * n), dy(2 * n);
    std::copy(s.base.begin(), s.base.end(), y.begin());
    std::copy(s.displacement.begin(), s.displacement.end(), y.begin() + static_cast<std::ptrdiff_t>(n));
    augmented_rhs_into(sys, u, t, y, dy);
    for (double v : dy) {
        if (!std::isfinite(v)) {
            throw Error(ErrorKind::Evaluation, "non-finite right-hand side at " + detail::describe_point(t, s.base));
        }
    }
    AugmentedState out;
    out.base.assign(dy.begin(), dy.begin() + static_cast<std::ptrdiff_t>(n));
    out.displacement.assign(dy.begin() + static_cast<std::ptrdiff_t>(n), dy.end());
    return out;
}

/// Central finite differences of drift and control direction compared with
/// the supplied Jacobians. Returns the worst entrywise deviation, scaled by
/// max(1, |finite difference|).
inline double check_jacobian_consistency(const SystemModel& sys, double t, std::span<const double> x, double h) {
    if (!(h > 0.0)) throw Error(ErrorKind::InvalidInput, "check_jacobian_consistency: h must be positive");
    detail::check_state(sys, x);
    const std::size_t n = sys.dimension;
    const SquareMatrix jf = sys.drift_jacobian(t, x);
    const SquareMatrix jg = sys.control_jacobian(t, x);
    double worst = 0.0;
    Vector xp(x.begin(), x.end()), xm(x.begin(), x.end());
    for (std::size_t j = 0; j < n; ++j) {
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        const Vector fp = sys.drift(t, xp), fm = sys.drift(t, xm);
        const Vector gp = sys.control_dir(t, xp), gm = sys.control_dir(t, xm);
        for (std::size_t i = 0; i < n; ++i) {
            const double dfi = (fp[i] - fm[i]) / (2.0 * h);
            const double dgi = (gp[i] - gm[i]) / (2.0 * h);
            worst = std::max(worst, std::abs(dfi - jf(i, j)) / std::max(1.0, std::abs(dfi)));
            worst = std::max(worst, std::abs(dgi - jg(i, j)) / std::max(1.0, std::abs(dgi)));
        }
        xp[j] = x[j];
        xm[j] = x[j];
    }
    return worst;
}

/// Additive forcing g(t) of the scalar example system.
struct Forcing {
    ScalarFn g;
    std::optional<double> period;  // unset: aperiodic
    std::string label;

    static Forcing zero() { return {[](double) { return 0.0; }, 0.0, "0"}; }
    static Forcing t_cos_t() { return {[](double t) { return t * std::cos(t); }, std::nullopt, "t*cos(t)"}; }
    static Forcing custom(ScalarFn g, std::optional<double> period, std::string label) {
        return {std::move(g), period, std::move(label)};
    }
};

namespace detail {

inline SquareMatrix scalar_matrix(double v) { return SquareMatrix{{v}}; }

inline SystemModel make_eq47(Forcing forcing) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    SystemModel s;
    s.name = "eq47";
    s.dimension = 1;
    auto g = forcing.g;
    s.drift = [g](double t, std::span<const double> x) { return Vector{x[0] + g(t)}; };
    s.control_dir = [](double t, std::span<const double> x) { return Vector{std::sin(t) * x[0]}; };
    s.drift_jacobian = [](double, std::span<const double>) { return scalar_matrix(1.0); };
    s.control_jacobian = [](double t, std::span<const double>) { return scalar_matrix(std::sin(t)); };
    s.envelope_r_min = [](double t) { return 2.0 * std::sin(t); };
    s.envelope_r_max = [](double t) { return 2.0 * std::sin(t); };
    s.envelope_a_max = [](double) { return 2.0; };
    // Periodic in t only if the forcing is; a zero forcing has every period.
    if (forcing.period) {
        if (*forcing.period == 0.0) {
            s.period = two_pi;
        } else {
            const double ratio = *forcing.period / two_pi;
            if (std::abs(ratio - std::round(ratio)) < 1e-9 && std::round(ratio) >= 1.0) s.period = *forcing.period;
        }
    }
    s.state_box = StateBox{{-10.0}, {10.0}};
    return s;
}

inline SystemModel make_eq48() {
    SystemModel s;
    s.name = "eq48";
    s.dimension = 2;
    s.drift = [](double, std::span<const double> x) {
        const double z = x[0], y = x[1];
        return Vector{z - z * z * z / 3.0 - y, -y + z};
    };
    s.control_dir = [](double, std::span<const double> x) { return Vector{x[0], 0.0}; };
    s.drift_jacobian = [](double, std::span<const double> x) {
        return SquareMatrix{{1.0 - x[0] * x[0], -1.0}, {1.0, -1.0}};
    };
    s.control_jacobian = [](double, std::span<const double>) { return SquareMatrix{{1.0, 0.0}, {0.0, 0.0}}; };
    s.envelope_r_min = [](double) { return 0.0; };
    s.envelope_r_max = [](double) { return 2.0; };
    s.envelope_a_max = [](double) { return 2.0; };
    s.state_box = StateBox{{-3.0, -3.0}, {3.0, 3.0}};
    return s;
}

inline SystemModel make_eq49() {
    SystemModel s;
    s.name = "eq49";
    s.dimension = 1;
    s.drift = [](double, std::span<const double> x) { return Vector{x[0] - x[0] * x[0] * x[0] / 3.0}; };
    s.control_dir = [](double, std::span<const double>) { return Vector{1.0}; };
    s.drift_jacobian = [](double, std::span<const double> x) { return scalar_matrix(1.0 - x[0] * x[0]); };
    s.control_jacobian = [](double, std::span<const double>) { return scalar_matrix(0.0); };
    s.envelope_r_min = [](double) { return 0.0; };
    s.envelope_r_max = [](double) { return 0.0; };
    s.envelope_a_max = [](double) { return 2.0; };
    s.state_box = StateBox{{-3.0}, {3.0}};
    return s;
}

}  // namespace detail

/// Built-in example systems:
///   eq47:  x' = x + u(t) sin(t) x + g(t)
///   eq48:  z' = z - z^3/3 - y + u(t) z,  y' = -y + z
///   eq49:  x' = x - x^3/3 + u(t)
/// `forcing` is only used by eq47.
inline SystemModel builtin(std::string_view name, Forcing forcing = Forcing::zero()) {
    if (name == "eq47") return detail::make_eq47(std::move(forcing));
    if (name == "eq48") return detail::make_eq48();
    if (name == "eq49") return detail::make_eq49();
    throw Error(ErrorKind::Configuration, "unknown builtin system '" + std::string(name) + "' (expected eq47, eq48 or eq49)");
}

/// Replaces the envelopes of `sys` by eigenvalue extrema over a tensor grid
/// of `points_per_dim` points per axis of `box`. This bounds nothing outside
/// the sampled points; the result is flagged heuristic.
inline SystemModel with_sampled_envelopes(SystemModel sys, StateBox box, std::size_t points_per_dim = 9) {
    if (box.dimension() != sys.dimension) throw Error(ErrorKind::InvalidInput, "state box dimension mismatch");
    if (points_per_dim < 2) points_per_dim = 2;
    std::vector<Vector> samples;
    std::vector<std::size_t> idx(sys.dimension, 0);
    while (true) {
        Vector x(sys.dimension);
        for (std::size_t d = 0; d < sys.dimension; ++d) {
            const double s = static_cast<double>(idx[d]) / static_cast<double>(points_per_dim - 1);
            x[d] = box.lower[d] + s * (box.upper[d] - box.lower[d]);
        }
        samples.push_back(std::move(x));
        std::size_t d = 0;
        while (d < sys.dimension && ++idx[d] == points_per_dim) idx[d++] = 0;
        if (d == sys.dimension) break;
    }
    auto base = std::make_shared<SystemModel>(sys);
    auto pts = std::make_shared<std::vector<Vector>>(std::move(samples));
    sys.envelope_r_min = [base, pts](double t) {
        double v = INFINITY;
        for (const auto& x : *pts) v = std::min(v, lambda_min(eval_r(*base, t, x)));
        return v;
    };
    sys.envelope_r_max = [base, pts](double t) {
        double v = -INFINITY;
        for (const auto& x : *pts) v = std::max(v, lambda_max(eval_r(*base, t, x)));
        return v;
    };
    sys.envelope_a_max = [base, pts](double t) {
        double v = -INFINITY;
        for (const auto& x : *pts) v = std::max(v, lambda_max(eval_a(*base, t, x)));
        return v;
    };
    sys.state_box = std::move(box);
    sys.heuristic_envelopes = true;
    return sys;
}

}  // namespace entrain
