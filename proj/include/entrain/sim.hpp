#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "entrain/error.hpp"
#include "entrain/smallmat.hpp"
#include "entrain/synth.hpp"
#include "entrain/sysmodel.hpp"

namespace entrain {

/// Time-only input u(t) as seen by the integrator. `breakpoints(a, b)` lists
/// the times strictly inside (a, b) where integration should restart.
struct InputSignal {
    std::function<double(double)> value;
    std::function<std::vector<double>(double, double)> breakpoints;
    std::string description;

    static InputSignal constant(double v) {
        std::ostringstream os;
        os << "constant " << v;
        return {[v](double) { return v; }, [](double, double) { return std::vector<double>{}; }, os.str()};
    }

    static InputSignal from(FeedforwardInput u, std::string description = "synthesized") {
        auto p = std::make_shared<const FeedforwardInput>(std::move(u));
        return {[p](double t) { return p->value(t); }, [p](double a, double b) { return p->breakpoints(a, b); },
                std::move(description)};
    }

    static InputSignal callable(std::function<double(double)> fn, std::string description) {
        return {std::move(fn), [](double, double) { return std::vector<double>{}; }, std::move(description)};
    }
};

struct IntegrationOptions {
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    double initial_step = 0.0;  // 0: span / 1000
    double max_step = std::numeric_limits<double>::infinity();
    std::size_t max_steps = 2'000'000;
};

struct StepStats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    double max_error = 0.0;  // largest accepted scaled error estimate (<= 1)
};

/// Samples of x(t), dx(t) and u(t) on the requested output grid.
/// `displacements` is empty when no displacement was integrated.
struct Trajectory {
    std::vector<double> times;
    std::vector<Vector> states;
    std::vector<Vector> displacements;
    std::vector<double> input_values;
    StepStats stats;

    std::size_t size() const noexcept { return times.size(); }
    std::size_t dimension() const noexcept { return states.empty() ? 0 : states.front().size(); }
    bool has_displacements() const noexcept { return !displacements.empty(); }
};

/// n + 1 equally spaced times from a to b, endpoints exact.
inline std::vector<double> uniform_grid(double a, double b, std::size_t n) {
    if (n == 0) throw Error(ErrorKind::InvalidInput, "uniform_grid: need at least one interval");
    std::vector<double> g(n + 1);
    for (std::size_t i = 0; i <= n; ++i) g[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n);
    g.back() = b;
    return g;
}

namespace detail {

// Dormand-Prince 5(4) coefficients with the continuous extension of dopri5.
struct DP5 {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                            a76 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    static constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                            d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                            d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;
};

// Hairer's PI step-size controller parameters.
inline constexpr double kBeta = 0.04;
inline constexpr double kExpo1 = 0.2 - kBeta * 0.75;
inline constexpr double kSafe = 0.9;
inline constexpr double kFacMin = 0.2;
inline constexpr double kFacMax = 10.0;

class Dopri5 {
public:
    Dopri5(const SystemModel& sys, const InputSignal& u, std::size_t len, const IntegrationOptions& opt)
        : sys_(sys), u_(u), n_(sys.dimension), len_(len), opt_(opt) {
        for (auto& k : k_) k.resize(len);
        ytmp_.resize(len);
        y1_.resize(len);
        for (auto& r : rcont_) r.resize(len);
    }

    void rhs(double t, std::span<const double> y, std::span<double> dy) const {
        augmented_rhs_into(sys_, u_.value(t), t, y, dy);
    }

    // Integrates y from t to t_end, calling emit(t_prev, h) after every accepted
    // step with the dense-output coefficients ready.
    template <class Emit>
    void run(double& t, Vector& y, double t_end, double& h, StepStats& stats, const Emit& emit) {
        const double span = t_end - t;
        if (!(span > 0.0)) return;
        rhs(t, y, k_[0]);
        double facold = 1e-4;
        bool last_rejected = false;
        while (t < t_end) {
            if (stats.accepted + stats.rejected >= opt_.max_steps) {
                throw IntegrationError(ErrorKind::IntegrationFailure, "integration exceeded the step budget", t);
            }
            h = std::min({h, opt_.max_step, t_end - t});
            const double hmin = 1e-14 * std::max(1.0, std::abs(t));
            if (h < hmin && t_end - t > hmin) {
                std::ostringstream os;
                os << "step size underflow at t=" << t << " (stiff or blowing up)";
                throw IntegrationError(ErrorKind::IntegrationFailure, os.str(), t);
            }
            const bool final_step = t + h >= t_end || t_end - (t + h) <= hmin;
            if (final_step) h = t_end - t;
            const double err = attempt(t, y, h);
            if (!std::isfinite(err)) {
                if (!all_finite(y1_)) {
                    // Distinguish a genuinely diverging solution from a too-large step.
                    if (h <= hmin * 16) {
                        std::ostringstream os;
                        os << "non-finite state near t=" << t;
                        throw IntegrationError(ErrorKind::Divergence, os.str(), t);
                    }
                }
                h *= 0.1;
                ++stats.rejected;
                last_rejected = true;
                continue;
            }
            const double fac11 = std::pow(err, kExpo1);
            if (err <= 1.0) {
                double fac = fac11 / std::pow(facold, kBeta);
                fac = std::clamp(fac / kSafe, 1.0 / kFacMax, 1.0 / kFacMin);
                double hnew = h / fac;
                facold = std::max(err, 1e-4);
                ++stats.accepted;
                stats.max_error = std::max(stats.max_error, err);
                prepare_dense(y, h);
                const double t_prev = t;
                t = final_step ? t_end : t + h;
                y.swap(y1_);
                k_[0].swap(k_[6]);
                emit(t_prev, h);
                if (last_rejected) hnew = std::min(hnew, h);
                last_rejected = false;
                h = hnew;
            } else {
                h /= std::min(1.0 / kFacMin, fac11 / kSafe);
                ++stats.rejected;
                last_rejected = true;
            }
        }
    }

    // Dense output on the last accepted step of size h starting at t_prev.
    void dense(double t_prev, double h, double tq, std::span<double> out) const {
        const double th = std::clamp((tq - t_prev) / h, 0.0, 1.0);
        const double th1 = 1.0 - th;
        for (std::size_t i = 0; i < len_; ++i) {
            out[i] = rcont_[0][i] +
                     th * (rcont_[1][i] + th1 * (rcont_[2][i] + th * (rcont_[3][i] + th1 * rcont_[4][i])));
        }
    }

private:
    static bool all_finite(const Vector& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    }

    double attempt(double t, const Vector& y, double h) {
        using C = DP5;
        auto stage = [&](double ct, std::initializer_list<std::pair<std::size_t, double>> terms, std::size_t out) {
            for (std::size_t i = 0; i < len_; ++i) {
                double s = 0.0;
                for (const auto& [j, a] : terms) s += a * k_[j][i];
                ytmp_[i] = y[i] + h * s;
            }
            rhs(t + ct * h, ytmp_, k_[out]);
        };
        stage(C::c2, {{0, C::a21}}, 1);
        stage(C::c3, {{0, C::a31}, {1, C::a32}}, 2);
        stage(C::c4, {{0, C::a41}, {1, C::a42}, {2, C::a43}}, 3);
        stage(C::c5, {{0, C::a51}, {1, C::a52}, {2, C::a53}, {3, C::a54}}, 4);
        stage(1.0, {{0, C::a61}, {1, C::a62}, {2, C::a63}, {3, C::a64}, {4, C::a65}}, 5);
        for (std::size_t i = 0; i < len_; ++i) {
            y1_[i] = y[i] + h * (C::a71 * k_[0][i] + C::a73 * k_[2][i] + C::a74 * k_[3][i] + C::a75 * k_[4][i] +
                                 C::a76 * k_[5][i]);
        }
        if (!all_finite(y1_)) return INFINITY;
        rhs(t + h, y1_, k_[6]);

        // Displacements are weighted relative to their own size so the step
        // sequence does not depend on the scale of dx.
        double dscale = 0.0;
        for (std::size_t i = n_; i < len_; ++i) dscale = std::max(dscale, std::abs(y[i]));
        if (dscale == 0.0) dscale = 1.0;
        double sum = 0.0;
        for (std::size_t i = 0; i < len_; ++i) {
            const double e = h * (C::e1 * k_[0][i] + C::e3 * k_[2][i] + C::e4 * k_[3][i] + C::e5 * k_[4][i] +
                                  C::e6 * k_[5][i] + C::e7 * k_[6][i]);
            const double abs_w = i < n_ ? opt_.abs_tol : opt_.abs_tol * dscale;
            const double sc = abs_w + opt_.rel_tol * std::max(std::abs(y[i]), std::abs(y1_[i]));
            sum += (e / sc) * (e / sc);
        }
        const double err = std::sqrt(sum / static_cast<double>(len_));
        return std::isfinite(err) ? err : INFINITY;
    }

    void prepare_dense(const Vector& y, double h) {
        using C = DP5;
        for (std::size_t i = 0; i < len_; ++i) {
            const double ydiff = y1_[i] - y[i];
            const double bspl = h * k_[0][i] - ydiff;
            rcont_[0][i] = y[i];
            rcont_[1][i] = ydiff;
            rcont_[2][i] = bspl;
            rcont_[3][i] = ydiff - h * k_[6][i] - bspl;
            rcont_[4][i] = h * (C::d1 * k_[0][i] + C::d3 * k_[2][i] + C::d4 * k_[3][i] + C::d5 * k_[4][i] +
                                C::d6 * k_[5][i] + C::d7 * k_[6][i]);
        }
    }

    const SystemModel& sys_;
    const InputSignal& u_;
    std::size_t n_;
    std::size_t len_;
    IntegrationOptions opt_;
    std::array<Vector, 7> k_;
    Vector ytmp_, y1_;
    std::array<Vector, 5> rcont_;
};

}  // namespace detail

/// Integrates x' = f + u G jointly with dx' = (J_f + u J_G) dx over
/// [grid.front(), grid.back()] and samples both on `grid` via dense output.
/// Pass an empty `dx0` to integrate the state alone. Integration restarts at
/// every breakpoint of the input.
inline Trajectory integrate(const SystemModel& sys, const InputSignal& u, std::span<const double> x0,
                            std::span<const double> dx0, const std::vector<double>& grid,
                            const IntegrationOptions& opt = {}) {
    const std::size_t n = sys.dimension;
    if (x0.size() != n) throw Error(ErrorKind::InvalidInput, "integrate: initial state has the wrong dimension");
    if (!dx0.empty() && dx0.size() != n) throw Error(ErrorKind::InvalidInput, "integrate: displacement has the wrong dimension");
    if (!(opt.rel_tol > 0.0) || !(opt.abs_tol > 0.0)) throw Error(ErrorKind::InvalidInput, "integrate: tolerances must be positive");
    if (!(opt.max_step > 0.0)) throw Error(ErrorKind::InvalidInput, "integrate: max step must be positive");
    if (grid.size() < 2 || !(grid.back() > grid.front())) throw Error(ErrorKind::InvalidInput, "integrate: empty span");
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) throw Error(ErrorKind::InvalidInput, "integrate: output grid must be strictly increasing");
    }
    for (double v : x0)
        if (!std::isfinite(v)) throw Error(ErrorKind::InvalidInput, "integrate: non-finite initial state");

    const bool with_dx = !dx0.empty();
    const std::size_t len = with_dx ? 2 * n : n;
    Vector y(len);
    std::copy(x0.begin(), x0.end(), y.begin());
    if (with_dx) std::copy(dx0.begin(), dx0.end(), y.begin() + static_cast<std::ptrdiff_t>(n));

    Trajectory tr;
    tr.times.reserve(grid.size());
    tr.states.reserve(grid.size());
    if (with_dx) tr.displacements.reserve(grid.size());
    tr.input_values.reserve(grid.size());
    auto record = [&](double t, std::span<const double> yy) {
        for (double v : yy) {
            if (!std::isfinite(v)) {
                std::ostringstream os;
                os << "non-finite state at t=" << t;
                throw IntegrationError(ErrorKind::Divergence, os.str(), t);
            }
        }
        tr.times.push_back(t);
        tr.states.emplace_back(yy.begin(), yy.begin() + static_cast<std::ptrdiff_t>(n));
        if (with_dx) tr.displacements.emplace_back(yy.begin() + static_cast<std::ptrdiff_t>(n), yy.end());
        tr.input_values.push_back(u.value(t));
    };

    const double t0 = grid.front(), t_end = grid.back();
    std::vector<double> stops = u.breakpoints ? u.breakpoints(t0, t_end) : std::vector<double>{};
    stops.push_back(t_end);

    detail::Dopri5 solver(sys, u, len, opt);
    double t = t0;
    double h = opt.initial_step > 0.0 ? opt.initial_step : (t_end - t0) / 1000.0;
    std::size_t next = 0;
    record(t, y);
    ++next;
    Vector buf(len);
    try {
        for (double stop : stops) {
            if (!(stop > t)) continue;
            solver.run(t, y, stop, h, tr.stats, [&](double t_prev, double hh) {
                while (next < grid.size() && grid[next] <= t) {
                    if (grid[next] == t) {
                        record(grid[next], y);
                    } else {
                        solver.dense(t_prev, hh, grid[next], buf);
                        record(grid[next], buf);
                    }
                    ++next;
                }
            });
        }
    } catch (const IntegrationError&) {
        throw;
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Evaluation) throw IntegrationError(ErrorKind::Divergence, e.what(), t);
        throw;
    }
    while (next < grid.size()) record(grid[next++], y);
    return tr;
}

enum class DisplacementPolicy { UnitBasisCycle, FixedVector, None };

struct EnsembleMember {
    std::optional<Trajectory> trajectory;
    std::optional<ErrorKind> error_kind;
    std::string error;
    double last_good_time = NAN;

    bool ok() const noexcept { return trajectory.has_value(); }
};

struct EnsembleOptions {
    DisplacementPolicy policy = DisplacementPolicy::UnitBasisCycle;
    Vector fixed_displacement;
    IntegrationOptions integration;
    unsigned threads = 0;  // 0: hardware concurrency
};

/// One trajectory per initial condition on a shared grid. Member i gets
/// displacement e_(i mod n) under UnitBasisCycle. Failures are recorded per
/// member; the others still run.
inline std::vector<EnsembleMember> ensemble(const SystemModel& sys, const InputSignal& u,
                                            const std::vector<Vector>& initial_conditions,
                                            const std::vector<double>& grid, const EnsembleOptions& opt = {}) {
    if (initial_conditions.empty()) throw Error(ErrorKind::InvalidInput, "ensemble: no initial conditions");
    const std::size_t n = sys.dimension;
    if (opt.policy == DisplacementPolicy::FixedVector && opt.fixed_displacement.size() != n) {
        throw Error(ErrorKind::InvalidInput, "ensemble: fixed displacement has the wrong dimension");
    }
    std::vector<EnsembleMember> out(initial_conditions.size());
    auto run_one = [&](std::size_t i) {
        Vector dx;
        if (opt.policy == DisplacementPolicy::UnitBasisCycle) {
            dx.assign(n, 0.0);
            dx[i % n] = 1.0;
        } else if (opt.policy == DisplacementPolicy::FixedVector) {
            dx = opt.fixed_displacement;
        }
        try {
            out[i].trajectory = integrate(sys, u, initial_conditions[i], dx, grid, opt.integration);
        } catch (const IntegrationError& e) {
            out[i].error_kind = e.kind();
            out[i].error = e.what();
            out[i].last_good_time = e.last_good_time();
        } catch (const Error& e) {
            out[i].error_kind = e.kind();
            out[i].error = e.what();
        }
    };
    unsigned workers = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, out.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < out.size(); ++i) run_one(i);
        return out;
    }
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < out.size(); i += workers) run_one(i);
        });
    }
    for (auto& th : pool) th.join();
    return out;
}

/// V(t) = g(t) |dx(t)|^2 along a trajectory.
struct LyapunovTrace {
    std::vector<double> times;
    std::vector<double> values;
    std::vector<double> gain_values;
    std::vector<double> ratios;  // V(t_{j+1}) / V(t_j); 0 where V(t_j) = 0
    bool hit_zero = false;
};

inline LyapunovTrace lyapunov_trace(const Trajectory& tr, const GainFunction& g) {
    if (!tr.has_displacements()) throw Error(ErrorKind::InvalidInput, "lyapunov_trace: trajectory has no displacements");
    LyapunovTrace lt;
    lt.times = tr.times;
    for (std::size_t j = 0; j < tr.size(); ++j) {
        const double gv = g.value(tr.times[j]);
        const double d = norm2(tr.displacements[j]);
        lt.gain_values.push_back(gv);
        lt.values.push_back(gv * d * d);
        if (lt.values.back() == 0.0) lt.hit_zero = true;
    }
    for (std::size_t j = 1; j < lt.values.size(); ++j) {
        lt.ratios.push_back(lt.values[j - 1] == 0.0 ? 0.0 : lt.values[j] / lt.values[j - 1]);
    }
    return lt;
}

struct PathIntegral {
    double lhs = 0.0;
    double rhs = 0.0;
};

/// Both sides of |phi(t,x0) - phi(t,x1)|^2 <= int_0^1 |d phi/ds (t, theta(s))|^2 ds
/// along theta(s) = s x0 + (1 - s) x1, using the displacement solutions with
/// dx(t0) = x0 - x1 and the trapezoidal rule on `s_grid` points.
inline PathIntegral path_integral_check(const SystemModel& sys, const InputSignal& u, std::span<const double> x0,
                                        std::span<const double> x1, double t0, double t, std::size_t s_grid = 64,
                                        const IntegrationOptions& opt = {}) {
    if (s_grid < 2) throw Error(ErrorKind::InvalidInput, "path_integral_check: need at least two path points");
    const std::size_t n = sys.dimension;
    if (x0.size() != n || x1.size() != n) throw Error(ErrorKind::InvalidInput, "path_integral_check: dimension mismatch");
    Vector dx(n);
    for (std::size_t i = 0; i < n; ++i) dx[i] = x0[i] - x1[i];
    if (norm2(dx) == 0.0) return {};
    const std::vector<double> grid{t0, t};
    std::vector<double> sq(s_grid);
    Vector end0, end1;
    for (std::size_t j = 0; j < s_grid; ++j) {
        const double s = static_cast<double>(j) / static_cast<double>(s_grid - 1);
        Vector th(n);
        for (std::size_t i = 0; i < n; ++i) th[i] = s * x0[i] + (1.0 - s) * x1[i];
        if (j == s_grid - 1) th.assign(x0.begin(), x0.end());
        const Trajectory tr = integrate(sys, u, th, dx, grid, opt);
        const double d = norm2(tr.displacements.back());
        sq[j] = d * d;
        if (j == 0) end1 = tr.states.back();
        if (j == s_grid - 1) end0 = tr.states.back();
    }
    PathIntegral r;
    const double d = distance(end0, end1);
    r.lhs = d * d;
    const double ds = 1.0 / static_cast<double>(s_grid - 1);
    for (std::size_t j = 0; j + 1 < s_grid; ++j) r.rhs += 0.5 * ds * (sq[j] + sq[j + 1]);
    return r;
}

}  // namespace entrain
