#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "entrain/check.hpp"
#include "entrain/error.hpp"
#include "entrain/intervals.hpp"
#include "entrain/sim.hpp"
#include "entrain/synth.hpp"

namespace entrain {

inline constexpr double kBoundSlack = 1e-6;
inline constexpr double kDistanceFloor = 1e-12;

/// V(t2) <= V(t1) exp(-alpha (t2 - t1)) (1 + tol) for consecutive samples.
/// The margin is the log-ratio excess log(V2/V1) + alpha (t2 - t1).
inline CheckResult check_certificate(const LyapunovTrace& tr, double alpha, double tol = kBoundSlack) {
    if (tr.values.empty()) throw Error(ErrorKind::InvalidInput, "check_certificate: empty trace");
    if (!(alpha > 0.0)) throw Error(ErrorKind::InvalidInput, "check_certificate: alpha must be positive");
    CheckResult r{"certificate V' <= -alpha V"};
    for (std::size_t j = 1; j < tr.values.size(); ++j) {
        const double v1 = tr.values[j - 1], v2 = tr.values[j];
        const double dt = tr.times[j] - tr.times[j - 1];
        if (v1 == 0.0) {
            r.observe(v2 == 0.0 ? -INFINITY : INFINITY, tr.times[j]);
            continue;
        }
        if (v2 == 0.0) continue;
        r.observe(std::log(v2 / v1) + alpha * dt, tr.times[j - 1]);
    }
    r.settle(std::log1p(tol));
    return r;
}

namespace detail {

/// Worst log excess of d(t) <= k d(t0) exp(-lambda (t - t0)) over every pair
/// of samples t0 <= t. `floor` is subtracted from d(t) before comparing.
inline void observe_bound(CheckResult& r, const std::vector<double>& times, const std::vector<double>& d,
                          double overshoot, double rate, double floor) {
    const std::size_t n = d.size();
    if (n == 0) return;
    const double log_k = std::log(overshoot);
    std::vector<double> h(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double v = d[j] - floor;
        h[j] = (v > 0.0 ? std::log(v) : -INFINITY) + rate * times[j];
        if (std::isnan(d[j])) h[j] = NAN;
    }
    double suffix = -INFINITY;
    double suffix_t = NAN;
    for (std::size_t i = n; i-- > 0;) {
        if (std::isnan(h[i])) {
            r.observe(NAN, times[i]);
            continue;
        }
        if (h[i] > suffix) {
            suffix = h[i];
            suffix_t = times[i];
        }
        if (!(d[i] > 0.0)) {
            // A zero start bounds nothing unless the later values are zero too.
            if (suffix > -INFINITY) r.observe(INFINITY, suffix_t);
            continue;
        }
        r.observe(suffix - (std::log(d[i]) + rate * times[i]) - log_k, suffix_t);
    }
}

}  // namespace detail

/// |dx(t)| <= k |dx(t0)| exp(-lambda (t - t0)) on every trajectory, with
/// every output sample taken as t0.
inline CheckResult check_contraction(const std::vector<Trajectory>& trajs, double overshoot, double rate,
                                     double slack = kBoundSlack) {
    CheckResult r{"contraction |dx(t)| <= k |dx(t0)| exp(-lambda (t - t0))"};
    for (const auto& tr : trajs) {
        if (!tr.has_displacements()) throw Error(ErrorKind::InvalidInput, "check_contraction: trajectory without displacements");
        std::vector<double> d(tr.size());
        double dmax = 0.0;
        for (std::size_t j = 0; j < tr.size(); ++j) {
            d[j] = norm2(tr.displacements[j]);
            dmax = std::max(dmax, d[j]);
        }
        detail::observe_bound(r, tr.times, d, overshoot, rate, kDistanceFloor * dmax);
    }
    std::ostringstream os;
    os << "k = " << overshoot << ", lambda = " << rate << ", every sample used as t0";
    r.detail = os.str();
    r.settle(std::log1p(slack));
    return r;
}

/// |x1(t) - x2(t)| <= k |x1(t0) - x2(t0)| exp(-lambda (t - t0)) for every pair.
inline CheckResult check_ies(const std::vector<std::pair<Trajectory, Trajectory>>& pairs, double overshoot,
                             double rate, double slack = kBoundSlack) {
    CheckResult r{"IES |x1(t) - x2(t)| <= k |x1(t0) - x2(t0)| exp(-lambda (t - t0))"};
    for (const auto& [a, b] : pairs) {
        if (a.times != b.times) throw Error(ErrorKind::InvalidInput, "check_ies: pair members must share a time grid");
        std::vector<double> d(a.size());
        for (std::size_t j = 0; j < a.size(); ++j) d[j] = distance(a.states[j], b.states[j]);
        detail::observe_bound(r, a.times, d, overshoot, rate, kDistanceFloor);
    }
    std::ostringstream os;
    os << pairs.size() << " pairs, k = " << overshoot << ", lambda = " << rate << ", every sample used as t0";
    r.detail = os.str();
    r.settle(std::log1p(slack));
    return r;
}

struct DecayFit {
    double lambda_hat = 0.0;
    double overshoot_hat = 1.0;
    double r_squared = 0.0;
    Window window_used;
    std::size_t zeros_excluded = 0;
};

/// Least-squares line through (t, log v). Samples before `skip_until` and
/// non-positive values are left out. overshoot_hat = exp(intercept - log v(t0))
/// with t0 the first sample used, clipped below at 1.
inline DecayFit fit_decay(const std::vector<double>& times, const std::vector<double>& values,
                          double skip_until = -INFINITY) {
    if (times.size() != values.size()) throw Error(ErrorKind::InvalidInput, "fit_decay: size mismatch");
    std::vector<double> ts, ls;
    DecayFit f;
    for (std::size_t j = 0; j < times.size(); ++j) {
        if (times[j] < skip_until) continue;
        if (!(values[j] > 0.0)) {
            ++f.zeros_excluded;
            continue;
        }
        ts.push_back(times[j]);
        ls.push_back(std::log(values[j]));
    }
    if (ts.size() < 3) throw Error(ErrorKind::InsufficientData, "fit_decay: fewer than three positive samples");
    const double t0 = ts.front();
    const double nn = static_cast<double>(ts.size());
    double mt = 0.0, ml = 0.0;
    for (std::size_t j = 0; j < ts.size(); ++j) {
        mt += ts[j] - t0;
        ml += ls[j];
    }
    mt /= nn;
    ml /= nn;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t j = 0; j < ts.size(); ++j) {
        const double dx = ts[j] - t0 - mt, dy = ls[j] - ml;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (!(sxx > 0.0)) throw Error(ErrorKind::InsufficientData, "fit_decay: samples span no time");
    const double slope = sxy / sxx;
    const double intercept = ml - slope * mt;
    f.lambda_hat = -slope;
    f.overshoot_hat = std::max(1.0, std::exp(intercept - ls.front()));
    f.r_squared = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
    f.window_used = {t0, ts.back()};
    return f;
}

struct PeriodicConvergence {
    CheckResult check;
    std::vector<double> increments;  // d_n = |x(t0 + (n+1) T) - x(t0 + n T)|
    Vector periodic_point;           // extrapolated x on the periodic orbit at t0 + n T
    bool converged_early = false;
};

/// Geometric contraction of the period map: d_{n+1} / d_n <= ratio_bound for
/// n >= 1. Passes early once some d_n drops below 1e-13.
inline PeriodicConvergence check_periodic_convergence(const Trajectory& tr, double T, double ratio_bound) {
    if (!(T > 0.0)) throw Error(ErrorKind::InvalidInput, "check_periodic_convergence: period must be positive");
    if (!(ratio_bound > 0.0 && ratio_bound < 1.0)) {
        throw Error(ErrorKind::InvalidInput, "check_periodic_convergence: ratio bound must lie in (0, 1)");
    }
    PeriodicConvergence pc;
    pc.check.name = "period-map contraction";
    const double t0 = tr.times.front();
    std::vector<const Vector*> samples;
    for (std::size_t n = 0;; ++n) {
        const double tn = t0 + static_cast<double>(n) * T;
        if (tn > tr.times.back() + 1e-9 * T) break;
        auto it = std::lower_bound(tr.times.begin(), tr.times.end(), tn - 1e-9 * T);
        if (it == tr.times.end() || std::abs(*it - tn) > 1e-9 * T) {
            throw Error(ErrorKind::InsufficientData, "check_periodic_convergence: output grid is not commensurate with the period");
        }
        samples.push_back(&tr.states[static_cast<std::size_t>(it - tr.times.begin())]);
    }
    if (samples.size() < 5) throw Error(ErrorKind::InsufficientData, "check_periodic_convergence: need at least four periods");
    for (std::size_t n = 0; n + 1 < samples.size(); ++n) pc.increments.push_back(distance(*samples[n + 1], *samples[n]));

    for (std::size_t n = 0; n < pc.increments.size(); ++n) {
        if (pc.increments[n] < 1e-13) {
            pc.converged_early = true;
            break;
        }
        if (n >= 2) pc.check.observe(pc.increments[n] / pc.increments[n - 1] - ratio_bound, t0 + static_cast<double>(n) * T);
    }
    if (!pc.converged_early && pc.check.worst_margin == -INFINITY && !pc.check.saw_nan) {
        throw Error(ErrorKind::InsufficientData, "check_periodic_convergence: no increment ratio past the first period");
    }
    pc.check.settle();

    const std::size_t m = samples.size();
    const Vector& a = *samples[m - 3];
    const Vector& b = *samples[m - 2];
    const Vector& c = *samples[m - 1];
    pc.periodic_point.resize(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double d2 = c[i] - 2.0 * b[i] + a[i];
        pc.periodic_point[i] = d2 != 0.0 ? c[i] - (c[i] - b[i]) * (c[i] - b[i]) / d2 : c[i];
    }
    std::ostringstream os;
    os << pc.increments.size() << " period increments, last " << pc.increments.back();
    if (pc.converged_early) os << ", converged below 1e-13";
    pc.check.detail = os.str();
    return pc;
}

/// Constants that the gain construction predicts for the IES bound:
/// k = exp((M + alpha) L / 2), lambda = alpha / 2.
struct PredictedConstants {
    double overshoot = 1.0;
    double rate = 0.0;
};

inline PredictedConstants predicted_constants(const IntervalStructure& st, double alpha) {
    return {std::exp(0.5 * (st.M + alpha) * st.max_odd_length), 0.5 * alpha};
}

struct EmpiricalOptions {
    std::size_t trials = 20;
    StateBox box;
    double duration = 0.0;
    std::vector<double> start_times;  // knots; 8 random times are added
    double random_start_span = 0.0;   // random start times in [first start, first start + span]
    std::size_t samples_per_unit = 64;
    std::uint64_t seed = 20240601;
    IntegrationOptions integration;
};

struct EmpiricalResult {
    CheckResult check;
    std::vector<double> start_times_used;
    std::size_t pairs = 0;
};

/// IES check on random trajectory pairs with fixed constants. Pairs start at
/// the given start times (each knot) plus 8 random ones, cycling through them.
inline EmpiricalResult ies_empirical(const SystemModel& sys, const InputSignal& u, double overshoot, double rate,
                                     const EmpiricalOptions& opt) {
    if (opt.box.dimension() != sys.dimension) throw Error(ErrorKind::InvalidInput, "ies_empirical: box dimension mismatch");
    if (!(opt.duration > 0.0)) throw Error(ErrorKind::InvalidInput, "ies_empirical: duration must be positive");
    std::mt19937_64 rng(opt.seed);
    EmpiricalResult res;
    res.start_times_used = opt.start_times;
    const double base = opt.start_times.empty() ? 0.0 : opt.start_times.front();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 8; ++i) res.start_times_used.push_back(base + opt.random_start_span * unit(rng));

    std::vector<std::pair<Trajectory, Trajectory>> pairs;
    const std::size_t steps = std::max<std::size_t>(8, static_cast<std::size_t>(std::ceil(opt.duration * static_cast<double>(opt.samples_per_unit))));
    for (std::size_t p = 0; p < opt.trials; ++p) {
        const double ts = res.start_times_used[p % res.start_times_used.size()];
        auto draw = [&] {
            Vector x(sys.dimension);
            for (std::size_t d = 0; d < x.size(); ++d) x[d] = opt.box.lower[d] + (opt.box.upper[d] - opt.box.lower[d]) * unit(rng);
            return x;
        };
        const Vector xa = draw(), xb = draw();
        const auto grid = uniform_grid(ts, ts + opt.duration, steps);
        pairs.emplace_back(integrate(sys, u, xa, {}, grid, opt.integration),
                           integrate(sys, u, xb, {}, grid, opt.integration));
    }
    res.pairs = pairs.size();
    res.check = check_ies(pairs, overshoot, rate);
    res.check.name = "IES with predicted constants";
    std::ostringstream os;
    os << res.check.detail << "; start times: " << res.start_times_used.size() - 8 << " knots + 8 random";
    res.check.detail = os.str();
    return res;
}

/// The contraction-implies-IES step with the constants predicted from the
/// structure and alpha, not refitted.
inline EmpiricalResult theorem_one_empirical(const SystemModel& sys, const InputSignal& u, const IntervalStructure& st,
                                             double alpha, EmpiricalOptions opt) {
    const PredictedConstants pc = predicted_constants(st, alpha);
    if (opt.start_times.empty()) opt.start_times = st.knots;
    if (opt.random_start_span == 0.0) opt.random_start_span = st.window.length();
    return ies_empirical(sys, u, pc.overshoot, pc.rate, opt);
}

struct VerificationReport {
    std::vector<CheckResult> checks;
    std::map<std::string, DecayFit> fits;
    std::optional<SynthesisConstants> constants;
    std::string scope;  // "window [a, b]" or "periodic, T = ..."
    std::vector<std::string> notes;

    bool pass() const { return all_pass(checks); }

    std::string text() const {
        std::ostringstream os;
        os << "verification " << (pass() ? "PASS" : "FAIL") << " (" << scope << ")\n";
        for (const auto& c : checks) {
            os << "  [" << (c.pass ? "pass" : "FAIL") << "] " << c.name << ": worst margin " << c.worst_margin;
            if (std::isfinite(c.location)) os << " at t=" << c.location;
            if (c.saw_nan) os << " (NaN seen)";
            if (!c.detail.empty()) os << " -- " << c.detail;
            os << "\n";
        }
        for (const auto& [name, f] : fits) {
            os << "  fit " << name << ": lambda " << f.lambda_hat << ", k " << f.overshoot_hat << ", R^2 "
               << f.r_squared << " on [" << f.window_used.start << ", " << f.window_used.end << "]\n";
        }
        if (constants) {
            os << "  constants: alpha " << constants->alpha << ", c " << constants->c << ", m " << constants->m
               << ", M " << constants->M << ", k " << constants->k << ", L " << constants->L << "\n";
        }
        for (const auto& n : notes) os << "  note: " << n << "\n";
        return os.str();
    }
};

}  // namespace entrain
