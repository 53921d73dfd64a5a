#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "entrain/check.hpp"
#include "entrain/error.hpp"
#include "entrain/sysmodel.hpp"

namespace entrain {

enum class Sign { Positive, Negative };

inline int sign_value(Sign s) noexcept { return s == Sign::Positive ? 1 : -1; }
inline const char* to_string(Sign s) noexcept { return s == Sign::Positive ? "positive" : "negative"; }

struct Window {
    double start = 0.0;
    double end = 0.0;

    double length() const noexcept { return end - start; }
    bool contains(double t) const noexcept { return t >= start && t <= end; }
    friend bool operator==(const Window&, const Window&) = default;
};

/// A gap between sign-definite intervals. Segments that touch the analysis
/// window have only one neighbour.
struct OddSegment {
    Window span;
    std::optional<std::size_t> left_even;
    std::optional<std::size_t> right_even;
};

/// Alternating structure of the control Jacobian over a finite window.
///
/// Even intervals [knots[2i], knots[2i+1]] are where R(t,x) >= m I (sign
/// positive) or R(t,x) <= -m I (sign negative) for every x. Whatever lies
/// between them, including partial gaps at the window edges, is an odd
/// segment. A knot equal to a window endpoint means the even interval is cut
/// by the window.
///
/// `wrapped` marks a window spanning exactly one period of a periodic system
/// with both endpoints inside the same even interval: the first and last even
/// pieces are then one interval split at the seam.
struct IntervalStructure {
    Window window;
    std::vector<double> knots;
    std::vector<Sign> signs;
    double m = 0.0;
    double M = 0.0;
    double min_even_length = 0.0;
    double max_odd_length = 0.0;
    std::vector<double> eps_max_per_even;
    bool wrapped = false;
    bool heuristic = false;
    double grid_step = 0.0;
    double root_tol = 1e-10;
    std::vector<std::string> warnings;

    friend bool operator==(const IntervalStructure&, const IntervalStructure&) = default;

    std::size_t even_count() const noexcept { return signs.size(); }

    Window even(std::size_t i) const { return {knots[2 * i], knots[2 * i + 1]}; }

    std::vector<OddSegment> odd_segments() const {
        std::vector<OddSegment> out;
        const std::size_t n = even_count();
        if (n == 0) return out;
        if (knots.front() > window.start) out.push_back({{window.start, knots.front()}, std::nullopt, 0});
        for (std::size_t i = 0; i + 1 < n; ++i) out.push_back({{knots[2 * i + 1], knots[2 * i + 2]}, i, i + 1});
        if (knots.back() < window.end) out.push_back({{knots.back(), window.end}, n - 1, std::nullopt});
        return out;
    }

    /// Whether the first and last even pieces are halves of one interval.
    bool seam_joins_evens() const noexcept {
        return wrapped && even_count() >= 2 && knots.front() == window.start && knots.back() == window.end;
    }
};

struct AnalysisOptions {
    double grid_step = 0.0;  // 0: window length / 4096
    double root_tol = 1e-10;
};

namespace detail {

/// Bisection on a continuous predicate g(t) >= 0 with g(good) >= 0 > g(bad).
/// Returns a point on the `good` side within tol of the boundary.
template <class Fn>
double bisect_boundary(const Fn& g, double good, double bad, double tol) {
    while (std::abs(good - bad) > tol) {
        const double mid = 0.5 * (good + bad);
        if (mid == good || mid == bad) break;
        if (g(mid) >= 0.0) good = mid;
        else bad = mid;
    }
    return good;
}

/// Maximum of fn over [lo, hi] from a grid of spacing <= h, polished with a
/// golden-section search around the best grid point.
template <class Fn>
double sampled_max(const Fn& fn, double lo, double hi, double h) {
    const std::size_t n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((hi - lo) / h)));
    double best = -INFINITY;
    std::size_t arg = 0;
    for (std::size_t j = 0; j <= n; ++j) {
        const double t = j == n ? hi : lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(n);
        const double v = fn(t);
        if (!std::isfinite(v)) {
            std::ostringstream os;
            os << "non-finite envelope value at t=" << t;
            throw Error(ErrorKind::Evaluation, os.str());
        }
        if (v > best) {
            best = v;
            arg = j;
        }
    }
    auto at = [&](std::size_t j) {
        return j >= n ? hi : lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(n);
    };
    double a = at(arg == 0 ? 0 : arg - 1);
    double b = at(std::min(arg + 1, n));
    constexpr double inv_phi = 0.6180339887498949;
    double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    double fc = fn(c), fd = fn(d);
    for (int it = 0; it < 60 && b - a > 1e-13 * std::max(1.0, std::abs(a)); ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = fn(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = fn(d);
        }
    }
    return std::max({best, fc, fd});
}

inline double condition_value(const SystemModel& sys, Sign s, double m, double t) {
    return s == Sign::Positive ? sys.envelope_r_min(t) - m : -m - sys.envelope_r_max(t);
}

/// Fills M, k, L and the per-interval A maxima from knots and signs.
inline void derive_constants(IntervalStructure& st, const SystemModel& sys) {
    const double h = st.grid_step;
    const auto& A = sys.envelope_a_max;
    const std::size_t n = st.even_count();

    st.eps_max_per_even.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const Window e = st.even(i);
        st.eps_max_per_even[i] = std::max(0.0, sampled_max(A, e.start, e.end, h));
    }
    std::vector<double> lengths(n);
    for (std::size_t i = 0; i < n; ++i) lengths[i] = st.even(i).length();
    if (st.seam_joins_evens()) {
        const double joined = lengths.front() + lengths.back();
        lengths.front() = lengths.back() = joined;
        const double eps = std::max(st.eps_max_per_even.front(), st.eps_max_per_even.back());
        st.eps_max_per_even.front() = st.eps_max_per_even.back() = eps;
    }
    st.min_even_length = *std::min_element(lengths.begin(), lengths.end());

    st.M = 0.0;
    st.max_odd_length = 0.0;
    for (const auto& seg : st.odd_segments()) {
        st.M = std::max(st.M, sampled_max(A, seg.span.start, seg.span.end, h));
        st.max_odd_length = std::max(st.max_odd_length, seg.span.length());
    }
}

inline IntervalStructure find_knots_impl(const SystemModel& sys, Window w, double m, AnalysisOptions opt,
                                         bool wrapped) {
    if (!(m > 0.0) || !std::isfinite(m)) throw Error(ErrorKind::InvalidInput, "find_knots: m must be positive");
    if (!(w.end > w.start)) throw Error(ErrorKind::InvalidInput, "find_knots: empty window");
    if (opt.grid_step < 0.0 || !(opt.root_tol > 0.0)) {
        throw Error(ErrorKind::InvalidInput, "find_knots: grid step and root tolerance must be positive");
    }
    const double len = w.length();
    const double h_req = opt.grid_step > 0.0 ? opt.grid_step : len / 4096.0;
    const std::size_t n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / h_req - 1e-9)));
    const double h = len / static_cast<double>(n);
    auto grid_t = [&](std::size_t j) {
        return j == n ? w.end : w.start + len * static_cast<double>(j) / static_cast<double>(n);
    };

    enum class Label { None, Pos, Neg };
    std::vector<Label> labels(n + 1);
    double rmin_lo = INFINITY, rmin_hi = -INFINITY, rmax_lo = INFINITY, rmax_hi = -INFINITY;
    for (std::size_t j = 0; j <= n; ++j) {
        const double t = grid_t(j);
        const double rmin = sys.envelope_r_min(t), rmax = sys.envelope_r_max(t);
        if (!std::isfinite(rmin) || !std::isfinite(rmax)) {
            std::ostringstream os;
            os << "non-finite R envelope at t=" << t;
            throw Error(ErrorKind::Evaluation, os.str());
        }
        rmin_lo = std::min(rmin_lo, rmin);
        rmin_hi = std::max(rmin_hi, rmin);
        rmax_lo = std::min(rmax_lo, rmax);
        rmax_hi = std::max(rmax_hi, rmax);
        labels[j] = rmin - m >= 0.0 ? Label::Pos : (-m - rmax >= 0.0 ? Label::Neg : Label::None);
    }

    IntervalStructure st;
    st.window = w;
    st.m = m;
    st.wrapped = wrapped;
    st.heuristic = sys.heuristic_envelopes;
    st.grid_step = h;
    st.root_tol = opt.root_tol;

    std::size_t j = 0;
    while (j <= n) {
        if (labels[j] == Label::None) {
            ++j;
            continue;
        }
        const Label lab = labels[j];
        const std::size_t js = j;
        while (j + 1 <= n && labels[j + 1] == lab) ++j;
        const std::size_t je = j;
        ++j;

        const Sign sign = lab == Label::Pos ? Sign::Positive : Sign::Negative;
        auto g = [&](double t) { return condition_value(sys, sign, m, t); };
        const double left = js == 0 ? w.start : bisect_boundary(g, grid_t(js), grid_t(js - 1), opt.root_tol);
        const double right = je == n ? w.end : bisect_boundary(g, grid_t(je), grid_t(je + 1), opt.root_tol);
        if (right - left < 2.0 * h) {
            std::ostringstream os;
            os << "discarded " << to_string(sign) << " interval [" << left << ", " << right
               << "] shorter than two grid steps";
            st.warnings.push_back(os.str());
            continue;
        }
        st.knots.push_back(left);
        st.knots.push_back(right);
        st.signs.push_back(sign);
    }

    if (st.signs.empty()) {
        std::ostringstream os;
        os << "assumption violated: no interval in [" << w.start << ", " << w.end << "] where R(t,x) >= m I or "
           << "R(t,x) <= -m I for all x (m = " << m << "); envelope_r_min ranges over [" << rmin_lo << ", "
           << rmin_hi << "], envelope_r_max over [" << rmax_lo << ", " << rmax_hi << "]";
        if (rmin_lo == 0.0 && rmin_hi == 0.0 && rmax_lo == 0.0 && rmax_hi == 0.0) {
            os << "; R vanishes identically, the input does not enter the Jacobian";
        } else if (rmin_lo >= 0.0 || rmax_hi <= 0.0) {
            os << "; R is only semidefinite";
        }
        throw Error(ErrorKind::AssumptionViolated, os.str());
    }

    derive_constants(st, sys);
    return st;
}

}  // namespace detail

/// Scans the R envelopes over `window` and assembles the maximal intervals on
/// which R(t,x) >= m I or R(t,x) <= -m I, with crossings refined by bisection.
/// Throws AssumptionViolated when no such interval exists.
inline IntervalStructure find_knots(const SystemModel& sys, Window window, double m, AnalysisOptions opt = {}) {
    return detail::find_knots_impl(sys, window, m, opt, false);
}

/// One-period structure of a periodic system, shifted so the window starts
/// and ends at the midpoint of a sign-definite interval. A periodic input
/// built on it has its seam inside a plateau.
inline IntervalStructure align_periodic(const SystemModel& sys, double m, AnalysisOptions opt = {}, double phase = 0.0) {
    if (!sys.period) throw Error(ErrorKind::Configuration, "align_periodic: system " + sys.name + " has no period");
    const double T = *sys.period;
    const IntervalStructure probe = find_knots(sys, {phase, phase + T}, m, opt);
    const Window first = probe.even(0);
    const double c = 0.5 * (first.start + first.end);
    IntervalStructure st = detail::find_knots_impl(sys, {c, c + T}, m, opt, true);
    if (st.knots.front() != st.window.start || st.knots.back() != st.window.end) {
        throw Error(ErrorKind::Structural, "align_periodic: aligned window does not start and end in a definite interval");
    }
    return st;
}

struct ValidationReport {
    std::vector<CheckResult> checks;
    std::vector<std::string> notes;

    bool pass() const { return all_pass(checks); }
};

/// Re-checks every structural claim on a grid ten times finer than the one
/// used to build the structure.
inline ValidationReport validate_assumption(const IntervalStructure& st, const SystemModel& sys) {
    ValidationReport rep;
    const double h = (st.grid_step > 0.0 ? st.grid_step : st.window.length() / 4096.0) / 10.0;
    auto sweep = [h](double lo, double hi, const std::function<void(double)>& visit) {
        const std::size_t n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((hi - lo) / h)));
        for (std::size_t j = 0; j <= n; ++j) {
            visit(j == n ? hi : lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(n));
        }
    };

    CheckResult order{"knots strictly increasing"};
    for (std::size_t i = 1; i < st.knots.size(); ++i) order.observe(st.knots[i - 1] - st.knots[i], st.knots[i]);
    if (st.knots.size() != 2 * st.signs.size()) order.observe(INFINITY, NAN);
    rep.checks.push_back(order.settle());

    CheckResult definite{"R sign-definite with margin m on even intervals"};
    CheckResult a_even{"A bounded by per-interval maximum on even intervals"};
    for (std::size_t i = 0; i < st.even_count(); ++i) {
        const Window e = st.even(i);
        const Sign s = st.signs[i];
        sweep(e.start, e.end, [&](double t) {
            definite.observe(-detail::condition_value(sys, s, st.m, t), t);
            a_even.observe(sys.envelope_a_max(t) - st.eps_max_per_even[i], t);
        });
    }
    rep.checks.push_back(definite.settle());
    rep.checks.push_back(a_even.settle());

    const auto odds = st.odd_segments();
    CheckResult a_odd{"A bounded by M on odd intervals"};
    CheckResult odd_len{"odd interval length at most L"};
    for (const auto& seg : odds) {
        sweep(seg.span.start, seg.span.end, [&](double t) { a_odd.observe(sys.envelope_a_max(t) - st.M, t); });
        odd_len.observe(seg.span.length() - st.max_odd_length, seg.span.start);
    }
    rep.checks.push_back(a_odd.settle());
    rep.checks.push_back(odd_len.settle(1e-12 * std::max(1.0, st.max_odd_length)));

    CheckResult even_len{"even interval length at least k"};
    for (std::size_t i = 0; i < st.even_count(); ++i) {
        double len = st.even(i).length();
        if (st.seam_joins_evens() && (i == 0 || i + 1 == st.even_count())) {
            len = st.even(0).length() + st.even(st.even_count() - 1).length();
        }
        even_len.observe(st.min_even_length - len, st.even(i).start);
    }
    rep.checks.push_back(even_len.settle(1e-12 * std::max(1.0, st.min_even_length)));

    rep.notes.push_back("finite window: unboundedness of the interval sequence is not checked");
    if (!st.wrapped) rep.notes.push_back("aperiodic analysis: conclusions hold on the window only");
    if (st.heuristic) rep.notes.push_back("heuristic envelopes: bounds come from state-box sampling");
    return rep;
}

/// Zero crossings of R inside an odd segment. t1 is where R first stops being
/// definite after the left neighbour, t2 where it becomes definite before the
/// right neighbour. For segments cut by the window, the missing side is the
/// window edge.
struct TransitionTimes {
    std::size_t odd_index = 0;
    double t1 = 0.0;
    double t2 = 0.0;
    bool degenerate = false;
};

/// R stays definite with sign `sign` across the whole odd segment.
struct SignDefiniteGap {
    std::size_t odd_index = 0;
    Sign sign = Sign::Positive;
};

using Transition = std::variant<TransitionTimes, SignDefiniteGap>;

namespace detail {

// f(t) <= 0 marks a point where R is no longer definite with the given sign.
inline double indefiniteness(const SystemModel& sys, Sign s, double t) {
    return s == Sign::Positive ? sys.envelope_r_min(t) : -sys.envelope_r_max(t);
}

template <class Fn>
std::optional<double> first_hit(const Fn& f, double lo, double hi, double h, double tol) {
    const std::size_t n = std::max<std::size_t>(64, static_cast<std::size_t>(std::ceil((hi - lo) / h)));
    auto at = [&](std::size_t j) { return j == n ? hi : lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(n); };
    if (f(lo) <= 0.0) return lo;
    for (std::size_t j = 1; j <= n; ++j) {
        if (f(at(j)) <= 0.0) return bisect_boundary(f, at(j - 1), at(j), tol);
    }
    return std::nullopt;
}

template <class Fn>
std::optional<double> last_hit(const Fn& f, double lo, double hi, double h, double tol) {
    const std::size_t n = std::max<std::size_t>(64, static_cast<std::size_t>(std::ceil((hi - lo) / h)));
    auto at = [&](std::size_t j) { return j == n ? hi : lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(n); };
    if (f(hi) <= 0.0) return hi;
    for (std::size_t j = n; j-- > 0;) {
        if (f(at(j)) <= 0.0) return bisect_boundary(f, at(j + 1), at(j), tol);
    }
    return std::nullopt;
}

}  // namespace detail

inline Transition locate_transitions(const IntervalStructure& st, const SystemModel& sys, std::size_t odd_index,
                                     double root_tol = 1e-10) {
    const auto odds = st.odd_segments();
    if (odd_index >= odds.size()) throw Error(ErrorKind::InvalidInput, "locate_transitions: odd index out of range");
    const OddSegment& seg = odds[odd_index];
    const double lo = seg.span.start, hi = seg.span.end;
    const double h = st.grid_step > 0.0 ? st.grid_step : seg.span.length() / 64.0;

    std::optional<double> t1, t2;
    if (seg.left_even) {
        const Sign s = st.signs[*seg.left_even];
        t1 = detail::first_hit([&](double t) { return detail::indefiniteness(sys, s, t); }, lo, hi, h, root_tol);
    }
    if (seg.right_even) {
        const Sign s = st.signs[*seg.right_even];
        // Searching from the right: the definite side is the right one.
        auto f = [&](double t) { return detail::indefiniteness(sys, s, t); };
        t2 = detail::last_hit(f, lo, hi, h, root_tol);
    }

    const bool has_left = seg.left_even.has_value(), has_right = seg.right_even.has_value();
    const bool found_left = t1.has_value(), found_right = t2.has_value();

    if ((has_left && !found_left) || (has_right && !found_right)) {
        if (has_left && has_right && (found_left || found_right)) {
            throw Error(ErrorKind::Structural, "locate_transitions: R crosses zero for one neighbour but not the other");
        }
        if (has_left && has_right && st.signs[*seg.left_even] != st.signs[*seg.right_even]) {
            throw Error(ErrorKind::Structural,
                        "locate_transitions: neighbours have opposite signs but R never vanishes in between");
        }
        const Sign s = has_left ? st.signs[*seg.left_even] : st.signs[*seg.right_even];
        return SignDefiniteGap{odd_index, s};
    }

    TransitionTimes tt;
    tt.odd_index = odd_index;
    tt.t1 = found_left ? *t1 : lo;
    tt.t2 = found_right ? *t2 : hi;
    if (tt.t1 > tt.t2 || tt.t2 - tt.t1 <= 2.0 * root_tol) {
        if (tt.t1 - tt.t2 > 2.0 * root_tol) {
            throw Error(ErrorKind::Structural, "locate_transitions: transition times out of order");
        }
        if (has_left && has_right) {
            const double mid = 0.5 * (tt.t1 + tt.t2);
            tt.t1 = tt.t2 = mid;
        } else {
            tt.t1 = tt.t2 = has_left ? tt.t1 : tt.t2;
        }
        tt.degenerate = true;
    }
    return tt;
}

inline std::vector<Transition> locate_all_transitions(const IntervalStructure& st, const SystemModel& sys) {
    std::vector<Transition> out;
    const std::size_t n = st.odd_segments().size();
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(locate_transitions(st, sys, i, st.root_tol));
    return out;
}

}  // namespace entrain
