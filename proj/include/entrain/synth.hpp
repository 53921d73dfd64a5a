#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "entrain/check.hpp"
#include "entrain/error.hpp"
#include "entrain/intervals.hpp"
#include "entrain/piecewise.hpp"
#include "entrain/sysmodel.hpp"

namespace entrain {

/// Quintic smoothstep s^3 (10 - 15 s + 6 s^2) and its derivatives. Value,
/// slope and curvature are exactly 0 / 0 / 0 at s = 0 and 1 / 0 / 0 at s = 1,
/// and the function is monotone on [0, 1].
struct Smoothstep {
    static double value(double s) { return s * s * s * (10.0 + s * (-15.0 + 6.0 * s)); }
    static double d1(double s) {
        const double q = s * (1.0 - s);
        return 30.0 * q * q;
    }
    static double d2(double s) { return 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s); }
};

/// Value with first and second time derivative.
struct Jet {
    double v = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

enum class InputPieceKind { Plateau, Blend, Zero };

inline const char* to_string(InputPieceKind k) {
    switch (k) {
        case InputPieceKind::Plateau: return "plateau";
        case InputPieceKind::Blend: return "blend";
        case InputPieceKind::Zero: return "zero";
    }
    return "?";
}

/// Plateau: constant `from` (== `to`). Blend: (1 - sigma) from + sigma to with
/// sigma the smoothstep of the normalised time. Zero: identically 0.
struct InputPiece {
    double t0 = 0.0;
    double t1 = 0.0;
    InputPieceKind kind = InputPieceKind::Zero;
    double from = 0.0;
    double to = 0.0;

    Jet eval(double t) const {
        switch (kind) {
            case InputPieceKind::Zero: return {};
            case InputPieceKind::Plateau: return {from, 0.0, 0.0};
            case InputPieceKind::Blend: {
                const double len = t1 - t0;
                const double s = std::clamp((t - t0) / len, 0.0, 1.0);
                const double sig = Smoothstep::value(s);
                const double span = to - from;
                return {(1.0 - sig) * from + sig * to, span * Smoothstep::d1(s) / len,
                        span * Smoothstep::d2(s) / (len * len)};
            }
        }
        return {};
    }

    friend bool operator==(const InputPiece&, const InputPiece&) = default;
};

/// C^2 open-loop input built from plateau, smoothstep-blend and zero pieces.
class FeedforwardInput : public Piecewise<InputPiece> {
public:
    using Piecewise::Piecewise;

    static FeedforwardInput constant(double value, Window domain) {
        return FeedforwardInput({InputPiece{domain.start, domain.end, InputPieceKind::Plateau, value, value}});
    }

    Jet eval(double t) const {
        const double tau = map_time(t);
        return locate(tau).eval(tau);
    }

    double value(double t) const { return eval(t).v; }

    friend bool operator==(const FeedforwardInput& a, const FeedforwardInput& b) {
        return a.pieces_ == b.pieces_ && a.periodicity_ == b.periodicity_;
    }
};

enum class GainPieceKind { Exponential, Affine };

inline const char* to_string(GainPieceKind k) { return k == GainPieceKind::Exponential ? "exponential" : "affine"; }

/// Exponential: exp(-rate (t - anchor)). Affine: slope (t - anchor) + intercept.
struct GainPiece {
    double t0 = 0.0;
    double t1 = 0.0;
    GainPieceKind kind = GainPieceKind::Affine;
    double anchor = 0.0;
    double rate = 0.0;
    double slope = 0.0;
    double intercept = 1.0;

    double eval(double t) const {
        return kind == GainPieceKind::Exponential ? std::exp(-rate * (t - anchor)) : slope * (t - anchor) + intercept;
    }

    friend bool operator==(const GainPiece&, const GainPiece&) = default;
};

/// Scalar weight g(t) of the displacement Lyapunov function V = g(t) |dx|^2.
/// Continuous, with kinks at knots.
class GainFunction : public Piecewise<GainPiece> {
public:
    using Piecewise::Piecewise;

    double value(double t) const {
        const double tau = map_time(t);
        return locate(tau).eval(tau);
    }

    friend bool operator==(const GainFunction& a, const GainFunction& b) {
        return a.pieces_ == b.pieces_ && a.periodicity_ == b.periodicity_;
    }
};

struct SynthesisConstants {
    double alpha = 0.0;
    double c = 0.0;
    double margin = 1.05;
    std::vector<double> c_odd;  // aligned with IntervalStructure::odd_segments()
    double m = 0.0;
    double M = 0.0;
    double k = 0.0;
    double L = 0.0;

    friend bool operator==(const SynthesisConstants&, const SynthesisConstants&) = default;
};

/// Decay rate alpha and the amplitude constants of the input:
///   c     = margin (alpha + exp((M + alpha) L) / k)   (margin * alpha without odd gaps)
///   c_odd = margin * max over in-window neighbours i of (c + k_i) / m^2
inline SynthesisConstants choose_constants(const IntervalStructure& st, double alpha, double margin = 1.05) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw Error(ErrorKind::InvalidInput, "choose_constants: alpha must be positive");
    }
    if (!(margin > 1.0) || !std::isfinite(margin)) {
        throw Error(ErrorKind::InvalidInput, "choose_constants: margin must exceed 1");
    }
    SynthesisConstants k;
    k.alpha = alpha;
    k.margin = margin;
    k.m = st.m;
    k.M = st.M;
    k.k = st.min_even_length;
    k.L = st.max_odd_length;
    const auto odds = st.odd_segments();
    if (odds.empty()) {
        k.c = margin * alpha;
        return k;
    }
    const double exponent = (st.M + alpha) * st.max_odd_length;
    if (exponent > 700.0 || !(st.min_even_length > 0.0)) {
        std::ostringstream os;
        os << "synthesis infeasible: exp((M + alpha) L) overflows with M = " << st.M << ", alpha = " << alpha
           << ", L = " << st.max_odd_length << "; choose a smaller alpha or a larger m to shorten the odd gaps";
        throw Error(ErrorKind::SynthesisInfeasible, os.str());
    }
    k.c = margin * (alpha + std::exp(exponent) / st.min_even_length);
    const double m2 = st.m * st.m;
    for (const auto& seg : odds) {
        double need = 0.0;
        if (seg.left_even) need = std::max(need, (k.c + st.eps_max_per_even[*seg.left_even]) / m2);
        if (seg.right_even) need = std::max(need, (k.c + st.eps_max_per_even[*seg.right_even]) / m2);
        k.c_odd.push_back(margin * need);
    }
    if (!std::all_of(k.c_odd.begin(), k.c_odd.end(), [](double v) { return std::isfinite(v); })) {
        throw Error(ErrorKind::SynthesisInfeasible, "synthesis infeasible: non-finite input amplitude");
    }
    return k;
}

namespace detail {

/// Input magnitudes at the left and right end of each even interval.
struct EvenAmplitudes {
    std::vector<double> left, right;
};

inline EvenAmplitudes even_amplitudes(const IntervalStructure& st, const SynthesisConstants& k) {
    const std::size_t n = st.even_count();
    const auto odds = st.odd_segments();
    std::vector<std::optional<double>> left(n), right(n);
    for (std::size_t j = 0; j < odds.size(); ++j) {
        const double amp = k.c_odd[j] * st.m;
        if (odds[j].right_even) left[*odds[j].right_even] = amp;
        if (odds[j].left_even) right[*odds[j].left_even] = amp;
    }
    if (st.seam_joins_evens() && !odds.empty()) {
        const double seam = std::max(*right.front(), *left.back());
        left.front() = seam;
        right.back() = seam;
    }
    EvenAmplitudes out;
    for (std::size_t i = 0; i < n; ++i) {
        const double fallback = k.margin * (k.c + st.eps_max_per_even[i]) / st.m;
        const double l = left[i].value_or(right[i].value_or(fallback));
        const double r = right[i].value_or(l);
        out.left.push_back(l);
        out.right.push_back(r);
    }
    return out;
}

inline void push_piece(std::vector<InputPiece>& out, double t0, double t1, InputPieceKind kind, double from, double to) {
    if (!(t1 > t0)) return;
    if (kind == InputPieceKind::Blend && from == to) kind = InputPieceKind::Plateau;
    out.push_back({t0, t1, kind, from, to});
}

}  // namespace detail

/// Assembles the input piece by piece. Even intervals carry a plateau of
/// magnitude at least (c + k_i) / m with sign opposite to R (a monotone blend
/// when the neighbouring gap amplitudes differ). Odd gaps blend to zero where
/// R stops being definite, stay zero, and blend back before the next
/// definite interval; gaps where R never vanishes keep a plateau.
inline FeedforwardInput build_input(const IntervalStructure& st, const SynthesisConstants& k,
                                    const std::vector<Transition>& transitions) {
    const auto odds = st.odd_segments();
    if (transitions.size() != odds.size() || k.c_odd.size() != odds.size()) {
        throw Error(ErrorKind::Structural, "build_input: transitions or constants do not match the odd gaps");
    }
    const auto amps = detail::even_amplitudes(st, k);
    auto even_value = [&](std::size_t i, double amp) { return -sign_value(st.signs[i]) * amp; };

    std::vector<InputPiece> pieces;
    std::size_t next_odd = 0;
    auto emit_odd = [&](std::size_t j) {
        const OddSegment& seg = odds[j];
        const double lo = seg.span.start, hi = seg.span.end;
        if (const auto* gap = std::get_if<SignDefiniteGap>(&transitions[j])) {
            const double v = -sign_value(gap->sign) * k.c_odd[j] * st.m;
            detail::push_piece(pieces, lo, hi, InputPieceKind::Plateau, v, v);
            return;
        }
        const auto& tt = std::get<TransitionTimes>(transitions[j]);
        if (tt.odd_index != j) throw Error(ErrorKind::Structural, "build_input: transitions out of order");
        if ((seg.left_even && !(tt.t1 > lo)) || (seg.right_even && !(tt.t2 < hi)) || tt.t1 > tt.t2) {
            throw Error(ErrorKind::Structural, "build_input: transition times outside their odd gap");
        }
        if (seg.left_even) {
            const double v = even_value(*seg.left_even, amps.right[*seg.left_even]);
            detail::push_piece(pieces, lo, tt.t1, InputPieceKind::Blend, v, 0.0);
        }
        detail::push_piece(pieces, seg.left_even ? tt.t1 : lo, seg.right_even ? tt.t2 : hi, InputPieceKind::Zero, 0.0, 0.0);
        if (seg.right_even) {
            const double v = even_value(*seg.right_even, amps.left[*seg.right_even]);
            detail::push_piece(pieces, tt.t2, hi, InputPieceKind::Blend, 0.0, v);
        }
    };

    for (std::size_t i = 0; i < st.even_count(); ++i) {
        while (next_odd < odds.size() && odds[next_odd].span.start < st.even(i).start) emit_odd(next_odd++);
        const Window e = st.even(i);
        detail::push_piece(pieces, e.start, e.end, InputPieceKind::Blend, even_value(i, amps.left[i]),
                           even_value(i, amps.right[i]));
    }
    while (next_odd < odds.size()) emit_odd(next_odd++);
    return FeedforwardInput(std::move(pieces));
}

/// Gain of the Lyapunov function: exp(-(M + alpha)(t - a)) from the start a
/// of each odd gap, then an affine ramp over the following even interval from
/// the value reached back up to 1.
inline GainFunction build_gain(const IntervalStructure& st, const SynthesisConstants& k) {
    const double rate = st.M + k.alpha;
    const auto odds = st.odd_segments();
    const std::size_t n = st.even_count();
    std::vector<std::optional<std::size_t>> preceding(n);
    for (std::size_t j = 0; j < odds.size(); ++j)
        if (odds[j].right_even) preceding[*odds[j].right_even] = j;

    const bool seam = st.seam_joins_evens() && !odds.empty();
    const double seam_len = seam ? st.even(0).length() + st.even(n - 1).length() : 0.0;
    const double seam_zeta = seam ? std::exp(-rate * odds.back().span.length()) : 1.0;

    std::vector<GainPiece> pieces;
    std::size_t next_odd = 0;
    auto emit_odd = [&](std::size_t j) {
        const Window s = odds[j].span;
        pieces.push_back({s.start, s.end, GainPieceKind::Exponential, s.start, rate, 0.0, 1.0});
    };
    for (std::size_t i = 0; i < n; ++i) {
        while (next_odd < odds.size() && odds[next_odd].span.start < st.even(i).start) emit_odd(next_odd++);
        const Window e = st.even(i);
        GainPiece p{e.start, e.end, GainPieceKind::Affine, e.start, 0.0, 0.0, 1.0};
        if (seam && i == 0) {
            p.anchor = e.start - st.even(n - 1).length();
            p.intercept = seam_zeta;
            p.slope = (1.0 - seam_zeta) / seam_len;
        } else if (preceding[i]) {
            const double zeta = std::exp(-rate * odds[*preceding[i]].span.length());
            double len = e.length();
            if (seam && i + 1 == n) len = seam_len;
            else if (e.end == st.window.end) len = std::max(len, st.min_even_length);
            p.intercept = zeta;
            p.slope = (1.0 - zeta) / len;
        }
        pieces.push_back(p);
    }
    while (next_odd < odds.size()) emit_odd(next_odd++);
    return GainFunction(std::move(pieces));
}

/// Makes input and gain T-periodic. Both must span exactly one period and
/// agree at the seam in value (and, for the input, in first and second
/// derivative) to 1e-12.
struct PeriodicPair {
    FeedforwardInput input;
    GainFunction gain;
};

inline PeriodicPair periodize(FeedforwardInput input, GainFunction gain, double T) {
    if (!(T > 0.0)) throw Error(ErrorKind::InvalidInput, "periodize: period must be positive");
    const Window d = input.domain();
    if (std::abs(d.length() - T) > 1e-9 * T || std::abs(gain.domain().length() - T) > 1e-9 * T ||
        gain.domain().start != d.start) {
        throw Error(ErrorKind::Periodization, "periodize: input and gain must both span exactly one period");
    }
    const Jet a = input.pieces().front().eval(d.start);
    const Jet b = input.pieces().back().eval(d.end);
    const double scale = std::max(1.0, std::max(std::abs(a.v), std::abs(b.v)));
    const double mismatch = std::max({std::abs(a.v - b.v), std::abs(a.d1 - b.d1), std::abs(a.d2 - b.d2)});
    if (mismatch > 1e-12 * scale) {
        std::ostringstream os;
        os << "periodize: input seam mismatch " << mismatch << " at t=" << d.start
           << "; re-align the window so both ends fall inside a plateau";
        throw Error(ErrorKind::Periodization, os.str());
    }
    const double ga = gain.pieces().front().eval(d.start), gb = gain.pieces().back().eval(gain.domain().end);
    if (std::abs(ga - gb) > 1e-12) {
        std::ostringstream os;
        os << "periodize: gain seam mismatch " << std::abs(ga - gb) << "; re-align the window";
        throw Error(ErrorKind::Periodization, os.str());
    }
    input.set_periodicity({d.start, T});
    gain.set_periodicity({d.start, T});
    return {std::move(input), std::move(gain)};
}

/// Largest jumps in u, u', u'' over all junctions (and the periodic seam).
struct JunctionJumps {
    double value = 0.0;
    double first = 0.0;
    double second = 0.0;
};

inline JunctionJumps junction_jumps(const FeedforwardInput& u) {
    JunctionJumps j;
    const auto& p = u.pieces();
    auto acc = [&](const Jet& a, const Jet& b) {
        j.value = std::max(j.value, std::abs(a.v - b.v));
        j.first = std::max(j.first, std::abs(a.d1 - b.d1));
        j.second = std::max(j.second, std::abs(a.d2 - b.d2));
    };
    for (std::size_t i = 1; i < p.size(); ++i) acc(p[i - 1].eval(p[i - 1].t1), p[i].eval(p[i].t0));
    if (u.periodicity()) acc(p.back().eval(p.back().t1), p.front().eval(p.front().t0));
    return j;
}

inline CheckResult verify_smoothness(const FeedforwardInput& u, double junction_tol = 1e-12) {
    CheckResult r{"input C2 at junctions"};
    const auto& p = u.pieces();
    auto visit = [&](const InputPiece& left, const InputPiece& right, double t) {
        const Jet a = left.eval(left.t1), b = right.eval(right.t0);
        r.observe(std::max({std::abs(a.v - b.v), std::abs(a.d1 - b.d1), std::abs(a.d2 - b.d2)}) - junction_tol, t);
    };
    for (std::size_t i = 1; i < p.size(); ++i) visit(p[i - 1], p[i], p[i].t0);
    if (u.periodicity()) visit(p.back(), p.front(), p.front().t0);
    const JunctionJumps jj = junction_jumps(u);
    std::ostringstream os;
    os << "max jumps: value " << jj.value << ", first derivative " << jj.first << ", second derivative " << jj.second;
    r.detail = os.str();
    return r.settle();
}

namespace detail {

template <class Fn>
void sweep(double lo, double hi, std::size_t n, const Fn& visit) {
    for (std::size_t j = 0; j <= n; ++j) visit(j == n ? hi : lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(n));
}

inline std::size_t sweep_count(double len, double h) {
    return std::max<std::size_t>(16, static_cast<std::size_t>(std::ceil(len / h)));
}

}  // namespace detail

/// Pointwise checks of the input against the structure on a dense grid:
/// magnitude on even intervals, and u(t) R(t,x) <= 0 on the odd gaps.
inline std::vector<CheckResult> verify_input_constraints(const FeedforwardInput& u, const IntervalStructure& st,
                                                         const SynthesisConstants& k, const SystemModel& sys) {
    const double h = st.grid_step > 0.0 ? st.grid_step : st.window.length() / 4096.0;
    CheckResult mag{"input magnitude on even intervals"};
    for (std::size_t i = 0; i < st.even_count(); ++i) {
        const Window e = st.even(i);
        const double need = k.c + st.eps_max_per_even[i];
        detail::sweep(e.start, e.end, detail::sweep_count(e.length(), h), [&](double t) {
            mag.observe(u.value(t) * sign_value(st.signs[i]) * st.m + need, t);
        });
    }
    CheckResult compat{"input sign opposite to R on odd gaps"};
    for (const auto& seg : st.odd_segments()) {
        detail::sweep(seg.span.start, seg.span.end, detail::sweep_count(seg.span.length(), h), [&](double t) {
            const double v = u.value(t);
            if (v < 0.0) compat.observe(v * sys.envelope_r_min(t), t);
            else if (v > 0.0) compat.observe(v * sys.envelope_r_max(t), t);
            else compat.observe(0.0, t);
        });
    }
    return {mag.settle(), compat.settle(1e-12)};
}

/// Gain sandwich exp(-(M + alpha) L) <= g <= 1 and the one-sided decrease
/// conditions: ratio bound inside odd gaps, slope bound 1/k on even intervals.
inline std::vector<CheckResult> verify_gain(const GainFunction& g, const IntervalStructure& st,
                                            const SynthesisConstants& k) {
    const double h = st.grid_step > 0.0 ? st.grid_step : st.window.length() / 4096.0;
    const double rate = st.M + k.alpha;
    const double floor = std::exp(-rate * st.max_odd_length);

    CheckResult sandwich{"gain within [exp(-(M+alpha)L), 1]"};
    const Window d = g.domain();
    detail::sweep(d.start, d.end, detail::sweep_count(d.length(), h), [&](double t) {
        const double v = g.value(t);
        sandwich.observe(std::max(v - 1.0, floor - v), t);
    });

    CheckResult odd_decay{"gain ratio decay on odd gaps"};
    for (const auto& seg : st.odd_segments()) {
        const std::size_t n = detail::sweep_count(seg.span.length(), h);
        double prev_t = NAN, prev_g = NAN;
        detail::sweep(seg.span.start, seg.span.end, n, [&](double t) {
            const double v = g.value(t);
            if (!std::isnan(prev_t)) {
                odd_decay.observe(v / prev_g - std::exp(-rate * (t - prev_t)) * (1.0 + 1e-9), prev_t);
            }
            prev_t = t;
            prev_g = v;
        });
    }

    CheckResult even_slope{"gain slope at most 1/k on even intervals"};
    for (std::size_t i = 0; i < st.even_count(); ++i) {
        const Window e = st.even(i);
        const std::size_t n = detail::sweep_count(e.length(), h);
        double prev_t = NAN, prev_g = NAN;
        detail::sweep(e.start, e.end, n, [&](double t) {
            const double v = g.value(t);
            if (!std::isnan(prev_t)) even_slope.observe((v - prev_g) / (t - prev_t) - 1.0 / st.min_even_length - 1e-9, prev_t);
            prev_t = t;
            prev_g = v;
        });
    }
    return {sandwich.settle(1e-12), odd_decay.settle(), even_slope.settle()};
}

struct SynthesisOptions {
    double m = 1.0;
    double alpha = 0.5;
    double margin = 1.05;
    std::optional<Window> window;  // required for aperiodic systems
    AnalysisOptions analysis;
};

/// Everything produced by one synthesis run.
struct Synthesis {
    IntervalStructure structure;
    SynthesisConstants constants;
    std::vector<Transition> transitions;
    FeedforwardInput input;
    GainFunction gain;
    std::vector<CheckResult> checks;

    double plateau_amplitude() const {
        double a = 0.0;
        for (const auto& p : input.pieces())
            if (p.kind == InputPieceKind::Plateau) a = std::max(a, std::abs(p.from));
        return a;
    }
};

/// Structure detection, constants, input and gain. Periodic systems are
/// analysed over one phase-aligned period and the result is periodized.
inline Synthesis synthesize(const SystemModel& sys, const SynthesisOptions& opt) {
    Synthesis s;
    if (sys.period) {
        s.structure = align_periodic(sys, opt.m, opt.analysis, opt.window ? opt.window->start : 0.0);
    } else {
        if (!opt.window) throw Error(ErrorKind::Configuration, "synthesize: aperiodic system needs a window");
        s.structure = find_knots(sys, *opt.window, opt.m, opt.analysis);
    }
    s.constants = choose_constants(s.structure, opt.alpha, opt.margin);
    s.transitions = locate_all_transitions(s.structure, sys);
    s.input = build_input(s.structure, s.constants, s.transitions);
    s.gain = build_gain(s.structure, s.constants);
    if (sys.period) {
        auto pp = periodize(std::move(s.input), std::move(s.gain), *sys.period);
        s.input = std::move(pp.input);
        s.gain = std::move(pp.gain);
    }
    s.checks.push_back(verify_smoothness(s.input));
    for (auto& c : verify_input_constraints(s.input, s.structure, s.constants, sys)) s.checks.push_back(std::move(c));
    for (auto& c : verify_gain(s.gain, s.structure, s.constants)) s.checks.push_back(std::move(c));
    return s;
}

}  // namespace entrain
