#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "entrain/app/config.hpp"
#include "entrain/app/expr.hpp"
#include "entrain/app/figures.hpp"
#include "entrain/error.hpp"
#include "entrain/intervals.hpp"
#include "entrain/io/csv.hpp"
#include "entrain/io/json.hpp"
#include "entrain/io/svg.hpp"
#include "entrain/sim.hpp"
#include "entrain/synth.hpp"
#include "entrain/verify.hpp"

namespace entrain::app {

enum ExitCode : int { kPass = 0, kCheckFailure = 1, kConfigError = 2, kNumericFailure = 3 };

inline int exit_code_for(ErrorKind k) {
    switch (k) {
        case ErrorKind::Configuration:
        case ErrorKind::InvalidInput: return kConfigError;
        case ErrorKind::AssumptionViolated:
        case ErrorKind::Structural:
        case ErrorKind::SynthesisInfeasible: return kCheckFailure;
        default: return kNumericFailure;
    }
}

namespace detail {

inline std::string join_path(const std::string& dir, const std::string& file) {
    return (std::filesystem::path(dir) / file).string();
}

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Configuration, "cannot create output directory " + dir + ": " + ec.message());
}

inline std::string fmt(double v, int digits = 12) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

inline void print_checks(std::ostream& out, const std::vector<CheckResult>& checks) {
    for (const auto& c : checks) {
        out << "  [" << (c.pass ? "pass" : "FAIL") << "] " << c.name << " (worst margin " << fmt(c.worst_margin, 6);
        if (std::isfinite(c.location)) out << " at t=" << fmt(c.location, 6);
        out << ")\n";
    }
}

}  // namespace detail

/// The analysis window: configured, else one period starting at 0, else the
/// simulation span, else [0, 30].
inline Window analysis_window(const RunConfig& c, const SystemModel& sys) {
    if (c.window) return *c.window;
    if (sys.period) return {0.0, *sys.period};
    if (c.span) return *c.span;
    return {0.0, 30.0};
}

struct ResolvedInput {
    InputSignal signal;
    std::optional<Synthesis> synthesis;
};

inline Synthesis run_synthesis(const RunConfig& c, const SystemModel& sys) {
    SynthesisOptions o;
    o.m = c.m;
    o.alpha = c.alpha;
    o.margin = c.margin;
    o.window = c.window;
    if (!sys.period) o.window = analysis_window(c, sys);
    return synthesize(sys, o);
}

inline ResolvedInput resolve_input(const RunConfig& c, const SystemModel& sys) {
    switch (c.input_mode) {
        case InputMode::Synthesized: {
            Synthesis s = run_synthesis(c, sys);
            ResolvedInput r{InputSignal::from(s.input), std::move(s)};
            return r;
        }
        case InputMode::Expression: {
            const auto e = std::make_shared<Expression>(Expression::parse(c.input, 0));
            return {InputSignal::callable([e](double t) { return (*e)(t); }, c.input), std::nullopt};
        }
        case InputMode::Constant: return {InputSignal::constant(detail::parse_real("input", c.input)), std::nullopt};
    }
    throw Error(ErrorKind::Configuration, "unknown input mode");
}

/// Simulation span: configured, else three periods of a periodic synthesis,
/// else the synthesis window, else [0, 30].
inline Window simulation_span(const RunConfig& c, const SystemModel& sys, const ResolvedInput& in) {
    if (c.span) return *c.span;
    if (in.synthesis) {
        const Window d = in.synthesis->input.domain();
        if (sys.period) return {d.start, d.start + 3.0 * *sys.period};
        return d;
    }
    return {0.0, 30.0};
}

inline IntegrationOptions integration_options(const RunConfig& c, const ResolvedInput& in) {
    IntegrationOptions o = c.tolerances;
    if (in.synthesis && in.synthesis->structure.max_odd_length > 0.0) {
        o.max_step = std::min(o.max_step, in.synthesis->structure.max_odd_length / 8.0);
    }
    return o;
}

inline std::vector<double> output_grid(const RunConfig& c, Window span) {
    const auto n = std::max<std::size_t>(
        100, static_cast<std::size_t>(std::ceil(span.length() * static_cast<double>(c.samples_per_unit))));
    return uniform_grid(span.start, span.end, n);
}

inline int analyze(const RunConfig& c, std::ostream& out) {
    const SystemModel sys = build_system(c);
    const Window w = analysis_window(c, sys);
    IntervalStructure st;
    try {
        st = find_knots(sys, w, c.m);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::AssumptionViolated) throw;
        out << "analyze " << sys.name << ": " << e.what() << "\n";
        return kCheckFailure;
    }
    const ValidationReport rep = validate_assumption(st, sys);
    out << "analyze " << sys.name << " on [" << detail::fmt(w.start) << ", " << detail::fmt(w.end) << "], m = " << c.m << "\n";
    out << "  knots:";
    for (double k : st.knots) out << " " << detail::fmt(k);
    out << "\n  signs:";
    for (Sign s : st.signs) out << " " << (s == Sign::Positive ? "+" : "-");
    out << "\n  M = " << detail::fmt(st.M) << ", k = " << detail::fmt(st.min_even_length) << ", L = "
        << detail::fmt(st.max_odd_length) << "\n";
    detail::print_checks(out, rep.checks);
    for (const auto& n : rep.notes) out << "  note: " << n << "\n";
    for (const auto& wmsg : st.warnings) out << "  warning: " << wmsg << "\n";
    detail::ensure_dir(c.output_dir);
    io::write_json(detail::join_path(c.output_dir, "structure.json"), io::to_json(st));
    return rep.pass() ? kPass : kCheckFailure;
}

inline int synthesize_cmd(const RunConfig& c, std::ostream& out) {
    const SystemModel sys = build_system(c);
    Synthesis s;
    try {
        s = run_synthesis(c, sys);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::AssumptionViolated && e.kind() != ErrorKind::SynthesisInfeasible) throw;
        out << "synthesize " << sys.name << ": " << e.what() << "\n";
        return kCheckFailure;
    }
    const Window d = s.input.domain();
    out << "synthesize " << sys.name << ": alpha = " << s.constants.alpha << ", margin = " << s.constants.margin << "\n";
    out << "  c = " << detail::fmt(s.constants.c) << ", plateau amplitude = " << detail::fmt(s.plateau_amplitude()) << "\n";
    out << "  pieces: " << s.input.pieces().size() << " on [" << detail::fmt(d.start) << ", " << detail::fmt(d.end) << "]";
    if (s.input.periodicity()) out << ", periodic with T = " << detail::fmt(s.input.periodicity()->period);
    out << "\n";
    const JunctionJumps jj = junction_jumps(s.input);
    out << "  junction jumps: u " << jj.value << ", u' " << jj.first << ", u'' " << jj.second << "\n";
    detail::print_checks(out, s.checks);

    detail::ensure_dir(c.output_dir);
    io::write_json(detail::join_path(c.output_dir, "structure.json"), io::to_json(s.structure));
    io::write_json(detail::join_path(c.output_dir, "constants.json"), io::to_json(s.constants));
    io::write_json(detail::join_path(c.output_dir, "input.json"), io::to_json(s.input));
    io::write_json(detail::join_path(c.output_dir, "gain.json"), io::to_json(s.gain));
    io::Series us{{}, {}, "u(t)"}, gs{{}, {}, "g(t) * max|u|"};
    const double scale = std::max(1.0, s.plateau_amplitude());
    for (const double t : uniform_grid(d.start, d.end, 2000)) {
        us.x.push_back(t);
        us.y.push_back(s.input.value(t));
        gs.x.push_back(t);
        gs.y.push_back(s.gain.value(t) * scale);
    }
    io::write_text(detail::join_path(c.output_dir, "synthesis.svg"),
                   io::render_svg({"synthesized input and scaled gain (" + sys.name + ")", "t", "u, g", {us, gs}}));
    return all_pass(s.checks) ? kPass : kCheckFailure;
}

namespace detail {

inline void plot_ensemble(const std::vector<Trajectory>& trs, const std::string& title, const std::string& path_stem) {
    const std::size_t n = trs.front().dimension();
    for (std::size_t i = 0; i < n; ++i) {
        io::PlotSpec p{title, "t", "x" + std::to_string(i + 1), {}};
        for (std::size_t k = 0; k < trs.size(); ++k) {
            io::Series s{trs[k].times, {}, "trajectory " + std::to_string(k)};
            for (const auto& x : trs[k].states) s.y.push_back(x[i]);
            p.series.push_back(std::move(s));
        }
        const std::string suffix = n == 1 ? "" : "_x" + std::to_string(i + 1);
        io::write_text(path_stem + suffix + ".svg", io::render_svg(p));
    }
    if (n == 2) {
        io::PlotSpec p{title + " (phase plane)", "x1", "x2", {}};
        for (std::size_t k = 0; k < trs.size(); ++k) {
            io::Series s{{}, {}, "trajectory " + std::to_string(k)};
            for (const auto& x : trs[k].states) {
                s.x.push_back(x[0]);
                s.y.push_back(x[1]);
            }
            p.series.push_back(std::move(s));
        }
        io::write_text(path_stem + "_phase.svg", io::render_svg(p));
    }
}

inline std::vector<Trajectory> collect(const std::vector<EnsembleMember>& members, std::ostream& out, bool& failed) {
    std::vector<Trajectory> trs;
    for (std::size_t i = 0; i < members.size(); ++i) {
        if (members[i].ok()) {
            trs.push_back(*members[i].trajectory);
        } else {
            failed = true;
            out << "  member " << i << " failed (" << to_string(*members[i].error_kind) << "): " << members[i].error << "\n";
        }
    }
    return trs;
}

}  // namespace detail

inline int simulate(const RunConfig& c, std::ostream& out) {
    const SystemModel sys = build_system(c);
    const ResolvedInput in = resolve_input(c, sys);
    const Window span = simulation_span(c, sys, in);
    const auto ics = resolve_initial_conditions(c, sys.dimension);
    const auto grid = output_grid(c, span);
    EnsembleOptions eo;
    eo.integration = integration_options(c, in);
    const auto members = ensemble(sys, in.signal, ics, grid, eo);
    bool failed = false;
    out << "simulate " << sys.name << " with u = " << in.signal.description << " on [" << detail::fmt(span.start)
        << ", " << detail::fmt(span.end) << "], " << ics.size() << " initial conditions\n";
    const auto trs = detail::collect(members, out, failed);
    detail::ensure_dir(c.output_dir);
    const GainFunction* gain = in.synthesis ? &in.synthesis->gain : nullptr;
    for (std::size_t i = 0; i < members.size(); ++i) {
        if (!members[i].ok()) continue;
        char name[32];
        std::snprintf(name, sizeof name, "traj_%03zu.csv", i);
        io::write_text(detail::join_path(c.output_dir, name), io::trajectory_csv(*members[i].trajectory, gain));
    }
    if (!trs.empty()) {
        detail::plot_ensemble(trs, "trajectories of " + sys.name + ", u = " + in.signal.description,
                              detail::join_path(c.output_dir, "simulate"));
        if (trs.size() > 1) {
            const auto spread = max_pairwise_distance(trs);
            out << "  max pairwise distance: " << detail::fmt(spread.front(), 6) << " at t=" << detail::fmt(span.start, 6)
                << ", " << detail::fmt(spread.back(), 6) << " at t=" << detail::fmt(span.end, 6) << "\n";
        }
    }
    return failed ? kNumericFailure : kPass;
}

/// Runs the full verification and returns the report; `verify_cmd` wraps it.
inline VerificationReport build_report(const RunConfig& c, const SystemModel& sys, const ResolvedInput& in,
                                       std::ostream& out, bool& member_failed) {
    VerificationReport rep;
    Window span = simulation_span(c, sys, in);
    if (in.synthesis && !in.synthesis->input.periodicity()) {
        const Window d = in.synthesis->input.domain();
        span = {std::max(span.start, d.start), std::min(span.end, d.end)};
    }
    const auto ics = resolve_initial_conditions(c, sys.dimension);
    const auto grid = output_grid(c, span);
    EnsembleOptions eo;
    eo.integration = integration_options(c, in);
    const auto trs = detail::collect(ensemble(sys, in.signal, ics, grid, eo), out, member_failed);
    if (trs.empty()) throw Error(ErrorKind::IntegrationFailure, "verify: every ensemble member failed");

    std::optional<double> overshoot = c.verify.overshoot, rate = c.verify.decay_rate;
    const char* source = "asserted";
    if (!overshoot && in.synthesis) {
        const PredictedConstants pc = predicted_constants(in.synthesis->structure, c.alpha);
        overshoot = pc.overshoot;
        rate = pc.rate;
        source = "predicted";
    }

    if (in.synthesis) {
        rep.constants = in.synthesis->constants;
        for (const auto& ch : in.synthesis->checks) rep.checks.push_back(ch);
        CheckResult cert{"certificate V' <= -alpha V"};
        for (const auto& tr : trs) {
            const CheckResult one = check_certificate(lyapunov_trace(tr, in.synthesis->gain), c.alpha);
            cert.observe(one.worst_margin, one.location);
            cert.saw_nan = cert.saw_nan || one.saw_nan;
        }
        cert.detail = std::to_string(trs.size()) + " base trajectories, relative slack 1e-6";
        rep.checks.push_back(cert.settle(std::log1p(kBoundSlack)));
    }

    if (overshoot) {
        CheckResult cc = check_contraction(trs, *overshoot, *rate);
        cc.detail += std::string(" (") + source + ")";
        rep.checks.push_back(cc);
        std::vector<std::pair<Trajectory, Trajectory>> pairs;
        for (std::size_t a = 0; a < trs.size(); ++a)
            for (std::size_t b = a + 1; b < trs.size(); ++b) pairs.emplace_back(trs[a], trs[b]);
        if (!pairs.empty()) {
            CheckResult ci = check_ies(pairs, *overshoot, *rate);
            ci.detail += std::string(" (") + source + ")";
            rep.checks.push_back(ci);
        }
    } else {
        rep.notes.push_back("no contraction constants asserted and no synthesized gain: bound checks skipped");
    }

    if (in.synthesis) {
        EmpiricalOptions eo2;
        eo2.trials = c.verify.trials;
        eo2.box = sys.state_box ? *sys.state_box : StateBox{ics.front(), ics.front()};
        eo2.duration = span.length();
        eo2.seed = c.initial_conditions.seed;
        eo2.integration = integration_options(c, in);
        eo2.samples_per_unit = std::max<std::size_t>(16, c.samples_per_unit / 2);
        rep.checks.push_back(theorem_one_empirical(sys, in.signal, in.synthesis->structure, c.alpha, eo2).check);
    }

    const double skip = in.synthesis ? span.start + in.synthesis->structure.max_odd_length : -INFINITY;
    {
        std::vector<double> d;
        for (const auto& v : trs.front().displacements) d.push_back(norm2(v));
        try {
            const DecayFit f = fit_decay(trs.front().times, d, skip);
            rep.fits["displacement"] = f;
            if (in.synthesis) {
                CheckResult fr{"fitted displacement rate at least alpha/2"};
                fr.observe(0.5 * c.alpha - f.lambda_hat, f.window_used.start);
                fr.detail = "lambda_hat = " + detail::fmt(f.lambda_hat, 6);
                rep.checks.push_back(fr.settle());
            }
        } catch (const Error& e) {
            rep.notes.push_back(std::string("displacement fit skipped: ") + e.what());
        }
    }
    if (trs.size() > 1) {
        try {
            rep.fits["pairDistance"] = fit_decay(trs.front().times, max_pairwise_distance(trs), skip);
        } catch (const Error& e) {
            rep.notes.push_back(std::string("distance fit skipped: ") + e.what());
        }
    }

    std::optional<double> period = c.verify.period;
    if (!period && in.synthesis && sys.period) period = *sys.period;
    if (period) {
        const double T = *period;
        const auto pgrid = uniform_grid(span.start, span.start + static_cast<double>(c.verify.periods) * T,
                                        256 * c.verify.periods);
        const Trajectory ptr = integrate(sys, in.signal, ics.front(), {}, pgrid, integration_options(c, in));
        PeriodicConvergence pc = check_periodic_convergence(ptr, T, c.verify.ratio_bound);
        rep.checks.push_back(pc.check);
        std::ostringstream os;
        os << "extrapolated periodic point at t = " << detail::fmt(span.start) << " (mod T):";
        for (double v : pc.periodic_point) os << " " << detail::fmt(v);
        rep.notes.push_back(os.str());
        rep.scope = "periodic, T = " + detail::fmt(T);
    } else {
        rep.scope = "window [" + detail::fmt(span.start) + ", " + detail::fmt(span.end) + "]";
    }
    rep.notes.push_back("sampled certification: every output sample serves as t0; initial conditions are a finite ensemble");
    if (sys.heuristic_envelopes) rep.notes.push_back("heuristic envelopes from state-box sampling");
    return rep;
}

inline int verify_cmd(const RunConfig& c, std::ostream& out) {
    const SystemModel sys = build_system(c);
    ResolvedInput in;
    try {
        in = resolve_input(c, sys);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::AssumptionViolated && e.kind() != ErrorKind::SynthesisInfeasible) throw;
        out << "verify " << sys.name << ": " << e.what() << "\n";
        return kCheckFailure;
    }
    bool member_failed = false;
    const VerificationReport rep = build_report(c, sys, in, out, member_failed);
    detail::ensure_dir(c.output_dir);
    io::write_json(detail::join_path(c.output_dir, "report.json"), io::to_json(rep));
    io::write_text(detail::join_path(c.output_dir, "report.txt"), rep.text());
    out << rep.text();
    if (member_failed) return kNumericFailure;
    return rep.pass() ? kPass : kCheckFailure;
}

struct FigureRun {
    FigureSpec spec;
    std::vector<Trajectory> trajectories;
};

inline FigureRun run_figure(const std::string& id, const IntegrationOptions& opt = {}) {
    FigureRun r{figure_spec(id), {}};
    const auto grid = uniform_grid(r.spec.span.start, r.spec.span.end, r.spec.samples);
    EnsembleOptions eo;
    eo.integration = opt;
    for (auto& m : ensemble(r.spec.system, r.spec.input, r.spec.initial_conditions, grid, eo)) {
        if (!m.ok()) throw Error(*m.error_kind, id + ": " + m.error);
        r.trajectories.push_back(std::move(*m.trajectory));
    }
    return r;
}

inline int reproduce_figure(const std::string& id, const std::string& out_dir, std::ostream& out) {
    const FigureRun r = run_figure(id);
    detail::ensure_dir(out_dir);
    for (std::size_t i = 0; i < r.trajectories.size(); ++i) {
        char name[48];
        std::snprintf(name, sizeof name, "%s_traj_%03zu.csv", id.c_str(), i);
        io::write_text(detail::join_path(out_dir, name), io::trajectory_csv(r.trajectories[i]));
    }
    const auto& trs = r.trajectories;
    const std::string title = r.spec.caption;
    const std::size_t n = r.spec.system.dimension;
    if (n == 2) {
        // Phase plane is the main figure; time plots go alongside.
        detail::plot_ensemble(trs, title, detail::join_path(out_dir, id + "_time"));
        std::filesystem::rename(detail::join_path(out_dir, id + "_time_phase.svg"), detail::join_path(out_dir, id + ".svg"));
    } else {
        detail::plot_ensemble(trs, title, detail::join_path(out_dir, id));
    }
    const auto spread = max_pairwise_distance(trs);
    out << id << ": " << title << "\n";
    out << "  max pairwise distance " << detail::fmt(spread.front(), 6) << " -> " << detail::fmt(spread.back(), 6)
        << " at t=" << detail::fmt(r.spec.span.end, 6) << "\n";
    try {
        const DecayFit f = fit_decay(trs.front().times, spread);
        out << "  fitted distance decay rate " << detail::fmt(f.lambda_hat, 6) << "\n";
    } catch (const Error&) {
    }
    out << "  endpoints:";
    for (const auto& tr : trs) {
        out << " (";
        for (std::size_t i = 0; i < n; ++i) out << (i ? ", " : "") << detail::fmt(tr.states.back()[i], 10);
        out << ")";
    }
    out << "\n";
    return kPass;
}

}  // namespace entrain::app
