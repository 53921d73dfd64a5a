#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "entrain/app/expr.hpp"
#include "entrain/error.hpp"
#include "entrain/intervals.hpp"
#include "entrain/sim.hpp"
#include "entrain/sysmodel.hpp"

namespace entrain::app {

enum class InputMode { Synthesized, Expression, Constant };

/// Closed-form custom system; Jacobians are given, not derived.
struct CustomSystem {
    std::size_t dimension = 0;
    std::vector<std::string> drift;
    std::vector<std::string> control_dir;
    std::vector<std::vector<std::string>> drift_jacobian;
    std::vector<std::vector<std::string>> control_jacobian;
    std::optional<double> period;
    std::optional<StateBox> box;
    std::size_t box_points = 9;
};

struct InitialConditions {
    std::vector<Vector> list;
    std::size_t count = 0;
    std::optional<StateBox> box;
    std::uint64_t seed = 1;
};

struct VerifySettings {
    std::optional<double> overshoot;
    std::optional<double> decay_rate;
    std::optional<double> period;  // forces the periodic-convergence check
    double ratio_bound = 0.25;
    std::size_t periods = 6;
    std::size_t trials = 20;
};

/// Everything a CLI run needs. Loaded from an INI file:
///
///   system = eq47
///   forcing = t*cos(t)
///   window = 0; 2*pi
///   m = 1
///   alpha = 0.5
///   margin = 1.05
///   inputMode = expression
///   input = -3*sin(t)
///   span = 0; 30
///   outputDir = out
///
/// `system` is a builtin name or "custom" (see [custom]); `forcing` only
/// applies to eq47. Vectors separate entries with ';', points separate
/// coordinates with ','. Comments must start a line.
struct RunConfig {
    std::string system = "eq47";
    std::string forcing = "0";
    std::optional<double> forcing_period;
    std::optional<Window> window;
    double m = 1.0;
    double alpha = 0.5;
    double margin = 1.05;
    InputMode input_mode = InputMode::Synthesized;
    std::string input;
    std::optional<Window> span;
    std::string output_dir = "out";
    std::size_t samples_per_unit = 100;
    CustomSystem custom;
    InitialConditions initial_conditions;
    IntegrationOptions tolerances;
    VerifySettings verify;
};

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) {
        const auto a = cur.find_first_not_of(" \t");
        const auto b = cur.find_last_not_of(" \t");
        out.push_back(a == std::string::npos ? std::string() : cur.substr(a, b - a + 1));
    }
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

inline double parse_real(const std::string& key, const std::string& s) {
    try {
        // Constants such as "2*pi" are allowed anywhere a number is.
        const double v = Expression::parse(s, 0)(0.0);
        if (!std::isfinite(v)) throw Error(ErrorKind::Configuration, "non-finite");
        return v;
    } catch (const Error& e) {
        throw Error(ErrorKind::Configuration, "config key '" + key + "': cannot read '" + s + "' as a number (" + e.what() + ")");
    }
}

inline Vector parse_point(const std::string& key, const std::string& s) {
    Vector v;
    for (const auto& part : split(s, ',')) v.push_back(parse_real(key, part));
    return v;
}

inline std::vector<Vector> parse_points(const std::string& key, const std::string& s) {
    std::vector<Vector> out;
    for (const auto& part : split(s, ';')) {
        if (part.empty()) continue;
        out.push_back(parse_point(key, part));
    }
    return out;
}

inline Window parse_window(const std::string& key, const std::string& s) {
    const auto parts = split(s, ';');
    if (parts.size() != 2) throw Error(ErrorKind::Configuration, "config key '" + key + "': expected 'start; end'");
    Window w{parse_real(key, parts[0]), parse_real(key, parts[1])};
    if (!(w.end > w.start)) throw Error(ErrorKind::Configuration, "config key '" + key + "': empty interval");
    return w;
}

inline StateBox parse_box(const std::string& key, const std::string& s) {
    const auto pts = parse_points(key, s);
    if (pts.size() != 2 || pts[0].size() != pts[1].size()) {
        throw Error(ErrorKind::Configuration, "config key '" + key + "': expected 'lower1,...; upper1,...'");
    }
    for (std::size_t i = 0; i < pts[0].size(); ++i) {
        if (!(pts[1][i] >= pts[0][i])) throw Error(ErrorKind::Configuration, "config key '" + key + "': lower exceeds upper");
    }
    return {pts[0], pts[1]};
}

inline std::vector<std::vector<std::string>> parse_rows(const std::string& s) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : split(s, ';')) rows.push_back(split(r, ','));
    return rows;
}

}  // namespace detail

inline RunConfig parse_config(std::istream& in, const std::string& origin = "config") {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw Error(ErrorKind::Configuration, origin + ": " + e.what());
    }
    RunConfig c;
    using detail::parse_real;
    auto opt = [&](const std::string& path) { return tree.get_optional<std::string>(path); };

    static const char* known_top[] = {"system", "forcing", "forcingPeriod", "window", "m", "alpha", "margin",
                                      "inputMode", "input", "span", "outputDir", "samplesPerUnit"};
    static const char* known_sections[] = {"initialConditions", "tolerances", "custom", "verify"};
    for (const auto& [key, node] : tree) {
        bool ok = false;
        if (node.empty()) {
            for (const char* k : known_top) ok = ok || key == k;
        } else {
            for (const char* k : known_sections) ok = ok || key == k;
        }
        if (!ok) throw Error(ErrorKind::Configuration, origin + ": unknown key or section '" + key + "'");
    }

    if (auto v = opt("system")) c.system = *v;
    if (auto v = opt("forcing")) c.forcing = *v;
    if (auto v = opt("forcingPeriod")) c.forcing_period = parse_real("forcingPeriod", *v);
    if (auto v = opt("window")) c.window = detail::parse_window("window", *v);
    if (auto v = opt("m")) c.m = parse_real("m", *v);
    if (auto v = opt("alpha")) c.alpha = parse_real("alpha", *v);
    if (auto v = opt("margin")) c.margin = parse_real("margin", *v);
    if (auto v = opt("inputMode")) {
        if (*v == "synthesized") c.input_mode = InputMode::Synthesized;
        else if (*v == "expression") c.input_mode = InputMode::Expression;
        else if (*v == "constant") c.input_mode = InputMode::Constant;
        else throw Error(ErrorKind::Configuration, "inputMode must be synthesized, expression or constant, got '" + *v + "'");
    }
    if (auto v = opt("input")) c.input = *v;
    if (auto v = opt("span")) c.span = detail::parse_window("span", *v);
    if (auto v = opt("outputDir")) c.output_dir = *v;
    if (auto v = opt("samplesPerUnit")) {
        const double s = parse_real("samplesPerUnit", *v);
        if (!(s >= 1.0)) throw Error(ErrorKind::Configuration, "samplesPerUnit must be at least 1");
        c.samples_per_unit = static_cast<std::size_t>(s);
    }

    if (auto v = opt("initialConditions.list")) c.initial_conditions.list = detail::parse_points("initialConditions.list", *v);
    if (auto v = opt("initialConditions.count")) {
        const double n = parse_real("initialConditions.count", *v);
        if (!(n >= 1.0)) throw Error(ErrorKind::Configuration, "initialConditions.count must be at least 1");
        c.initial_conditions.count = static_cast<std::size_t>(n);
    }
    if (auto v = opt("initialConditions.box")) c.initial_conditions.box = detail::parse_box("initialConditions.box", *v);
    if (auto v = opt("initialConditions.seed")) c.initial_conditions.seed = std::stoull(*v);

    if (auto v = opt("tolerances.relTol")) c.tolerances.rel_tol = parse_real("tolerances.relTol", *v);
    if (auto v = opt("tolerances.absTol")) c.tolerances.abs_tol = parse_real("tolerances.absTol", *v);
    if (auto v = opt("tolerances.maxStep")) c.tolerances.max_step = parse_real("tolerances.maxStep", *v);
    if (!(c.tolerances.rel_tol > 0.0) || !(c.tolerances.abs_tol > 0.0)) {
        throw Error(ErrorKind::Configuration, "tolerances must be positive");
    }

    if (auto v = opt("custom.dimension")) c.custom.dimension = static_cast<std::size_t>(parse_real("custom.dimension", *v));
    if (auto v = opt("custom.drift")) c.custom.drift = detail::split(*v, ';');
    if (auto v = opt("custom.controlDir")) c.custom.control_dir = detail::split(*v, ';');
    if (auto v = opt("custom.driftJacobian")) c.custom.drift_jacobian = detail::parse_rows(*v);
    if (auto v = opt("custom.controlJacobian")) c.custom.control_jacobian = detail::parse_rows(*v);
    if (auto v = opt("custom.period")) c.custom.period = parse_real("custom.period", *v);
    if (auto v = opt("custom.box")) c.custom.box = detail::parse_box("custom.box", *v);
    if (auto v = opt("custom.boxPoints")) c.custom.box_points = static_cast<std::size_t>(parse_real("custom.boxPoints", *v));

    if (auto v = opt("verify.overshoot")) c.verify.overshoot = parse_real("verify.overshoot", *v);
    if (auto v = opt("verify.decayRate")) c.verify.decay_rate = parse_real("verify.decayRate", *v);
    if (auto v = opt("verify.period")) c.verify.period = parse_real("verify.period", *v);
    if (auto v = opt("verify.ratioBound")) c.verify.ratio_bound = parse_real("verify.ratioBound", *v);
    if (auto v = opt("verify.periods")) c.verify.periods = static_cast<std::size_t>(parse_real("verify.periods", *v));
    if (auto v = opt("verify.trials")) c.verify.trials = static_cast<std::size_t>(parse_real("verify.trials", *v));
    if (c.verify.overshoot.has_value() != c.verify.decay_rate.has_value()) {
        throw Error(ErrorKind::Configuration, "verify.overshoot and verify.decayRate must be given together");
    }

    if (c.input_mode != InputMode::Synthesized && c.input.empty()) {
        throw Error(ErrorKind::Configuration, "inputMode expression/constant needs an 'input' value");
    }
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Configuration, "cannot open config file " + path);
    return parse_config(in, path);
}

/// Builds the system named by the config. Custom systems get envelopes from
/// sampling their state box and are therefore heuristic.
inline SystemModel build_system(const RunConfig& c) {
    if (c.system != "custom") {
        if (c.system != "eq47") return builtin(c.system);
        if (c.forcing == "0") return builtin("eq47", Forcing::zero());
        const auto g = std::make_shared<Expression>(Expression::parse(c.forcing, 0));
        std::optional<double> period = c.forcing_period;
        return builtin("eq47", Forcing::custom([g](double t) { return (*g)(t); }, period, c.forcing));
    }
    const CustomSystem& cs = c.custom;
    const std::size_t n = cs.dimension;
    if (n == 0) throw Error(ErrorKind::Configuration, "custom system needs custom.dimension >= 1");
    auto square = [&](const std::vector<std::vector<std::string>>& rows, const char* what) {
        if (rows.size() != n) throw Error(ErrorKind::Configuration, std::string("custom.") + what + " needs " + std::to_string(n) + " rows");
        std::vector<Expression> out;
        for (const auto& r : rows) {
            if (r.size() != n) throw Error(ErrorKind::Configuration, std::string("custom.") + what + " rows need " + std::to_string(n) + " entries");
            for (const auto& e : r) out.push_back(Expression::parse(e, n));
        }
        return std::make_shared<const std::vector<Expression>>(std::move(out));
    };
    auto vec = [&](const std::vector<std::string>& parts, const char* what) {
        if (parts.size() != n) throw Error(ErrorKind::Configuration, std::string("custom.") + what + " needs " + std::to_string(n) + " entries");
        std::vector<Expression> out;
        for (const auto& e : parts) out.push_back(Expression::parse(e, n));
        return std::make_shared<const std::vector<Expression>>(std::move(out));
    };
    const auto f = vec(cs.drift, "drift");
    const auto g = vec(cs.control_dir, "controlDir");
    const auto jf = square(cs.drift_jacobian, "driftJacobian");
    const auto jg = square(cs.control_jacobian, "controlJacobian");
    if (!cs.box) throw Error(ErrorKind::Configuration, "custom system needs custom.box for its envelopes");
    if (cs.box->dimension() != n) throw Error(ErrorKind::Configuration, "custom.box has the wrong dimension");

    SystemModel s;
    s.name = "custom";
    s.dimension = n;
    auto eval_vec = [](std::shared_ptr<const std::vector<Expression>> e) {
        return [e](double t, std::span<const double> x) {
            Vector v(e->size());
            for (std::size_t i = 0; i < v.size(); ++i) v[i] = (*e)[i](t, x);
            return v;
        };
    };
    auto eval_mat = [n](std::shared_ptr<const std::vector<Expression>> e) {
        return [e, n](double t, std::span<const double> x) {
            SquareMatrix m(n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) m(i, j) = (*e)[i * n + j](t, x);
            return m;
        };
    };
    s.drift = eval_vec(f);
    s.control_dir = eval_vec(g);
    s.drift_jacobian = eval_mat(jf);
    s.control_jacobian = eval_mat(jg);
    s.period = cs.period;

    // Supplied Jacobians must match the vector fields.
    const StateBox& b = *cs.box;
    Vector mid(n);
    for (std::size_t i = 0; i < n; ++i) mid[i] = 0.5 * (b.lower[i] + b.upper[i]) + 0.1234 * (b.upper[i] - b.lower[i]);
    const double dev = check_jacobian_consistency(s, 0.37, mid, 1e-6);
    if (dev > 1e-5) {
        std::ostringstream os;
        os << "custom Jacobians disagree with finite differences of the vector fields (deviation " << dev << ")";
        throw Error(ErrorKind::Configuration, os.str());
    }
    return with_sampled_envelopes(std::move(s), b, cs.box_points);
}

/// Explicit list, or `count` points drawn uniformly from the box with a
/// std::mt19937_64 seeded by `seed`.
inline std::vector<Vector> resolve_initial_conditions(const RunConfig& c, std::size_t dimension) {
    const auto& ic = c.initial_conditions;
    std::vector<Vector> out = ic.list;
    for (const auto& x : out) {
        if (x.size() != dimension) throw Error(ErrorKind::Configuration, "initial condition has the wrong dimension");
    }
    if (ic.count > 0) {
        if (!ic.box) throw Error(ErrorKind::Configuration, "initialConditions.count needs initialConditions.box");
        if (ic.box->dimension() != dimension) throw Error(ErrorKind::Configuration, "initialConditions.box has the wrong dimension");
        std::mt19937_64 rng(ic.seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (std::size_t k = 0; k < ic.count; ++k) {
            Vector x(dimension);
            for (std::size_t d = 0; d < dimension; ++d) x[d] = ic.box->lower[d] + (ic.box->upper[d] - ic.box->lower[d]) * unit(rng);
            out.push_back(std::move(x));
        }
    }
    if (out.empty()) throw Error(ErrorKind::Configuration, "no initial conditions: give initialConditions.list or count + box");
    return out;
}

}  // namespace entrain::app
