#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include <json.hpp>

#include "entrain/error.hpp"
#include "entrain/intervals.hpp"
#include "entrain/synth.hpp"
#include "entrain/verify.hpp"

namespace entrain::io {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

namespace detail {

// JSON has no infinities or NaN; they travel as strings.
inline json real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

inline double real(const json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        if (s == "inf") return INFINITY;
        if (s == "-inf") return -INFINITY;
        throw Error(ErrorKind::Configuration, "expected a number, got '" + s + "'");
    }
    return j.get<double>();
}

inline void expect(const json& j, const char* type) {
    if (!j.is_object() || !j.contains("schemaVersion") || j.at("schemaVersion") != kSchemaVersion) {
        throw Error(ErrorKind::Configuration, std::string("unsupported or missing schemaVersion in ") + type);
    }
    if (j.value("type", "") != type) throw Error(ErrorKind::Configuration, std::string("expected a ") + type + " document");
}

inline json periodicity(const std::optional<Periodicity>& p) {
    if (!p) return nullptr;
    return {{"start", p->start}, {"period", p->period}};
}

inline std::optional<Periodicity> periodicity(const json& j) {
    if (j.is_null()) return std::nullopt;
    return Periodicity{j.at("start").get<double>(), j.at("period").get<double>()};
}

inline InputPieceKind input_kind(const std::string& s) {
    if (s == "plateau") return InputPieceKind::Plateau;
    if (s == "blend") return InputPieceKind::Blend;
    if (s == "zero") return InputPieceKind::Zero;
    throw Error(ErrorKind::Configuration, "unknown input piece kind '" + s + "'");
}

}  // namespace detail

inline json to_json(const FeedforwardInput& u) {
    json pieces = json::array();
    for (const auto& p : u.pieces()) {
        pieces.push_back({{"t0", p.t0}, {"t1", p.t1}, {"kind", to_string(p.kind)}, {"from", p.from}, {"to", p.to}});
    }
    return {{"schemaVersion", kSchemaVersion}, {"type", "FeedforwardInput"}, {"pieces", pieces},
            {"periodicity", detail::periodicity(u.periodicity())}};
}

inline FeedforwardInput input_from_json(const json& j) {
    detail::expect(j, "FeedforwardInput");
    std::vector<InputPiece> pieces;
    for (const auto& p : j.at("pieces")) {
        pieces.push_back({p.at("t0").get<double>(), p.at("t1").get<double>(),
                          detail::input_kind(p.at("kind").get<std::string>()), p.at("from").get<double>(),
                          p.at("to").get<double>()});
    }
    FeedforwardInput u(std::move(pieces));
    if (auto per = detail::periodicity(j.at("periodicity"))) u.set_periodicity(*per);
    return u;
}

inline json to_json(const GainFunction& g) {
    json pieces = json::array();
    for (const auto& p : g.pieces()) {
        pieces.push_back({{"t0", p.t0}, {"t1", p.t1}, {"kind", to_string(p.kind)}, {"anchor", p.anchor},
                          {"rate", p.rate}, {"slope", p.slope}, {"intercept", p.intercept}});
    }
    return {{"schemaVersion", kSchemaVersion}, {"type", "GainFunction"}, {"pieces", pieces},
            {"periodicity", detail::periodicity(g.periodicity())}};
}

inline GainFunction gain_from_json(const json& j) {
    detail::expect(j, "GainFunction");
    std::vector<GainPiece> pieces;
    for (const auto& p : j.at("pieces")) {
        const auto kind = p.at("kind").get<std::string>();
        if (kind != "exponential" && kind != "affine") throw Error(ErrorKind::Configuration, "unknown gain piece kind '" + kind + "'");
        pieces.push_back({p.at("t0").get<double>(), p.at("t1").get<double>(),
                          kind == "exponential" ? GainPieceKind::Exponential : GainPieceKind::Affine,
                          p.at("anchor").get<double>(), p.at("rate").get<double>(), p.at("slope").get<double>(),
                          p.at("intercept").get<double>()});
    }
    GainFunction g(std::move(pieces));
    if (auto per = detail::periodicity(j.at("periodicity"))) g.set_periodicity(*per);
    return g;
}

inline json to_json(const IntervalStructure& st) {
    json signs = json::array();
    for (Sign s : st.signs) signs.push_back(to_string(s));
    return {{"schemaVersion", kSchemaVersion},
            {"type", "IntervalStructure"},
            {"window", {st.window.start, st.window.end}},
            {"knots", st.knots},
            {"signs", signs},
            {"m", st.m},
            {"M", st.M},
            {"minEvenLength", st.min_even_length},
            {"maxOddLength", st.max_odd_length},
            {"epsMaxPerEven", st.eps_max_per_even},
            {"wrapped", st.wrapped},
            {"heuristic", st.heuristic},
            {"gridStep", st.grid_step},
            {"rootTol", st.root_tol},
            {"warnings", st.warnings}};
}

inline IntervalStructure structure_from_json(const json& j) {
    detail::expect(j, "IntervalStructure");
    IntervalStructure st;
    st.window = {j.at("window").at(0).get<double>(), j.at("window").at(1).get<double>()};
    st.knots = j.at("knots").get<std::vector<double>>();
    for (const auto& s : j.at("signs")) {
        const auto v = s.get<std::string>();
        if (v != "positive" && v != "negative") throw Error(ErrorKind::Configuration, "unknown sign '" + v + "'");
        st.signs.push_back(v == "positive" ? Sign::Positive : Sign::Negative);
    }
    st.m = j.at("m").get<double>();
    st.M = j.at("M").get<double>();
    st.min_even_length = j.at("minEvenLength").get<double>();
    st.max_odd_length = j.at("maxOddLength").get<double>();
    st.eps_max_per_even = j.at("epsMaxPerEven").get<std::vector<double>>();
    st.wrapped = j.at("wrapped").get<bool>();
    st.heuristic = j.at("heuristic").get<bool>();
    st.grid_step = j.at("gridStep").get<double>();
    st.root_tol = j.at("rootTol").get<double>();
    st.warnings = j.at("warnings").get<std::vector<std::string>>();
    if (st.knots.size() != 2 * st.signs.size()) throw Error(ErrorKind::Configuration, "structure: knots and signs disagree");
    return st;
}

inline json to_json(const SynthesisConstants& k) {
    return {{"schemaVersion", kSchemaVersion}, {"type", "SynthesisConstants"}, {"alpha", k.alpha}, {"c", k.c},
            {"margin", k.margin}, {"cOdd", k.c_odd}, {"m", k.m}, {"M", k.M}, {"k", k.k}, {"L", k.L}};
}

inline SynthesisConstants constants_from_json(const json& j) {
    detail::expect(j, "SynthesisConstants");
    SynthesisConstants k;
    k.alpha = j.at("alpha").get<double>();
    k.c = j.at("c").get<double>();
    k.margin = j.at("margin").get<double>();
    k.c_odd = j.at("cOdd").get<std::vector<double>>();
    k.m = j.at("m").get<double>();
    k.M = j.at("M").get<double>();
    k.k = j.at("k").get<double>();
    k.L = j.at("L").get<double>();
    return k;
}

inline json to_json(const CheckResult& c) {
    return {{"name", c.name}, {"pass", c.pass}, {"worstMargin", detail::real(c.worst_margin)},
            {"location", detail::real(c.location)}, {"detail", c.detail}, {"sawNaN", c.saw_nan}};
}

inline CheckResult check_from_json(const json& j) {
    CheckResult c;
    c.name = j.at("name").get<std::string>();
    c.pass = j.at("pass").get<bool>();
    c.worst_margin = detail::real(j.at("worstMargin"));
    c.location = detail::real(j.at("location"));
    c.detail = j.at("detail").get<std::string>();
    c.saw_nan = j.at("sawNaN").get<bool>();
    return c;
}

inline json to_json(const VerificationReport& r) {
    json checks = json::array();
    for (const auto& c : r.checks) checks.push_back(to_json(c));
    json fits = json::object();
    for (const auto& [name, f] : r.fits) {
        fits[name] = {{"lambdaHat", detail::real(f.lambda_hat)}, {"overshootHat", detail::real(f.overshoot_hat)},
                      {"rSquared", detail::real(f.r_squared)}, {"windowUsed", {f.window_used.start, f.window_used.end}},
                      {"zerosExcluded", f.zeros_excluded}};
    }
    json out{{"schemaVersion", kSchemaVersion}, {"type", "VerificationReport"}, {"pass", r.pass()},
             {"checks", checks}, {"decayFits", fits}, {"certificationScope", r.scope}, {"notes", r.notes}};
    out["constantsUsed"] = r.constants ? to_json(*r.constants) : json(nullptr);
    return out;
}

inline VerificationReport report_from_json(const json& j) {
    detail::expect(j, "VerificationReport");
    VerificationReport r;
    for (const auto& c : j.at("checks")) r.checks.push_back(check_from_json(c));
    for (const auto& [name, f] : j.at("decayFits").items()) {
        DecayFit d;
        d.lambda_hat = detail::real(f.at("lambdaHat"));
        d.overshoot_hat = detail::real(f.at("overshootHat"));
        d.r_squared = detail::real(f.at("rSquared"));
        d.window_used = {f.at("windowUsed").at(0).get<double>(), f.at("windowUsed").at(1).get<double>()};
        d.zeros_excluded = f.at("zerosExcluded").get<std::size_t>();
        r.fits[name] = d;
    }
    r.scope = j.at("certificationScope").get<std::string>();
    r.notes = j.at("notes").get<std::vector<std::string>>();
    if (!j.at("constantsUsed").is_null()) r.constants = constants_from_json(j.at("constantsUsed"));
    return r;
}

inline void write_json(const std::string& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw Error(ErrorKind::Configuration, "cannot write " + path);
    f << j.dump(2) << "\n";
}

inline json read_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorKind::Configuration, "cannot read " + path);
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Configuration, path + ": " + e.what());
    }
}

}  // namespace entrain::io
