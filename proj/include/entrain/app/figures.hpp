#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "entrain/error.hpp"
#include "entrain/intervals.hpp"
#include "entrain/sim.hpp"
#include "entrain/sysmodel.hpp"

namespace entrain::app {

struct FigureSpec {
    std::string id;
    std::string caption;
    SystemModel system;
    InputSignal input;
    std::vector<Vector> initial_conditions;
    Window span;
    std::size_t samples = 3000;
};

inline std::vector<Vector> linspace_points(double a, double b, std::size_t n) {
    std::vector<Vector> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1)});
    return out;
}

/// The four example setups:
///   fig1  eq47, u = -3 sin t, g = 0,        10 states in [-5, 5], t in [0, 30]
///   fig2  eq47, u = -3 sin t, g = t cos t,  same states and span
///   fig3  eq48, u = -2,                     8 states on the boundary of [-2, 2]^2, t in [0, 10]
///   fig4  eq49, u = 3,                      7 states in [-3, 3], t in [0, 10]
inline FigureSpec figure_spec(const std::string& id) {
    FigureSpec f;
    f.id = id;
    const auto minus_three_sin = InputSignal::callable([](double t) { return -3.0 * std::sin(t); }, "-3 sin(t)");
    if (id == "fig1") {
        f.caption = "eq47 with u(t) = -3 sin(t), g(t) = 0";
        f.system = builtin("eq47", Forcing::zero());
        f.input = minus_three_sin;
        f.initial_conditions = linspace_points(-5.0, 5.0, 10);
        f.span = {0.0, 30.0};
    } else if (id == "fig2") {
        f.caption = "eq47 with u(t) = -3 sin(t), g(t) = t cos(t)";
        f.system = builtin("eq47", Forcing::t_cos_t());
        f.input = minus_three_sin;
        f.initial_conditions = linspace_points(-5.0, 5.0, 10);
        f.span = {0.0, 30.0};
    } else if (id == "fig3") {
        f.caption = "eq48 with u(t) = -2";
        f.system = builtin("eq48");
        f.input = InputSignal::constant(-2.0);
        f.initial_conditions = {{-2, -2}, {-2, 0}, {-2, 2}, {0, -2}, {0, 2}, {2, -2}, {2, 0}, {2, 2}};
        f.span = {0.0, 10.0};
        f.samples = 2000;
    } else if (id == "fig4") {
        f.caption = "eq49 with u(t) = 3";
        f.system = builtin("eq49");
        f.input = InputSignal::constant(3.0);
        f.initial_conditions = linspace_points(-3.0, 3.0, 7);
        f.span = {0.0, 10.0};
        f.samples = 2000;
    } else {
        throw Error(ErrorKind::Configuration, "unknown figure '" + id + "' (expected fig1, fig2, fig3 or fig4)");
    }
    return f;
}

/// Largest distance between any two members at each sample.
inline std::vector<double> max_pairwise_distance(const std::vector<Trajectory>& trs) {
    std::vector<double> out;
    if (trs.empty()) return out;
    out.assign(trs.front().size(), 0.0);
    for (std::size_t a = 0; a < trs.size(); ++a)
        for (std::size_t b = a + 1; b < trs.size(); ++b)
            for (std::size_t j = 0; j < out.size(); ++j)
                out[j] = std::max(out[j], distance(trs[a].states[j], trs[b].states[j]));
    return out;
}

}  // namespace entrain::app
