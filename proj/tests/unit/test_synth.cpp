#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "entrain/synth.hpp"

using namespace entrain;
using Catch::Approx;
constexpr double pi = std::numbers::pi;

namespace {

SystemModel scalar_system(std::function<double(double)> r) {
    SystemModel s;
    s.name = "scalar";
    s.dimension = 1;
    s.drift = [](double, std::span<const double> x) { return Vector{x[0]}; };
    s.control_dir = [r](double t, std::span<const double> x) { return Vector{0.5 * r(t) * x[0]}; };
    s.drift_jacobian = [](double, std::span<const double>) { return SquareMatrix{{1.0}}; };
    s.control_jacobian = [r](double t, std::span<const double>) { return SquareMatrix{{0.5 * r(t)}}; };
    s.envelope_r_min = r;
    s.envelope_r_max = r;
    s.envelope_a_max = [](double) { return 2.0; };
    return s;
}

bool all_pass_named(const std::vector<CheckResult>& cs) {
    for (const auto& c : cs) {
        if (!c.pass) {
            UNSCOPED_INFO(c.name << " failed: margin " << c.worst_margin << " at " << c.location << " " << c.detail);
            return false;
        }
    }
    return true;
}

struct Eq47Window {
    SystemModel sys = builtin("eq47");
    IntervalStructure st = find_knots(sys, {0.0, 2 * pi}, 1.0);
    SynthesisConstants k = choose_constants(st, 0.5);
    std::vector<Transition> tr = locate_all_transitions(st, sys);
    FeedforwardInput u = build_input(st, k, tr);
    GainFunction g = build_gain(st, k);
};

}  // namespace

TEST_CASE("smoothstep endpoint identities and monotonicity") {
    CHECK(Smoothstep::value(0.0) == 0.0);
    CHECK(Smoothstep::value(1.0) == 1.0);
    CHECK(Smoothstep::d1(0.0) == 0.0);
    CHECK(Smoothstep::d1(1.0) == 0.0);
    CHECK(Smoothstep::d2(0.0) == 0.0);
    CHECK(Smoothstep::d2(1.0) == 0.0);
    CHECK(Smoothstep::value(0.5) == 0.5);
    double prev = 0.0;
    for (int i = 1; i <= 1000; ++i) {
        const double s = i / 1000.0;
        CHECK(Smoothstep::value(s) >= prev);
        prev = Smoothstep::value(s);
        const double h = 1e-6;
        if (s < 1.0 - h) {
            CHECK(Smoothstep::d1(s) == Approx((Smoothstep::value(s + h) - Smoothstep::value(s - h)) / (2 * h)).margin(1e-7));
            CHECK(Smoothstep::d2(s) == Approx((Smoothstep::d1(s + h) - Smoothstep::d1(s - h)) / (2 * h)).margin(1e-6));
        }
    }
}

TEST_CASE("synthesis constants match a direct evaluation") {
    const Eq47Window w;
    const double c = 1.05 * (0.5 + std::exp(2.5 * pi / 3) / (2 * pi / 3));
    CHECK(w.k.c == Approx(c).epsilon(1e-9));
    REQUIRE(w.k.c_odd.size() == 3);
    for (double v : w.k.c_odd) CHECK(v == Approx(1.05 * (c + 2.0)).epsilon(1e-9));
    CHECK(w.k.M == 2.0);
    CHECK(w.k.m == 1.0);
}

TEST_CASE("constant choices reject bad alpha and handle an empty odd set") {
    const Eq47Window w;
    CHECK_THROWS_AS(choose_constants(w.st, 0.0), Error);
    CHECK_THROWS_AS(choose_constants(w.st, -1.0), Error);
    CHECK_THROWS_AS(choose_constants(w.st, 0.5, 1.0), Error);
    const IntervalStructure flat = find_knots(scalar_system([](double) { return 2.0; }), {0.0, 10.0}, 1.0);
    const SynthesisConstants k = choose_constants(flat, 1.0, 1.1);
    CHECK(k.c == Approx(1.1));
    CHECK(k.c_odd.empty());
    const FeedforwardInput u = build_input(flat, k, {});
    REQUIRE(u.pieces().size() == 1);
    CHECK(u.value(3.0) == Approx(-1.1 * (1.1 + 2.0)));
}

TEST_CASE("eq47 input vanishes with two derivatives at the zero of R") {
    const Eq47Window w;
    const auto& tt = std::get<TransitionTimes>(w.tr[1]);
    CHECK(std::abs(tt.t1 - pi) < 1e-9);
    const Jet j = w.u.eval(tt.t1);
    CHECK(j.v == Approx(0.0).margin(1e-12));
    CHECK(j.d1 == Approx(0.0).margin(1e-12));
    CHECK(j.d2 == Approx(0.0).margin(1e-12));
    const double amp = w.k.c_odd[1];
    CHECK(w.u.value(pi / 2) == Approx(-amp));
    CHECK(w.u.value(3 * pi / 2) == Approx(amp));
    // u R <= 0 throughout the odd gap.
    for (int i = 0; i <= 100; ++i) {
        const double t = 5 * pi / 6 + i * (pi / 3) / 100;
        CHECK(w.u.value(t) * 2 * std::sin(t) <= 1e-12);
    }
}

TEST_CASE("eq47 input pieces are contiguous and C2") {
    const Eq47Window w;
    const auto& p = w.u.pieces();
    for (std::size_t i = 1; i < p.size(); ++i) CHECK(p[i].t0 == p[i - 1].t1);
    CHECK(p.front().t0 == 0.0);
    CHECK(p.back().t1 == 2 * pi);
    const JunctionJumps jj = junction_jumps(w.u);
    CHECK(jj.value <= 1e-12);
    CHECK(jj.first <= 1e-12);
    CHECK(jj.second <= 1e-12);
    CHECK(verify_smoothness(w.u).pass);
}

TEST_CASE("a discontinuous input is flagged") {
    const FeedforwardInput u({{0.0, 1.0, InputPieceKind::Plateau, 1.0, 1.0}, {1.0, 2.0, InputPieceKind::Plateau, 2.0, 2.0}});
    const CheckResult r = verify_smoothness(u);
    CHECK_FALSE(r.pass);
    CHECK(r.location == 1.0);
    CHECK(junction_jumps(u).value == 1.0);
}

TEST_CASE("eq47 gain values at the knots") {
    const Eq47Window w;
    CHECK(w.g.value(w.st.knots[1]) == Approx(1.0).epsilon(1e-12));
    CHECK(w.g.value(w.st.knots[3]) == Approx(1.0).epsilon(1e-12));
    // The analytic knots are off the located ones by at most the root tolerance.
    CHECK(w.g.value(5 * pi / 6) == Approx(1.0).epsilon(1e-9));
    CHECK(w.g.value(7 * pi / 6) == Approx(std::exp(-2.5 * pi / 3)).epsilon(1e-8));
    CHECK(w.g.value(11 * pi / 6) == Approx(1.0).epsilon(1e-9));
    CHECK(all_pass_named(verify_gain(w.g, w.st, w.k)));
    CHECK(all_pass_named(verify_input_constraints(w.u, w.st, w.k, w.sys)));
}

TEST_CASE("gain is continuous and sandwiched") {
    const Eq47Window w;
    const auto& p = w.g.pieces();
    for (std::size_t i = 1; i < p.size(); ++i) CHECK(p[i - 1].eval(p[i - 1].t1) == Approx(p[i].eval(p[i].t0)).margin(1e-12));
    const double floor = std::exp(-2.5 * pi / 3);
    for (int i = 0; i <= 2000; ++i) {
        const double v = w.g.value(2 * pi * i / 2000);
        CHECK(v <= 1.0 + 1e-12);
        CHECK(v >= floor - 1e-12);
    }
}

TEST_CASE("periodize rejects a seam inside a blend") {
    const FeedforwardInput u({{0.0, 2 * pi, InputPieceKind::Blend, 0.0, 1.0}});
    const GainFunction g({{0.0, 2 * pi, GainPieceKind::Affine, 0.0, 0.0, 0.0, 1.0}});
    try {
        periodize(u, g, 2 * pi);
        FAIL("expected a periodization error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Periodization);
    }
    CHECK_THROWS_AS(periodize(FeedforwardInput::constant(1.0, {0.0, 3.0}), g, 2 * pi), Error);
}

TEST_CASE("periodic eq47 synthesis") {
    const Synthesis s = synthesize(builtin("eq47"), {});
    CHECK(all_pass_named(s.checks));
    const double c = 1.05 * (0.5 + std::exp(2.5 * pi / 3) / (2 * pi / 3));
    CHECK(s.constants.c == Approx(c).epsilon(1e-9));
    CHECK(s.plateau_amplitude() == Approx(1.05 * (c + 2.0)).epsilon(1e-9));
    REQUIRE(s.input.periodicity());
    for (double t : {0.3, 1.9, 3.3, 5.0}) {
        CHECK(s.input.value(t + 2 * pi) == Approx(s.input.value(t)).margin(1e-9));
        CHECK(s.input.value(t - 6 * pi) == Approx(s.input.value(t)).margin(1e-9));
        CHECK(s.gain.value(t + 2 * pi) == Approx(s.gain.value(t)).margin(1e-12));
    }
    CHECK(junction_jumps(s.input).value <= 1e-12);
}

TEST_CASE("synthesis checks pass across alpha and margin") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> A(0.05, 2.0), Mg(1.01, 1.5);
    for (int i = 0; i < 10; ++i) {
        SynthesisOptions opt;
        opt.alpha = A(rng);
        opt.margin = Mg(rng);
        const Synthesis s = synthesize(builtin("eq47"), opt);
        CHECK(all_pass_named(s.checks));
        CHECK(s.constants.c > opt.alpha);
    }
}

TEST_CASE("a gap where R keeps its sign carries a plateau") {
    const SystemModel sys = scalar_system([](double t) { return 1.5 + std::cos(t); });
    SynthesisOptions opt;
    opt.window = Window{0.0, 2 * pi};
    const Synthesis s = synthesize(sys, opt);
    CHECK(all_pass_named(s.checks));
    REQUIRE(s.constants.c_odd.size() == 1);
    const double v = -s.constants.c_odd[0];
    for (double t : {2 * pi / 3 + 1e-3, pi, 4 * pi / 3 - 1e-3}) CHECK(s.input.value(t) == Approx(v));
}

TEST_CASE("aperiodic synthesis needs a window") {
    try {
        synthesize(scalar_system([](double) { return 2.0; }), {});
        FAIL("expected a configuration error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Configuration);
    }
}

TEST_CASE("mismatched transitions are structural errors") {
    const Eq47Window w;
    std::vector<Transition> short_list(w.tr.begin(), w.tr.end() - 1);
    CHECK_THROWS_AS(build_input(w.st, w.k, short_list), Error);
}
