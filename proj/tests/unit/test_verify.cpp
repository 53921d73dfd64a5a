#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "entrain/verify.hpp"

using namespace entrain;
using Catch::Approx;
constexpr double pi = std::numbers::pi;

namespace {

InputSignal minus_three_sin() {
    return InputSignal::callable([](double t) { return -3.0 * std::sin(t); }, "-3 sin t");
}

std::vector<Trajectory> fig1_trajectories(const SystemModel& s) {
    std::vector<Trajectory> out;
    for (double x0 : {-5.0, -1.0, 0.0, 2.5, 5.0})
        out.push_back(integrate(s, minus_three_sin(), Vector{x0}, Vector{1.0}, uniform_grid(0.0, 30.0, 1920)));
    return out;
}

GainFunction unit_gain(double a, double b) { return GainFunction({{a, b, GainPieceKind::Affine, a, 0.0, 0.0, 1.0}}); }

}  // namespace

TEST_CASE("constant V violates the certificate by alpha dt") {
    LyapunovTrace lt;
    for (int j = 0; j <= 10; ++j) {
        lt.times.push_back(0.1 * j);
        lt.values.push_back(1.0);
    }
    const CheckResult r = check_certificate(lt, 0.5);
    CHECK_FALSE(r.pass);
    CHECK(r.worst_margin == Approx(0.05).epsilon(1e-9));
    CHECK_THROWS_AS(check_certificate(lt, 0.0), Error);
}

TEST_CASE("exact exponential decay meets the certificate") {
    LyapunovTrace lt;
    for (int j = 0; j <= 100; ++j) {
        lt.times.push_back(0.05 * j);
        lt.values.push_back(4.0 * std::exp(-0.5 * 0.05 * j));
    }
    const CheckResult r = check_certificate(lt, 0.5);
    CHECK(r.pass);
    CHECK(std::abs(r.worst_margin) < 1e-12);
}

TEST_CASE("unit gain is not a certificate for -3 sin t") {
    const SystemModel s = builtin("eq47");
    const Trajectory tr = integrate(s, minus_three_sin(), Vector{1.0}, Vector{1.0}, uniform_grid(0.0, 2 * pi, 256));
    const CheckResult r = check_certificate(lyapunov_trace(tr, unit_gain(0.0, 2 * pi)), 0.5);
    CHECK_FALSE(r.pass);
}

TEST_CASE("synthesized gain certifies the synthesized input") {
    const SystemModel s = builtin("eq47");
    const Synthesis syn = synthesize(s, {});
    IntegrationOptions o;
    o.max_step = syn.structure.max_odd_length / 8;
    for (double x0 : {-10.0, 0.0, 7.0}) {
        const Trajectory tr = integrate(s, InputSignal::from(syn.input), Vector{x0}, Vector{1.0},
                                        uniform_grid(0.0, 6 * pi, 1200), o);
        const CheckResult r = check_certificate(lyapunov_trace(tr, syn.gain), 0.5);
        INFO("worst margin " << r.worst_margin << " at " << r.location);
        CHECK(r.pass);
    }
}

TEST_CASE("certificate margins do not depend on the displacement scale") {
    const SystemModel s = builtin("eq47");
    const Synthesis syn = synthesize(s, {});
    const auto grid = uniform_grid(0.0, 4 * pi, 400);
    const Trajectory a = integrate(s, InputSignal::from(syn.input), Vector{1.0}, Vector{1.0}, grid);
    const Trajectory b = integrate(s, InputSignal::from(syn.input), Vector{1.0}, Vector{1e-3}, grid);
    const double ma = check_certificate(lyapunov_trace(a, syn.gain), 0.5).worst_margin;
    const double mb = check_certificate(lyapunov_trace(b, syn.gain), 0.5).worst_margin;
    CHECK(std::abs(ma - mb) < 1e-6);
}

TEST_CASE("fig1 contraction constants") {
    // log |dx| = -t/2 + (3/4) sin 2t, so the tight overshoot is exp(3/2).
    const auto trs = fig1_trajectories(builtin("eq47"));
    CHECK(check_contraction(trs, std::exp(1.5) * (1.0 + 1e-6), 0.5).pass);
    const CheckResult tight = check_contraction(trs, std::exp(1.4), 0.5);
    CHECK_FALSE(tight.pass);
    CHECK(tight.worst_margin == Approx(0.1).margin(1e-3));
}

TEST_CASE("eq48 under u = -2 contracts with rate one") {
    const SystemModel s = builtin("eq48");
    std::vector<Trajectory> trs;
    for (const Vector& x0 : {Vector{2.0, 2.0}, Vector{-2.0, 0.0}, Vector{0.5, -1.5}})
        trs.push_back(integrate(s, InputSignal::constant(-2.0), x0, Vector{0.6, 0.8}, uniform_grid(0.0, 10.0, 640)));
    CHECK(check_contraction(trs, 1.01, 1.0).pass);
}

TEST_CASE("zero displacement trivially satisfies the bound") {
    Trajectory tr;
    tr.times = {0.0, 1.0, 2.0};
    tr.states = {Vector{0.0}, Vector{0.0}, Vector{0.0}};
    tr.displacements = {Vector{0.0}, Vector{0.0}, Vector{0.0}};
    CHECK(check_contraction({tr}, 1.0, 10.0).pass);
}

TEST_CASE("IES checks are monotone in their constants") {
    const SystemModel s = builtin("eq48");
    const auto grid = uniform_grid(0.0, 8.0, 512);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    std::vector<std::pair<Trajectory, Trajectory>> pairs;
    for (int i = 0; i < 6; ++i) {
        pairs.emplace_back(integrate(s, InputSignal::constant(-2.0), Vector{U(rng), U(rng)}, {}, grid),
                           integrate(s, InputSignal::constant(-2.0), Vector{U(rng), U(rng)}, {}, grid));
    }
    const CheckResult base = check_ies(pairs, 1.01, 1.0);
    CHECK(base.pass);
    CHECK(check_ies(pairs, 2.0, 1.0).worst_margin <= base.worst_margin);
    CHECK(check_ies(pairs, 1.01, 0.5).worst_margin <= base.worst_margin);
    CHECK(check_ies(pairs, 2.0, 0.5).pass);
    CHECK_FALSE(check_ies(pairs, 1.0, 5.0).pass);
}

TEST_CASE("fit_decay recovers an exponential") {
    std::vector<double> t, v;
    for (int j = 0; j <= 200; ++j) {
        t.push_back(0.05 * j);
        v.push_back(3.0 * std::exp(-0.7 * t.back()));
    }
    const DecayFit f = fit_decay(t, v);
    CHECK(f.lambda_hat == Approx(0.7).epsilon(1e-12));
    CHECK(f.overshoot_hat == Approx(1.0).epsilon(1e-9));
    CHECK(f.r_squared == Approx(1.0).epsilon(1e-12));

    std::mt19937_64 rng(4);
    std::normal_distribution<double> noise(0.0, 1e-6);
    for (double& x : v) x *= 1.0 + noise(rng);
    v[5] = 0.0;
    const DecayFit g = fit_decay(t, v, 1.0);
    CHECK(g.lambda_hat == Approx(0.7).epsilon(1e-5));
    CHECK(g.zeros_excluded == 0);
    CHECK(g.window_used.start == Approx(1.0));
    CHECK_THROWS_AS(fit_decay({0.0, 1.0}, {1.0, 0.5}), Error);
}

TEST_CASE("period map contraction under zero forcing") {
    const SystemModel s = builtin("eq47");
    const Trajectory tr = integrate(s, minus_three_sin(), Vector{3.0}, {}, uniform_grid(0.0, 12 * pi, 6 * 64));
    const PeriodicConvergence pc = check_periodic_convergence(tr, 2 * pi, 0.25);
    CHECK(pc.check.pass);
    REQUIRE(pc.increments.size() == 6);
    CHECK(pc.increments[2] / pc.increments[1] == Approx(std::exp(-pi)).epsilon(1e-5));
    CHECK(std::abs(pc.periodic_point[0]) < 1e-6);
}

TEST_CASE("period map does not settle under t cos t forcing") {
    const SystemModel s = builtin("eq47", Forcing::t_cos_t());
    const Trajectory tr = integrate(s, minus_three_sin(), Vector{0.0}, {}, uniform_grid(0.0, 12 * pi, 6 * 64));
    CHECK_FALSE(check_periodic_convergence(tr, 2 * pi, 0.25).check.pass);
    CHECK_THROWS_AS(check_periodic_convergence(tr, 2 * pi, 1.5), Error);
    const Trajectory short_tr = integrate(s, minus_three_sin(), Vector{0.0}, {}, uniform_grid(0.0, 4 * pi, 128));
    CHECK_THROWS_AS(check_periodic_convergence(short_tr, 2 * pi, 0.25), Error);
}

TEST_CASE("predicted constants and the empirical IES run") {
    const SystemModel s = builtin("eq47");
    const Synthesis syn = synthesize(s, {});
    const PredictedConstants pc = predicted_constants(syn.structure, 0.5);
    CHECK(pc.overshoot == Approx(std::exp(2.5 * pi / 6)).epsilon(1e-8));
    CHECK(pc.rate == 0.25);
    EmpiricalOptions opt;
    opt.trials = 6;
    opt.box = *s.state_box;
    opt.duration = 4 * pi;
    opt.integration.max_step = syn.structure.max_odd_length / 8;
    const EmpiricalResult r = theorem_one_empirical(s, InputSignal::from(syn.input), syn.structure, 0.5, opt);
    INFO(r.check.detail);
    CHECK(r.check.pass);
    CHECK(r.pairs == 6);
    CHECK(r.start_times_used.size() == syn.structure.knots.size() + 8);
}

TEST_CASE("report text lists each check") {
    VerificationReport rep;
    rep.scope = "window [0, 1]";
    rep.checks.push_back(CheckResult{"first"});
    CheckResult bad{"second"};
    bad.observe(1.0, 0.5);
    bad.settle();
    rep.checks.push_back(bad);
    CHECK_FALSE(rep.pass());
    const std::string text = rep.text();
    CHECK(text.find("[pass] first") != std::string::npos);
    CHECK(text.find("[FAIL] second") != std::string::npos);
}
