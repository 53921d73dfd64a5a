#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <string>

#include "entrain/intervals.hpp"

using namespace entrain;
using Catch::Approx;
constexpr double pi = std::numbers::pi;

namespace {

// x' = a x + u (r(t)/2) x, so R(t) = r(t) and A = 2a.
SystemModel scalar_system(std::function<double(double)> r, double a = 1.0) {
    SystemModel s;
    s.name = "scalar";
    s.dimension = 1;
    s.drift = [a](double, std::span<const double> x) { return Vector{a * x[0]}; };
    s.control_dir = [r](double t, std::span<const double> x) { return Vector{0.5 * r(t) * x[0]}; };
    s.drift_jacobian = [a](double, std::span<const double>) { return SquareMatrix{{a}}; };
    s.control_jacobian = [r](double t, std::span<const double>) { return SquareMatrix{{0.5 * r(t)}}; };
    s.envelope_r_min = r;
    s.envelope_r_max = r;
    s.envelope_a_max = [a](double) { return 2.0 * a; };
    return s;
}

std::string message_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::AssumptionViolated);
        return e.what();
    }
    FAIL("expected assumption-violated");
    return {};
}

}  // namespace

TEST_CASE("eq47 knots on one period") {
    const IntervalStructure st = find_knots(builtin("eq47"), {0.0, 2 * pi}, 1.0);
    REQUIRE(st.knots.size() == 4);
    const double expect[] = {pi / 6, 5 * pi / 6, 7 * pi / 6, 11 * pi / 6};
    for (int i = 0; i < 4; ++i) CHECK(std::abs(st.knots[i] - expect[i]) < 1e-9);
    CHECK(st.signs == std::vector<Sign>{Sign::Positive, Sign::Negative});
    CHECK(st.M == 2.0);
    CHECK(std::abs(st.min_even_length - 2 * pi / 3) < 2e-9);
    CHECK(std::abs(st.max_odd_length - pi / 3) < 2e-9);
    CHECK(st.eps_max_per_even == std::vector<double>{2.0, 2.0});
    CHECK_FALSE(st.wrapped);
}

TEST_CASE("semidefinite and vanishing R are rejected with a reason") {
    CHECK(message_of([] { find_knots(builtin("eq48"), {0.0, 10.0}, 1.0); }).find("only semidefinite") != std::string::npos);
    CHECK(message_of([] { find_knots(builtin("eq49"), {0.0, 10.0}, 1.0); }).find("vanishes identically") != std::string::npos);
}

TEST_CASE("globally definite R gives one even interval and no odd set") {
    const IntervalStructure st = find_knots(scalar_system([](double) { return 2.0; }), {0.0, 10.0}, 1.0);
    CHECK(st.knots == std::vector<double>{0.0, 10.0});
    CHECK(st.odd_segments().empty());
    CHECK(st.max_odd_length == 0.0);
    CHECK(st.M == 0.0);
    const ValidationReport rep = validate_assumption(st, scalar_system([](double) { return 2.0; }));
    CHECK(rep.pass());
}

TEST_CASE("eq47 transition at the zero of sin") {
    const SystemModel s = builtin("eq47");
    const IntervalStructure st = find_knots(s, {0.0, 2 * pi}, 1.0);
    const auto odds = st.odd_segments();
    REQUIRE(odds.size() == 3);
    const Transition tr = locate_transitions(st, s, 1);
    const auto* tt = std::get_if<TransitionTimes>(&tr);
    REQUIRE(tt);
    CHECK(tt->degenerate);
    CHECK(std::abs(tt->t1 - pi) < 1e-9);
    CHECK(std::abs(tt->t2 - pi) < 1e-9);
}

TEST_CASE("cosine zero located inside a widened gap") {
    const SystemModel s = scalar_system([](double t) { return 2.0 * std::cos(t); });
    const IntervalStructure st = find_knots(s, {-1.0, 4.0}, 1.0);
    REQUIRE(st.even_count() == 2);
    const auto odds = st.odd_segments();
    std::size_t inner = 0;
    for (std::size_t j = 0; j < odds.size(); ++j)
        if (odds[j].left_even && odds[j].right_even) inner = j;
    const auto tt = std::get<TransitionTimes>(locate_transitions(st, s, inner));
    CHECK(std::abs(tt.t1 - pi / 2) < 1e-9);
    CHECK(std::abs(tt.t2 - pi / 2) < 1e-9);
}

TEST_CASE("gap without a zero of R is a sign-definite gap") {
    const SystemModel s = scalar_system([](double t) { return 1.5 + std::cos(t); });
    const IntervalStructure st = find_knots(s, {0.0, 2 * pi}, 1.0);
    // Evens [0, 2pi/3] and [4pi/3, 2pi]; R stays in [0.5, 1) between them.
    REQUIRE(st.even_count() == 2);
    REQUIRE(st.odd_segments().size() == 1);
    const Transition tr = locate_transitions(st, s, 0);
    const auto* gap = std::get_if<SignDefiniteGap>(&tr);
    REQUIRE(gap);
    CHECK(gap->sign == Sign::Positive);
}

TEST_CASE("validation of the eq47 structure") {
    const SystemModel s = builtin("eq47");
    const IntervalStructure st = find_knots(s, {0.0, 2 * pi}, 1.0);
    const ValidationReport rep = validate_assumption(st, s);
    CHECK(rep.pass());
    // The boundary attains m exactly at the knots.
    CHECK(rep.checks[1].worst_margin == Approx(0.0).margin(1e-9));
    CHECK_FALSE(rep.notes.empty());
}

TEST_CASE("validation flags an odd gap longer than the claimed L") {
    const SystemModel s = scalar_system([](double t) { return (t < 1.0 || t > 11.0) ? 2.0 : 0.0; });
    IntervalStructure st = find_knots(s, {0.0, 12.0}, 1.0);
    REQUIRE(st.even_count() == 2);
    st.max_odd_length = pi / 3;
    const ValidationReport rep = validate_assumption(st, s);
    CHECK_FALSE(rep.pass());
    bool flagged = false;
    for (const auto& c : rep.checks)
        if (c.name == "odd interval length at most L") flagged = !c.pass;
    CHECK(flagged);
}

TEST_CASE("knots over two periods repeat the one-period knots") {
    const SystemModel s = builtin("eq47");
    const IntervalStructure one = find_knots(s, {0.0, 2 * pi}, 1.0);
    const IntervalStructure two = find_knots(s, {0.0, 4 * pi}, 1.0, {2 * pi / 4096, 1e-10});
    REQUIRE(two.knots.size() == 2 * one.knots.size());
    for (std::size_t i = 0; i < one.knots.size(); ++i) {
        CHECK(std::abs(two.knots[i] - one.knots[i]) < 1e-9);
        CHECK(std::abs(two.knots[i + one.knots.size()] - (one.knots[i] + 2 * pi)) < 1e-9);
    }
}

TEST_CASE("refining the grid keeps every long even interval") {
    const SystemModel s = scalar_system([](double t) { return 2.0 * std::sin(t) + std::sin(3.1 * t); });
    for (double h : {0.05, 0.01}) {
        const IntervalStructure coarse = find_knots(s, {0.0, 20.0}, 1.0, {h, 1e-10});
        const IntervalStructure fine = find_knots(s, {0.0, 20.0}, 1.0, {h / 2, 1e-10});
        for (std::size_t i = 0; i < coarse.even_count(); ++i) {
            const Window e = coarse.even(i);
            if (e.length() <= 4 * h) continue;
            bool found = false;
            for (std::size_t j = 0; j < fine.even_count(); ++j) {
                found = found || (std::abs(fine.even(j).start - e.start) < 1e-8 && std::abs(fine.even(j).end - e.end) < 1e-8);
            }
            CHECK(found);
        }
        for (std::size_t k = 1; k < fine.knots.size(); ++k) CHECK(fine.knots[k] > fine.knots[k - 1]);
    }
}

TEST_CASE("periodic alignment puts the seam inside an even interval") {
    const SystemModel s = builtin("eq47");
    const IntervalStructure st = align_periodic(s, 1.0);
    CHECK(st.wrapped);
    CHECK(st.seam_joins_evens());
    CHECK(st.window.start == Approx(pi / 2).margin(1e-9));
    CHECK(st.window.length() == Approx(2 * pi));
    CHECK(std::abs(st.min_even_length - 2 * pi / 3) < 2e-9);
    CHECK(std::abs(st.max_odd_length - pi / 3) < 2e-9);
    CHECK(st.odd_segments().size() == 2);
    CHECK(validate_assumption(st, s).pass());
    CHECK_THROWS_AS(align_periodic(builtin("eq49"), 1.0), Error);
}

TEST_CASE("bad analysis arguments") {
    CHECK_THROWS_AS(find_knots(builtin("eq47"), {0.0, 2 * pi}, 0.0), Error);
    CHECK_THROWS_AS(find_knots(builtin("eq47"), {1.0, 1.0}, 1.0), Error);
}
