#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "entrain/sysmodel.hpp"

using namespace entrain;
using Catch::Approx;
constexpr double pi = std::numbers::pi;

TEST_CASE("eval_a on the builtin systems") {
    CHECK(eval_a(builtin("eq47"), 0.3, Vector{4.0}).matrix() == SquareMatrix{{2}});
    CHECK(eval_a(builtin("eq48"), 1.0, Vector{1.0, -7.0}).matrix() == SquareMatrix{{0, 0}, {0, -2}});
    CHECK(eval_a(builtin("eq49"), 0.0, Vector{0.0}).matrix() == SquareMatrix{{2}});
}

TEST_CASE("eval_r on the builtin systems") {
    CHECK(eval_r(builtin("eq47"), pi / 2, Vector{1.0}).matrix() == SquareMatrix{{2}});
    CHECK(eval_r(builtin("eq48"), 12.0, Vector{0.5, 0.5}).matrix() == SquareMatrix{{2, 0}, {0, 0}});
    CHECK(eval_r(builtin("eq49"), 3.0, Vector{2.0}).matrix() == SquareMatrix{{0}});
}

TEST_CASE("augmented right-hand side examples") {
    const auto r49 = augmented_rhs(builtin("eq49"), 3.0, 0.0, {{0.0}, {1.0}});
    CHECK(r49.base == Vector{3.0});
    CHECK(r49.displacement == Vector{1.0});
    const auto r47 = augmented_rhs(builtin("eq47"), 0.0, 0.0, {{1.0}, {1.0}});
    CHECK(r47.base == Vector{1.0});
    CHECK(r47.displacement == Vector{1.0});
    const auto r48 = augmented_rhs(builtin("eq48"), -2.0, 0.7, {{0.3, -0.4}, {0.0, 0.0}});
    CHECK(r48.displacement == Vector{0.0, 0.0});
}

TEST_CASE("displacement dynamics are linear in dx") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U(-2, 2);
    const SystemModel s = builtin("eq48");
    for (int i = 0; i < 100; ++i) {
        const Vector x{U(rng), U(rng)}, a{U(rng), U(rng)}, b{U(rng), U(rng)};
        const double u = U(rng), t = U(rng);
        const auto ra = augmented_rhs(s, u, t, {x, a});
        const auto rb = augmented_rhs(s, u, t, {x, b});
        const auto rab = augmented_rhs(s, u, t, {x, {a[0] + b[0], a[1] + b[1]}});
        for (int k = 0; k < 2; ++k) {
            CHECK(rab.displacement[k] == Approx(ra.displacement[k] + rb.displacement[k]).margin(1e-14));
        }
    }
}

TEST_CASE("builtin envelopes and periods") {
    CHECK(builtin("eq47").envelope_a_max(17.3) == 2.0);
    CHECK(builtin("eq48").envelope_r_min(-4.0) == 0.0);
    CHECK_FALSE(builtin("eq49").period.has_value());
    CHECK(*builtin("eq47").period == Approx(2 * pi));
    CHECK_FALSE(builtin("eq47", Forcing::t_cos_t()).period.has_value());
    CHECK_THROWS_AS(builtin("eq50"), Error);
}

TEST_CASE("envelopes bound sampled eigenvalues over the state box") {
    for (const char* name : {"eq47", "eq48", "eq49"}) {
        const SystemModel s = builtin(name);
        const StateBox& box = *s.state_box;
        for (int i = 0; i < 100; ++i) {
            const double t = -10.0 + 20.0 * i / 99.0;
            for (int j = 0; j < 100; ++j) {
                Vector x(s.dimension);
                for (std::size_t d = 0; d < s.dimension; ++d) {
                    const double f = (d == 0 ? j : (j * 37) % 100) / 99.0;
                    x[d] = box.lower[d] + f * (box.upper[d] - box.lower[d]);
                }
                const Vector er = eig_sym(eval_r(s, t, x));
                CHECK(er.front() >= s.envelope_r_min(t) - 1e-12);
                CHECK(er.back() <= s.envelope_r_max(t) + 1e-12);
                CHECK(lambda_max(eval_a(s, t, x)) <= s.envelope_a_max(t) + 1e-12);
            }
        }
    }
}

TEST_CASE("periodic builtin repeats its vector fields") {
    const SystemModel s = builtin("eq47");
    const double T = *s.period;
    for (double t : {0.1, 1.7, 4.2}) {
        const Vector x{1.3};
        CHECK(s.drift(t + T, x)[0] == Approx(s.drift(t, x)[0]).epsilon(1e-14));
        CHECK(s.control_dir(t + T, x)[0] == Approx(s.control_dir(t, x)[0]).epsilon(1e-12));
    }
}

TEST_CASE("jacobian consistency") {
    CHECK(check_jacobian_consistency(builtin("eq47"), 1.0, Vector{2.0}, 1e-5) < 1e-8);
    CHECK(check_jacobian_consistency(builtin("eq48"), 0.0, Vector{0.7, -1.1}, 1e-5) < 1e-8);

    SystemModel wrong = builtin("eq49");
    wrong.drift_jacobian = [](double, std::span<const double> x) { return SquareMatrix{{2.0 - x[0] * x[0]}}; };
    CHECK(check_jacobian_consistency(wrong, 0.0, Vector{0.5}, 1e-5) == Approx(1.0).epsilon(1e-6));

    SystemModel flat;
    flat.name = "flat";
    flat.dimension = 2;
    flat.drift = [](double, std::span<const double>) { return Vector{1.0, -2.0}; };
    flat.control_dir = [](double, std::span<const double>) { return Vector{0.0, 0.0}; };
    flat.drift_jacobian = [](double, std::span<const double>) { return SquareMatrix(2); };
    flat.control_jacobian = [](double, std::span<const double>) { return SquareMatrix(2); };
    CHECK(check_jacobian_consistency(flat, 0.0, Vector{3.0, 4.0}, 1e-4) < 1e-10);
}

TEST_CASE("non-finite Jacobians are evaluation errors") {
    SystemModel s = builtin("eq49");
    s.drift_jacobian = [](double, std::span<const double>) { return SquareMatrix{{NAN}}; };
    try {
        eval_a(s, 0.5, Vector{1.0});
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Evaluation);
    }
    CHECK_THROWS_AS(eval_a(builtin("eq48"), 0.0, Vector{1.0}), Error);
}

TEST_CASE("sampled envelopes are flagged heuristic and match exact ones on eq48") {
    const SystemModel s = with_sampled_envelopes(builtin("eq48"), {{-3, -3}, {3, 3}}, 7);
    CHECK(s.heuristic_envelopes);
    CHECK(s.envelope_r_min(0.0) == Approx(0.0).margin(1e-12));
    CHECK(s.envelope_r_max(0.0) == Approx(2.0).epsilon(1e-12));
    CHECK(s.envelope_a_max(0.0) == Approx(2.0).epsilon(1e-12));
}
