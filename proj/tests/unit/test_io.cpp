#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "entrain/io/csv.hpp"
#include "entrain/io/json.hpp"
#include "entrain/io/svg.hpp"
#include "entrain/verify.hpp"

using namespace entrain;
using Catch::Approx;
constexpr double pi = std::numbers::pi;

namespace {

const Synthesis& eq47_synthesis() {
    static const Synthesis s = synthesize(builtin("eq47"), {});
    return s;
}

// Serialised text round trip, as the files on disk see it.
nlohmann::json reparse(const nlohmann::json& j) { return nlohmann::json::parse(j.dump(2)); }

}  // namespace

TEST_CASE("input round trip is exact") {
    const FeedforwardInput& u = eq47_synthesis().input;
    const nlohmann::json j = io::to_json(u);
    CHECK(j.at("schemaVersion") == io::kSchemaVersion);
    CHECK(j.at("type") == "FeedforwardInput");
    const FeedforwardInput back = io::input_from_json(reparse(j));
    CHECK(back == u);
    CHECK(back.value(1.234) == u.value(1.234));
}

TEST_CASE("gain, structure and constants round trips") {
    const Synthesis& s = eq47_synthesis();
    CHECK(io::gain_from_json(reparse(io::to_json(s.gain))) == s.gain);
    CHECK(io::structure_from_json(reparse(io::to_json(s.structure))) == s.structure);
    CHECK(io::constants_from_json(reparse(io::to_json(s.constants))) == s.constants);
}

TEST_CASE("documents of the wrong type are rejected") {
    const nlohmann::json j = io::to_json(eq47_synthesis().gain);
    CHECK_THROWS_AS(io::input_from_json(j), Error);
    nlohmann::json future = io::to_json(eq47_synthesis().input);
    future["schemaVersion"] = io::kSchemaVersion + 1;
    CHECK_THROWS_AS(io::input_from_json(future), Error);
}

TEST_CASE("report round trip keeps non-finite margins") {
    VerificationReport rep;
    rep.scope = "periodic, T = 6.28";
    rep.checks.push_back(CheckResult{"never observed"});
    CheckResult bad{"bad"};
    bad.observe(NAN, 2.0);
    bad.settle();
    rep.checks.push_back(bad);
    DecayFit f;
    f.lambda_hat = 0.5;
    f.overshoot_hat = 4.5;
    f.r_squared = 0.99;
    f.window_used = {0.0, 30.0};
    rep.fits["fig1"] = f;
    rep.constants = eq47_synthesis().constants;
    rep.notes = {"a note"};
    const nlohmann::json j = reparse(io::to_json(rep));
    CHECK(j.at("pass") == false);
    const VerificationReport back = io::report_from_json(j);
    REQUIRE(back.checks.size() == 2);
    CHECK(back.checks[0].worst_margin == -INFINITY);
    CHECK(back.checks[0].pass);
    CHECK(back.checks[1].saw_nan);
    CHECK_FALSE(back.checks[1].pass);
    CHECK(back.fits.at("fig1").overshoot_hat == 4.5);
    CHECK(back.constants == rep.constants);
    CHECK(back.notes == rep.notes);
    CHECK(back.scope == rep.scope);
}

TEST_CASE("json files on disk") {
    const auto path = (std::filesystem::temp_directory_path() / "entrain_io_test.json").string();
    io::write_json(path, io::to_json(eq47_synthesis().constants));
    CHECK(io::constants_from_json(io::read_json(path)) == eq47_synthesis().constants);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(io::read_json(path), Error);
}

TEST_CASE("csv header and full precision") {
    Trajectory tr;
    tr.times = {0.0, 0.1};
    tr.states = {Vector{1.0, 2.0}, Vector{1.0 / 3.0, 2.0}};
    tr.displacements = {Vector{1.0, 0.0}, Vector{0.5, 0.0}};
    tr.input_values = {-2.0, -2.0};
    const GainFunction g({{0.0, 1.0, GainPieceKind::Affine, 0.0, 0.0, 0.0, 2.0}});
    const std::string csv = io::trajectory_csv(tr, &g);
    CHECK(csv.rfind("t,x1,x2,dx1,dx2,u,V\n", 0) == 0);
    CHECK(csv.find("0.10000000000000001,0.33333333333333331,2,0.5,0,-2,0.5\n") != std::string::npos);
    CHECK(io::format_real(pi) == "3.1415926535897931");
    CHECK(std::stod(io::format_real(0.1)) == 0.1);
    tr.displacements.clear();
    CHECK(io::trajectory_csv(tr).rfind("t,x1,x2,u\n", 0) == 0);
}

TEST_CASE("svg output") {
    io::PlotSpec spec{"title <x>", "t", "x", {{{0.0, 1.0, 2.0, 3.0, 4.0}, {1.0, 2.0, NAN, 3.0, 4.0}, "a"}}};
    const std::string svg = io::render_svg(spec);
    CHECK(svg.find("viewBox=\"0 0 800 500\"") != std::string::npos);
    CHECK(svg.find("<polyline") != std::string::npos);
    CHECK(svg.find("title &lt;x&gt;") != std::string::npos);
    CHECK(svg.find("nan") == std::string::npos);
    CHECK(io::render_svg(io::PlotSpec{}).find("</svg>") != std::string::npos);
}
