// Command-line front end: analyze, synthesize, simulate, verify, reproduce-figure.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "entrain/app/commands.hpp"

namespace {

using namespace entrain;
using namespace entrain::app;

struct Flags {
    std::string config;
    std::string out;
    std::string figure;
    std::string system;
    std::optional<double> alpha, m, margin;
    std::optional<std::uint64_t> seed;
};

RunConfig make_config(const Flags& f) {
    RunConfig c = f.config.empty() ? RunConfig{} : load_config(f.config);
    if (!f.system.empty()) c.system = f.system;
    if (!f.out.empty()) c.output_dir = f.out;
    if (f.alpha) c.alpha = *f.alpha;
    if (f.m) c.m = *f.m;
    if (f.margin) c.margin = *f.margin;
    if (f.seed) c.initial_conditions.seed = *f.seed;
    if (c.initial_conditions.list.empty() && c.initial_conditions.count == 0) {
        // Default ensemble: 5 points spread over the system's state box.
        const SystemModel sys = build_system(c);
        if (sys.state_box) {
            c.initial_conditions.count = 5;
            c.initial_conditions.box = sys.state_box;
        }
    }
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Open-loop contraction synthesis and verification for affine nonlinear systems"};
    app.require_subcommand(1);
    Flags f;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", f.config, "INI configuration file");
        sub->add_option("--out", f.out, "output directory");
        sub->add_option("--alpha", f.alpha, "decay rate alpha");
        sub->add_option("--m", f.m, "definiteness margin m");
        sub->add_option("--margin", f.margin, "safety factor on the synthesis constants");
        sub->add_option("--seed", f.seed, "seed for random initial conditions");
        sub->add_option("system", f.system, "builtin system (eq47, eq48, eq49); overrides the config");
    };
    auto* analyze = app.add_subcommand("analyze", "detect the sign-definite interval structure");
    auto* synth = app.add_subcommand("synthesize", "build the feedforward input and the Lyapunov gain");
    auto* sim = app.add_subcommand("simulate", "integrate an ensemble and write CSV/SVG");
    auto* verify = app.add_subcommand("verify", "run the certification checks");
    auto* fig = app.add_subcommand("reproduce-figure", "regenerate one of the example figures");
    for (auto* s : {analyze, synth, sim, verify}) common(s);
    fig->add_option("--figure", f.figure, "fig1, fig2, fig3 or fig4")->required();
    fig->add_option("--out", f.out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kConfigError;
    }

    try {
        if (fig->parsed()) return reproduce_figure(f.figure, f.out.empty() ? "." : f.out, std::cout);
        const RunConfig c = make_config(f);
        if (analyze->parsed()) return entrain::app::analyze(c, std::cout);
        if (synth->parsed()) return synthesize_cmd(c, std::cout);
        if (sim->parsed()) return simulate(c, std::cout);
        if (verify->parsed()) return verify_cmd(c, std::cout);
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumericFailure;
    }
    return kConfigError;
}
