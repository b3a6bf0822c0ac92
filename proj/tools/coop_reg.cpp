#include <iostream>

#include <CLI11.hpp>

#include "coopreg/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Cooperative output regulation of networked reaction-diffusion agents"};
    app.require_subcommand(1);

    std::string scenario_path, out_dir, gains_path;
    coopreg::Overrides ov;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--scenario", scenario_path, "scenario file (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory (default: scenario output.directory)");
        sub->add_option("--grid-points", ov.grid_points, "spatial intervals M");
        sub->add_option("--dt", ov.dt, "time step");
        sub->add_option("--horizon", ov.horizon, "simulated time");
    };
    auto* syn = app.add_subcommand("synthesize", "design the regulator and write gains and certificate");
    common(syn);
    auto* sim = app.add_subcommand("simulate", "simulate the closed loop with a gains file");
    common(sim);
    sim->add_option("--gains", gains_path, "gains file (default: <out>/gains.txt)");
    auto* chk = app.add_subcommand("check", "report every design hypothesis");
    common(chk);

    CLI11_PARSE(app, argc, argv);

    try {
        auto scenario = coopreg::load_scenario(scenario_path);
        coopreg::apply_overrides(scenario, ov);
        const std::filesystem::path out = std::filesystem::path(out_dir.empty() ? scenario.output.directory : out_dir);
        if (syn->parsed()) return coopreg::cmd_synthesize(scenario, out, std::cout);
        if (sim->parsed()) {
            const std::filesystem::path g = gains_path.empty() ? out / "gains.txt" : std::filesystem::path(gains_path);
            return coopreg::cmd_simulate(scenario, g, out, std::cout);
        }
        return coopreg::cmd_check(scenario, std::cout);
    } catch (const coopreg::Error& e) {
        std::cerr << e.kind() << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
