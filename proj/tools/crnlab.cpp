#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "crnlab/crnlab.hpp"

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw crnlab::ValidationError("file", "cannot open " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"crnlab - reversible mass-action reaction-diffusion laboratory"};
    app.require_subcommand(1);

    // parse
    std::string network_text, network_file;
    auto* parse_cmd = app.add_subcommand("parse", "parse a network and print its canonical form");
    auto* net_opt = parse_cmd->add_option("--network", network_text, "network text inline");
    auto* file_opt = parse_cmd->add_option("--file", network_file, "network text file");
    net_opt->excludes(file_opt);

    // config-driven flows
    std::string config_path, out_dir;
    auto add_config = [&](CLI::App* cmd, bool with_out) {
        cmd->add_option("--config", config_path, "run configuration file")->required();
        if (with_out) cmd->add_option("--out", out_dir, "output directory override");
    };
    auto* analyze_cmd =
        app.add_subcommand("analyze", "conservation laws, equilibria and growth rates");
    add_config(analyze_cmd, false);
    auto* simulate_cmd = app.add_subcommand("simulate", "integrate the reaction-diffusion system");
    add_config(simulate_cmd, true);

    auto* experiment_cmd = app.add_subcommand("experiment", "run a paper experiment");
    experiment_cmd->require_subcommand(1);
    double delta = -1.0, theta0 = -1.0, amplitude = -1.0, theta = -1.0;
    auto* instability_cmd =
        experiment_cmd->add_subcommand("instability", "escape from the boundary equilibrium");
    add_config(instability_cmd, true);
    instability_cmd->add_option("--delta", delta, "perturbation size");
    instability_cmd->add_option("--theta0", theta0, "escape threshold on ||y||");
    auto* stability_cmd =
        experiment_cmd->add_subcommand("stability", "decay to the positive equilibrium");
    add_config(stability_cmd, true);
    stability_cmd->add_option("--amplitude", amplitude, "perturbation amplitude");
    stability_cmd->add_option("--theta", theta, "smallness bound");

    // fit-rate
    std::string fit_csv, fit_column, fit_species;
    double fit_t0 = 0.0, fit_t1 = 0.0;
    auto* fit_cmd = app.add_subcommand("fit-rate", "log-linear rate fit of a diagnostics column");
    fit_cmd->add_option("csv", fit_csv, "diagnostics CSV path")->required();
    fit_cmd->add_option("column", fit_column, "column name")->required();
    fit_cmd->add_option("t0", fit_t0, "window start")->required();
    fit_cmd->add_option("t1", fit_t1, "window end")->required();
    fit_cmd->add_option("--species", fit_species, "restrict to one species' rows");

    CLI11_PARSE(app, argc, argv);

    try {
        if (parse_cmd->parsed()) {
            std::string text = network_text;
            if (!network_file.empty()) text = read_file(network_file);
            if (text.empty()) {
                std::cerr << "error: provide --network or --file\n";
                return 1;
            }
            const auto net = crnlab::parse_network(text);
            crnlab::RunConfig cfg(net);
            return crnlab::dispatch(cfg, crnlab::Flow::Parse);
        }
        if (fit_cmd->parsed())
            return crnlab::run_fit_rate(fit_csv, fit_column, fit_t0, fit_t1, fit_species);

        auto cfg = crnlab::load_config(config_path);
        if (!out_dir.empty()) cfg.output_dir = out_dir;

        if (analyze_cmd->parsed()) return crnlab::dispatch(cfg, crnlab::Flow::Analyze);
        if (simulate_cmd->parsed()) {
            cfg.experiment = crnlab::ExperimentKind::None;
            return crnlab::dispatch(cfg, crnlab::Flow::Simulate);
        }
        if (instability_cmd->parsed()) {
            cfg.experiment = crnlab::ExperimentKind::Instability;
            if (delta >= 0.0) cfg.delta = delta;
            if (theta0 >= 0.0) cfg.theta0 = theta0;
            if (!(cfg.theta0 > cfg.delta))
                throw crnlab::ValidationError("experiment.theta0", "must exceed experiment.delta");
            return crnlab::dispatch(cfg, crnlab::Flow::Experiment);
        }
        if (stability_cmd->parsed()) {
            cfg.experiment = crnlab::ExperimentKind::Stability;
            if (amplitude >= 0.0) cfg.amplitude = amplitude;
            if (theta >= 0.0) cfg.theta = theta;
            return crnlab::dispatch(cfg, crnlab::Flow::Experiment);
        }
    } catch (const crnlab::SimulationError& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    } catch (const crnlab::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
