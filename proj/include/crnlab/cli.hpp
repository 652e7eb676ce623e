#pragma once

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <span>
#include <string>

#include "crnlab/analysis.hpp"
#include "crnlab/config.hpp"
#include "crnlab/equilibria.hpp"
#include "crnlab/errors.hpp"
#include "crnlab/io.hpp"
#include "crnlab/network.hpp"
#include "crnlab/simulate.hpp"

namespace crnlab {

enum class Flow { Parse, Analyze, Simulate, Experiment };

namespace detail {

inline std::filesystem::path resolve_output_dir(const RunConfig& cfg) {
    if (const char* env = std::getenv("CRNLAB_OUT"); env != nullptr && *env != '\0')
        return std::filesystem::path(env);
    return std::filesystem::path(cfg.output_dir);
}

inline std::string value_csv(const Eigen::VectorXd& v) {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i > 0) out += ',';
        out += format_double(v[i]);
    }
    return out;
}

inline void print_network(const ReactionNetwork& net, std::ostream& out) {
    out << pretty_print(net);
    out << "species:\n";
    for (const auto& s : net.species())
        out << "  " << s.index << " " << s.name << " diffusion=" << format_double(s.diffusion)
            << "\n";
}

inline void print_equilibrium(const ReactionNetwork& net, const Equilibrium& eq,
                              std::ostream& out) {
    out << "  " << to_string(eq.kind) << (eq.degenerate ? " (degenerate)" : "") << "  u = ("
        << value_csv(eq.value) << ")  growth = " << format_double(eq.growth_rate) << "\n";
    (void)net;
}

inline int analyze_flow(const RunConfig& cfg, std::ostream& out) {
    const auto& net = cfg.network;
    print_network(net, out);

    const auto basis = conservation_basis(net);
    out << "conservation laws (" << basis.rows() << "):\n";
    for (Eigen::Index r = 0; r < basis.rows(); ++r) {
        out << "  M" << (r + 1) << " =";
        for (int i = 0; i < net.species_count(); ++i) {
            if (basis(r, i) == 0) continue;
            out << " + " << (basis(r, i) == 1 ? "" : std::to_string(basis(r, i)) + " ")
                << net.species()[static_cast<std::size_t>(i)].name;
        }
        out << "\n";
    }

    const auto cls = class_of(net, std::span<const double>(cfg.init_constants));
    out << "totals:";
    for (Eigen::Index r = 0; r < cls.totals.size(); ++r)
        out << " M" << (r + 1) << "=" << format_double(cls.totals[r]);
    out << (cls.degenerate ? " (degenerate class: no positive state)" : "") << "\n";

    if (!net.single_pair()) {
        out << "equilibrium enumeration requires a single reversible pair\n";
        return 0;
    }

    std::vector<Equilibrium> all;
    if (!cls.degenerate) {
        const auto anchor = positive_anchor(net, cls);
        all.push_back(positive_equilibrium(net, cls, anchor));
    }
    for (auto& b : boundary_equilibria(net, cls)) all.push_back(std::move(b));

    out << "equilibria (" << all.size() << "):\n";
    for (const auto& eq : all) print_equilibrium(net, eq, out);
    for (const auto& eq : all)
        out << "equilibrium kind=" << to_string(eq.kind) << " value=" << value_csv(eq.value)
            << " growth=" << format_double(eq.growth_rate) << "\n";
    return 0;
}

inline void write_trajectory(const RunConfig& cfg, const Trajectory& traj,
                             const std::filesystem::path& dir, std::ostream& out) {
    const auto csv_path = dir / "diagnostics.csv";
    atomic_write_file(csv_path, diagnostics_csv(traj.diagnostics));
    out << "wrote " << csv_path.string() << " (" << traj.diagnostics.samples.size()
        << " samples)\n";
    for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "snapshot_%06zu.csv", i);
        const auto path = dir / name;
        atomic_write_file(path, snapshot_csv(traj.diagnostics.species, traj.snapshots[i].fields));
        out << "wrote " << path.string() << " (t=" << format_double(traj.snapshots[i].time)
            << ")\n";
    }
}

inline int simulate_flow(const RunConfig& cfg, std::ostream& out) {
    const auto& net = cfg.network;
    const FieldSet init = build_initial_fields(cfg);

    // Deviations are measured from the positive equilibrium of the initial
    // class when one exists.
    RecordOptions rec;
    std::optional<Equilibrium> reference;
    std::optional<EnergyWeights> weights;
    if (net.single_pair()) {
        const auto cls = class_of(net, std::span<const double>(cfg.init_constants));
        if (!cls.degenerate) {
            reference = positive_equilibrium(net, cls, positive_anchor(net, cls));
            weights = energy_weights(net, *reference);
            rec.reference = &*reference;
            rec.energy_weights = weights->w;
        }
    }

    const auto traj = simulate(net, init, cfg.sim, rec);
    const auto dir = resolve_output_dir(cfg);
    write_trajectory(cfg, traj, dir, out);
    const auto& last = traj.diagnostics.samples.back();
    out << "final t=" << format_double(last.t);
    for (std::size_t r = 0; r < last.totals.size(); ++r)
        out << " " << traj.diagnostics.total_names[r] << "=" << format_double(last.totals[r]);
    out << "\n";
    return 0;
}

inline int experiment_flow(const RunConfig& cfg, std::ostream& out) {
    const auto& net = cfg.network;
    const auto cls = class_of(net, std::span<const double>(cfg.init_constants));
    const auto dir = resolve_output_dir(cfg);

    if (cfg.experiment == ExperimentKind::Instability) {
        const auto boundary = boundary_equilibria(net, cls);
        const Equilibrium* eq = nullptr;
        for (const auto& b : boundary)
            if (b.growth_rate > 0.0 && (eq == nullptr || !b.degenerate)) eq = &b;
        if (eq == nullptr)
            throw ValidationError("class", "no unstable boundary equilibrium in this class");
        const auto shape = make_instability_shape(net, *eq, build_mode_shape(cfg));
        const auto report =
            run_instability_experiment(net, cls, shape, cfg.delta, cfg.theta0, cfg.sim);

        out << "instability experiment around boundary equilibrium ("
            << value_csv(report.boundary.value) << ")\n"
            << "  growth rate c_inf        " << format_double(report.c_inf) << "\n"
            << "  delta                    " << format_double(report.delta) << "\n"
            << "  theta0                   " << format_double(report.theta0) << "\n"
            << "  predicted escape time    " << format_double(report.predicted_escape) << "\n"
            << "  measured escape time     " << format_double(report.measured_escape) << "\n"
            << "  fitted growth rate       " << format_double(report.fitted_rate.rate) << "\n"
            << "  tau0 proxy (|y| at exit) " << format_double(report.tau0_proxy) << "\n";
        out << "experiment=instability\n"
            << "delta=" << format_double(report.delta) << "\n"
            << "theta0=" << format_double(report.theta0) << "\n"
            << "c_inf=" << format_double(report.c_inf) << "\n"
            << "predicted_escape=" << format_double(report.predicted_escape) << "\n"
            << "measured_escape=" << format_double(report.measured_escape) << "\n"
            << "escaped=" << (report.escaped ? 1 : 0) << "\n"
            << "fitted_rate=" << format_double(report.fitted_rate.rate) << "\n"
            << "fit_residual=" << format_double(report.fitted_rate.residual) << "\n"
            << "tau0_proxy=" << format_double(report.tau0_proxy) << "\n";
        write_trajectory(cfg, report.trajectory, dir, out);
        return 0;
    }

    if (cfg.experiment == ExperimentKind::Stability) {
        FieldSet shape = build_mode_shape(cfg);
        for (auto& f : shape.fields)
            for (auto& v : f.values) v *= cfg.amplitude;
        const auto perturbation = make_in_class_perturbation(net, std::move(shape));
        const auto report =
            run_stability_experiment(net, cls, perturbation, cfg.theta, cfg.sim);

        out << "stability experiment around positive equilibrium ("
            << value_csv(report.equilibrium.value) << ")\n"
            << "  weights                  (";
        for (std::size_t i = 0; i < report.weights.w.size(); ++i)
            out << (i > 0 ? "," : "") << format_double(report.weights.w[i]);
        out << ")\n"
            << "  initial smallness        " << format_double(report.initial_smallness)
            << " (theta " << format_double(report.theta) << ")\n"
            << "  energy monotone          " << (report.energy_monotone ? "yes" : "no") << "\n"
            << "  fitted H2 decay rate     " << format_double(report.fitted_decay.rate) << "\n"
            << "  H2 final/initial         "
            << format_double(report.degenerate ? 0.0 : report.h2_final / report.h2_initial)
            << "\n";
        out << "experiment=stability\n"
            << "amplitude=" << format_double(cfg.amplitude) << "\n"
            << "theta=" << format_double(report.theta) << "\n"
            << "initial_smallness=" << format_double(report.initial_smallness) << "\n"
            << "degenerate=" << (report.degenerate ? 1 : 0) << "\n"
            << "energy_monotone=" << (report.energy_monotone ? 1 : 0) << "\n"
            << "u_energy_monotone=" << (report.u_energy_monotone ? 1 : 0) << "\n"
            << "ut_energy_monotone=" << (report.ut_energy_monotone ? 1 : 0) << "\n"
            << "fitted_decay=" << format_double(report.fitted_decay.rate) << "\n"
            << "h2_initial=" << format_double(report.h2_initial) << "\n"
            << "h2_final=" << format_double(report.h2_final) << "\n";
        write_trajectory(cfg, report.trajectory, dir, out);
        return 0;
    }

    throw ValidationError("experiment.kind", "no experiment configured");
}

}  // namespace detail

/// Run one configured flow. Exit status: 0 success, 1 validation/parse
/// failure, 2 runtime failure (non-finite state or negativity breach).
inline int dispatch(const RunConfig& cfg, Flow flow, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
    try {
        switch (flow) {
            case Flow::Parse:
                detail::print_network(cfg.network, out);
                return 0;
            case Flow::Analyze:
                return detail::analyze_flow(cfg, out);
            case Flow::Simulate:
                return detail::simulate_flow(cfg, out);
            case Flow::Experiment:
                return detail::experiment_flow(cfg, out);
        }
        return 1;
    } catch (const SimulationError& e) {
        err << "runtime error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "unexpected error: " << e.what() << "\n";
        return 2;
    }
}

/// The fit-rate tool: least-squares exponential rate of one diagnostics CSV
/// column over [t0, t1].
inline int run_fit_rate(const std::filesystem::path& csv, const std::string& column, double t0,
                        double t1, const std::string& species, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
    try {
        const auto [ts, vs] = read_csv_series(csv, column, species);
        const auto fit = fit_exponential_rate(ts, vs, t0, t1);
        out << "rate=" << format_double(fit.rate) << "\n"
            << "residual=" << format_double(fit.residual) << "\n"
            << "samples=" << fit.samples << "\n"
            << "window=" << format_double(fit.t0) << "," << format_double(fit.t1) << "\n";
        return 0;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "unexpected error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace crnlab
