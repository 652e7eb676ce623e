#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "crnlab/equilibria.hpp"
#include "crnlab/errors.hpp"
#include "crnlab/grid.hpp"
#include "crnlab/network.hpp"
#include "crnlab/numeric.hpp"

namespace crnlab {

enum class Scheme { Strang, ExplicitRk4 };

inline const char* to_string(Scheme s) {
    return s == Scheme::Strang ? "strang" : "explicit-rk4";
}

struct SimConfig {
    double dt = 1e-3;
    double t_end = 1.0;
    Scheme scheme = Scheme::Strang;
    int record_every = 10;
    double negativity_tol = 1e-10;
    bool diffusion_only = false;  // drop the reaction terms (heat flow)
    int snapshot_every = 0;       // full state copies; 0 disables

    void validate() const {
        if (!(dt > 0.0)) throw ValidationError("time.dt", "must be positive");
        if (!(t_end > 0.0)) throw ValidationError("time.t_end", "must be positive");
        if (record_every < 1) throw ValidationError("time.record_every", "must be >= 1");
        if (snapshot_every < 0) throw ValidationError("output.snapshot_every", "must be >= 0");
        if (negativity_tol < 0.0)
            throw ValidationError("time.negativity_tol", "must be >= 0");
    }
};

/// Per-species concentration fields plus the time derivative fields.
/// dt_fields is always the right-hand side D Lap u + R(u) evaluated at the
/// stored state, never a finite difference of states.
struct FieldSet {
    double time = 0.0;
    std::vector<ScalarField> fields;
    std::vector<ScalarField> dt_fields;
};

inline FieldSet make_fieldset(const BoxDomain& domain, int species_count) {
    FieldSet fs;
    fs.fields.assign(static_cast<std::size_t>(species_count), ScalarField::zero(domain));
    fs.dt_fields.assign(static_cast<std::size_t>(species_count), ScalarField::zero(domain));
    return fs;
}

/// One recorded diagnostics row set. Deviations are measured against the
/// recording reference (an equilibrium value) when one is present; otherwise
/// against zero. Vector norms of the paper are sums over species:
/// ||u||_2 = sum_i ||u_i||_2,  |||y||| = sum_i ||u_i||_H2 + sum_i ||u_t,i||_2.
struct DiagnosticsSample {
    double t = 0.0;
    std::vector<double> l2_dev;
    std::vector<double> h2_dev;
    std::vector<double> linf_dev;
    std::vector<double> mean;
    std::vector<double> ut_l2;
    std::vector<double> totals;
    double energy = std::numeric_limits<double>::quiet_NaN();
    double triple_norm = std::numeric_limits<double>::quiet_NaN();
    double y_norm = std::numeric_limits<double>::quiet_NaN();
    double theta_mean_max = std::numeric_limits<double>::quiet_NaN();
    double theta_t_mean_max = std::numeric_limits<double>::quiet_NaN();
};

struct DiagnosticsSeries {
    std::vector<std::string> species;
    std::vector<std::string> total_names;
    std::vector<DiagnosticsSample> samples;
};

struct Trajectory {
    DiagnosticsSeries diagnostics;
    std::vector<FieldSet> snapshots;
    FieldSet final_state;
};

/// What the trajectory recorder should measure.
struct RecordOptions {
    const Equilibrium* reference = nullptr;   // deviation reference
    std::vector<double> energy_weights;       // per species; empty = no energy
};

namespace detail {

struct Recorder {
    const ReactionNetwork& net;
    const CosinePlan& plan;
    Eigen::MatrixXd basis;
    std::vector<double> reference;       // may be empty
    std::vector<double> energy_weights;  // may be empty
    std::vector<std::pair<int, int>> theta_pairs;
    std::vector<double> theta_coeff_l;   // 1 / (alpha_l - beta_l)
    std::vector<double> theta_coeff_k;   // 1 / (beta_k - alpha_k)

    Recorder(const ReactionNetwork& n, const CosinePlan& p, const RecordOptions& opts)
        : net(n), plan(p) {
        basis = conservation_basis(n).cast<double>();
        if (opts.reference != nullptr) {
            const auto& v = opts.reference->value;
            reference.assign(v.data(), v.data() + v.size());
        }
        energy_weights = opts.energy_weights;
        if (n.single_pair()) {
            const auto& pair = n.pairs().front();
            const auto sets = index_sets(pair);
            for (int l : sets.left)
                for (int k : sets.right) {
                    theta_pairs.emplace_back(l, k);
                    theta_coeff_l.push_back(
                        1.0 / static_cast<double>(pair.alpha[static_cast<std::size_t>(l)] -
                                                  pair.beta[static_cast<std::size_t>(l)]));
                    theta_coeff_k.push_back(
                        1.0 / static_cast<double>(pair.beta[static_cast<std::size_t>(k)] -
                                                  pair.alpha[static_cast<std::size_t>(k)]));
                }
        }
    }

    DiagnosticsSample sample(const FieldSet& state) const {
        const int n = net.species_count();
        DiagnosticsSample s;
        s.t = state.time;
        s.l2_dev.resize(static_cast<std::size_t>(n));
        s.h2_dev.resize(static_cast<std::size_t>(n));
        s.linf_dev.resize(static_cast<std::size_t>(n));
        s.mean.resize(static_cast<std::size_t>(n));
        s.ut_l2.resize(static_cast<std::size_t>(n));

        ScalarField dev = ScalarField::zero(state.fields[0].domain);
        for (int i = 0; i < n; ++i) {
            const auto& f = state.fields[static_cast<std::size_t>(i)];
            const double ref = reference.empty() ? 0.0 : reference[static_cast<std::size_t>(i)];
            for (std::size_t c = 0; c < f.values.size(); ++c) dev.values[c] = f.values[c] - ref;
            s.l2_dev[static_cast<std::size_t>(i)] = norm(dev, NormKind::L2);
            s.h2_dev[static_cast<std::size_t>(i)] = norm(dev, NormKind::H2, &plan);
            s.linf_dev[static_cast<std::size_t>(i)] = norm(dev, NormKind::Linf);
            s.mean[static_cast<std::size_t>(i)] = field_mean(f);
            s.ut_l2[static_cast<std::size_t>(i)] =
                norm(state.dt_fields[static_cast<std::size_t>(i)], NormKind::L2);
        }

        const Eigen::Map<const Eigen::VectorXd> mean_vec(s.mean.data(), n);
        const Eigen::VectorXd totals = basis * mean_vec;
        s.totals.assign(totals.data(), totals.data() + totals.size());

        double l2_sum = 0.0, h2_sum = 0.0, ut_sum = 0.0;
        for (int i = 0; i < n; ++i) {
            l2_sum += s.l2_dev[static_cast<std::size_t>(i)];
            h2_sum += s.h2_dev[static_cast<std::size_t>(i)];
            ut_sum += s.ut_l2[static_cast<std::size_t>(i)];
        }
        s.y_norm = l2_sum + ut_sum;
        s.triple_norm = h2_sum + ut_sum;
        if (!energy_weights.empty()) {
            double e = 0.0;
            for (int i = 0; i < n; ++i)
                e += energy_weights[static_cast<std::size_t>(i)] *
                     s.l2_dev[static_cast<std::size_t>(i)] * s.l2_dev[static_cast<std::size_t>(i)];
            s.energy = e;
        }

        if (!theta_pairs.empty()) {
            double theta_max = 0.0, theta_t_max = 0.0;
            for (std::size_t q = 0; q < theta_pairs.size(); ++q) {
                const auto [l, k] = theta_pairs[q];
                const double ref_l =
                    reference.empty() ? 0.0 : reference[static_cast<std::size_t>(l)];
                const double ref_k =
                    reference.empty() ? 0.0 : reference[static_cast<std::size_t>(k)];
                const double dev_mean_l = s.mean[static_cast<std::size_t>(l)] - ref_l;
                const double dev_mean_k = s.mean[static_cast<std::size_t>(k)] - ref_k;
                theta_max = std::max(theta_max, std::abs(theta_coeff_l[q] * dev_mean_l +
                                                         theta_coeff_k[q] * dev_mean_k));
                const double ut_mean_l =
                    field_mean(state.dt_fields[static_cast<std::size_t>(l)]);
                const double ut_mean_k =
                    field_mean(state.dt_fields[static_cast<std::size_t>(k)]);
                theta_t_max = std::max(theta_t_max, std::abs(theta_coeff_l[q] * ut_mean_l +
                                                             theta_coeff_k[q] * ut_mean_k));
            }
            s.theta_mean_max = theta_max;
            s.theta_t_mean_max = theta_t_max;
        }
        return s;
    }
};

}  // namespace detail

/// Time stepper for one (network, domain, config) triple. Construction
/// precomputes the cosine plan and the per-mode diffusion decay factors, so
/// stepping allocates nothing beyond scratch line buffers.
class Stepper {
public:
    Stepper(const ReactionNetwork& net, const BoxDomain& domain, const SimConfig& cfg)
        : net_(net), cfg_(cfg), plan_(domain) {
        cfg_.validate();
        const auto d = net.diffusions();
        const auto& mu = plan_.eigenvalues();
        half_factors_.resize(d.size());
        full_factors_.resize(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) {
            half_factors_[i].resize(mu.size());
            full_factors_[i].resize(mu.size());
            for (std::size_t k = 0; k < mu.size(); ++k) {
                half_factors_[i][k] = std::exp(-d[i] * mu[k] * cfg_.dt / 2.0);
                full_factors_[i][k] = std::exp(-d[i] * mu[k] * cfg_.dt);
            }
        }
        if (cfg_.scheme == Scheme::ExplicitRk4) {
            double h_min = std::numeric_limits<double>::infinity();
            for (int a = 0; a < domain.dim; ++a) h_min = std::min(h_min, domain.spacing(a));
            const double d_max = *std::max_element(d.begin(), d.end());
            if (d_max > 0.0) {
                const double dt_max = 0.9 * h_min * h_min / (2.0 * d_max * domain.dim);
                if (cfg_.dt > dt_max)
                    throw ValidationError(
                        "time.dt", "explicit-rk4 requires dt <= " + format_double(dt_max) +
                                       " for this grid and diffusion");
            }
        }
    }

    const CosinePlan& plan() const { return plan_; }
    const SimConfig& config() const { return cfg_; }
    const ReactionNetwork& network() const { return net_; }

    /// Advance one step of the configured scheme and re-evaluate dt_fields.
    void advance(FieldSet& state) const {
        if (cfg_.scheme == Scheme::Strang) {
            diffusion_step(state, half_factors_);
            if (!cfg_.diffusion_only) reaction_rk4(state, cfg_.dt);
            diffusion_step(state, half_factors_);
        } else {
            rk4_full(state);
        }
        state.time += cfg_.dt;
        check_state(state);
        refresh_rates(state);
    }

    /// dt_fields = D Lap u + R(u) at the current state.
    void refresh_rates(FieldSet& state) const {
        const int n = net_.species_count();
        for (int i = 0; i < n; ++i)
            state.dt_fields[static_cast<std::size_t>(i)] = laplacian_apply(
                state.fields[static_cast<std::size_t>(i)],
                net_.species()[static_cast<std::size_t>(i)].diffusion);
        if (cfg_.diffusion_only) return;
        const std::size_t cells = state.fields[0].values.size();
        std::vector<double> u(static_cast<std::size_t>(n)), r(static_cast<std::size_t>(n));
        for (std::size_t c = 0; c < cells; ++c) {
            for (int i = 0; i < n; ++i) u[static_cast<std::size_t>(i)] =
                state.fields[static_cast<std::size_t>(i)].values[c];
            mass_action_rate_into(net_, u, r);
            for (int i = 0; i < n; ++i)
                state.dt_fields[static_cast<std::size_t>(i)].values[c] += r[static_cast<std::size_t>(i)];
        }
    }

    void check_state(const FieldSet& state) const {
        for (std::size_t i = 0; i < state.fields.size(); ++i) {
            double min_v = std::numeric_limits<double>::infinity();
            for (double v : state.fields[i].values) {
                if (!std::isfinite(v))
                    throw SimulationError(SimulationError::Kind::NonFinite,
                                          "non-finite value in species " +
                                              net_.species()[i].name + " at t=" +
                                              format_double(state.time),
                                          state.time);
                min_v = std::min(min_v, v);
            }
            if (min_v < -cfg_.negativity_tol)
                throw SimulationError(SimulationError::Kind::NegativityBreach,
                                      "species " + net_.species()[i].name + " reached " +
                                          format_double(min_v) + " at t=" +
                                          format_double(state.time),
                                      state.time);
        }
    }

private:
    void diffusion_step(FieldSet& state, const std::vector<std::vector<double>>& factors) const {
        for (std::size_t i = 0; i < state.fields.size(); ++i) {
            std::vector<double> coeffs = plan_.forward(state.fields[i]);
            for (std::size_t k = 0; k < coeffs.size(); ++k) coeffs[k] *= factors[i][k];
            state.fields[i] = plan_.inverse(coeffs);
        }
    }

    /// Classical RK4 on the pointwise reaction ODE u' = R(u). The update of
    /// each cell is a multiple of beta - alpha per pair, so conservation-law
    /// combinations are annihilated to rounding.
    void reaction_rk4(FieldSet& state, double dt) const {
        const int n = net_.species_count();
        const std::size_t cells = state.fields[0].values.size();
        std::vector<double> u(static_cast<std::size_t>(n)), stage(static_cast<std::size_t>(n));
        std::vector<double> k1(static_cast<std::size_t>(n)), k2(static_cast<std::size_t>(n)),
            k3(static_cast<std::size_t>(n)), k4(static_cast<std::size_t>(n));
        for (std::size_t c = 0; c < cells; ++c) {
            for (int i = 0; i < n; ++i)
                u[static_cast<std::size_t>(i)] = state.fields[static_cast<std::size_t>(i)].values[c];
            mass_action_rate_into(net_, u, k1);
            for (int i = 0; i < n; ++i)
                stage[static_cast<std::size_t>(i)] =
                    u[static_cast<std::size_t>(i)] + 0.5 * dt * k1[static_cast<std::size_t>(i)];
            mass_action_rate_into(net_, stage, k2);
            for (int i = 0; i < n; ++i)
                stage[static_cast<std::size_t>(i)] =
                    u[static_cast<std::size_t>(i)] + 0.5 * dt * k2[static_cast<std::size_t>(i)];
            mass_action_rate_into(net_, stage, k3);
            for (int i = 0; i < n; ++i)
                stage[static_cast<std::size_t>(i)] =
                    u[static_cast<std::size_t>(i)] + dt * k3[static_cast<std::size_t>(i)];
            mass_action_rate_into(net_, stage, k4);
            for (int i = 0; i < n; ++i) {
                const auto s = static_cast<std::size_t>(i);
                state.fields[s].values[c] =
                    u[s] + dt / 6.0 * (k1[s] + 2.0 * k2[s] + 2.0 * k3[s] + k4[s]);
            }
        }
    }

    /// RK4 on the full semidiscrete right-hand side (cross-check scheme).
    void rk4_full(FieldSet& state) const {
        const int n = net_.species_count();
        const double dt = cfg_.dt;
        auto rhs = [&](const std::vector<ScalarField>& fields) {
            std::vector<ScalarField> out;
            out.reserve(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i)
                out.push_back(laplacian_apply(fields[static_cast<std::size_t>(i)],
                                              net_.species()[static_cast<std::size_t>(i)].diffusion));
            if (!cfg_.diffusion_only) {
                const std::size_t cells = fields[0].values.size();
                std::vector<double> u(static_cast<std::size_t>(n)), r(static_cast<std::size_t>(n));
                for (std::size_t c = 0; c < cells; ++c) {
                    for (int i = 0; i < n; ++i)
                        u[static_cast<std::size_t>(i)] = fields[static_cast<std::size_t>(i)].values[c];
                    mass_action_rate_into(net_, u, r);
                    for (int i = 0; i < n; ++i)
                        out[static_cast<std::size_t>(i)].values[c] += r[static_cast<std::size_t>(i)];
                }
            }
            return out;
        };
        auto shifted = [&](const std::vector<ScalarField>& base,
                           const std::vector<ScalarField>& dir, double scale) {
            std::vector<ScalarField> out = base;
            for (std::size_t i = 0; i < out.size(); ++i)
                for (std::size_t c = 0; c < out[i].values.size(); ++c)
                    out[i].values[c] += scale * dir[i].values[c];
            return out;
        };
        const auto k1 = rhs(state.fields);
        const auto k2 = rhs(shifted(state.fields, k1, 0.5 * dt));
        const auto k3 = rhs(shifted(state.fields, k2, 0.5 * dt));
        const auto k4 = rhs(shifted(state.fields, k3, dt));
        for (std::size_t i = 0; i < state.fields.size(); ++i)
            for (std::size_t c = 0; c < state.fields[i].values.size(); ++c)
                state.fields[i].values[c] += dt / 6.0 *
                                             (k1[i].values[c] + 2.0 * k2[i].values[c] +
                                              2.0 * k3[i].values[c] + k4[i].values[c]);
    }

    const ReactionNetwork& net_;
    SimConfig cfg_;
    CosinePlan plan_;
    std::vector<std::vector<double>> half_factors_;
    std::vector<std::vector<double>> full_factors_;
};

/// One step of the configured scheme. Convenience wrapper; loops should
/// build a Stepper once instead.
inline FieldSet step(const ReactionNetwork& net, const FieldSet& state, const SimConfig& cfg) {
    Stepper stepper(net, state.fields.at(0).domain, cfg);
    FieldSet next = state;
    stepper.advance(next);
    return next;
}

namespace detail {

inline void validate_initial(const ReactionNetwork& net, const FieldSet& u0) {
    if (static_cast<int>(u0.fields.size()) != net.species_count())
        throw ValidationError("init", "field count differs from species count");
    for (std::size_t i = 1; i < u0.fields.size(); ++i)
        if (!(u0.fields[i].domain == u0.fields[0].domain))
            throw ValidationError("init", "all fields must share one domain");
}

inline long long step_count(const SimConfig& cfg) {
    const long long n = std::llround(cfg.t_end / cfg.dt);
    if (n < 1) throw ValidationError("time.t_end", "must cover at least one step");
    return n;
}

template <typename AdvanceFn>
Trajectory run_loop(const ReactionNetwork& net, FieldSet state, const SimConfig& cfg,
                    const Recorder& recorder, AdvanceFn&& advance) {
    Trajectory traj;
    traj.diagnostics.total_names.reserve(static_cast<std::size_t>(recorder.basis.rows()));
    for (Eigen::Index r = 0; r < recorder.basis.rows(); ++r)
        traj.diagnostics.total_names.push_back("M" + std::to_string(r + 1));
    for (const auto& s : net.species()) traj.diagnostics.species.push_back(s.name);

    const long long n_steps = step_count(cfg);
    traj.diagnostics.samples.push_back(recorder.sample(state));
    if (cfg.snapshot_every > 0) traj.snapshots.push_back(state);
    for (long long s = 1; s <= n_steps; ++s) {
        advance(state);
        if (s % cfg.record_every == 0 || s == n_steps)
            traj.diagnostics.samples.push_back(recorder.sample(state));
        if (cfg.snapshot_every > 0 && (s % cfg.snapshot_every == 0 || s == n_steps))
            traj.snapshots.push_back(state);
    }
    traj.final_state = std::move(state);
    return traj;
}

}  // namespace detail

/// Integrate the reaction-diffusion system from nonnegative initial data,
/// recording diagnostics every record_every steps (plus the initial and
/// final states). t_end is rounded to a whole number of steps.
inline Trajectory simulate(const ReactionNetwork& net, const FieldSet& u0, const SimConfig& cfg,
                           const RecordOptions& rec = {}) {
    detail::validate_initial(net, u0);
    for (const auto& f : u0.fields)
        for (double v : f.values) {
            if (!std::isfinite(v)) throw ValidationError("init", "initial data must be finite");
            if (v < 0.0) throw ValidationError("init", "initial data must be nonnegative");
        }

    Stepper stepper(net, u0.fields[0].domain, cfg);
    detail::Recorder recorder(net, stepper.plan(), rec);
    FieldSet state = u0;
    state.dt_fields.assign(state.fields.size(), ScalarField::zero(u0.fields[0].domain));
    stepper.refresh_rates(state);
    return detail::run_loop(net, std::move(state), cfg, recorder,
                            [&](FieldSet& s) { stepper.advance(s); });
}

/// Integrate v_t = D Lap v + J v with J = rate_jacobian frozen at eq.
/// Strang splitting with exact diffusion and the exact matrix exponential
/// of J dt for the reaction half. Perturbation fields may be negative;
/// only finiteness is checked.
inline Trajectory simulate_linearized(const ReactionNetwork& net, const Equilibrium& eq,
                                      const FieldSet& v0, const SimConfig& cfg,
                                      const RecordOptions& rec = {}) {
    detail::validate_initial(net, v0);
    SimConfig lin_cfg = cfg;
    lin_cfg.scheme = Scheme::Strang;
    lin_cfg.negativity_tol = std::numeric_limits<double>::infinity();
    Stepper stepper(net, v0.fields[0].domain, lin_cfg);
    detail::Recorder recorder(net, stepper.plan(), rec);

    const int n = net.species_count();
    const Eigen::MatrixXd jac = rate_jacobian(
        net, std::span<const double>(eq.value.data(), static_cast<std::size_t>(eq.value.size())));
    const Eigen::MatrixXd propagator = matrix_exponential(jac * cfg.dt);
    const auto diffusions = net.diffusions();
    const auto& mu = stepper.plan().eigenvalues();

    auto advance = [&, n](FieldSet& state) {
        auto half_diffuse = [&](FieldSet& s) {
            for (int i = 0; i < n; ++i) {
                auto coeffs = stepper.plan().forward(s.fields[static_cast<std::size_t>(i)]);
                for (std::size_t k = 0; k < coeffs.size(); ++k)
                    coeffs[k] *= std::exp(-diffusions[static_cast<std::size_t>(i)] * mu[k] *
                                          cfg.dt / 2.0);
                s.fields[static_cast<std::size_t>(i)] = stepper.plan().inverse(coeffs);
            }
        };
        half_diffuse(state);
        const std::size_t cells = state.fields[0].values.size();
        Eigen::VectorXd v(n), w(n);
        for (std::size_t c = 0; c < cells; ++c) {
            for (int i = 0; i < n; ++i) v[i] = state.fields[static_cast<std::size_t>(i)].values[c];
            w.noalias() = propagator * v;
            for (int i = 0; i < n; ++i) state.fields[static_cast<std::size_t>(i)].values[c] = w[i];
        }
        half_diffuse(state);
        state.time += cfg.dt;
        stepper.check_state(state);
        // Rates of the frozen linear system: D Lap v + J v.
        for (int i = 0; i < n; ++i)
            state.dt_fields[static_cast<std::size_t>(i)] = laplacian_apply(
                state.fields[static_cast<std::size_t>(i)], diffusions[static_cast<std::size_t>(i)]);
        Eigen::VectorXd jv(n);
        for (std::size_t c = 0; c < cells; ++c) {
            for (int i = 0; i < n; ++i) v[i] = state.fields[static_cast<std::size_t>(i)].values[c];
            jv.noalias() = jac * v;
            for (int i = 0; i < n; ++i)
                state.dt_fields[static_cast<std::size_t>(i)].values[c] += jv[i];
        }
    };

    FieldSet state = v0;
    state.dt_fields.assign(state.fields.size(), ScalarField::zero(v0.fields[0].domain));
    {
        // Initial rates, same formula as in advance().
        Eigen::VectorXd v(n), jv(n);
        for (int i = 0; i < n; ++i)
            state.dt_fields[static_cast<std::size_t>(i)] = laplacian_apply(
                state.fields[static_cast<std::size_t>(i)], diffusions[static_cast<std::size_t>(i)]);
        const std::size_t cells = state.fields[0].values.size();
        for (std::size_t c = 0; c < cells; ++c) {
            for (int i = 0; i < n; ++i) v[i] = state.fields[static_cast<std::size_t>(i)].values[c];
            jv.noalias() = jac * v;
            for (int i = 0; i < n; ++i)
                state.dt_fields[static_cast<std::size_t>(i)].values[c] += jv[i];
        }
    }
    return detail::run_loop(net, std::move(state), lin_cfg, recorder, advance);
}

}  // namespace crnlab
