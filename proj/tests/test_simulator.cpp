#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <span>

#include "crnlab/simulate.hpp"

using namespace crnlab;

namespace {

ReactionNetwork paper_net(std::vector<double> diffusion = {1, 1, 1}) {
    auto net = parse_network("A + 2B <-> B + C");
    for (int i = 0; i < 3; ++i) net.set_diffusion(i, diffusion[static_cast<std::size_t>(i)]);
    return net;
}

FieldSet uniform_state(const BoxDomain& d, std::vector<double> values) {
    FieldSet fs = make_fieldset(d, static_cast<int>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i)
        fs.fields[i] = ScalarField::constant(d, values[i]);
    return fs;
}

void add_mode(FieldSet& fs, int species, const ModeIndex& mode, double amplitude) {
    const auto bump = cosine_mode(fs.fields[0].domain, mode, amplitude);
    auto& f = fs.fields[static_cast<std::size_t>(species)];
    for (std::size_t c = 0; c < f.values.size(); ++c) f.values[c] += bump.values[c];
}

/// Reference RK4 on the pointwise reaction ODE u' = R(u).
std::vector<double> ode_rk4(const ReactionNetwork& net, std::vector<double> u, double dt,
                            long long steps) {
    const std::size_t n = u.size();
    std::vector<double> k1(n), k2(n), k3(n), k4(n), stage(n);
    for (long long s = 0; s < steps; ++s) {
        mass_action_rate_into(net, u, k1);
        for (std::size_t i = 0; i < n; ++i) stage[i] = u[i] + 0.5 * dt * k1[i];
        mass_action_rate_into(net, stage, k2);
        for (std::size_t i = 0; i < n; ++i) stage[i] = u[i] + 0.5 * dt * k2[i];
        mass_action_rate_into(net, stage, k3);
        for (std::size_t i = 0; i < n; ++i) stage[i] = u[i] + dt * k3[i];
        mass_action_rate_into(net, stage, k4);
        for (std::size_t i = 0; i < n; ++i)
            u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return u;
}

}  // namespace

TEST_CASE("pure diffusion decays each mode by its exact factor") {
    const auto net = paper_net({0.7, 1.0, 1.3});
    const auto d = BoxDomain::make(1, {1, 1, 1}, {32, 1, 1});
    SimConfig cfg;
    cfg.dt = 1e-2;
    cfg.t_end = cfg.dt;
    cfg.diffusion_only = true;

    FieldSet fs = uniform_state(d, {2, 1, 1});
    add_mode(fs, 0, ModeIndex{{3, 0, 0}}, 0.5);
    add_mode(fs, 1, ModeIndex{{5, 0, 0}}, 0.25);
    add_mode(fs, 2, ModeIndex{{1, 0, 0}}, 0.125);

    const CosinePlan plan(d);
    const auto before0 = plan.forward(fs.fields[0]);
    const auto before1 = plan.forward(fs.fields[1]);

    const auto next = step(net, fs, cfg);
    const auto after0 = plan.forward(next.fields[0]);
    const auto after1 = plan.forward(next.fields[1]);

    const double mu3 = laplacian_eigenvalue(d, ModeIndex{{3, 0, 0}});
    const double mu5 = laplacian_eigenvalue(d, ModeIndex{{5, 0, 0}});
    CHECK(std::abs(after0[3] - before0[3] * std::exp(-0.7 * mu3 * cfg.dt)) <= 1e-13);
    CHECK(std::abs(after1[5] - before1[5] * std::exp(-1.0 * mu5 * cfg.dt)) <= 1e-13);
    CHECK(std::abs(after0[0] - before0[0]) <= 1e-13);  // constant mode untouched
}

TEST_CASE("a spatially uniform strang step is one reaction RK4 step") {
    const auto net = paper_net();
    const auto d = BoxDomain::make(1, {1, 1, 1}, {16, 1, 1});
    SimConfig cfg;
    cfg.dt = 5e-3;
    cfg.t_end = cfg.dt;

    const auto next = step(net, uniform_state(d, {2, 1, 1}), cfg);
    const auto ode = ode_rk4(net, {2, 1, 1}, cfg.dt, 1);
    for (int i = 0; i < 3; ++i)
        for (double v : next.fields[static_cast<std::size_t>(i)].values)
            CHECK(std::abs(v - ode[static_cast<std::size_t>(i)]) <= 1e-13);
}

TEST_CASE("conserved totals drift below 1e-13 per step") {
    const auto net = paper_net();
    const auto d = BoxDomain::make(1, {1, 1, 1}, {64, 1, 1});
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 0.1;
    cfg.record_every = 1;

    FieldSet fs = uniform_state(d, {2, 1, 1});
    add_mode(fs, 0, ModeIndex{{1, 0, 0}}, 0.2);
    add_mode(fs, 1, ModeIndex{{2, 0, 0}}, 0.1);

    const auto traj = simulate(net, fs, cfg);
    const auto& first = traj.diagnostics.samples.front();
    for (std::size_t s = 1; s < traj.diagnostics.samples.size(); ++s) {
        const auto& prev = traj.diagnostics.samples[s - 1];
        const auto& cur = traj.diagnostics.samples[s];
        for (std::size_t r = 0; r < first.totals.size(); ++r)
            CHECK(std::abs(cur.totals[r] - prev.totals[r]) <= 1e-13 * std::abs(first.totals[r]));
    }
}

TEST_CASE("uniform data reduces to the reaction ODE") {
    const auto net = paper_net();
    const auto d = BoxDomain::make(1, {1, 1, 1}, {4, 1, 1});
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 5.0;
    cfg.record_every = 1000;

    const auto traj = simulate(net, uniform_state(d, {2, 1, 1}), cfg);
    const auto reference = ode_rk4(net, {2, 1, 1}, cfg.dt / 100.0, 500000);
    for (int i = 0; i < 3; ++i)
        CHECK(std::abs(traj.final_state.fields[static_cast<std::size_t>(i)].values[0] -
                       reference[static_cast<std::size_t>(i)]) <= 1e-6);
}

TEST_CASE("equilibria are fixed points of the discrete flow") {
    const auto net = paper_net();
    const auto d = BoxDomain::make(1, {1, 1, 1}, {32, 1, 1});
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 1.0;

    std::vector<double> means{2, 1, 1};
    const auto cls = class_of(net, std::span<const double>(means));
    const auto pos = positive_equilibrium(net, cls, Eigen::Vector3d(2, 1, 1));
    const auto bnds = boundary_equilibria(net, cls);
    REQUIRE(bnds.size() == 1);

    for (const auto* eq : {&pos, &bnds[0]}) {
        FieldSet fs = uniform_state(d, {eq->value[0], eq->value[1], eq->value[2]});
        const auto traj = simulate(net, fs, cfg);
        for (int i = 0; i < 3; ++i)
            for (double v : traj.final_state.fields[static_cast<std::size_t>(i)].values)
                CHECK(std::abs(v - eq->value[i]) <= 1e-12);
    }
}

TEST_CASE("linearized flow grows the b mean at exactly c_inf") {
    const auto net = paper_net();
    const auto d = BoxDomain::make(1, {1, 1, 1}, {16, 1, 1});
    std::vector<double> means{2, 1, 1};
    const auto cls = class_of(net, std::span<const double>(means));
    const auto eq = boundary_equilibria(net, cls).at(0);

    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 1.0;
    cfg.record_every = 100;

    FieldSet v0 = uniform_state(d, {0, 1, 0});
    const auto traj = simulate_linearized(net, eq, v0, cfg);
    const double b_mean_end = traj.diagnostics.samples.back().mean[1];
    CHECK(std::abs(b_mean_end - std::exp(2.0)) <= 1e-10 * std::exp(2.0));
}

TEST_CASE("linearized semigroup bound and componentwise estimate") {
    const auto net = paper_net();
    const auto d = BoxDomain::make(1, {1, 1, 1}, {24, 1, 1});
    std::vector<double> means{2, 1, 1};
    const auto cls = class_of(net, std::span<const double>(means));
    const auto eq = boundary_equilibria(net, cls).at(0);
    const double c_inf = eq.growth_rate;

    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 1.5;
    cfg.record_every = 50;

    std::mt19937 rng(41);
    std::uniform_real_distribution<double> dist(-1, 1);
    for (int trial = 0; trial < 5; ++trial) {
        FieldSet v0 = make_fieldset(d, 3);
        for (auto& f : v0.fields)
            for (auto& v : f.values) v = dist(rng);
        const auto traj = simulate_linearized(net, eq, v0, cfg);
        const auto& first = traj.diagnostics.samples.front();
        const double v0_l2 = first.l2_dev[0] + first.l2_dev[1] + first.l2_dev[2];
        const double a0 = first.l2_dev[0];
        const double b0 = first.l2_dev[1];
        for (const auto& s : traj.diagnostics.samples) {
            const double vt = s.l2_dev[0] + s.l2_dev[1] + s.l2_dev[2];
            CHECK(vt <= 3.0 * std::exp(c_inf * s.t) * v0_l2 * (1.0 + 1e-12));
            CHECK(s.l2_dev[0] <= a0 + std::exp(c_inf * s.t) * b0 + 1e-12);
        }
    }
}

TEST_CASE("strang splitting converges at second order") {
    const auto net = paper_net({1.0, 0.5, 0.25});
    const auto d = BoxDomain::make(1, {1, 1, 1}, {32, 1, 1});

    FieldSet fs = uniform_state(d, {2, 1, 1});
    add_mode(fs, 0, ModeIndex{{1, 0, 0}}, 0.3);
    add_mode(fs, 1, ModeIndex{{2, 0, 0}}, 0.2);
    add_mode(fs, 2, ModeIndex{{1, 0, 0}}, 0.1);

    auto endpoint = [&](double dt) {
        SimConfig cfg;
        cfg.dt = dt;
        cfg.t_end = 0.5;
        cfg.record_every = 1 << 20;
        return simulate(net, fs, cfg).final_state;
    };

    const auto reference = endpoint(0.02 / 64.0);
    auto error_of = [&](const FieldSet& state) {
        double err = 0.0;
        for (std::size_t i = 0; i < state.fields.size(); ++i)
            for (std::size_t c = 0; c < state.fields[i].values.size(); ++c)
                err = std::max(err, std::abs(state.fields[i].values[c] -
                                             reference.fields[i].values[c]));
        return err;
    };

    const double e1 = error_of(endpoint(0.02));
    const double e2 = error_of(endpoint(0.01));
    const double e3 = error_of(endpoint(0.005));
    const double slope12 = std::log2(e1 / e2);
    const double slope23 = std::log2(e2 / e3);
    CHECK(slope12 > 1.8);
    CHECK(slope12 < 2.2);
    CHECK(slope23 > 1.8);
    CHECK(slope23 < 2.2);
}

TEST_CASE("identical configs give bitwise identical runs") {
    const auto net = paper_net();
    const auto d = BoxDomain::make(1, {1, 1, 1}, {48, 1, 1});
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 0.25;

    FieldSet fs = uniform_state(d, {2, 1, 1});
    add_mode(fs, 1, ModeIndex{{3, 0, 0}}, 0.4);

    const auto t1 = simulate(net, fs, cfg);
    const auto t2 = simulate(net, fs, cfg);
    for (std::size_t i = 0; i < t1.final_state.fields.size(); ++i)
        for (std::size_t c = 0; c < t1.final_state.fields[i].values.size(); ++c)
            CHECK(t1.final_state.fields[i].values[c] == t2.final_state.fields[i].values[c]);
}

TEST_CASE("nonnegativity holds in the stability regime") {
    const auto net = paper_net();
    const auto d = BoxDomain::make(1, {1, 1, 1}, {32, 1, 1});
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 2.0;

    FieldSet fs = uniform_state(d, {2, 1, 1});
    add_mode(fs, 0, ModeIndex{{1, 0, 0}}, 0.5);
    const auto traj = simulate(net, fs, cfg);  // would throw on a breach
    double min_v = 1e300;
    for (const auto& f : traj.final_state.fields)
        for (double v : f.values) min_v = std::min(min_v, v);
    CHECK(min_v >= -1e-10);
}

TEST_CASE("simulation errors carry their kind") {
    const auto net = paper_net();
    const auto d = BoxDomain::make(1, {1, 1, 1}, {8, 1, 1});

    SimConfig runaway;
    runaway.dt = 1e3;
    runaway.t_end = 1e3;
    try {
        step(net, uniform_state(d, {2, 1, 1}), runaway);
        FAIL("expected a simulation error");
    } catch (const SimulationError& e) {
        CHECK(e.kind() == SimulationError::Kind::NegativityBreach);
    }

    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 1e-3;
    CHECK_THROWS_AS(step(net, uniform_state(d, {1e200, 1e200, 1e200}), cfg), SimulationError);

    FieldSet negative = uniform_state(d, {1, 1, 1});
    negative.fields[0].values[0] = -0.5;
    CHECK_THROWS_AS(simulate(net, negative, cfg), ValidationError);
}

TEST_CASE("explicit rk4 validates its step-size bound and matches strang") {
    const auto net = paper_net();
    const auto d = BoxDomain::make(1, {1, 1, 1}, {16, 1, 1});

    SimConfig bad;
    bad.scheme = Scheme::ExplicitRk4;
    bad.dt = 1e-2;  // far above 0.9 h^2 / (2 d)
    bad.t_end = 1.0;
    CHECK_THROWS_AS(Stepper(net, d, bad), ValidationError);

    SimConfig rk;
    rk.scheme = Scheme::ExplicitRk4;
    rk.dt = 1e-3;
    rk.t_end = 0.1;
    SimConfig strang = rk;
    strang.scheme = Scheme::Strang;

    FieldSet fs = uniform_state(d, {2, 1, 1});
    add_mode(fs, 1, ModeIndex{{1, 0, 0}}, 0.3);
    const auto a = simulate(net, fs, rk);
    const auto b = simulate(net, fs, strang);
    for (std::size_t i = 0; i < a.final_state.fields.size(); ++i)
        for (std::size_t c = 0; c < a.final_state.fields[i].values.size(); ++c)
            CHECK(std::abs(a.final_state.fields[i].values[c] -
                           b.final_state.fields[i].values[c]) <= 1e-7);
}

TEST_CASE("trajectory bookkeeping") {
    const auto net = paper_net();
    const auto d = BoxDomain::make(1, {1, 1, 1}, {8, 1, 1});
    SimConfig cfg;
    cfg.dt = 1e-2;
    cfg.t_end = 0.1;
    cfg.record_every = 3;
    cfg.snapshot_every = 5;

    const auto traj = simulate(net, uniform_state(d, {2, 1, 1}), cfg);
    REQUIRE(traj.diagnostics.samples.size() >= 3);
    for (std::size_t s = 1; s < traj.diagnostics.samples.size(); ++s)
        CHECK(traj.diagnostics.samples[s].t > traj.diagnostics.samples[s - 1].t);
    CHECK(traj.diagnostics.samples.back().t == Catch::Approx(0.1).margin(1e-12));
    CHECK(traj.snapshots.size() == 3);  // t = 0, 0.05, 0.1
    CHECK(traj.diagnostics.total_names == std::vector<std::string>{"M1", "M2"});

    // dt_fields of the recorded final state satisfy the FieldSet contract.
    const auto& fin = traj.final_state;
    const auto lap = laplacian_apply(fin.fields[1], 1.0);
    std::vector<double> u(3), r(3);
    for (int i = 0; i < 3; ++i)
        u[static_cast<std::size_t>(i)] = fin.fields[static_cast<std::size_t>(i)].values[0];
    mass_action_rate_into(net, u, r);
    CHECK(std::abs(fin.dt_fields[1].values[0] - (lap.values[0] + r[1])) <= 1e-14);
}
