#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <span>

#include "crnlab/equilibria.hpp"

using namespace crnlab;

namespace {

const ReactionNetwork& paper_network() {
    static const ReactionNetwork net = parse_network("A + 2B <-> B + C");
    return net;
}

StoichiometricClass class_from_means(const ReactionNetwork& net, std::vector<double> means) {
    return class_of(net, std::span<const double>(means));
}

/// Plain bisection on g(s) = ln a + 2 ln b - ln(ab^2/bc)... For the paper
/// network the equilibrium condition reduces to ab = c along
/// (a,b,c) = anchor + s(-1,-1,1); solve phi(s) = a(s) b(s) - c(s) = 0 by
/// bisection, independent of the library's log-space objective.
double bisect_paper_equilibrium(double a0, double b0, double c0) {
    auto phi = [&](double s) { return (a0 - s) * (b0 - s) - (c0 + s); };
    double lo = -c0, hi = std::min(a0, b0);
    lo += 1e-12;
    hi -= 1e-12;
    REQUIRE(phi(lo) > 0.0);
    REQUIRE(phi(hi) < 0.0);
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (phi(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("class of the paper initial data") {
    const auto& net = paper_network();
    const auto cls = class_from_means(net, {2, 1, 1});
    REQUIRE(cls.totals.size() == 2);
    CHECK(cls.totals[0] == 3.0);  // M1 = a + c
    CHECK(cls.totals[1] == 2.0);  // M2 = b + c
    CHECK_FALSE(cls.degenerate);

    const auto zero = class_from_means(net, {0, 0, 0});
    CHECK(zero.totals[0] == 0.0);
    CHECK(zero.totals[1] == 0.0);
    CHECK(zero.degenerate);

    std::vector<double> negative{-1, 0, 0};
    CHECK_THROWS_AS(class_of(net, std::span<const double>(negative)), ValidationError);
}

TEST_CASE("class totals realize the pairwise conservation combination") {
    // For any l in L, k in R the row (alpha_k - beta_k) e_l + (beta_l - alpha_l) e_k
    // lies in the conservation space, so its total is reproduced by class_of.
    const auto net = parse_network("A + 2B <-> 3C");
    const auto cls = class_from_means(net, {2, 2, 1});
    const auto& pair = net.pairs()[0];
    const auto sets = index_sets(pair);
    const Eigen::MatrixXd basis = cls.basis.cast<double>();
    for (int l : sets.left)
        for (int k : sets.right) {
            Eigen::VectorXd w = Eigen::VectorXd::Zero(net.species_count());
            w[l] = pair.alpha[static_cast<std::size_t>(k)] - pair.beta[static_cast<std::size_t>(k)];
            w[k] = pair.beta[static_cast<std::size_t>(l)] - pair.alpha[static_cast<std::size_t>(l)];
            // w must be a combination of basis rows: residual of least squares is 0.
            const Eigen::VectorXd coeffs =
                basis.transpose().colPivHouseholderQr().solve(w);
            CHECK((basis.transpose() * coeffs - w).lpNorm<Eigen::Infinity>() <= 1e-10);
        }
}

TEST_CASE("positive equilibrium of the paper class") {
    const auto& net = paper_network();
    const auto cls = class_from_means(net, {2, 1, 1});
    Eigen::Vector3d anchor(2, 1, 1);
    const auto eq = positive_equilibrium(net, cls, anchor);

    const double root3 = std::sqrt(3.0);
    CHECK(std::abs(eq.value[0] - root3) <= 1e-12);
    CHECK(std::abs(eq.value[1] - (root3 - 1.0)) <= 1e-12);
    CHECK(std::abs(eq.value[2] - (3.0 - root3)) <= 1e-12);
    CHECK(eq.kind == Equilibrium::Kind::Positive);

    // Independent bisection oracle.
    const double s_star = bisect_paper_equilibrium(2, 1, 1);
    CHECK(std::abs((2.0 - s_star) - eq.value[0]) <= 1e-10);

    const auto rate = mass_action_rate(
        net, std::span<const double>(eq.value.data(), static_cast<std::size_t>(eq.value.size())));
    for (double r : rate) CHECK(std::abs(r) <= 1e-12);
}

TEST_CASE("positive equilibrium with equilibrium anchor is a fixed point") {
    const auto& net = paper_network();
    const auto cls = class_from_means(net, {1, 1, 1});
    Eigen::Vector3d anchor(1, 1, 1);
    const auto eq = positive_equilibrium(net, cls, anchor);
    CHECK(std::abs(eq.value[0] - 1.0) <= 1e-13);
    CHECK(std::abs(eq.value[1] - 1.0) <= 1e-13);
    CHECK(std::abs(eq.value[2] - 1.0) <= 1e-13);
}

TEST_CASE("positive equilibrium is anchor independent") {
    const auto& net = paper_network();
    const auto cls = class_from_means(net, {2, 1, 1});
    Eigen::Vector3d anchor1(2, 1, 1);
    // Another positive point of the same class: shift s = 0.5 along (-1,-1,1).
    Eigen::Vector3d anchor2(1.5, 0.5, 1.5);
    const auto eq1 = positive_equilibrium(net, cls, anchor1);
    const auto eq2 = positive_equilibrium(net, cls, anchor2);
    CHECK((eq1.value - eq2.value).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("objective g is strictly decreasing") {
    const auto& net = paper_network();
    Eigen::VectorXd anchor(3);
    anchor << 2, 1, 1;
    const Eigen::VectorXd dir = detail::stoichiometric_direction(net);
    const detail::EquilibriumObjective g{anchor, dir, net.pairs().front()};
    double prev = g.value(-0.9);
    for (int i = 1; i <= 10; ++i) {
        const double s = -0.9 + 1.8 * i / 10.0;
        if (s >= 1.0) break;
        const double cur = g.value(s);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("positive equilibrium rejects bad anchors") {
    const auto& net = paper_network();
    const auto cls = class_from_means(net, {2, 1, 1});
    Eigen::Vector3d off_class(1, 1, 1);
    CHECK_THROWS_AS(positive_equilibrium(net, cls, off_class), ValidationError);
    Eigen::Vector3d not_positive(3, 0, 0);
    CHECK_THROWS_AS(positive_equilibrium(net, cls, not_positive), ValidationError);
}

TEST_CASE("positive equilibrium with annotated rates") {
    // A <-> B with kf=2, kr=1: equilibrium at 2a = b within class a+b = 3.
    const auto net = parse_network("A <-> B ; kf=2, kr=1");
    const auto cls = class_from_means(net, {2, 1});
    Eigen::Vector2d anchor(2, 1);
    const auto eq = positive_equilibrium(net, cls, anchor);
    CHECK(std::abs(eq.value[0] - 1.0) <= 1e-12);
    CHECK(std::abs(eq.value[1] - 2.0) <= 1e-12);
}

TEST_CASE("boundary equilibria of the paper classes") {
    const auto& net = paper_network();

    SECTION("M1 > M2: the accessible boundary equilibrium (1,0,2)") {
        const auto cls = class_from_means(net, {2, 1, 1});
        const auto eqs = boundary_equilibria(net, cls);
        REQUIRE(eqs.size() == 1);
        CHECK(std::abs(eqs[0].value[0] - 1.0) <= 1e-12);
        CHECK(eqs[0].value[1] == 0.0);
        CHECK(std::abs(eqs[0].value[2] - 2.0) <= 1e-12);
        CHECK(eqs[0].kind == Equilibrium::Kind::Boundary);
        CHECK_FALSE(eqs[0].degenerate);
        CHECK(boundary_growth_rate(net, eqs[0]) == Catch::Approx(2.0).margin(1e-12));
    }

    SECTION("M1 < M2: no boundary equilibrium") {
        const auto cls = class_from_means(net, {1, 2, 1});  // totals (2, 3)
        CHECK(boundary_equilibria(net, cls).empty());
    }

    SECTION("M1 = M2: returned but degenerate") {
        const auto cls = class_from_means(net, {1, 1, 1});  // totals (2, 2)
        const auto eqs = boundary_equilibria(net, cls);
        REQUIRE(eqs.size() == 1);
        CHECK(eqs[0].value[0] == 0.0);
        CHECK(eqs[0].value[1] == 0.0);
        CHECK(std::abs(eqs[0].value[2] - 2.0) <= 1e-12);
        CHECK(eqs[0].degenerate);
    }

    SECTION("M2 = 0: zero growth rate") {
        const auto cls = class_from_means(net, {3, 0, 0});
        const auto eqs = boundary_equilibria(net, cls);
        REQUIRE(eqs.size() == 1);
        CHECK(boundary_growth_rate(net, eqs[0]) == Catch::Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("boundary growth of the generalized family is the product of c_inf") {
    // A1 + A2 + 2B <-> B + C1 + C2 at (1, 1, 0, 2, 3): growth = 2 * 3 = 6.
    const auto net = parse_network("A1 + A2 + 2B <-> B + C1 + C2");
    std::vector<double> boundary{1, 1, 0, 2, 3};
    const auto cls = class_of(net, std::span<const double>(boundary));
    const auto eqs = boundary_equilibria(net, cls);
    REQUIRE(eqs.size() == 1);
    CHECK((eqs[0].value - Eigen::Map<Eigen::VectorXd>(boundary.data(), 5)).lpNorm<Eigen::Infinity>() <=
          1e-10);
    CHECK(boundary_growth_rate(net, eqs[0]) == Catch::Approx(6.0).margin(1e-10));
}

TEST_CASE("every returned equilibrium is in class with zero rate") {
    const auto& net = paper_network();
    for (double a0 : {2.0, 3.0, 0.5}) {
        for (double b0 : {1.0, 0.25}) {
            const auto cls = class_from_means(net, {a0, b0, 1.0});
            std::vector<Equilibrium> all;
            const auto anchor = positive_anchor(net, cls);
            all.push_back(positive_equilibrium(net, cls, anchor));
            for (auto& b : boundary_equilibria(net, cls)) all.push_back(b);
            for (const auto& eq : all) {
                const Eigen::VectorXd residual = cls.basis.cast<double>() * eq.value - cls.totals;
                CHECK(residual.lpNorm<Eigen::Infinity>() <= 1e-10);
                const auto rate = mass_action_rate(
                    net, std::span<const double>(eq.value.data(),
                                                 static_cast<std::size_t>(eq.value.size())));
                for (double r : rate) CHECK(std::abs(r) <= 1e-12);
            }
        }
    }
}

TEST_CASE("exactly one positive and one boundary equilibrium when M1 > M2 > 0") {
    const auto& net = paper_network();
    for (double m2 : {0.5, 1.0, 2.0}) {
        // Means (m2 + 1, m2, 0) give totals M1 = m2 + 1 > M2 = m2 > 0.
        const auto cls = class_from_means(net, {m2 + 1.0, m2, 0.0});
        const auto anchor = positive_anchor(net, cls);
        const auto pos = positive_equilibrium(net, cls, anchor);
        for (int i = 0; i < 3; ++i) CHECK(pos.value[i] > 0.0);
        const auto bnd = boundary_equilibria(net, cls);
        REQUIRE(bnd.size() == 1);
        CHECK_FALSE(bnd[0].degenerate);
    }
}

TEST_CASE("boundary growth rejects positive equilibria") {
    const auto& net = paper_network();
    const auto cls = class_from_means(net, {2, 1, 1});
    const auto eq = positive_equilibrium(net, cls, Eigen::Vector3d(2, 1, 1));
    CHECK_THROWS_AS(boundary_growth_rate(net, eq), ValidationError);
}
