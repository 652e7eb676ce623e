#include <catch2/catch_amalgamated.hpp>

#include <numbers>
#include <random>

#include "crnlab/grid.hpp"

using namespace crnlab;

namespace {

ScalarField random_field(const BoxDomain& d, std::mt19937& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    ScalarField f = ScalarField::zero(d);
    for (auto& v : f.values) v = dist(rng);
    return f;
}

double inner(const ScalarField& a, const ScalarField& b) {
    std::vector<double> prod(a.values.size());
    for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = a.values[i] * b.values[i];
    return pairwise_sum(prod) * a.domain.cell_volume();
}

}  // namespace

TEST_CASE("laplacian of a constant vanishes") {
    const auto d = BoxDomain::make(1, {1, 1, 1}, {64, 1, 1});
    const auto f = ScalarField::constant(d, 3.25);
    const auto lap = laplacian_apply(f, 1.0);
    for (double v : lap.values) CHECK(v == 0.0);
}

TEST_CASE("cosine modes are discrete eigenfunctions of the mirror laplacian") {
    const auto d = BoxDomain::make(1, {1, 1, 1}, {32, 1, 1});
    for (int k : {1, 2, 5, 17, 31}) {
        const auto f = cosine_mode(d, ModeIndex{{k, 0, 0}}, 1.0);
        const auto lap = laplacian_apply(f, 1.0);
        const double mu = laplacian_eigenvalue(d, ModeIndex{{k, 0, 0}});
        for (std::size_t i = 0; i < f.values.size(); ++i)
            CHECK(std::abs(lap.values[i] + mu * f.values[i]) <= 1e-9 * mu);
    }
}

TEST_CASE("laplacian image has zero mean") {
    std::mt19937 rng(3);
    const auto d = BoxDomain::make(2, {1, 2, 1}, {16, 12, 1});
    for (int trial = 0; trial < 5; ++trial) {
        const auto f = random_field(d, rng);
        const auto lap = laplacian_apply(f, 0.7);
        CHECK(std::abs(field_mean(lap)) <= 1e-13);
    }
}

TEST_CASE("laplacian is self adjoint") {
    std::mt19937 rng(5);
    for (int dim = 1; dim <= 3; ++dim) {
        const auto d = dim == 1   ? BoxDomain::make(1, {1, 1, 1}, {64, 1, 1})
                       : dim == 2 ? BoxDomain::make(2, {1, 1, 1}, {12, 10, 1})
                                  : BoxDomain::make(3, {1, 1, 1}, {6, 5, 4});
        for (int trial = 0; trial < 5; ++trial) {
            const auto f = random_field(d, rng);
            const auto g = random_field(d, rng);
            const double defect =
                std::abs(inner(laplacian_apply(f, 1.0), g) - inner(f, laplacian_apply(g, 1.0)));
            CHECK(defect <= 1e-12);
        }
    }
}

TEST_CASE("dct round trip and mode isolation") {
    std::mt19937 rng(7);
    const auto d = BoxDomain::make(1, {1, 1, 1}, {48, 1, 1});
    const CosinePlan plan(d);

    const auto f = random_field(d, rng);
    const auto back = plan.inverse(plan.forward(f));
    for (std::size_t i = 0; i < f.values.size(); ++i)
        CHECK(std::abs(back.values[i] - f.values[i]) <= 1e-12);

    const auto constant = ScalarField::constant(d, 2.0);
    const auto coeffs = plan.forward(constant);
    for (std::size_t k = 1; k < coeffs.size(); ++k) CHECK(std::abs(coeffs[k]) <= 1e-13);

    // Forward of a single sampled cosine concentrates on its own mode; the
    // projection integral is the oracle.
    const auto mode3 = cosine_mode(d, ModeIndex{{3, 0, 0}}, 1.5);
    const auto c3 = plan.forward(mode3);
    for (std::size_t k = 0; k < c3.size(); ++k) {
        if (k == 3) continue;
        CHECK(std::abs(c3[k]) <= 1e-12);
    }
    CHECK(std::abs(c3[3] - 1.5 * std::sqrt(0.5)) <= 1e-12);  // projection onto sqrt(2) cos
}

TEST_CASE("dct diagonalizes the mirror laplacian") {
    std::mt19937 rng(9);
    for (int dim = 1; dim <= 2; ++dim) {
        const auto d = dim == 1 ? BoxDomain::make(1, {1, 1, 1}, {32, 1, 1})
                                : BoxDomain::make(2, {1, 1.5, 1}, {12, 9, 1});
        const CosinePlan plan(d);
        const auto f = random_field(d, rng);
        const auto lhs = plan.forward(laplacian_apply(f, 1.0));
        const auto fhat = plan.forward(f);
        for (std::size_t k = 0; k < lhs.size(); ++k)
            CHECK(std::abs(lhs[k] + plan.eigenvalues()[k] * fhat[k]) <= 1e-11);
    }
}

TEST_CASE("laplacian eigenvalues") {
    const auto d = BoxDomain::make(1, {1, 1, 1}, {64, 1, 1});
    CHECK(laplacian_eigenvalue(d, ModeIndex{{0, 0, 0}}) == 0.0);

    const double mu1 = laplacian_eigenvalue(d, ModeIndex{{1, 0, 0}});
    const double pi2 = std::numbers::pi * std::numbers::pi;
    CHECK(std::abs(mu1 - pi2) / pi2 <= 1e-3);

    double prev = 0.0;
    for (int k = 0; k < 64; ++k) {
        const double mu = laplacian_eigenvalue(d, ModeIndex{{k, 0, 0}});
        CHECK(mu >= prev);
        prev = mu;
    }
    CHECK_THROWS_AS(laplacian_eigenvalue(d, ModeIndex{{64, 0, 0}}), ValidationError);

    const auto d3 = BoxDomain::make(3, {1, 2, 3}, {8, 8, 8});
    const double sum = axis_eigenvalue(d3, 0, 2) + axis_eigenvalue(d3, 1, 3) + axis_eigenvalue(d3, 2, 1);
    CHECK(laplacian_eigenvalue(d3, ModeIndex{{2, 3, 1}}) == Catch::Approx(sum).margin(1e-14));
}

TEST_CASE("norms of simple fields") {
    const auto d = BoxDomain::make(1, {1, 1, 1}, {32, 1, 1});
    const auto c = ScalarField::constant(d, -2.5);
    CHECK(norm(c, NormKind::L2) == Catch::Approx(2.5).margin(1e-13));
    CHECK(norm(c, NormKind::H2) == Catch::Approx(2.5).margin(1e-12));
    CHECK(norm(c, NormKind::Linf) == 2.5);

    const int k = 4;
    const auto f = cosine_mode(d, ModeIndex{{k, 0, 0}}, 0.7);
    const double mu = laplacian_eigenvalue(d, ModeIndex{{k, 0, 0}});
    CHECK(norm(f, NormKind::H2) ==
          Catch::Approx((1.0 + mu) * norm(f, NormKind::L2)).epsilon(1e-12));
}

TEST_CASE("norm triangle inequality") {
    std::mt19937 rng(13);
    const auto d = BoxDomain::make(1, {1, 1, 1}, {40, 1, 1});
    for (int trial = 0; trial < 50; ++trial) {
        const auto f = random_field(d, rng);
        const auto g = random_field(d, rng);
        ScalarField sum = f;
        for (std::size_t i = 0; i < sum.values.size(); ++i) sum.values[i] += g.values[i];
        for (NormKind kind : {NormKind::L2, NormKind::H2, NormKind::Linf}) {
            CHECK(norm(sum, kind) <= norm(f, kind) + norm(g, kind) + 1e-12);
        }
    }
}

TEST_CASE("norms scale with non-unit measure") {
    const auto d = BoxDomain::make(1, {2, 1, 1}, {64, 1, 1});
    const auto c = ScalarField::constant(d, 3.0);
    CHECK(norm(c, NormKind::L2) == Catch::Approx(3.0 * std::sqrt(2.0)).margin(1e-12));
    CHECK(field_mean(c) == Catch::Approx(3.0).margin(1e-13));
}

TEST_CASE("pairwise summation is reproducible") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> dist(-1, 1);
    std::vector<double> xs(10000);
    for (auto& x : xs) x = dist(rng);
    const double a = pairwise_sum(xs);
    const double b = pairwise_sum(xs);
    CHECK(a == b);
}
