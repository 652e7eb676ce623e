#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <charconv>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace crnlab {

/// Pairwise (tree) summation. Deterministic evaluation order, error
/// growth O(eps log n) instead of O(eps n) for naive accumulation.
inline double pairwise_sum(std::span<const double> xs) {
    if (xs.size() <= 32) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

inline double pairwise_sum(const std::vector<double>& xs) {
    return pairwise_sum(std::span<const double>(xs));
}

/// x^n for integer n >= 0 with the convention x^0 == 1 for every x,
/// including x == 0.
inline double ipow(double x, int n) {
    double acc = 1.0;
    for (int i = 0; i < n; ++i) acc *= x;
    return acc;
}

/// Shortest representation that round-trips through from_chars.
inline std::string format_double(double v) {
    char buf[40];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

/// Largest real part over the spectrum of a (generally nonsymmetric)
/// dense matrix.
inline double spectral_abscissa(const Eigen::MatrixXd& m) {
    Eigen::EigenSolver<Eigen::MatrixXd> solver(m, /*computeEigenvectors=*/false);
    double abscissa = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        abscissa = std::max(abscissa, solver.eigenvalues()[i].real());
    }
    return abscissa;
}

/// Dense matrix exponential by scaling and squaring with a degree-13
/// Pade approximant. Species counts are small (n <= 8), so dense is fine.
inline Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& a) {
    const Eigen::Index n = a.rows();
    const double norm = a.lpNorm<1>();
    int squarings = 0;
    if (norm > 0.5) {
        squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / 0.5))));
    }
    const Eigen::MatrixXd m = a / std::ldexp(1.0, squarings);

    // Pade-13 coefficients.
    static constexpr double b[] = {
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0,  129060195264000.0,   10559470521600.0,
        670442572800.0,      33522128640.0,       1323241920.0,
        40840800.0,          960960.0,            16380.0,
        182.0,               1.0};

    const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd m2 = m * m;
    const Eigen::MatrixXd m4 = m2 * m2;
    const Eigen::MatrixXd m6 = m4 * m2;
    const Eigen::MatrixXd u =
        m * (m6 * (b[13] * m6 + b[11] * m4 + b[9] * m2) + b[7] * m6 + b[5] * m4 +
             b[3] * m2 + b[1] * ident);
    const Eigen::MatrixXd v = m6 * (b[12] * m6 + b[10] * m4 + b[8] * m2) + b[6] * m6 +
                              b[4] * m4 + b[2] * m2 + b[0] * ident;

    Eigen::MatrixXd result = (v - u).partialPivLu().solve(v + u);
    for (int i = 0; i < squarings; ++i) result = result * result;
    return result;
}

}  // namespace crnlab
