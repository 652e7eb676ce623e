#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "crnlab/errors.hpp"
#include "crnlab/network.hpp"
#include "crnlab/numeric.hpp"

namespace crnlab {

inline constexpr double kRootTol = 1e-13;       // |g| at the accepted root
inline constexpr double kRateResidualTol = 1e-12;
inline constexpr double kClassMembershipTol = 1e-10;

/// The affine invariant set of an initial condition: conserved totals, one
/// per conservation-basis row. Totals are taken against spatial means
/// (domain measure normalized to 1).
struct StoichiometricClass {
    Eigen::MatrixXi basis;
    Eigen::VectorXd totals;
    bool degenerate = false;  // no strictly positive state in the class
};

/// A constant steady state of the reaction system together with the linear
/// growth rate of the zero-Laplacian mode (spectral abscissa of the reaction
/// Jacobian at the state).
struct Equilibrium {
    enum class Kind { Positive, Boundary };

    Eigen::VectorXd value;
    Kind kind = Kind::Positive;
    double growth_rate = 0.0;
    bool degenerate = false;  // boundary state with extra vanishing species
};

inline const char* to_string(Equilibrium::Kind kind) {
    return kind == Equilibrium::Kind::Positive ? "positive" : "boundary";
}

namespace detail {

/// For a single-pair network the class is the segment
///   { point + s * (beta - alpha) : s in (s_lo, s_hi) }
/// intersected with the open positive orthant. Infinite endpoints mean the
/// segment is unbounded in that direction.
struct ClassSegment {
    Eigen::VectorXd point;      // some solution of basis * u = totals
    Eigen::VectorXd direction;  // beta - alpha
    double s_lo = -std::numeric_limits<double>::infinity();
    double s_hi = std::numeric_limits<double>::infinity();
    bool positive_nonempty = false;
};

inline Eigen::VectorXd stoichiometric_direction(const ReactionNetwork& net) {
    const auto& pair = net.pairs().front();
    Eigen::VectorXd dir(net.species_count());
    for (int i = 0; i < net.species_count(); ++i)
        dir[i] = static_cast<double>(pair.beta[static_cast<std::size_t>(i)] -
                                     pair.alpha[static_cast<std::size_t>(i)]);
    return dir;
}

inline ClassSegment class_segment(const ReactionNetwork& net, const StoichiometricClass& cls) {
    ClassSegment seg;
    seg.direction = stoichiometric_direction(net);
    const Eigen::MatrixXd basis = cls.basis.cast<double>();
    seg.point = basis.colPivHouseholderQr().solve(cls.totals);

    // Interval of s keeping every coordinate strictly positive. Coordinates
    // with zero direction must already be positive at the particular point.
    for (int i = 0; i < seg.direction.size(); ++i) {
        const double d = seg.direction[i];
        const double p = seg.point[i];
        if (d > 0.0)
            seg.s_lo = std::max(seg.s_lo, -p / d);
        else if (d < 0.0)
            seg.s_hi = std::min(seg.s_hi, -p / d);
        else if (!(p > 0.0))
            return seg;  // positive_nonempty stays false
    }
    seg.positive_nonempty = seg.s_lo < seg.s_hi;
    return seg;
}

}  // namespace detail

/// Conserved totals of the class containing a state with the given spatial
/// means. Flags the class degenerate when it contains no strictly positive
/// point (only decided for single-pair networks).
inline StoichiometricClass class_of(const ReactionNetwork& net,
                                    std::span<const double> u0_mean) {
    if (static_cast<int>(u0_mean.size()) != net.species_count())
        throw ValidationError("u0_mean", "dimension mismatch with species count");
    for (double x : u0_mean)
        if (x < 0.0) throw ValidationError("u0_mean", "means must be nonnegative");

    StoichiometricClass cls;
    cls.basis = conservation_basis(net);
    const Eigen::Map<const Eigen::VectorXd> mean(u0_mean.data(),
                                                 static_cast<Eigen::Index>(u0_mean.size()));
    cls.totals = cls.basis.cast<double>() * mean;
    if (net.single_pair()) cls.degenerate = !detail::class_segment(net, cls).positive_nonempty;
    return cls;
}

/// A strictly positive state in the class, via the midpoint of the positive
/// segment (single-pair networks). Throws when the class is degenerate.
inline Eigen::VectorXd positive_anchor(const ReactionNetwork& net,
                                       const StoichiometricClass& cls) {
    if (!net.single_pair())
        throw ValidationError("network", "positive anchor requires a single reversible pair");
    const auto seg = detail::class_segment(net, cls);
    if (!seg.positive_nonempty)
        throw ValidationError("class", "no strictly positive state in this class");
    double s_mid;
    if (std::isfinite(seg.s_lo) && std::isfinite(seg.s_hi))
        s_mid = 0.5 * (seg.s_lo + seg.s_hi);
    else if (std::isfinite(seg.s_lo))
        s_mid = seg.s_lo + 1.0;
    else if (std::isfinite(seg.s_hi))
        s_mid = seg.s_hi - 1.0;
    else
        s_mid = 0.0;
    return seg.point + s_mid * seg.direction;
}

namespace detail {

/// g(s) = sum_i (alpha_i - beta_i) ln(u_i(s)) - ln(k_bwd / k_fwd) along
/// u(s) = anchor + s (beta - alpha). Strictly decreasing on the positive
/// segment: g'(s) = -sum (alpha_i - beta_i)^2 / u_i < 0. Its unique root is
/// the positive equilibrium.
struct EquilibriumObjective {
    const Eigen::VectorXd& anchor;
    const Eigen::VectorXd& direction;
    const ReversiblePair& pair;

    double offset() const { return std::log(pair.k_bwd / pair.k_fwd); }

    double value(double s) const {
        double g = -offset();
        for (int i = 0; i < anchor.size(); ++i) {
            const double coeff = -direction[i];  // alpha_i - beta_i
            if (coeff == 0.0) continue;
            g += coeff * std::log(anchor[i] + s * direction[i]);
        }
        return g;
    }

    double derivative(double s) const {
        double d = 0.0;
        for (int i = 0; i < anchor.size(); ++i) {
            if (direction[i] == 0.0) continue;
            const double u = anchor[i] + s * direction[i];
            d -= direction[i] * direction[i] / u;
        }
        return d;
    }
};

}  // namespace detail

/// The unique strictly positive equilibrium in the class of `anchor`,
/// located by a bracketed bisection on the monotone objective g refined with
/// Newton iterations to |g| <= 1e-13.
inline Equilibrium positive_equilibrium(const ReactionNetwork& net,
                                        const StoichiometricClass& cls,
                                        const Eigen::VectorXd& anchor) {
    if (!net.single_pair())
        throw ValidationError("network", "positive equilibrium requires a single reversible pair");
    if (anchor.size() != net.species_count())
        throw ValidationError("anchor", "dimension mismatch with species count");
    for (int i = 0; i < anchor.size(); ++i)
        if (!(anchor[i] > 0.0)) throw ValidationError("anchor", "must be strictly positive");
    const Eigen::VectorXd residual = cls.basis.cast<double>() * anchor - cls.totals;
    if (residual.lpNorm<Eigen::Infinity>() > kClassMembershipTol)
        throw ValidationError("anchor", "not in the stoichiometric class");

    const Eigen::VectorXd direction = detail::stoichiometric_direction(net);
    const detail::EquilibriumObjective g{anchor, direction, net.pairs().front()};

    // Positivity interval around s = 0 (anchor is interior).
    double s_lo = -std::numeric_limits<double>::infinity();
    double s_hi = std::numeric_limits<double>::infinity();
    for (int i = 0; i < anchor.size(); ++i) {
        if (direction[i] > 0.0)
            s_lo = std::max(s_lo, -anchor[i] / direction[i]);
        else if (direction[i] < 0.0)
            s_hi = std::min(s_hi, anchor[i] / -direction[i]);
    }

    // Bracket the sign change. g -> +inf toward s_lo and -inf toward s_hi;
    // unbounded ends are approached geometrically.
    auto toward_lo = [&](double frac) {
        return std::isfinite(s_lo) ? s_lo + frac * (std::min(s_hi, s_lo + 1.0) - s_lo)
                                   : -1.0 / frac;
    };
    auto toward_hi = [&](double frac) {
        return std::isfinite(s_hi) ? s_hi - frac * (s_hi - std::max(s_lo, s_hi - 1.0))
                                   : 1.0 / frac;
    };
    double a = 0.0, b = 0.0;
    bool have_a = false, have_b = false;
    for (double frac = 0.25; frac > 1e-300; frac *= 0.5) {
        if (!have_a) {
            a = toward_lo(frac);
            if (g.value(a) > 0.0) have_a = true;
        }
        if (!have_b) {
            b = toward_hi(frac);
            if (g.value(b) < 0.0) have_b = true;
        }
        if (have_a && have_b) break;
    }
    if (!have_a || !have_b)
        throw ValidationError("class", "no positive equilibrium root in the class segment");

    for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
        const double mid = 0.5 * (a + b);
        (g.value(mid) > 0.0 ? a : b) = mid;
    }
    double s = 0.5 * (a + b);
    for (int it = 0; it < 100 && std::abs(g.value(s)) > kRootTol; ++it) {
        const double step = g.value(s) / g.derivative(s);
        double next = s - step;
        if (!(next > a) || !(next < b)) next = 0.5 * (a + b);  // keep the bracket
        (g.value(next) > 0.0 ? a : b) = next;
        s = next;
    }
    if (std::abs(g.value(s)) > kRootTol)
        throw ValidationError("class", "equilibrium root refinement failed");

    Equilibrium eq;
    eq.value = anchor + s * direction;
    eq.kind = Equilibrium::Kind::Positive;
    const auto rate = mass_action_rate(net, std::span<const double>(eq.value.data(),
                                                                    static_cast<std::size_t>(eq.value.size())));
    double rate_inf = 0.0;
    for (double r : rate) rate_inf = std::max(rate_inf, std::abs(r));
    if (rate_inf > kRateResidualTol)
        throw ValidationError("class", "equilibrium rate residual exceeds tolerance");
    eq.growth_rate = spectral_abscissa(rate_jacobian(
        net, std::span<const double>(eq.value.data(), static_cast<std::size_t>(eq.value.size()))));
    return eq;
}

/// All accessible boundary equilibria of the class. Candidate zero sets are
/// single species from L0 n R0 and pairs from L0 x R0; each candidate pins
/// its coordinates to zero and solves the remaining class constraints.
/// Solutions are kept when nonnegative, in class, and rate-free.
inline std::vector<Equilibrium> boundary_equilibria(const ReactionNetwork& net,
                                                    const StoichiometricClass& cls) {
    if (!net.single_pair())
        throw ValidationError("network", "boundary enumeration requires a single reversible pair");
    const int n = net.species_count();
    const auto sets = index_sets(net.pairs().front());

    std::vector<std::set<int>> candidates;
    for (int i : sets.left_support)
        if (std::find(sets.right_support.begin(), sets.right_support.end(), i) !=
            sets.right_support.end())
            candidates.push_back({i});
    for (int i : sets.left_support)
        for (int j : sets.right_support)
            if (i != j) candidates.push_back({i, j});

    const Eigen::MatrixXd basis = cls.basis.cast<double>();
    std::vector<Equilibrium> found;
    for (const auto& zero_set : candidates) {
        std::vector<int> free_cols;
        for (int i = 0; i < n; ++i)
            if (zero_set.count(i) == 0) free_cols.push_back(i);
        if (free_cols.empty()) continue;

        Eigen::MatrixXd reduced(basis.rows(), static_cast<Eigen::Index>(free_cols.size()));
        for (std::size_t c = 0; c < free_cols.size(); ++c)
            reduced.col(static_cast<Eigen::Index>(c)) = basis.col(free_cols[c]);
        const Eigen::VectorXd x = reduced.colPivHouseholderQr().solve(cls.totals);
        if ((reduced * x - cls.totals).lpNorm<Eigen::Infinity>() >
            1e-9 * (1.0 + cls.totals.lpNorm<Eigen::Infinity>()))
            continue;  // candidate inconsistent with the class

        Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
        bool nonnegative = true;
        for (std::size_t c = 0; c < free_cols.size(); ++c) {
            double v = x[static_cast<Eigen::Index>(c)];
            if (std::abs(v) <= 1e-12) v = 0.0;
            if (v < 0.0) {
                nonnegative = false;
                break;
            }
            u[free_cols[c]] = v;
        }
        if (!nonnegative) continue;

        const auto rate =
            mass_action_rate(net, std::span<const double>(u.data(), static_cast<std::size_t>(n)));
        double rate_inf = 0.0;
        for (double r : rate) rate_inf = std::max(rate_inf, std::abs(r));
        if (rate_inf > kRateResidualTol) continue;
        if ((cls.basis.cast<double>() * u - cls.totals).lpNorm<Eigen::Infinity>() >
            kClassMembershipTol)
            continue;

        bool duplicate = false;
        for (const auto& other : found)
            if ((other.value - u).lpNorm<Eigen::Infinity>() <= 1e-9) duplicate = true;
        if (duplicate) continue;

        Equilibrium eq;
        eq.value = u;
        eq.kind = Equilibrium::Kind::Boundary;
        eq.growth_rate = spectral_abscissa(
            rate_jacobian(net, std::span<const double>(u.data(), static_cast<std::size_t>(n))));

        // Degenerate boundary: a species in L0 n R0 vanishes together with
        // at least one other species (the paper treats only the strict case,
        // e.g. M1 > M2 for A+2B <-> B+C).
        std::set<int> zeros;
        for (int i = 0; i < n; ++i)
            if (u[i] == 0.0) zeros.insert(i);
        bool touches_core = false;
        for (int i : sets.left_support)
            if (zeros.count(i) != 0 &&
                std::find(sets.right_support.begin(), sets.right_support.end(), i) !=
                    sets.right_support.end())
                touches_core = true;
        eq.degenerate = touches_core && zeros.size() >= 2;

        found.push_back(std::move(eq));
    }
    return found;
}

/// Zero-mode growth rate of a boundary equilibrium: the spectral abscissa of
/// the reaction Jacobian there. Equals c_inf for A+2B <-> B+C at
/// (a_inf, 0, c_inf), and the product of the c_j,inf for the generalized
/// family A_1+...+A_l+2B <-> B+C_1+...+C_r.
inline double boundary_growth_rate(const ReactionNetwork& net, const Equilibrium& eq) {
    if (eq.kind != Equilibrium::Kind::Boundary)
        throw ValidationError("equilibrium", "growth rate is defined for boundary equilibria");
    return spectral_abscissa(rate_jacobian(
        net, std::span<const double>(eq.value.data(), static_cast<std::size_t>(eq.value.size()))));
}

}  // namespace crnlab
