#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "crnlab/errors.hpp"
#include "crnlab/numeric.hpp"

namespace crnlab {

/// Axis-aligned box with a cell-centered grid. Axes beyond `dim` carry one
/// cell of length 1, so all fields can be treated uniformly as 3-d arrays.
/// The default box is [0,1]^dim with measure 1.
struct BoxDomain {
    int dim = 1;
    std::array<double, 3> lengths{1.0, 1.0, 1.0};
    std::array<int, 3> cells{1, 1, 1};

    static BoxDomain make(int dim, std::array<double, 3> lengths, std::array<int, 3> cells) {
        BoxDomain d;
        if (dim < 1 || dim > 3) throw ValidationError("domain.dim", "must be 1, 2 or 3");
        d.dim = dim;
        for (int a = 0; a < 3; ++a) {
            d.lengths[static_cast<std::size_t>(a)] = a < dim ? lengths[static_cast<std::size_t>(a)] : 1.0;
            d.cells[static_cast<std::size_t>(a)] = a < dim ? cells[static_cast<std::size_t>(a)] : 1;
            if (a < dim) {
                if (!(d.lengths[static_cast<std::size_t>(a)] > 0.0))
                    throw ValidationError("domain.lengths", "must be positive");
                if (d.cells[static_cast<std::size_t>(a)] < 1)
                    throw ValidationError("domain.cells", "must be >= 1");
            }
        }
        return d;
    }

    int total_cells() const { return cells[0] * cells[1] * cells[2]; }
    double measure() const { return lengths[0] * lengths[1] * lengths[2]; }
    double spacing(int axis) const {
        return lengths[static_cast<std::size_t>(axis)] / cells[static_cast<std::size_t>(axis)];
    }
    double cell_volume() const { return spacing(0) * spacing(1) * spacing(2); }

    /// Linear index of cell (i0, i1, i2); axis 2 varies fastest.
    int linear_index(int i0, int i1, int i2) const { return (i0 * cells[1] + i1) * cells[2] + i2; }

    double center(int axis, int i) const {
        return (static_cast<double>(i) + 0.5) * spacing(axis);
    }

    bool operator==(const BoxDomain&) const = default;
};

/// Real scalar field sampled at cell centers, stored row-major with axis 2
/// fastest. Plain value type; copies are deep.
struct ScalarField {
    BoxDomain domain;
    std::vector<double> values;

    static ScalarField zero(const BoxDomain& d) {
        return ScalarField{d, std::vector<double>(static_cast<std::size_t>(d.total_cells()), 0.0)};
    }
    static ScalarField constant(const BoxDomain& d, double v) {
        return ScalarField{d, std::vector<double>(static_cast<std::size_t>(d.total_cells()), v)};
    }
};

/// Cosine-mode multi-index; the all-zero mode is the constant.
struct ModeIndex {
    std::array<int, 3> k{0, 0, 0};
};

/// Discrete Neumann Laplacian eigenvalue magnitude for one axis:
/// mu = (2/h^2)(1 - cos(pi k / N)).
inline double axis_eigenvalue(const BoxDomain& d, int axis, int k) {
    const int n = d.cells[static_cast<std::size_t>(axis)];
    if (k < 0 || k >= n) throw ValidationError("mode", "mode index out of range");
    const double h = d.spacing(axis);
    return 2.0 / (h * h) * (1.0 - std::cos(std::numbers::pi * static_cast<double>(k) / n));
}

/// mu(mode) = sum over axes of the per-axis eigenvalues; 0 for the constant
/// mode, nondecreasing in each component.
inline double laplacian_eigenvalue(const BoxDomain& d, const ModeIndex& mode) {
    double mu = 0.0;
    for (int a = 0; a < 3; ++a) mu += axis_eigenvalue(d, a, mode.k[static_cast<std::size_t>(a)]);
    return mu;
}

/// diffusion * Delta_h f with second-order centered differences and mirror
/// ghost cells (homogeneous Neumann closure). Preserves the spatial mean.
inline ScalarField laplacian_apply(const ScalarField& f, double diffusion) {
    if (diffusion < 0.0) throw ValidationError("diffusion", "must be nonnegative");
    const BoxDomain& d = f.domain;
    ScalarField out = ScalarField::zero(d);
    const std::array<int, 3> stride{d.cells[1] * d.cells[2], d.cells[2], 1};
    for (int axis = 0; axis < 3; ++axis) {
        const int n = d.cells[static_cast<std::size_t>(axis)];
        if (n < 2) continue;
        const double inv_h2 = 1.0 / (d.spacing(axis) * d.spacing(axis));
        const int st = stride[static_cast<std::size_t>(axis)];
        for (int i0 = 0; i0 < d.cells[0]; ++i0)
            for (int i1 = 0; i1 < d.cells[1]; ++i1)
                for (int i2 = 0; i2 < d.cells[2]; ++i2) {
                    const int idx = d.linear_index(i0, i1, i2);
                    const int pos = axis == 0 ? i0 : axis == 1 ? i1 : i2;
                    const double center = f.values[static_cast<std::size_t>(idx)];
                    const double lo = pos > 0 ? f.values[static_cast<std::size_t>(idx - st)] : center;
                    const double hi =
                        pos < n - 1 ? f.values[static_cast<std::size_t>(idx + st)] : center;
                    out.values[static_cast<std::size_t>(idx)] += (lo - 2.0 * center + hi) * inv_h2;
                }
    }
    for (auto& v : out.values) v *= diffusion;
    return out;
}

/// Orthogonal cosine-II transform machinery for one box. The basis is
/// orthonormal in the cell-volume weighted inner product, so coefficients
/// satisfy Parseval: sum_k c_k^2 = ||f||_2^2. Build once per domain; apply
/// many times.
class CosinePlan {
public:
    explicit CosinePlan(const BoxDomain& d) : domain_(d) {
        for (int a = 0; a < 3; ++a) {
            const int n = d.cells[static_cast<std::size_t>(a)];
            const double h = d.spacing(a);
            Eigen::MatrixXd basis(n, n);  // basis(k, j) = phi_k(x_j)
            for (int k = 0; k < n; ++k) {
                const double scale =
                    std::sqrt((k == 0 ? 1.0 : 2.0) / d.lengths[static_cast<std::size_t>(a)]);
                for (int j = 0; j < n; ++j)
                    basis(k, j) = scale * std::cos(std::numbers::pi * k * (j + 0.5) / n);
            }
            forward_[static_cast<std::size_t>(a)] = h * basis;
            inverse_[static_cast<std::size_t>(a)] = basis.transpose();
        }
        eigenvalues_.resize(static_cast<std::size_t>(d.total_cells()));
        for (int k0 = 0; k0 < d.cells[0]; ++k0)
            for (int k1 = 0; k1 < d.cells[1]; ++k1)
                for (int k2 = 0; k2 < d.cells[2]; ++k2)
                    eigenvalues_[static_cast<std::size_t>(d.linear_index(k0, k1, k2))] =
                        laplacian_eigenvalue(d, ModeIndex{{k0, k1, k2}});
    }

    const BoxDomain& domain() const { return domain_; }

    /// Laplacian eigenvalue magnitude per linear mode index.
    const std::vector<double>& eigenvalues() const { return eigenvalues_; }

    std::vector<double> forward(const ScalarField& f) const {
        check(f.domain);
        std::vector<double> coeffs = f.values;
        for (int a = 0; a < 3; ++a) apply_axis(coeffs, a, forward_[static_cast<std::size_t>(a)]);
        return coeffs;
    }

    ScalarField inverse(const std::vector<double>& coeffs) const {
        ScalarField f{domain_, coeffs};
        for (int a = 0; a < 3; ++a) apply_axis(f.values, a, inverse_[static_cast<std::size_t>(a)]);
        return f;
    }

private:
    void check(const BoxDomain& d) const {
        if (!(d == domain_)) throw ValidationError("field", "field domain differs from plan domain");
    }

    void apply_axis(std::vector<double>& data, int axis, const Eigen::MatrixXd& m) const {
        const int n = domain_.cells[static_cast<std::size_t>(axis)];
        if (n == 1) {
            const double factor = m(0, 0);
            for (auto& v : data) v *= factor;
            return;
        }
        const std::array<int, 3> stride{domain_.cells[1] * domain_.cells[2], domain_.cells[2], 1};
        const int st = stride[static_cast<std::size_t>(axis)];
        Eigen::VectorXd line(n), image(n);
        const std::array<int, 3> outer{axis == 0 ? 1 : domain_.cells[0],
                                       axis == 1 ? 1 : domain_.cells[1],
                                       axis == 2 ? 1 : domain_.cells[2]};
        for (int i0 = 0; i0 < outer[0]; ++i0)
            for (int i1 = 0; i1 < outer[1]; ++i1)
                for (int i2 = 0; i2 < outer[2]; ++i2) {
                    const int base = domain_.linear_index(i0, i1, i2);
                    for (int j = 0; j < n; ++j)
                        line[j] = data[static_cast<std::size_t>(base + j * st)];
                    image.noalias() = m * line;
                    for (int j = 0; j < n; ++j)
                        data[static_cast<std::size_t>(base + j * st)] = image[j];
                }
    }

    BoxDomain domain_;
    std::array<Eigen::MatrixXd, 3> forward_;
    std::array<Eigen::MatrixXd, 3> inverse_;
    std::vector<double> eigenvalues_;
};

/// Convenience one-shot transforms (tests, cold paths). Hot paths hold a plan.
inline std::vector<double> dct_forward(const ScalarField& f) {
    return CosinePlan(f.domain).forward(f);
}
inline ScalarField dct_inverse(const BoxDomain& d, const std::vector<double>& coeffs) {
    return CosinePlan(d).inverse(coeffs);
}

enum class NormKind { L2, H2, Linf };

/// Spatial mean (1/|Omega|) integral of f.
inline double field_mean(const ScalarField& f) {
    return pairwise_sum(f.values) * f.domain.cell_volume() / f.domain.measure();
}

inline double norm(const ScalarField& f, NormKind kind, const CosinePlan* plan = nullptr) {
    switch (kind) {
        case NormKind::L2: {
            std::vector<double> sq(f.values.size());
            for (std::size_t i = 0; i < f.values.size(); ++i) sq[i] = f.values[i] * f.values[i];
            return std::sqrt(pairwise_sum(sq) * f.domain.cell_volume());
        }
        case NormKind::Linf: {
            double m = 0.0;
            for (double v : f.values) m = std::max(m, std::abs(v));
            return m;
        }
        case NormKind::H2: {
            // Spectral H^2-equivalent norm: sqrt(sum (1 + mu_k)^2 |f_k|^2).
            if (plan == nullptr) {
                const CosinePlan local(f.domain);
                return norm(f, kind, &local);
            }
            const std::vector<double> coeffs = plan->forward(f);
            const std::vector<double>& mu = plan->eigenvalues();
            std::vector<double> terms(coeffs.size());
            for (std::size_t i = 0; i < coeffs.size(); ++i) {
                const double w = 1.0 + mu[i];
                terms[i] = w * w * coeffs[i] * coeffs[i];
            }
            return std::sqrt(pairwise_sum(terms));
        }
    }
    return 0.0;
}

/// Evaluate the cosine mode product-shape cos(pi k0 x0/L0) cos(...) ...
/// sampled at cell centers; these are exactly the (unnormalized) discrete
/// eigenfunctions of the mirror-closure Laplacian.
inline ScalarField cosine_mode(const BoxDomain& d, const ModeIndex& mode, double amplitude) {
    for (int a = 0; a < 3; ++a)
        if (mode.k[static_cast<std::size_t>(a)] < 0 ||
            mode.k[static_cast<std::size_t>(a)] >= d.cells[static_cast<std::size_t>(a)])
            throw ValidationError("mode", "mode index out of range");
    ScalarField f = ScalarField::zero(d);
    for (int i0 = 0; i0 < d.cells[0]; ++i0)
        for (int i1 = 0; i1 < d.cells[1]; ++i1)
            for (int i2 = 0; i2 < d.cells[2]; ++i2) {
                double v = amplitude;
                const std::array<int, 3> idx{i0, i1, i2};
                for (int a = 0; a < 3; ++a) {
                    const int k = mode.k[static_cast<std::size_t>(a)];
                    if (k == 0) continue;
                    const int n = d.cells[static_cast<std::size_t>(a)];
                    v *= std::cos(std::numbers::pi * k * (idx[static_cast<std::size_t>(a)] + 0.5) / n);
                }
                f.values[static_cast<std::size_t>(d.linear_index(i0, i1, i2))] = v;
            }
    return f;
}

}  // namespace crnlab
