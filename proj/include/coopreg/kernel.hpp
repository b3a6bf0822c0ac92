#pragma once

#include <cassert>
#include <cmath>
#include <string>
#include <vector>

#include "coopreg/errors.hpp"
#include "coopreg/grid.hpp"

namespace coopreg {

/// Kernel k(z, ζ) tabulated on the lower triangle 0 <= ζ <= z <= 1 of a
/// uniform grid, k[i][j] ≈ k(z_i, ζ_j) for j <= i.
class TriangularKernel {
public:
    TriangularKernel() = default;

    explicit TriangularKernel(int intervals)
        : intervals_(intervals),
          values_(static_cast<std::size_t>(intervals + 1) * static_cast<std::size_t>(intervals + 2) / 2,
                  0.0) {
        if (intervals < 1) throw InvalidArgument("kernel grid needs at least one interval");
    }

    [[nodiscard]] int intervals() const { return intervals_; }
    [[nodiscard]] double step() const { return 1.0 / intervals_; }
    [[nodiscard]] double node(int i) const { return static_cast<double>(i) / intervals_; }

    double& operator()(int i, int j) { return values_[index(i, j)]; }
    double operator()(int i, int j) const { return values_[index(i, j)]; }

    /// k(z, z) at the grid nodes.
    [[nodiscard]] GridFunction diagonal_trace() const {
        GridFunction d(intervals_);
        for (int i = 0; i <= intervals_; ++i) d[i] = (*this)(i, i);
        return d;
    }

    /// k(1, ζ) for ζ on the grid.
    [[nodiscard]] GridFunction top_row() const {
        GridFunction r(intervals_);
        for (int j = 0; j <= intervals_; ++j) r[j] = (*this)(intervals_, j);
        return r;
    }

    /// k(z, ζ_j) for arbitrary z >= ζ_j, linear in z between rows.
    [[nodiscard]] double at_row(double z, int j) const {
        const double s = std::clamp(z, 0.0, 1.0) * intervals_;
        int i = std::min(static_cast<int>(std::floor(s)), intervals_ - 1);
        const double theta = s - i;
        assert(j <= i + 1);
        if (j > i) return (*this)(i + 1, j);
        return (1.0 - theta) * (*this)(i, j) + theta * (*this)(i + 1, j);
    }

    [[nodiscard]] double max_abs() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    friend bool operator==(const TriangularKernel& a, const TriangularKernel& b) {
        return a.intervals_ == b.intervals_ && a.values_ == b.values_;
    }

private:
    [[nodiscard]] std::size_t index(int i, int j) const {
        assert(i >= 0 && i <= intervals_ && j >= 0 && j <= i);
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(i + 1) / 2 +
               static_cast<std::size_t>(j);
    }

    int intervals_ = 0;
    std::vector<double> values_;
};

struct PointWeight {
    double weight = 0.0;    // c_k
    double location = 0.0;  // z_k ∈ (0,1)

    friend bool operator==(const PointWeight&, const PointWeight&) = default;
};

/// C[h] = ∫ c_0 h dζ + Σ c_k h(z_k) + c_b0 h(0) + c_b1 h(1). Point weights stay symbolic.
struct OutputOperator {
    GridFunction smooth_weight;
    std::vector<PointWeight> point_weights;
    double boundary0 = 0.0;
    double boundary1 = 0.0;

    void validate() const {
        for (const auto& p : point_weights) {
            if (!(p.location > 0.0 && p.location < 1.0)) {
                throw InvalidArgument("point output locations must lie strictly inside (0,1)");
            }
            if (!std::isfinite(p.weight)) throw InvalidArgument("point output weight is not finite");
        }
        if (!std::isfinite(boundary0) || !std::isfinite(boundary1) || !smooth_weight.values().allFinite()) {
            throw InvalidArgument("output operator weights must be finite");
        }
    }

    /// Applies the operator to a profile on the same grid; point samples use
    /// linear interpolation.
    [[nodiscard]] double apply(const GridFunction& h) const {
        GridFunction::require_same_grid(smooth_weight, h, "OutputOperator::apply");
        double y = trapezoid_product(smooth_weight, h) + boundary0 * h[0] + boundary1 * h[h.intervals()];
        for (const auto& p : point_weights) y += p.weight * h.at(p.location);
        return y;
    }
};

struct KernelOptions {
    double tol = 1e-10;
    int max_iter = 200;
};

/// Solves k_zz - k_ζζ = (μ_c + a(ζ)) k on 0 < ζ < z < 1 with
/// k_ζ(z,0) = q0 k(z,0) and k(z,z) = q0 - ½∫_0^z (μ_c + a).
///
/// In characteristic variables ξ = z + ζ, η = z - ζ, with G(ξ,η) = k(z,ζ) and
/// λ = μ_c + a, the problem becomes G_ξη = ¼ λ((ξ-η)/2) G and is equivalent to
///
///   G(ξ,η) = G(ξ,0) + ∫_0^η [ G_η(s,s) + ¼ ∫_s^ξ λ((τ-s)/2) G(τ,s) dτ ] ds,
///   G_η(s,s) = -¼ λ(s/2) + ¼ ∫_0^s λ((s-σ)/2) G(s,σ) dσ - q0 G(s,s),
///
/// where the line term comes from the Robin condition at ζ = 0. The equation is
/// iterated to a fixed point on the full characteristic lattice of spacing 1/M
/// (the even-parity sublattice carries the (z,ζ) grid) with trapezoid
/// quadrature. Throws NoConvergence if the sup-norm update does not drop
/// below `options.tol` within `options.max_iter` sweeps.
inline TriangularKernel solve_kernel(const GridFunction& a, double q0, double mu_c,
                                     const KernelOptions& options = {}) {
    const int m = a.intervals();
    if (m < 32) throw InvalidArgument("solve_kernel needs at least 32 grid intervals");
    if (!(options.tol > 0.0)) throw InvalidArgument("solve_kernel: tol must be positive");
    const double h = 1.0 / m;
    const int np = 2 * m;  // ξ index range 0..2M, η index range 0..M

    // λ on the half grid ζ = l h / 2, l = 0..2M.
    std::vector<double> lam(static_cast<std::size_t>(np) + 1);
    for (int l = 0; l <= np; ++l) lam[l] = mu_c + a.at(0.5 * l * h);

    // Diagonal data G(ξ_p, 0) = q0 - ½∫_0^{ξ_p/2} λ, trapezoid with step h/2.
    std::vector<double> diag(static_cast<std::size_t>(np) + 1);
    diag[0] = q0;
    for (int l = 1; l <= np; ++l) diag[l] = diag[l - 1] - 0.5 * (0.25 * h) * (lam[l - 1] + lam[l]);

    // Lattice storage, row-major in η: valid entries m_ <= p <= 2M - m_.
    const auto at = [np](int p, int eta) {
        return static_cast<std::size_t>(eta) * static_cast<std::size_t>(np + 1) + static_cast<std::size_t>(p);
    };
    const std::size_t size = static_cast<std::size_t>(m + 1) * static_cast<std::size_t>(np + 1);
    std::vector<double> g(size, 0.0), g_next(size, 0.0), inner(size, 0.0);
    for (int eta = 0; eta <= m; ++eta) {
        for (int p = eta; p <= np - eta; ++p) g[at(p, eta)] = diag[p];
    }
    std::vector<double> line(static_cast<std::size_t>(m) + 1);

    int iter = 0;
    double change = 0.0;
    for (; iter < options.max_iter; ++iter) {
        // inner(p, s) = ∫_{s}^{ξ_p} λ((τ-s)/2) G(τ, s) dτ along each η-row.
        for (int s = 0; s <= m; ++s) {
            double acc = 0.0;
            inner[at(s, s)] = 0.0;
            double prev = lam[0] * g[at(s, s)];
            for (int p = s + 1; p <= np - s; ++p) {
                const double cur = lam[p - s] * g[at(p, s)];
                acc += 0.5 * h * (prev + cur);
                inner[at(p, s)] = acc;
                prev = cur;
            }
        }
        // Line term G_η(s,s) on ζ = 0.
        for (int s = 0; s <= m; ++s) {
            double integral = 0.0;
            for (int sigma = 0; sigma <= s; ++sigma) {
                const double w = (sigma == 0 || sigma == s) ? 0.5 : 1.0;
                integral += w * lam[s - sigma] * g[at(s, sigma)];
            }
            integral *= (s == 0) ? 0.0 : h;
            line[s] = -0.25 * lam[s] + 0.25 * integral - q0 * g[at(s, s)];
        }
        // Outer integral in η.
        change = 0.0;
        for (int p = 0; p <= np; ++p) {
            const int eta_max = std::min(p, np - p);
            double acc = 0.0;
            double prev = line[0] + 0.25 * inner[at(p, 0)];
            g_next[at(p, 0)] = diag[p];
            for (int eta = 1; eta <= eta_max; ++eta) {
                const double cur = line[eta] + 0.25 * inner[at(p, eta)];
                acc += 0.5 * h * (prev + cur);
                g_next[at(p, eta)] = diag[p] + acc;
                prev = cur;
            }
            for (int eta = 0; eta <= eta_max; ++eta) {
                change = std::max(change, std::abs(g_next[at(p, eta)] - g[at(p, eta)]));
            }
        }
        g.swap(g_next);
        if (!std::isfinite(change)) break;
        if (change < options.tol) break;
    }
    if (!(change < options.tol)) {
        throw NoConvergence("kernel successive approximation stalled after " + std::to_string(iter) +
                            " sweeps (last update " + std::to_string(change) + ")");
    }

    TriangularKernel k(m);
    for (int i = 0; i <= m; ++i) {
        for (int j = 0; j <= i; ++j) k(i, j) = g[at(i + j, i - j)];
    }
    return k;
}

/// Inverse kernel from k_I(z,ζ) = k(z,ζ) + ∫_ζ^z k(z,s) k_I(s,ζ) ds, marched
/// upward in z along each column with the trapezoid rule (implicit endpoint).
inline TriangularKernel invert_kernel(const TriangularKernel& k) {
    const int m = k.intervals();
    const double h = k.step();
    TriangularKernel ki(m);
    for (int j = 0; j <= m; ++j) {
        ki(j, j) = k(j, j);
        for (int i = j + 1; i <= m; ++i) {
            double sum = 0.5 * k(i, j) * ki(j, j);
            for (int s = j + 1; s < i; ++s) sum += k(i, s) * ki(s, j);
            const double pivot = 1.0 - 0.5 * h * k(i, i);
            if (std::abs(pivot) < 1e-12) {
                throw SingularSystem("invert_kernel: vanishing pivot at z = " + std::to_string(k.node(i)));
            }
            ki(i, j) = (k(i, j) + h * sum) / pivot;
        }
    }
    return ki;
}

namespace detail {

inline GridFunction volterra_apply(const TriangularKernel& k, const GridFunction& x, double sign,
                                   const char* where) {
    if (k.intervals() != x.intervals()) {
        throw GridMismatch(std::string(where) + ": kernel has " + std::to_string(k.intervals()) +
                           " intervals, profile has " + std::to_string(x.intervals()));
    }
    const int m = k.intervals();
    const double h = k.step();
    GridFunction out(m);
    out[0] = x[0];
    for (int i = 1; i <= m; ++i) {
        double s = 0.5 * (k(i, 0) * x[0] + k(i, i) * x[i]);
        for (int j = 1; j < i; ++j) s += k(i, j) * x[j];
        out[i] = x[i] + sign * h * s;
    }
    return out;
}

}  // namespace detail

/// x̃(z) = x(z) - ∫_0^z k(z,ζ) x(ζ) dζ.
inline GridFunction apply_transform(const TriangularKernel& k, const GridFunction& x) {
    return detail::volterra_apply(k, x, -1.0, "apply_transform");
}

/// x(z) = x̃(z) + ∫_0^z k_I(z,ζ) x̃(ζ) dζ.
inline GridFunction apply_inverse_transform(const TriangularKernel& k_inv, const GridFunction& x_tilde) {
    return detail::volterra_apply(k_inv, x_tilde, +1.0, "apply_inverse_transform");
}

/// Output operator composed with the inverse transformation. The smooth part
/// becomes c̃(ζ) = c_b1 k_I(1,ζ) + c_0(ζ) + ∫_ζ^1 c_0(s) k_I(s,ζ) ds
/// + Σ c_k k_I(z_k,ζ) 1{ζ < z_k}; point and boundary weights carry over.
inline OutputOperator transform_output_weight(const OutputOperator& c, const TriangularKernel& k_inv) {
    if (c.smooth_weight.intervals() != k_inv.intervals()) {
        throw GridMismatch("transform_output_weight: output weight and kernel grids differ");
    }
    const int m = k_inv.intervals();
    const double h = k_inv.step();
    OutputOperator out = c;
    for (int j = 0; j <= m; ++j) {
        double tail = 0.0;
        if (j < m) {
            tail = 0.5 * (c.smooth_weight[j] * k_inv(j, j) + c.smooth_weight[m] * k_inv(m, j));
            for (int i = j + 1; i < m; ++i) tail += c.smooth_weight[i] * k_inv(i, j);
            tail *= h;
        }
        double points = 0.0;
        for (const auto& p : c.point_weights) {
            const double zj = k_inv.node(j);
            if (zj < p.location - 1e-14) {
                points += p.weight * k_inv.at_row(p.location, j);
            } else if (std::abs(zj - p.location) <= 1e-14) {
                points += 0.5 * p.weight * k_inv(j, j);
            }
        }
        out.smooth_weight[j] = c.boundary1 * k_inv(m, j) + c.smooth_weight[j] + tail + points;
    }
    return out;
}

}  // namespace coopreg
