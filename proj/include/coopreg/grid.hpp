#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "coopreg/errors.hpp"
#include "coopreg/linalg.hpp"

namespace coopreg {

/// Real profile sampled on the uniform grid z_i = i/M, i = 0..M, over [0,1].
class GridFunction {
public:
    GridFunction() = default;

    explicit GridFunction(int intervals, double fill = 0.0)
        : values_(Vector::Constant(check_intervals(intervals) + 1, fill)) {}

    explicit GridFunction(Vector values) : values_(std::move(values)) {
        if (values_.size() < 2) throw InvalidArgument("GridFunction needs at least two nodes");
    }

    static GridFunction sample(int intervals, const std::function<double(double)>& f) {
        GridFunction g(intervals);
        for (int i = 0; i <= intervals; ++i) g.values_(i) = f(g.node(i));
        return g;
    }

    [[nodiscard]] int intervals() const { return static_cast<int>(values_.size()) - 1; }
    [[nodiscard]] double step() const { return 1.0 / intervals(); }
    [[nodiscard]] double node(int i) const { return static_cast<double>(i) / intervals(); }

    double& operator[](int i) { return values_(i); }
    double operator[](int i) const { return values_(i); }

    [[nodiscard]] const Vector& values() const { return values_; }
    Vector& values() { return values_; }

    /// Piecewise-linear evaluation; z is clamped to [0,1].
    [[nodiscard]] double at(double z) const {
        const int m = intervals();
        const double s = std::clamp(z, 0.0, 1.0) * m;
        const int i = std::min(static_cast<int>(std::floor(s)), m - 1);
        const double theta = s - i;
        return (1.0 - theta) * values_(i) + theta * values_(i + 1);
    }

    [[nodiscard]] GridFunction resampled(int intervals) const {
        if (intervals == this->intervals()) return *this;
        return sample(intervals, [this](double z) { return at(z); });
    }

    [[nodiscard]] bool same_grid(const GridFunction& other) const {
        return intervals() == other.intervals();
    }

    GridFunction& operator+=(const GridFunction& o) {
        require_same_grid(*this, o, "operator+=");
        values_ += o.values_;
        return *this;
    }

    friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }

    friend GridFunction operator*(double s, GridFunction a) {
        a.values_ *= s;
        return a;
    }

    friend bool operator==(const GridFunction& a, const GridFunction& b) {
        return a.values_.size() == b.values_.size() && a.values_ == b.values_;
    }

    static void require_same_grid(const GridFunction& a, const GridFunction& b,
                                  const std::string& where) {
        if (!a.same_grid(b)) {
            throw GridMismatch(where + ": grids with " + std::to_string(a.intervals()) + " and " +
                               std::to_string(b.intervals()) + " intervals");
        }
    }

private:
    static int check_intervals(int m) {
        if (m < 1) throw InvalidArgument("grid needs at least one interval");
        return m;
    }

    Vector values_;
};

/// Composite trapezoid rule over the whole grid.
inline double trapezoid(const GridFunction& f) {
    const int m = f.intervals();
    double s = 0.5 * (f[0] + f[m]);
    for (int i = 1; i < m; ++i) s += f[i];
    return s * f.step();
}

/// ∫_0^1 f g dz by the trapezoid rule on a shared grid.
inline double trapezoid_product(const GridFunction& f, const GridFunction& g) {
    GridFunction::require_same_grid(f, g, "trapezoid_product");
    const int m = f.intervals();
    double s = 0.5 * (f[0] * g[0] + f[m] * g[m]);
    for (int i = 1; i < m; ++i) s += f[i] * g[i];
    return s * f.step();
}

/// Trapezoid weights of a grid with M intervals.
inline Vector trapezoid_weights(int intervals) {
    Vector w = Vector::Constant(intervals + 1, 1.0 / intervals);
    w(0) *= 0.5;
    w(intervals) *= 0.5;
    return w;
}

/// Relative L2 distance ||a - b|| / ||b|| by the trapezoid rule.
inline double relative_l2(const GridFunction& a, const GridFunction& b) {
    GridFunction::require_same_grid(a, b, "relative_l2");
    const Vector w = trapezoid_weights(a.intervals());
    const Vector d = a.values() - b.values();
    const double num = std::sqrt(w.dot(d.cwiseProduct(d)));
    const double den = std::sqrt(w.dot(b.values().cwiseProduct(b.values())));
    return den > 0.0 ? num / den : num;
}

}  // namespace coopreg
