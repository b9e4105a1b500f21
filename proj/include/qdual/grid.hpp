#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "qdual/errors.hpp"

namespace qdual {

using RealField = std::vector<double>;
using ComplexField = std::vector<std::complex<double>>;

enum class Boundary { periodic, reflecting };

/// Uniform 1D mesh owning the quadrature rule and the point layout.
///
/// Periodic grids store n points x_i = x_min + i*dx with dx = (x_max-x_min)/n
/// (the right end is the wrap image of the left) and integrate with the
/// rectangle rule, which is spectrally accurate for periodic integrands.
/// Reflecting grids include both endpoints, dx = (x_max-x_min)/(n-1), and
/// integrate with the trapezoid rule.
class Grid1D {
public:
    static Grid1D periodic(std::size_t n, double x_min, double x_max) {
        return Grid1D(n, x_min, x_max, Boundary::periodic);
    }
    static Grid1D reflecting(std::size_t n, double x_min, double x_max) {
        return Grid1D(n, x_min, x_max, Boundary::reflecting);
    }

    /// Placeholder layout; aggregate holders overwrite it before use.
    Grid1D() : Grid1D(64, 0.0, 1.0, Boundary::periodic) {}

    Grid1D(std::size_t n, double x_min, double x_max, Boundary boundary)
        : n_(n), x_min_(x_min), x_max_(x_max), boundary_(boundary) {
        if (n < 64 || !std::has_single_bit(n))
            throw Error("Grid1D: n must be a power of two >= 64, got " + std::to_string(n));
        if (!(x_max > x_min))
            throw Error("Grid1D: require x_max > x_min");
        dx_ = (boundary == Boundary::periodic) ? (x_max - x_min) / static_cast<double>(n)
                                               : (x_max - x_min) / static_cast<double>(n - 1);
    }

    std::size_t n() const { return n_; }
    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    double length() const { return x_max_ - x_min_; }
    double dx() const { return dx_; }
    Boundary boundary() const { return boundary_; }
    bool is_periodic() const { return boundary_ == Boundary::periodic; }

    double x(std::size_t i) const { return x_min_ + static_cast<double>(i) * dx_; }

    RealField points() const {
        RealField xs(n_);
        for (std::size_t i = 0; i < n_; ++i) xs[i] = x(i);
        return xs;
    }

    /// Quadrature of a sampled field: rectangle (periodic) or trapezoid (reflecting).
    double integrate(const RealField& f) const {
        check_size(f.size());
        double acc = 0.0;
        if (is_periodic()) {
            for (double v : f) acc += v;
        } else {
            acc += 0.5 * (f.front() + f.back());
            for (std::size_t i = 1; i + 1 < n_; ++i) acc += f[i];
        }
        return acc * dx_;
    }

    /// Quadrature of f*g without forming the product field.
    double integrate_product(const RealField& f, const RealField& g) const {
        check_size(f.size());
        check_size(g.size());
        double acc = 0.0;
        if (is_periodic()) {
            for (std::size_t i = 0; i < n_; ++i) acc += f[i] * g[i];
        } else {
            acc += 0.5 * (f.front() * g.front() + f.back() * g.back());
            for (std::size_t i = 1; i + 1 < n_; ++i) acc += f[i] * g[i];
        }
        return acc * dx_;
    }

    bool same_layout(const Grid1D& other) const {
        return n_ == other.n_ && boundary_ == other.boundary_ &&
               x_min_ == other.x_min_ && x_max_ == other.x_max_;
    }

private:
    void check_size(std::size_t sz) const {
        if (sz != n_) throw Error("Grid1D: field size does not match grid");
    }

    std::size_t n_;
    double x_min_, x_max_, dx_;
    Boundary boundary_;
};

inline double l2_norm(const Grid1D& g, const ComplexField& f) {
    RealField a(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) a[i] = std::norm(f[i]);
    return std::sqrt(g.integrate(a));
}

inline double l2_norm(const Grid1D& g, const RealField& f) {
    RealField a(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) a[i] = f[i] * f[i];
    return std::sqrt(g.integrate(a));
}

inline double l2_distance(const Grid1D& g, const RealField& a, const RealField& b) {
    RealField d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(g.integrate(d));
}

inline double l2_distance(const Grid1D& g, const ComplexField& a, const ComplexField& b) {
    RealField d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = std::norm(a[i] - b[i]);
    return std::sqrt(g.integrate(d));
}

inline double l1_distance(const Grid1D& g, const RealField& a, const RealField& b) {
    RealField d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = std::abs(a[i] - b[i]);
    return g.integrate(d);
}

inline double max_abs(const RealField& f) {
    double m = 0.0;
    for (double v : f) m = std::max(m, std::abs(v));
    return m;
}

inline bool all_finite(const RealField& f) {
    for (double v : f)
        if (!std::isfinite(v)) return false;
    return true;
}

inline bool all_finite(const ComplexField& f) {
    for (const auto& v : f)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
}

}  // namespace qdual
