#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "qdual/grid.hpp"
#include "qdual/params.hpp"

namespace qdual {

/// Orientation of the external potential: confining (+V, bounded below) or
/// scattering (-V, the sign-flipped dual partner).
enum class PotentialSign { confining, scattering };

/// External potential sampled on a grid. Bounds are computed at construction;
/// all values must be finite, which is also what makes the forward heat
/// semigroup with this potential admissible on the grid.
class Potential {
public:
    Potential(Grid1D grid, RealField values, PotentialSign sign = PotentialSign::confining)
        : grid_(std::move(grid)), v_(std::move(values)), sign_(sign) {
        if (v_.size() != grid_.n()) throw Error("Potential: field size does not match grid");
        if (!all_finite(v_)) throw NonFinite("Potential: non-finite values");
        auto [lo, hi] = std::minmax_element(v_.begin(), v_.end());
        lower_bound_ = *lo;
        upper_bound_ = *hi;
    }

    const Grid1D& grid() const { return grid_; }
    const RealField& values() const { return v_; }
    double operator[](std::size_t i) const { return v_[i]; }
    PotentialSign sign_convention() const { return sign_; }
    double lower_bound() const { return lower_bound_; }
    double upper_bound() const { return upper_bound_; }

    /// The dual partner -V with the opposite sign convention.
    Potential flipped() const {
        RealField w(v_.size());
        for (std::size_t i = 0; i < v_.size(); ++i) w[i] = -v_[i];
        return Potential(grid_, std::move(w),
                         sign_ == PotentialSign::confining ? PotentialSign::scattering
                                                           : PotentialSign::confining);
    }

private:
    Grid1D grid_;
    RealField v_;
    PotentialSign sign_;
    double lower_bound_, upper_bound_;
};

inline Potential zero_potential(const Grid1D& grid) {
    return Potential(grid, RealField(grid.n(), 0.0));
}

/// V(x) = (m w^2 / 2) (x - center)^2
inline Potential harmonic_potential(const Grid1D& grid, double mass, double omega,
                                    double center = 0.0) {
    RealField v(grid.n());
    for (std::size_t i = 0; i < grid.n(); ++i) {
        const double r = grid.x(i) - center;
        v[i] = 0.5 * mass * omega * omega * r * r;
    }
    return Potential(grid, std::move(v));
}

inline Potential inverted_harmonic_potential(const Grid1D& grid, double mass, double omega,
                                             double center = 0.0) {
    return harmonic_potential(grid, mass, omega, center).flipped();
}

/// V(x) = a4 (x - center)^4 + a2 (x - center)^2 + c0
inline Potential quartic_potential(const Grid1D& grid, double a4, double a2 = 0.0,
                                   double c0 = 0.0, double center = 0.0) {
    RealField v(grid.n());
    for (std::size_t i = 0; i < grid.n(); ++i) {
        const double r = grid.x(i) - center;
        v[i] = a4 * r * r * r * r + a2 * r * r + c0;
    }
    return Potential(grid, std::move(v));
}

/// Linear interpolation of tabulated (x, value) samples onto the grid.
/// Returns the potential and the largest interpolation jump between adjacent
/// table rows, as a crude resolution estimate.
inline std::pair<Potential, double> tabulated_potential(const Grid1D& grid,
                                                        const std::vector<double>& xs,
                                                        const std::vector<double>& vals) {
    if (xs.size() != vals.size() || xs.size() < 2)
        throw Error("tabulated_potential: need at least two (x, value) rows");
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (!(xs[i] > xs[i - 1])) throw Error("tabulated_potential: x column must increase");
    RealField v(grid.n());
    for (std::size_t i = 0; i < grid.n(); ++i) {
        const double x = grid.x(i);
        const auto it = std::upper_bound(xs.begin(), xs.end(), x);
        std::size_t hi = std::clamp<std::size_t>(static_cast<std::size_t>(it - xs.begin()),
                                                 1, xs.size() - 1);
        const std::size_t lo = hi - 1;
        const double t = (x - xs[lo]) / (xs[hi] - xs[lo]);
        v[i] = vals[lo] + std::clamp(t, 0.0, 1.0) * (vals[hi] - vals[lo]);
    }
    double max_jump = 0.0;
    for (std::size_t i = 1; i < vals.size(); ++i)
        max_jump = std::max(max_jump, std::abs(vals[i] - vals[i - 1]));
    return {Potential(grid, std::move(v)), max_jump};
}

}  // namespace qdual
