#pragma once

#include <cmath>
#include <random>

#include "qdual/fields.hpp"

namespace qdual::testing {

/// Normalized nodeless density: a random mixture of gaussians.
inline RealField random_smooth_density(const Grid1D& grid, std::mt19937& rng) {
    std::uniform_real_distribution<double> center(-3.0, 3.0);
    std::uniform_real_distribution<double> width(0.8, 2.0);
    std::uniform_real_distribution<double> weight(0.3, 1.0);
    RealField rho(grid.n(), 0.0);
    for (int k = 0; k < 3; ++k) {
        const double c = center(rng), s = width(rng), w = weight(rng);
        for (std::size_t i = 0; i < grid.n(); ++i) {
            const double x = grid.x(i) - c;
            rho[i] += w * std::exp(-x * x / (2.0 * s * s));
        }
    }
    const double mass = grid.integrate(rho);
    for (auto& r : rho) r /= mass;
    return rho;
}

/// Smooth grid-periodic action field built from a few Fourier modes.
inline RealField random_smooth_action(const Grid1D& grid, double hbar, std::mt19937& rng) {
    std::uniform_real_distribution<double> amp(-0.5, 0.5);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
    RealField s(grid.n(), 0.0);
    for (int m = 1; m <= 4; ++m) {
        const double a = amp(rng) * hbar, ph = phase(rng);
        for (std::size_t i = 0; i < grid.n(); ++i)
            s[i] += a * std::sin(2.0 * M_PI * m * (grid.x(i) - grid.x_min()) / grid.length() + ph);
    }
    return s;
}

inline WaveFunction random_smooth_state(const Grid1D& grid, const PhysicalParams& params,
                                        std::mt19937& rng) {
    const RealField rho = random_smooth_density(grid, rng);
    const RealField s = random_smooth_action(grid, params.hbar_eff(), rng);
    ComplexField psi(grid.n());
    for (std::size_t i = 0; i < grid.n(); ++i)
        psi[i] = std::polar(std::sqrt(rho[i]), s[i] / params.hbar_eff());
    WaveFunction w{grid, std::move(psi)};
    w.normalize();
    return w;
}

/// Closed-form free evolution of psi0 = (2 pi s0^2)^(-1/4) exp(-x^2/(4 s0^2))
/// under the linear Schroedinger equation (V = 0, kappa = 0).
inline std::complex<double> free_gaussian_point(double x, double t, double sigma0, double hbar,
                                                double m) {
    const std::complex<double> beta(1.0, hbar * t / (2.0 * m * sigma0 * sigma0));
    return std::pow(2.0 * M_PI * sigma0 * sigma0, -0.25) / std::sqrt(beta) *
           std::exp(-x * x / (4.0 * sigma0 * sigma0 * beta));
}

/// Density variance of the free gaussian: s0^2 + (hbar t / (2 m s0))^2.
inline double free_gaussian_variance(double t, double sigma0, double hbar, double m) {
    const double w = hbar * t / (2.0 * m * sigma0);
    return sigma0 * sigma0 + w * w;
}

/// Closed-form solution of the free modular equation at 0 <= kappa < 1 for
/// the same gaussian data: the time-dilated linear solution with the phase
/// contracted by lambda = sqrt(1 - kappa). The action of the linear solution
/// is written out explicitly so no unwrapping enters the oracle.
inline std::complex<double> modular_free_gaussian_point(double x, double t, double kappa,
                                                        double sigma0, double hbar, double m) {
    const double lam = std::sqrt(1.0 - kappa);
    const std::complex<double> beta(1.0, hbar * lam * t / (2.0 * m * sigma0 * sigma0));
    const std::complex<double> lin = free_gaussian_point(x, lam * t, sigma0, hbar, m);
    const double s_over_h =
        -0.5 * std::arg(beta) - x * x / (4.0 * sigma0 * sigma0) * std::imag(1.0 / beta);
    return std::abs(lin) * std::polar(1.0, lam * s_over_h);
}

/// Gauge-invariant pointwise distance: max_i |a_i - e^{i phi} b_i| with the
/// optimal global phase phi from the overlap.
inline double max_pointwise_distance_mod_phase(const Grid1D& grid, const ComplexField& a,
                                               const ComplexField& b) {
    std::complex<double> overlap = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) overlap += std::conj(b[i]) * a[i];
    const std::complex<double> phase =
        std::abs(overlap) > 0.0 ? overlap / std::abs(overlap) : 1.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a[i] - phase * b[i]));
    (void)grid;
    return worst;
}

inline double l2_distance_mod_phase(const Grid1D& grid, const ComplexField& a,
                                    const ComplexField& b) {
    std::complex<double> overlap = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) overlap += std::conj(b[i]) * a[i];
    const std::complex<double> phase =
        std::abs(overlap) > 0.0 ? overlap / std::abs(overlap) : 1.0;
    ComplexField rotated(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) rotated[i] = phase * b[i];
    return l2_distance(grid, a, rotated);
}

}  // namespace qdual::testing
