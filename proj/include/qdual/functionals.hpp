#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "qdual/fields.hpp"
#include "qdual/potential.hpp"

namespace qdual {

/// Time series row of every scalar diagnostic. Entries that do not apply to
/// the current equation family stay NaN.
struct DiagnosticsRecord {
    static constexpr double nan = std::numeric_limits<double>::quiet_NaN();

    double t = 0.0;
    double norm = nan;
    double S = nan;           // Shannon entropy
    double S_dot = nan;       // entropy rate, -<u v>/D form
    double mean_v2 = nan;
    double mean_u2 = nan;
    double mean_Q = nan;
    double H_kappa = nan;
    double K_kappa = nan;
    double H_plus = nan;
    double H_minus = nan;
    double H_cl_plus = nan;
    double H_cl_minus = nan;
    double F = nan;           // -<s>, anchor-gauged
    double Psi = nan;         // Helmholtz free energy
    double U = nan;           // internal energy <V_script>
    double H_c = nan;         // Kullback-Leibler entropy, <= 0
    double S_dot_int = nan;   // entropy production rate
    double S_dot_ext = nan;   // heat dissipation rate
    double Z = nan;           // partition normalization of rho_star
};

/// S = -int rho ln(dl rho) dx with the 0 ln 0 := 0 convention.
inline double shannon_entropy(const Grid1D& grid, const RealField& rho, double dl = 1.0) {
    if (!(dl > 0.0)) throw Error("shannon_entropy: dl must be > 0");
    RealField integrand(rho.size());
    for (std::size_t i = 0; i < rho.size(); ++i) {
        const double r = std::max(rho[i], 0.0);
        integrand[i] = r > 0.0 ? -r * std::log(std::max(dl * r, 1e-300)) : 0.0;
    }
    return grid.integrate(integrand);
}

/// The three equivalent entropy-rate evaluations plus the Smoluchowski
/// production/dissipation split. All rates are in units of 1/time.
struct EntropyRate {
    double from_uv;      // -<u v>/D
    double from_bv;      // (<v^2> - <b v>)/D
    double from_div;     // <grad v>
    double max_discrepancy;
    double S_dot_int;    // <v^2>/D  (= m gamma <v^2> / kT)
    double S_dot_ext;    // -<b v>/D
};

inline EntropyRate entropy_rate(const MadelungFields& f, const PhysicalParams& params,
                                double mismatch_tol = 1e-6) {
    const double D = params.D();
    RealField uv_f(f.v.size()), bv_f(f.v.size());
    for (std::size_t i = 0; i < f.v.size(); ++i) {
        uv_f[i] = f.u[i] * f.v[i];
        bv_f[i] = f.b[i] * f.v[i];
    }
    const double uv = mean(f.grid, f.rho, uv_f);
    const double bv = mean(f.grid, f.rho, bv_f);
    const double v2 = mean_of_square(f.grid, f.rho, f.v);
    const RealField dv = derivative(f.v, f.grid);
    const double div_v = mean(f.grid, f.rho, dv);

    EntropyRate r;
    r.from_uv = -uv / D;
    r.from_bv = (v2 - bv) / D;
    r.from_div = div_v;
    r.max_discrepancy = std::max({std::abs(r.from_uv - r.from_bv),
                                  std::abs(r.from_uv - r.from_div),
                                  std::abs(r.from_bv - r.from_div)});
    r.S_dot_int = v2 / D;
    r.S_dot_ext = -bv / D;
    if (r.max_discrepancy > mismatch_tol)
        throw FormulaMismatch("entropy_rate: the equivalent evaluations disagree by " +
                              std::to_string(r.max_discrepancy) +
                              " (boundary flux or under-resolution)");
    return r;
}

/// All Hamiltonian functionals assembled from the three shared integrals
/// T = <m v^2/2>, Vbar = <V> and Uo = <m u^2/2>. Composing them this way
/// makes the K0 = H2, H1 = K1, K2 = H0 identities exact in floating point.
struct Hamiltonians {
    double T, Vbar, Uo;
    double H_kappa, K_kappa;
    double H_plus, H_minus;        // kappa = 0 dual pair
    double H_cl_plus, H_cl_minus;  // kappa = 1 classical pair
    double value_H(double kappa) const { return T + Vbar + (1.0 - kappa) * Uo; }
    double value_K(double kappa) const { return T + Vbar - (1.0 - kappa) * Uo; }
};

inline Hamiltonians hamiltonians(const MadelungFields& f, const Potential& pot,
                                 const PhysicalParams& params) {
    Hamiltonians h;
    h.T = 0.5 * params.m * mean_of_square(f.grid, f.rho, f.v);
    h.Vbar = mean(f.grid, f.rho, pot.values());
    h.Uo = 0.5 * params.m * mean_of_square(f.grid, f.rho, f.u);
    h.H_kappa = h.value_H(params.kappa);
    h.K_kappa = h.value_K(params.kappa);
    h.H_plus = h.T + h.Vbar + h.Uo;
    h.H_minus = h.T - h.Vbar - h.Uo;
    h.H_cl_plus = h.T + h.Vbar;
    h.H_cl_minus = h.T - h.Vbar;
    return h;
}

/// H^(+/-)_kappa = int rho [ m v^2/2 +/- V +/- (1-kappa) m u^2/2 ].
inline double h_pm(const MadelungFields& f, const Potential& pot, const PhysicalParams& params,
                   double kappa, int sign) {
    const Hamiltonians h = hamiltonians(f, pot, params);
    const double s = sign >= 0 ? 1.0 : -1.0;
    return h.T + s * (h.Vbar + (1.0 - kappa) * h.Uo);
}

/// F = -<s>. Defined up to the anchor constant of the phase gauge; consumers
/// compare differences or rates, never absolute values.
inline double lyapunov_F(const MadelungFields& f) {
    return -mean(f.grid, f.rho, f.s);
}

/// Functional forms of dF/dt and d2F/dt2 under each generator of the dual
/// pair. Finite-difference cross-checks along a trajectory live with the
/// trajectory driver.
struct FRates {
    double F_dot_under_plus;    // -H^-_kappa(t)
    double F_dot_under_minus;   // -H^+_kappa(t)
    double F_ddot_under_plus;   // +2 int rho v grad(V + (1-kappa) Q) dx
    double F_ddot_under_minus;  // the sign-inverted power transfer
};

inline FRates f_rates(const MadelungFields& f, const Potential& pot,
                      const PhysicalParams& params, double kappa) {
    FRates r;
    r.F_dot_under_plus = -h_pm(f, pot, params, kappa, -1);
    r.F_dot_under_minus = -h_pm(f, pot, params, kappa, +1);
    RealField veff(f.grid.n());
    for (std::size_t i = 0; i < veff.size(); ++i)
        veff[i] = pot[i] + (1.0 - kappa) * f.Q[i];
    const RealField grad = derivative(veff, f.grid);
    RealField integrand(f.grid.n());
    for (std::size_t i = 0; i < integrand.size(); ++i)
        integrand[i] = f.rho[i] * f.v[i] * grad[i];
    const double power = f.grid.integrate(integrand);
    r.F_ddot_under_plus = 2.0 * power;
    r.F_ddot_under_minus = -2.0 * power;
    return r;
}

/// Helmholtz free energy of the random motion: Psi = U - T S_gibbs with
/// U = <V_script> and S_gibbs = k_B S (dl = 1 convention).
struct FreeEnergy {
    double Psi;
    double U;
    double TS;
};

inline FreeEnergy free_energy(const Grid1D& grid, const RealField& rho,
                              const RealField& script_V, const PhysicalParams& params) {
    FreeEnergy fe;
    fe.U = mean(grid, rho, script_V);
    fe.TS = params.kT * shannon_entropy(grid, rho, 1.0);
    fe.Psi = fe.U - fe.TS;
    return fe;
}

/// Conditional Kullback-Leibler entropy H_c = -int rho ln(rho/rho_star) dx.
/// Non-positive by concavity; approaches 0 as rho -> rho_star.
inline double kl_entropy(const Grid1D& grid, const RealField& rho, const RealField& rho_star,
                         double floor = 1e-300) {
    double stray_mass = 0.0;
    RealField integrand(rho.size(), 0.0);
    for (std::size_t i = 0; i < rho.size(); ++i) {
        const double r = std::max(rho[i], 0.0);
        if (r == 0.0) continue;
        if (rho_star[i] < floor) {  // reference support genuinely exhausted
            stray_mass += r;
            continue;
        }
        integrand[i] = -r * std::log(std::max(r, floor) / rho_star[i]);
    }
    stray_mass *= grid.dx();
    if (stray_mass > 1e-10)
        throw SupportMismatch("kl_entropy: rho carries " + std::to_string(stray_mass) +
                              " mass outside the support of rho_star");
    return grid.integrate(integrand);
}

/// Invariant density rho_star = exp(-V_script/kT)/Z with Z by quadrature.
struct StationaryDensity {
    RealField rho_star;
    double Z;
};

inline StationaryDensity stationary_density(const Grid1D& grid, const RealField& script_V,
                                            const PhysicalParams& params) {
    RealField w(grid.n());
    for (std::size_t i = 0; i < grid.n(); ++i) w[i] = std::exp(-script_V[i] / params.kT);
    const double Z = grid.integrate(w);
    if (!(Z > 0.0) || !std::isfinite(Z))
        throw NonNormalizable("stationary_density: partition integral is not finite");
    RealField rho(grid.n());
    const double wmax = *std::max_element(w.begin(), w.end());
    for (std::size_t i = 0; i < grid.n(); ++i) rho[i] = w[i] / Z;
    const auto [vlo, vhi] = std::minmax_element(script_V.begin(), script_V.end());
    const bool flat = (*vhi - *vlo) <= 1e-12 * std::max(1.0, std::abs(*vhi));
    if (!flat) {  // a flat potential means the uniform measure on the box
        const double edge = std::max(w.front(), w.back()) / wmax;
        if (edge > 1e-12)
            throw NonNormalizable("stationary_density: boundary density " +
                                  std::to_string(edge) +
                                  " of max; V_script is not confining enough for this grid");
    }
    return {std::move(rho), Z};
}

/// Max residual of b = D grad(ln rho_star) against the supplied drift
/// -grad(V_script)/(m gamma), evaluated where rho_star is at least
/// `significance` of its peak. The expected drift comes from the caller
/// (analytically or by a trusted derivative) so that a non-periodic V_script
/// never has to be differentiated on a periodic grid.
inline double stationary_drift_residual(const StationaryDensity& sd,
                                        const RealField& drift_expected, const Grid1D& grid,
                                        const PhysicalParams& params,
                                        double significance = 1e-4) {
    const RealField drho = derivative(sd.rho_star, grid);
    const double rmax = *std::max_element(sd.rho_star.begin(), sd.rho_star.end());
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.n(); ++i) {
        if (sd.rho_star[i] < significance * rmax) continue;
        const double b_from_rho = params.D() * drho[i] / sd.rho_star[i];
        worst = std::max(worst, std::abs(b_from_rho - drift_expected[i]));
    }
    return worst;
}

}  // namespace qdual
