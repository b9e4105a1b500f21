#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "qdual/fields.hpp"
#include "qdual/fft.hpp"
#include "qdual/potential.hpp"

namespace qdual {

enum class Scheme {
    split_step_spectral,
    crank_nicolson_picard,  // reserved, not implemented in v1
    upwind_drift_spectral_diffusion,
    exp_fitted_flux,
    method_of_lines_rk4,
};

/// Step size, clock and scheme of one trajectory. Steppers advance t.
struct StepControl {
    double dt = 1e-3;
    double t = 0.0;
    Scheme scheme = Scheme::split_step_spectral;
    std::string cfl_report;

    void require_dt() const {
        if (!(dt > 0.0)) throw Error("StepControl: dt must be > 0");
    }
};

namespace detail {

inline void require_periodic(const Grid1D& grid, const char* who) {
    if (!grid.is_periodic())
        throw Error(std::string(who) + ": spectral stepping requires a periodic grid");
}

/// theta <- exp(multiplier_k * dt) theta in Fourier space, real field.
inline void apply_real_fourier_multiplier(RealField& f, const Grid1D& grid,
                                          const RealField& mult) {
    auto& fft = Fft::for_size(grid.n());
    ComplexField fc(f.size()), fhat;
    for (std::size_t i = 0; i < f.size(); ++i) fc[i] = f[i];
    fft.forward(fc, fhat);
    for (std::size_t j = 0; j < fhat.size(); ++j) fhat[j] *= mult[j];
    fft.inverse(fhat, fc);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = fc[i].real();
}

}  // namespace detail

/// One Strang step of the modular equation
///   i hbar dt psi = [-(hbar^2/2m) lap + V] psi - kappa Q[|psi|] psi.
/// The potential half-steps are exact: the multiplier is a pure phase and Q
/// depends only on |psi|, which a phase leaves invariant. The norm is checked
/// after the step, never silently repaired.
inline WaveFunction step_modular(const WaveFunction& w, const Potential& pot,
                                 const PhysicalParams& params, StepControl& ctl) {
    detail::require_periodic(w.grid, "step_modular");
    ctl.require_dt();
    const Grid1D& grid = w.grid;
    const std::size_t n = grid.n();
    const double hbar = params.hbar_eff();
    const double kappa = params.kappa;

    WaveFunction out = w;

    // Q with a soft amplitude floor: dividing by max(sqrt(rho), fl) decays
    // smoothly into the tails instead of leaving a seam whose spectral
    // signature would pollute the resolved band.
    auto soft_q = [&](const RealField& rho) {
        RealField sq(n);
        for (std::size_t i = 0; i < n; ++i) sq[i] = std::sqrt(std::max(rho[i], 0.0));
        const double fl = 1e-8 * *std::max_element(sq.begin(), sq.end());
        const RealField lap = laplacian(sq, grid);
        const double coeff = -hbar * hbar / (2.0 * params.m);
        RealField q(n);
        for (std::size_t i = 0; i < n; ++i) q[i] = coeff * lap[i] / std::max(sq[i], fl);
        return q;
    };

    auto apply_potential_half = [&](WaveFunction& s) {
        RealField veff(pot.values());
        if (kappa != 0.0) {
            const RealField q = soft_q(s.density());
            for (std::size_t i = 0; i < n; ++i) veff[i] -= kappa * q[i];
        }
        const double c = -0.5 * ctl.dt / hbar;
        for (std::size_t i = 0; i < n; ++i) s.psi[i] *= std::polar(1.0, c * veff[i]);
    };

    apply_potential_half(out);

    auto& fft = Fft::for_size(n);
    ComplexField fhat;
    fft.forward(out.psi, fhat);
    const RealField k = fft_wavenumbers(grid);
    const double kc = -hbar * ctl.dt / (2.0 * params.m);
    for (std::size_t j = 0; j < n; ++j) fhat[j] *= std::polar(1.0, kc * k[j] * k[j]);
    fft.inverse(fhat, out.psi);

    apply_potential_half(out);
    ctl.t += ctl.dt;

    const double nrm = out.norm();
    if (std::abs(nrm - 1.0) > 1e-6)
        throw NormDrift("step_modular: |norm - 1| = " + std::to_string(std::abs(nrm - 1.0)) +
                        " after step (dt too large or node pathology)");
    const double tail = spectral_tail_fraction(out.psi, grid);
    if (tail > 1e-8)
        throw UnresolvedField("step_modular: spectral tail fraction " + std::to_string(tail));
    return out;
}

/// Pre-caustic state of the kappa = 1 hydrodynamic solver: the fields plus a
/// running volume-element estimate J(x, t), J(0) = 1, updated multiplicatively
/// by (1 + dt grad v) each step. For space-linear velocity fields this equals
/// the exact characteristic Jacobian; its collapse toward zero signals a
/// characteristic crossing.
struct HJState {
    MadelungFields fields;
    RealField volume;
};

inline HJState hj_init(MadelungFields f) {
    HJState st;
    st.volume.assign(f.grid.n(), 1.0);
    st.fields = std::move(f);
    return st;
}

/// One RK4 step of the kappa = 1 hydrodynamic system
///   dt rho = -div(rho v),   dt s + (grad s)^2/(2m) + sign*V = 0,
/// in (rho, s) variables. Halts with CausticDetected once the volume proxy
/// crosses ~zero, the density develops gross undershoots, or the fields stop
/// being finite; the thrown state leaves the caller with the last good step.
inline HJState step_hj_classical(const HJState& st, const Potential& pot, int potential_sign,
                                 const PhysicalParams& params, StepControl& ctl) {
    ctl.require_dt();
    const MadelungFields& f = st.fields;
    const Grid1D& grid = f.grid;
    const std::size_t n = grid.n();
    const double sgn = potential_sign >= 0 ? 1.0 : -1.0;

    {
        const double vmax = max_abs(f.v);
        if (vmax > 0.0 && ctl.dt > 0.5 * grid.dx() / vmax)
            throw CFLViolation("step_hj_classical: dt exceeds 0.5 dx / max|v|");
    }

    struct State {
        RealField rho, s;
    };
    auto rhs = [&](const State& y) -> State {
        const RealField ds = derivative(y.s, grid);
        RealField flux(n);
        for (std::size_t i = 0; i < n; ++i) flux[i] = y.rho[i] * ds[i] / params.m;
        const RealField dflux = derivative(flux, grid);
        State r;
        r.rho.resize(n);
        r.s.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            r.rho[i] = -dflux[i];
            r.s[i] = -ds[i] * ds[i] / (2.0 * params.m) - sgn * pot[i];
        }
        return r;
    };
    auto axpy = [&](const State& y, const State& k, double a) -> State {
        State r = y;
        for (std::size_t i = 0; i < n; ++i) {
            r.rho[i] += a * k.rho[i];
            r.s[i] += a * k.s[i];
        }
        return r;
    };

    const State y0{f.rho, f.s};
    const State k1 = rhs(y0);
    const State k2 = rhs(axpy(y0, k1, 0.5 * ctl.dt));
    const State k3 = rhs(axpy(y0, k2, 0.5 * ctl.dt));
    const State k4 = rhs(axpy(y0, k3, ctl.dt));
    State y1 = y0;
    for (std::size_t i = 0; i < n; ++i) {
        y1.rho[i] += ctl.dt / 6.0 * (k1.rho[i] + 2.0 * k2.rho[i] + 2.0 * k3.rho[i] + k4.rho[i]);
        y1.s[i] += ctl.dt / 6.0 * (k1.s[i] + 2.0 * k2.s[i] + 2.0 * k3.s[i] + k4.s[i]);
    }
    ctl.t += ctl.dt;

    if (!all_finite(y1.rho) || !all_finite(y1.s))
        throw CausticDetected("step_hj_classical: fields blew up at t = " + std::to_string(ctl.t));

    HJState out;
    out.fields = madelung_from(grid, std::move(y1.rho), std::move(y1.s), params);
    const RealField dv = derivative(out.fields.v, grid);
    out.volume.resize(n);
    double jmin = 1.0, rho_min = 0.0, rho_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out.volume[i] = st.volume[i] * (1.0 + ctl.dt * dv[i]);
        jmin = std::min(jmin, out.volume[i]);
        rho_min = std::min(rho_min, out.fields.rho[i]);
        rho_max = std::max(rho_max, out.fields.rho[i]);
    }
    if (jmin <= 0.05 || rho_min < -0.05 * rho_max)
        throw CausticDetected("step_hj_classical: characteristic crossing at t = " +
                              std::to_string(ctl.t) + " (min volume " + std::to_string(jmin) +
                              ")");
    return out;
}

/// One Strang step of the generalized forward heat equation
///   hbar dt theta* = [(hbar^2/2m) lap + V] theta*,
/// i.e. dt theta* = D lap theta* + (V/hbar) theta* with D = hbar/2m.
/// Positive data stays positive up to a 1e-14 relative noise clamp.
inline RealField step_heat_forward(const RealField& theta_star, const Potential& pot,
                                   const PhysicalParams& params, StepControl& ctl) {
    const Grid1D& grid = pot.grid();
    detail::require_periodic(grid, "step_heat_forward");
    ctl.require_dt();
    const std::size_t n = grid.n();
    const double hbar = params.hbar_eff();
    const double D = hbar / (2.0 * params.m);
    const double before = max_abs(theta_star);

    RealField out = theta_star;
    for (std::size_t i = 0; i < n; ++i) out[i] *= std::exp(0.5 * ctl.dt * pot[i] / hbar);
    const RealField k = fft_wavenumbers(grid);
    RealField diff(n);
    for (std::size_t j = 0; j < n; ++j) diff[j] = std::exp(-D * k[j] * k[j] * ctl.dt);
    detail::apply_real_fourier_multiplier(out, grid, diff);
    for (std::size_t i = 0; i < n; ++i) out[i] *= std::exp(0.5 * ctl.dt * pot[i] / hbar);
    ctl.t += ctl.dt;

    const double clamp = 1e-14 * max_abs(out);
    for (auto& v : out)
        if (v < 0.0 && v > -clamp) v = 0.0;

    if (max_abs(out) > 10.0 * before && before > 0.0)
        throw BlowUp("step_heat_forward: field grew more than 10x in one step "
                     "(check the sign convention of V)");
    return out;
}

/// One step of the time-adjoint (backwards) heat equation, realized as
/// forward evolution of the same generator in the reversed time variable
/// t' = T - t. ctl.t tracks t'; stepping past t' = T leaves the declared
/// horizon and raises HorizonExceeded.
inline RealField step_heat_backward(const RealField& theta, const Potential& pot,
                                    const PhysicalParams& params, StepControl& ctl,
                                    double horizon) {
    if (ctl.t + ctl.dt > horizon * (1.0 + 1e-12) + 1e-15)
        throw HorizonExceeded("step_heat_backward: step past t' = T = " +
                              std::to_string(horizon));
    return step_heat_forward(theta, pot, params, ctl);
}

enum class FokkerPlanckScheme {
    /// Exponentially fitted conservative flux (Bernoulli weights) advanced
    /// with Heun's method. Positivity-preserving under the CFL bound and
    /// holds the discrete Boltzmann density stationary; the default.
    exp_fitted_flux,
    /// The operator-split alternative: exact Fourier diffusion multiplier
    /// plus first-order conservative upwind drift.
    upwind_drift_spectral_diffusion,
};

namespace detail {

inline double bernoulli(double z) {
    if (std::abs(z) < 1e-5) return 1.0 - 0.5 * z + z * z / 12.0;
    return z / std::expm1(z);
}

/// Scharfetter-Gummel right-hand side: -div F with
/// F_{i+1/2} = (D/dx) [B(-v) rho_i - B(v) rho_{i+1}], v = b_face dx / D.
inline RealField sg_rhs(const RealField& rho, const RealField& b, const Grid1D& grid,
                        double D) {
    const std::size_t n = grid.n();
    const double dx = grid.dx();
    RealField flux(n);  // flux[i] = F_{i+1/2}
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ip = (i + 1) % n;
        const double v = 0.5 * (b[i] + b[ip]) * dx / D;
        flux[i] = (D / dx) * (bernoulli(-v) * rho[i] - bernoulli(v) * rho[ip]);
    }
    RealField r(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t im = (i + n - 1) % n;
        r[i] = -(flux[i] - flux[im]) / dx;
    }
    return r;
}

inline void upwind_drift_half(RealField& rho, const RealField& b, const Grid1D& grid,
                              double dt_half) {
    const std::size_t n = grid.n();
    const double dx = grid.dx();
    RealField flux(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ip = (i + 1) % n;
        const double bf = 0.5 * (b[i] + b[ip]);
        flux[i] = bf >= 0.0 ? bf * rho[i] : bf * rho[ip];
    }
    RealField next(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t im = (i + n - 1) % n;
        next[i] = rho[i] - dt_half / dx * (flux[i] - flux[im]);
    }
    rho = std::move(next);
}

}  // namespace detail

/// One step of the Fokker-Planck equation dt rho = D lap rho - div(b rho).
/// Mass-conservative and positivity-preserving under the reported CFL bounds.
inline RealField step_fokker_planck(const RealField& rho, const RealField& b,
                                    const Grid1D& grid, const PhysicalParams& params,
                                    StepControl& ctl,
                                    FokkerPlanckScheme scheme = FokkerPlanckScheme::exp_fitted_flux) {
    detail::require_periodic(grid, "step_fokker_planck");
    ctl.require_dt();
    const std::size_t n = grid.n();
    const double dx = grid.dx();
    const double D = params.D();
    const double bmax = max_abs(b);

    if (bmax > 0.0 && ctl.dt > 0.5 * dx / bmax)
        throw CFLViolation("step_fokker_planck: dt > 0.5 dx / max|b|");

    RealField out;
    if (scheme == FokkerPlanckScheme::exp_fitted_flux) {
        const double dt_diff = 0.45 * dx * dx / D;
        ctl.cfl_report = "dt <= min(" + std::to_string(0.5 * dx / std::max(bmax, 1e-300)) +
                         ", " + std::to_string(dt_diff) + ")";
        if (ctl.dt > dt_diff)
            throw CFLViolation("step_fokker_planck: dt exceeds the explicit diffusion bound " +
                               std::to_string(dt_diff));
        // Heun: convex combination of Euler maps, so positivity and the
        // discrete stationary state survive.
        const RealField r1 = detail::sg_rhs(rho, b, grid, D);
        RealField mid(n);
        for (std::size_t i = 0; i < n; ++i) mid[i] = rho[i] + ctl.dt * r1[i];
        const RealField r2 = detail::sg_rhs(mid, b, grid, D);
        out.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            out[i] = rho[i] + 0.5 * ctl.dt * (r1[i] + r2[i]);
    } else if (scheme == FokkerPlanckScheme::upwind_drift_spectral_diffusion) {
        out = rho;
        detail::upwind_drift_half(out, b, grid, 0.5 * ctl.dt);
        const RealField k = fft_wavenumbers(grid);
        RealField diff(n);
        for (std::size_t j = 0; j < n; ++j) diff[j] = std::exp(-D * k[j] * k[j] * ctl.dt);
        detail::apply_real_fourier_multiplier(out, grid, diff);
        detail::upwind_drift_half(out, b, grid, 0.5 * ctl.dt);
    } else {
        throw Error("step_fokker_planck: scheme not implemented");
    }
    ctl.t += ctl.dt;

    const double clamp = 1e-13 * max_abs(out);
    for (auto& v : out)
        if (v < 0.0 && v > -clamp) v = 0.0;
    return out;
}

/// Smoluchowski compatibility potential for a drift b = f/(m gamma):
///   V = m [ b^2/2 + D div b ].
inline Potential riccati_from_drift(const RealField& b, const Grid1D& grid,
                                    const PhysicalParams& params) {
    const RealField db = derivative(b, grid);
    RealField v(grid.n());
    const double D = params.D();
    for (std::size_t i = 0; i < grid.n(); ++i)
        v[i] = params.m * (0.5 * b[i] * b[i] + D * db[i]);
    return Potential(grid, std::move(v));
}

/// Same potential from the substitution b = -2D grad(Phi):
///   V/(2mD) = D [ (grad Phi)^2 - lap Phi ].
inline Potential riccati_from_phi(const RealField& phi, const Grid1D& grid,
                                  const PhysicalParams& params) {
    const RealField dphi = derivative(phi, grid);
    const RealField ddphi = laplacian(phi, grid);
    RealField v(grid.n());
    const double D = params.D();
    for (std::size_t i = 0; i < grid.n(); ++i)
        v[i] = 2.0 * params.m * D * D * (dphi[i] * dphi[i] - ddphi[i]);
    return Potential(grid, std::move(v));
}

}  // namespace qdual
