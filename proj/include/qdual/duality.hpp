#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "qdual/dynamics.hpp"
#include "qdual/fields.hpp"
#include "qdual/functionals.hpp"

namespace qdual {

/// Scale factor beta for x -> x/beta with its hyperbolic angle alpha,
/// beta = exp(alpha/2) by construction.
struct ScaleParams {
    double beta;
    double alpha;

    static ScaleParams from_beta(double beta) {
        if (!(beta > 0.0)) throw Error("ScaleParams: beta must be > 0");
        return {beta, 2.0 * std::log(beta)};
    }
    static ScaleParams from_alpha(double alpha) { return {std::exp(0.5 * alpha), alpha}; }
};

struct HamiltonianPair {
    double H;
    double K;
    double invariant() const { return H * H - K * K; }
};

/// Lorentz-type mixing of (H, K) with hyperbolic angle alpha:
///   H' = cosh(a) H - sinh(a) K,   K' = -sinh(a) H + cosh(a) K.
inline HamiltonianPair hyperbolic_mix(const HamiltonianPair& p, double alpha) {
    const double c = std::cosh(alpha), s = std::sinh(alpha);
    return {c * p.H - s * p.K, -s * p.H + c * p.K};
}

/// Coordinate relabeling x' = x/beta applied to (rho, s, V). The fields move
/// to a rescaled grid; values transform as rho' = beta rho, s' = s/beta^2,
/// V' = V/beta^2. No interpolation is involved, so the map is exact.
struct ScaledFields {
    Grid1D grid;
    RealField rho;
    RealField s;
    Potential pot;
};

inline ScaledFields scale_fields(const Grid1D& grid, const RealField& rho, const RealField& s,
                                 const Potential& pot, const ScaleParams& sp) {
    const double beta = sp.beta;
    Grid1D gp(grid.n(), grid.x_min() / beta, grid.x_max() / beta, grid.boundary());
    RealField rho_p(grid.n()), s_p(grid.n()), v_p(grid.n());
    for (std::size_t i = 0; i < grid.n(); ++i) {
        rho_p[i] = beta * rho[i];
        s_p[i] = s[i] / (beta * beta);
        v_p[i] = pot[i] / (beta * beta);
    }
    return {gp, std::move(rho_p), std::move(s_p), Potential(gp, std::move(v_p), pot.sign_convention())};
}

/// Result of the kappa-reduction scaling: transformed initial data, rescaled
/// potential, the time dilation t' = lambda t, and which canonical equation
/// (linear kappa = 0 or modular kappa = 2) the image obeys.
struct KappaReduced {
    WaveFunction psi;
    Potential pot;
    double time_dilation;  // lambda: t' = lambda * t
    double target_kappa;   // 0 or 2
};

/// Maps a modular problem at coupling kappa to its canonical representative:
///   0 <= kappa < 1:  lambda = sqrt(1-kappa), V -> V/(1-kappa), target 0,
///   kappa > 1:       lambda = sqrt(kappa-1), V -> V/(kappa-1), target 2,
/// with |psi'| = |psi| and s' = s/lambda at t = t' = 0. kappa = 1 is the
/// borderline case where the map degenerates.
inline KappaReduced kappa_reduce(const WaveFunction& w, const Potential& pot, double kappa,
                                 const PhysicalParams& params) {
    if (!(kappa >= 0.0)) throw Error("kappa_reduce: kappa must be >= 0");
    if (std::abs(kappa - 1.0) < 1e-12)
        throw BorderlineKappa("kappa_reduce: the scaling is undefined at kappa = 1");
    if (kappa == 0.0 || kappa == 2.0)
        return {w, pot, 1.0, kappa};  // fixed points of the map

    const bool sub = kappa < 1.0;
    const double lambda = sub ? std::sqrt(1.0 - kappa) : std::sqrt(kappa - 1.0);
    const double vscale = 1.0 / (sub ? (1.0 - kappa) : (kappa - 1.0));

    MadelungFields f = decompose(w, params);
    for (auto& si : f.s) si /= lambda;
    WaveFunction wp = compose(f, params);

    RealField v(pot.values());
    for (auto& vi : v) vi *= vscale;
    return {std::move(wp), Potential(pot.grid(), std::move(v), pot.sign_convention()), lambda,
            sub ? 0.0 : 2.0};
}

/// Inverse data map of kappa_reduce: given the evolved canonical state,
/// rebuild the modular state via |psi| = |psi'| and s = lambda s'.
inline WaveFunction kappa_pullback(const WaveFunction& w_prime, double lambda,
                                   const PhysicalParams& params) {
    MadelungFields f = decompose(w_prime, params);
    for (auto& si : f.s) si *= lambda;
    return compose(f, params);
}

/// Euclidean pair of a kappa = 2 state: theta* = |psi| exp(-s/hbar),
/// theta = |psi| exp(+s/hbar), so that theta theta* = |psi|^2 identically.
/// Below the density floor the raw phase is noise that the exponential would
/// inflate, so s is extended there from the nearest resolved point; the
/// factorization is unaffected. Along a trajectory, run the fields through a
/// PhaseTracker first so that s stays on one branch in time.
inline DualPair wick_quantum_to_heat(const MadelungFields& f, const PhysicalParams& params) {
    RealField s_eff = f.s;
    detail::extend_nearest(s_eff, f.live, f.grid.is_periodic());
    const double hbar = params.hbar_eff();
    DualPair d;
    d.grid = f.grid;
    d.theta.resize(f.grid.n());
    d.theta_star.resize(f.grid.n());
    double smax = 0.0;
    for (std::size_t i = 0; i < f.grid.n(); ++i) {
        const double a = std::sqrt(std::max(f.rho[i], 0.0));
        const double e = s_eff[i] / hbar;
        smax = std::max(smax, std::abs(e));
        d.theta[i] = a * std::exp(e);
        d.theta_star[i] = a * std::exp(-e);
    }
    d.range_warning = smax > 30.0;
    return d;
}

inline DualPair wick_quantum_to_heat(const WaveFunction& w, const PhysicalParams& params) {
    return wick_quantum_to_heat(decompose(w, params), params);
}

/// Imaginary-time transformation of a kappa = 1 state: the dual data is
/// (rho, -s) and the trajectory continues under the sign-flipped potential
/// assignment (+V confining <-> -V scattering). Applying the map twice is
/// the identity.
struct WickClassical {
    RealField rho;
    RealField s;
    int hj_sign;  // potential sign for step_hj_classical on the dual branch
};

inline WickClassical wick_classical(const RealField& rho, const RealField& s, int hj_sign) {
    WickClassical out;
    out.rho = rho;
    out.s.resize(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) out.s[i] = -s[i];
    out.hj_sign = -hj_sign;
    return out;
}

/// One time-stamped state of a linear Schroedinger trajectory.
struct Snapshot {
    double t;
    WaveFunction psi;
};

/// Dual pair trajectories produced by the analytic continuation of a linear
/// (kappa = 0) trajectory, together with the cross-check against split-step
/// semigroup evolution of theta*.
struct DualTrajectories {
    std::vector<double> times;
    std::vector<RealField> theta;
    std::vector<RealField> theta_star;
    double semigroup_deviation = 0.0;  // max relative L2 gap, eigensolve vs split-step
    bool range_warning = false;        // divergent high modes were truncated
};

namespace detail {

/// Dense self-adjoint H = -(hbar^2/2m) lap + V on the grid, with the
/// spectral Laplacian realized as a symmetric circulant block.
inline Eigen::MatrixXd hamiltonian_matrix(const Potential& pot, const PhysicalParams& params) {
    const Grid1D& grid = pot.grid();
    const std::size_t n = grid.n();
    const double hbar = params.hbar_eff();
    const RealField k = fft_wavenumbers(grid);
    ComplexField mult(n), col;
    for (std::size_t j = 0; j < n; ++j) mult[j] = hbar * hbar * k[j] * k[j] / (2.0 * params.m);
    Fft::for_size(n).inverse(mult, col);  // first column of the circulant
    Eigen::MatrixXd H(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) H(i, j) = col[(i + n - j) % n].real();
    for (std::size_t i = 0; i < n; ++i) H(i, i) += pot[i];
    return 0.5 * (H + H.transpose());  // scrub FFT roundoff asymmetry
}

}  // namespace detail

/// Analytic continuation of a linear Schroedinger trajectory into its dual
/// dissipative pair: theta*(t) = exp(-H t/hbar) theta*_0 (contractive) and
/// theta(t) = exp(+H t/hbar) theta_0, realized through the spectral
/// decomposition of H on the grid. The initial pair comes from the t = 0
/// slice, theta*_0 = sqrt(rho) exp(+s/hbar) and theta_0 = sqrt(rho)
/// exp(-s/hbar), so theta theta* = |psi|^2 there. Growing modes whose
/// amplitude would overflow on the horizon are truncated and flagged.
inline DualTrajectories wick_schrodinger_to_diffusion(const std::vector<Snapshot>& traj,
                                                      const Potential& pot,
                                                      const PhysicalParams& params,
                                                      double verify_dt = 1e-3) {
    if (traj.empty()) throw Error("wick_schrodinger_to_diffusion: empty trajectory");
    const Grid1D& grid = traj.front().psi.grid;
    const double t0 = traj.front().t;
    const double horizon = traj.back().t - t0;
    if (horizon < 0.0) throw HorizonExceeded("wick_schrodinger_to_diffusion: times not increasing");
    const double hbar = params.hbar_eff();
    const std::size_t n = grid.n();

    MadelungFields f0 = decompose(traj.front().psi, params);
    RealField s_eff = f0.s;
    detail::extend_nearest(s_eff, f0.live, grid.is_periodic());
    Eigen::VectorXd th0(n), ts0(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = std::sqrt(std::max(f0.rho[i], 0.0));
        th0(i) = a * std::exp(-s_eff[i] / hbar);
        ts0(i) = a * std::exp(+s_eff[i] / hbar);
    }

    const Eigen::MatrixXd H = detail::hamiltonian_matrix(pot, params);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H);
    if (eig.info() != Eigen::Success)
        throw Error("wick_schrodinger_to_diffusion: eigensolve failed");
    const Eigen::VectorXd& E = eig.eigenvalues();
    const Eigen::MatrixXd& Phi = eig.eigenvectors();
    if (E(0) * horizon / hbar < -700.0)
        throw HorizonExceeded("wick_schrodinger_to_diffusion: horizon overflows the ground mode");

    const Eigen::VectorXd c_th = Phi.transpose() * th0;
    const Eigen::VectorXd c_ts = Phi.transpose() * ts0;
    // Resolution floor for the growing branch: coefficients at the roundoff
    // level are not data, and exp(+E t/hbar) would promote them to garbage.
    const double th_floor = 1e-14 * th0.norm();

    DualTrajectories out;
    out.range_warning = false;
    for (const auto& snap : traj) {
        const double t = snap.t - t0;
        if (t == 0.0) {  // the anchor slice is the constructed pair itself
            out.times.push_back(snap.t);
            out.theta.emplace_back(th0.data(), th0.data() + n);
            out.theta_star.emplace_back(ts0.data(), ts0.data() + n);
            continue;
        }
        Eigen::VectorXd a_th(n), a_ts(n);
        for (std::size_t m = 0; m < n; ++m) {
            const double grow = E(m) * t / hbar;
            const bool resolved = std::abs(c_th(m)) >= th_floor;
            if (!resolved) {
                a_th(m) = 0.0;
            } else if (grow > 600.0) {
                a_th(m) = 0.0;  // genuinely divergent continuation mode
                out.range_warning = true;
            } else {
                a_th(m) = c_th(m) * std::exp(grow);
            }
            a_ts(m) = c_ts(m) * std::exp(-grow);
        }
        const Eigen::VectorXd th = Phi * a_th;
        const Eigen::VectorXd ts = Phi * a_ts;
        out.times.push_back(snap.t);
        out.theta.emplace_back(th.data(), th.data() + n);
        out.theta_star.emplace_back(ts.data(), ts.data() + n);
    }

    // Cross-check theta* against direct split-step semigroup evolution of
    // the same generator (forward heat stepper with the flipped potential).
    const Potential vdual = pot.flipped();
    RealField ts_direct(n);
    for (std::size_t i = 0; i < n; ++i) ts_direct[i] = ts0(i);
    StepControl ctl;
    ctl.scheme = Scheme::split_step_spectral;
    double t_now = 0.0;
    for (std::size_t s = 0; s < out.times.size(); ++s) {
        const double target = out.times[s] - t0;
        while (t_now < target - 1e-12) {
            ctl.dt = std::min(verify_dt, target - t_now);
            ts_direct = step_heat_forward(ts_direct, vdual, params, ctl);
            t_now += ctl.dt;
        }
        const double ref = l2_norm(grid, out.theta_star[s]);
        if (ref > 0.0) {
            const double dev = l2_distance(grid, ts_direct, out.theta_star[s]) / ref;
            out.semigroup_deviation = std::max(out.semigroup_deviation, dev);
        }
    }
    return out;
}

}  // namespace qdual
