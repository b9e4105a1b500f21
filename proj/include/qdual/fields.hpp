#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <utility>
#include <vector>

#include "qdual/derivatives.hpp"
#include "qdual/grid.hpp"
#include "qdual/params.hpp"

namespace qdual {

/// Complex field psi on a grid; the state of the modular family.
struct WaveFunction {
    Grid1D grid;
    ComplexField psi;

    double norm() const { return l2_norm(grid, psi); }

    WaveFunction& normalize() {
        const double nrm = norm();
        if (!(nrm > 0.0)) throw Error("WaveFunction: cannot normalize zero field");
        for (auto& v : psi) v /= nrm;
        return *this;
    }

    RealField density() const {
        RealField rho(psi.size());
        for (std::size_t i = 0; i < psi.size(); ++i) rho[i] = std::norm(psi[i]);
        return rho;
    }
};

/// psi = (2 pi sigma^2)^(-1/4) exp(-(x-x0)^2 / (4 sigma^2) + i p0 x / hbar),
/// numerically normalized on the grid.
inline WaveFunction gaussian_packet(const Grid1D& grid, double sigma, double x0, double p0,
                                    const PhysicalParams& params) {
    ComplexField psi(grid.n());
    const double amp = std::pow(2.0 * M_PI * sigma * sigma, -0.25);
    for (std::size_t i = 0; i < grid.n(); ++i) {
        const double x = grid.x(i);
        const double g = amp * std::exp(-(x - x0) * (x - x0) / (4.0 * sigma * sigma));
        const double phase = p0 * x / params.hbar_eff();
        psi[i] = std::polar(g, phase);
    }
    WaveFunction w{grid, std::move(psi)};
    w.normalize();
    return w;
}

/// exp(i k x)/sqrt(L) with k = 2 pi mode / L, so the phase is grid-periodic.
inline WaveFunction plane_wave(const Grid1D& grid, int mode) {
    if (!grid.is_periodic()) throw Error("plane_wave: requires a periodic grid");
    ComplexField psi(grid.n());
    const double k = 2.0 * M_PI * mode / grid.length();
    const double amp = 1.0 / std::sqrt(grid.length());
    for (std::size_t i = 0; i < grid.n(); ++i) psi[i] = std::polar(amp, k * grid.x(i));
    return WaveFunction{grid, std::move(psi)};
}

namespace detail {

/// Fill entries where valid[i] == 0 with the value of the nearest valid
/// point (cyclic distance on periodic grids). Requires at least one valid
/// entry.
inline void extend_nearest(RealField& f, const std::vector<char>& valid, bool periodic) {
    const std::size_t n = f.size();
    const long big = static_cast<long>(4 * n);
    std::vector<long> dist(n);
    RealField src(n);
    long d = big;
    double v = 0.0;
    const int passes = periodic ? 2 : 1;  // second pass resolves the wrap
    for (int pass = 0; pass < passes; ++pass) {
        for (std::size_t i = 0; i < n; ++i) {
            if (valid[i]) { d = 0; v = f[i]; }
            else ++d;
            if (pass == 0) { dist[i] = d; src[i] = v; }
            else if (d < dist[i]) { dist[i] = d; src[i] = v; }
        }
    }
    d = big;
    for (int pass = 0; pass < passes; ++pass) {
        for (std::size_t ii = n; ii-- > 0;) {
            if (valid[ii]) { d = 0; v = f[ii]; }
            else ++d;
            if (d < dist[ii]) { dist[ii] = d; src[ii] = v; }
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!valid[i]) f[i] = src[i];
}

struct DeadRun {
    std::size_t start;
    std::size_t len;
    bool touches_left_edge = false;
    bool touches_right_edge = false;
};

/// Maximal runs of dead points; cyclic runs are merged on periodic grids.
inline std::vector<DeadRun> dead_runs(const std::vector<char>& live, bool periodic) {
    const std::size_t n = live.size();
    std::vector<DeadRun> runs;
    std::size_t i = 0;
    while (i < n) {
        if (live[i]) { ++i; continue; }
        std::size_t j = i;
        while (j < n && !live[j]) ++j;
        runs.push_back({i, j - i, i == 0, j == n});
        i = j;
    }
    if (periodic && runs.size() >= 2 && runs.front().touches_left_edge &&
        runs.back().touches_right_edge) {
        runs.back().len += runs.front().len;
        runs.erase(runs.begin());
    }
    return runs;
}

}  // namespace detail

/// Quantum potential Q = -(hbar_eff^2/2m) lap(sqrt rho)/sqrt rho, computed in
/// the sqrt-rho form. Where sqrt(rho) falls below eps_floor * max(sqrt rho)
/// the value is extended from the nearest resolved point and flagged.
struct QuantumPotentialField {
    RealField Q;
    std::vector<char> flagged;  // 1 where the value was extended, not computed
};

inline QuantumPotentialField quantum_potential(const RealField& rho, const Grid1D& grid,
                                               const PhysicalParams& params,
                                               double eps_floor = -1.0) {
    // The floor applies to sqrt(rho); its default is the square root of the
    // density floor so the resolved region coincides with the density mask.
    if (eps_floor <= 0.0) eps_floor = std::sqrt(params.density_floor);
    const std::size_t n = grid.n();
    RealField sq(n);
    for (std::size_t i = 0; i < n; ++i) sq[i] = std::sqrt(std::max(rho[i], 0.0));
    const double cutoff = eps_floor * *std::max_element(sq.begin(), sq.end());
    const RealField lap = laplacian(sq, grid);
    const double coeff = -params.hbar_eff() * params.hbar_eff() / (2.0 * params.m);
    QuantumPotentialField out;
    out.Q.assign(n, 0.0);
    out.flagged.assign(n, 0);
    std::vector<char> valid(n, 0);
    bool any_valid = false;
    for (std::size_t i = 0; i < n; ++i) {
        if (sq[i] >= cutoff && sq[i] > 0.0) {
            out.Q[i] = coeff * lap[i] / sq[i];
            valid[i] = 1;
            any_valid = true;
        } else {
            out.flagged[i] = 1;
        }
    }
    if (!any_valid) throw Error("quantum_potential: density is zero everywhere");
    detail::extend_nearest(out.Q, valid, grid.is_periodic());
    return out;
}

/// Osmotic velocity u = D grad(rho)/rho, extended from the nearest resolved
/// point where rho is below the floor.
inline RealField osmotic_velocity(const RealField& rho, const Grid1D& grid,
                                  const PhysicalParams& params, double eps_floor = -1.0) {
    if (eps_floor <= 0.0) eps_floor = params.density_floor;
    const std::size_t n = grid.n();
    const double cutoff = eps_floor * *std::max_element(rho.begin(), rho.end());
    const RealField drho = derivative(rho, grid);
    RealField u(n, 0.0);
    std::vector<char> valid(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (rho[i] >= cutoff && rho[i] > 0.0) {
            u[i] = params.D() * drho[i] / rho[i];
            valid[i] = 1;
        }
    }
    detail::extend_nearest(u, valid, grid.is_periodic());
    return u;
}

/// The hydrodynamic picture of a state: density, action and the derived
/// velocity and potential fields. Derived fields are functions of the (rho, s)
/// snapshot held here; treat instances as immutable values.
struct MadelungFields {
    Grid1D grid;
    RealField rho;  // probability density, integrates to 1
    RealField s;    // action field, gauged at the anchor point
    RealField v;    // current velocity (1/m) grad s
    RealField u;    // osmotic velocity D grad(rho)/rho
    RealField b;    // forward drift v + u
    RealField Q;    // quantum potential
    RealField j;    // probability current rho * v
    std::vector<char> live;     // 1 where rho >= floor * max(rho)
    std::size_t anchor = 0;     // index where the phase gauge is pinned
    bool phase_extended = false;  // phase was extended across dead tails
};

namespace detail {

inline void fill_derived(MadelungFields& f, const PhysicalParams& params) {
    const std::size_t n = f.grid.n();
    f.u = osmotic_velocity(f.rho, f.grid, params);
    f.Q = quantum_potential(f.rho, f.grid, params).Q;
    f.b.resize(n);
    f.j.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        f.b[i] = f.v[i] + f.u[i];
        f.j[i] = f.rho[i] * f.v[i];
    }
}

}  // namespace detail

/// Build Madelung fields from native (rho, s) data, as evolved by the
/// Hamilton-Jacobi solver. The current velocity comes from grad s.
inline MadelungFields madelung_from(const Grid1D& grid, RealField rho, RealField s,
                                    const PhysicalParams& params) {
    if (!all_finite(rho) || !all_finite(s))
        throw NonFinite("madelung_from: non-finite input field");
    MadelungFields f;
    f.grid = grid;
    f.rho = std::move(rho);
    f.s = std::move(s);
    const RealField ds = derivative(f.s, grid);
    f.v.resize(grid.n());
    for (std::size_t i = 0; i < grid.n(); ++i) f.v[i] = ds[i] / params.m;
    const double rmax = *std::max_element(f.rho.begin(), f.rho.end());
    f.live.assign(grid.n(), 0);
    for (std::size_t i = 0; i < grid.n(); ++i)
        f.live[i] = f.rho[i] >= params.density_floor * rmax ? 1 : 0;
    detail::fill_derived(f, params);
    return f;
}

/// Madelung decomposition psi -> (rho, s, v, u, b, Q, j).
///
/// The phase is recovered by 1D unwrapping from the leftmost grid point,
/// marching through every sample, so compose(decompose(psi)) reproduces psi
/// pointwise to roundoff. The gauge constant is pinned at the leftmost
/// resolved point (rho >= eps_floor * max rho), which carries its principal
/// argument. When the resolved support is split by more than one under-floor
/// block wider than 3 points (interior density nodes), the relative phase of
/// the islands is numerically meaningless and PhaseUndefined is raised. The
/// current velocity is evaluated gauge-free as (hbar_eff/m) Im(grad psi/psi),
/// so it is well-defined even when the unwrapped s is not grid-periodic
/// (e.g. plane waves).
inline MadelungFields decompose(const WaveFunction& w, const PhysicalParams& params,
                                double eps_floor = -1.0) {
    if (eps_floor <= 0.0) eps_floor = params.density_floor;
    if (!(eps_floor > 0.0 && eps_floor <= 1e-6))
        throw Error("decompose: eps_floor must be in (0, 1e-6]");
    if (!all_finite(w.psi)) throw NonFinite("decompose: psi has non-finite values");
    const Grid1D& grid = w.grid;
    const std::size_t n = grid.n();
    const bool periodic = grid.is_periodic();

    MadelungFields f;
    f.grid = grid;
    f.rho = w.density();
    const double rmax = *std::max_element(f.rho.begin(), f.rho.end());
    if (!(rmax > 0.0)) throw Error("decompose: psi is identically zero");

    f.live.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        f.live[i] = f.rho[i] >= eps_floor * rmax ? 1 : 0;

    const auto runs = detail::dead_runs(f.live, periodic);
    std::size_t wide_count = 0;
    for (const auto& r : runs) {
        const bool interior = periodic || (!r.touches_left_edge && !r.touches_right_edge);
        if (interior && r.len > 3) ++wide_count;
    }
    // A single wide dead arc on a periodic grid is the complement of the
    // support; two or more mean disconnected islands.
    if (wide_count >= 2 || (!periodic && wide_count >= 1))
        throw PhaseUndefined("decompose: density nodes split the support; "
                             "phase unwrapping across a node is ill-posed");
    f.phase_extended = false;
    for (const auto& r : runs)
        if (r.len > 3) f.phase_extended = true;

    RealField phi(n, 0.0);
    phi[0] = std::arg(w.psi[0]);
    for (std::size_t i = 1; i < n; ++i) {
        double d = std::arg(w.psi[i]) - std::arg(w.psi[i - 1]);
        d -= 2.0 * M_PI * std::round(d / (2.0 * M_PI));
        phi[i] = phi[i - 1] + d;
    }

    // Gauge: the leftmost resolved point carries its principal argument.
    std::size_t anchor = 0;
    while (anchor < n && !f.live[anchor]) ++anchor;
    if (anchor == n) anchor = 0;
    const double shift =
        2.0 * M_PI * std::round((phi[anchor] - std::arg(w.psi[anchor])) / (2.0 * M_PI));
    f.anchor = anchor;

    const double hbar = params.hbar_eff();
    f.s.resize(n);
    for (std::size_t i = 0; i < n; ++i) f.s[i] = hbar * (phi[i] - shift);

    // Gauge-free current velocity from the log-derivative of psi.
    const ComplexField dpsi = derivative(w.psi, grid);
    f.v.assign(n, 0.0);
    std::vector<char> valid(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (f.live[i]) {
            f.v[i] = (hbar / params.m) * std::imag(dpsi[i] / w.psi[i]);
            valid[i] = 1;
        }
    }
    detail::extend_nearest(f.v, valid, periodic);

    detail::fill_derived(f, params);
    return f;
}

/// Madelung fields of a Smoluchowski state: drift b is the physical input,
/// u = D grad(rho)/rho, v = b - u, and the action field follows the
/// time-independent relation s = -(V_script + kT ln rho)/gamma (extended from
/// the nearest resolved point where rho is below the floor, where ln rho is
/// noise). The drift must be supplied analytically; differentiating a
/// non-periodic V_script on a periodic grid would poison it.
inline MadelungFields madelung_smoluchowski(const Grid1D& grid, RealField rho, RealField b,
                                            const RealField& script_V,
                                            const PhysicalParams& params) {
    if (!all_finite(rho) || !all_finite(b))
        throw NonFinite("madelung_smoluchowski: non-finite input field");
    MadelungFields f;
    f.grid = grid;
    f.rho = std::move(rho);
    const std::size_t n = grid.n();
    const double rmax = *std::max_element(f.rho.begin(), f.rho.end());
    f.live.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        f.live[i] = f.rho[i] >= params.density_floor * rmax ? 1 : 0;

    f.s.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double lr = std::log(std::max(f.rho[i], 1e-300));
        f.s[i] = -(script_V[i] + params.kT * lr) / params.gamma;
    }
    detail::extend_nearest(f.s, f.live, grid.is_periodic());

    f.u = osmotic_velocity(f.rho, grid, params);
    f.Q = quantum_potential(f.rho, grid, params).Q;
    f.b = std::move(b);
    f.v.resize(n);
    f.j.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        f.v[i] = f.b[i] - f.u[i];
        f.j[i] = f.rho[i] * f.v[i];
    }
    return f;
}

/// Polar composition psi = sqrt(rho) exp(i s / hbar_eff), renormalized to
/// exactly unit norm. Density noise below -1e-14 is a hard error; smaller
/// negatives are clamped to zero.
inline WaveFunction compose(const MadelungFields& f, const PhysicalParams& params) {
    const std::size_t n = f.grid.n();
    RealField rho = f.rho;
    for (std::size_t i = 0; i < n; ++i) {
        if (rho[i] < -1e-14)
            throw NegativeDensity("compose: rho has negative values beyond quadrature noise");
        rho[i] = std::max(rho[i], 0.0);
    }
    const double mass = f.grid.integrate(rho);
    if (std::abs(mass - 1.0) > 1e-6)
        throw Error("compose: rho must integrate to 1 within 1e-6");
    ComplexField psi(n);
    const double hbar = params.hbar_eff();
    for (std::size_t i = 0; i < n; ++i)
        psi[i] = std::polar(std::sqrt(rho[i]), f.s[i] / hbar);
    WaveFunction w{f.grid, std::move(psi)};
    w.normalize();
    return w;
}

/// Keeps the action field of consecutive snapshots on one continuous branch.
/// decompose() pins s at the anchor's principal argument, which jumps by
/// 2 pi hbar whenever the anchor phase wraps; trajectory diagnostics (F
/// rates, <dt s>, Euclidean maps) need the branch followed in time instead.
/// align() shifts the new snapshot by the multiple of 2 pi hbar that makes
/// the density-peak value continuous with the previous snapshot; the true
/// per-step change there must stay below pi hbar, i.e. dt |dt s| << h.
class PhaseTracker {
public:
    explicit PhaseTracker(double hbar_eff) : hbar_(hbar_eff) {}

    void align(MadelungFields& f) {
        const std::size_t peak =
            std::max_element(f.rho.begin(), f.rho.end()) - f.rho.begin();
        if (primed_) {
            const double turn = 2.0 * M_PI * hbar_;
            const double k = std::round((f.s[peak] - s_prev_[peak]) / turn);
            if (k != 0.0)
                for (auto& v : f.s) v -= k * turn;
        }
        s_prev_ = f.s;
        primed_ = true;
    }

private:
    double hbar_;
    bool primed_ = false;
    RealField s_prev_;
};

/// Expectation value of a sampled observable against rho.
inline double mean(const Grid1D& grid, const RealField& rho, const RealField& f) {
    return grid.integrate_product(rho, f);
}

inline double mean_of_square(const Grid1D& grid, const RealField& rho, const RealField& f) {
    RealField sq(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) sq[i] = f[i] * f[i];
    return grid.integrate_product(rho, sq);
}

/// Real propagator pair (theta, theta_star) with rho = theta * theta_star.
struct DualPair {
    Grid1D grid;
    RealField theta;
    RealField theta_star;
    bool range_warning = false;  // max|s|/hbar exceeded the safe exponent range

    RealField rho() const {
        RealField r(theta.size());
        for (std::size_t i = 0; i < theta.size(); ++i) r[i] = theta[i] * theta_star[i];
        return r;
    }
};

}  // namespace qdual
