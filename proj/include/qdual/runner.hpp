#pragma once

#include <cmath>
#include <deque>
#include <filesystem>
#include <iostream>
#include <limits>
#include <memory>
#include <set>

#include "qdual/config.hpp"
#include "qdual/duality.hpp"
#include "qdual/dynamics.hpp"
#include "qdual/io.hpp"
#include "qdual/version.hpp"

namespace qdual {

struct CheckResult {
    std::string name;
    double measured = 0.0;
    double tolerance = 0.0;
    bool pass = true;
    std::string detail;
};

struct RunReport {
    std::string status = "pass";  // pass | invariant_failure | aborted
    int exit_code = 0;            // 0 | 2 | 4
    std::string error;
    std::string error_kind;
    std::vector<CheckResult> checks;
    std::filesystem::path output_dir;
    std::size_t snapshots = 0;
    std::vector<std::string> warnings;

    const CheckResult* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
};

namespace detail_run {

/// Tracks the worst value seen; checks compare it against a pinned tolerance.
struct Worst {
    double value = 0.0;
    bool touched = false;
    void track(double v) {
        value = std::max(value, v);
        touched = true;
    }
};

inline RealField interp_table_onto(const Table& t, const Grid1D& g) {
    RealField f(g.n());
    for (std::size_t i = 0; i < g.n(); ++i) {
        const double x = g.x(i);
        auto it = std::upper_bound(t.x.begin(), t.x.end(), x);
        std::size_t hi = std::clamp<std::size_t>(it - t.x.begin(), 1, t.x.size() - 1);
        const std::size_t lo = hi - 1;
        const double w = std::clamp((x - t.x[lo]) / (t.x[hi] - t.x[lo]), 0.0, 1.0);
        f[i] = t.value[lo] + w * (t.value[hi] - t.value[lo]);
    }
    return f;
}

}  // namespace detail_run

/// Executes one configured trajectory: builds the grid, potential and initial
/// data, advances the selected equation family, streams diagnostics and
/// snapshots, and evaluates every enabled invariant with its pinned
/// tolerance. Stepper failures abort the run with partial outputs flushed.
class Runner {
public:
    explicit Runner(RunConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        out_dir_ = cfg_.run.output_dir;
    }

    RunReport execute() {
        std::filesystem::create_directories(out_dir_);
        write_json(out_dir_ / "meta.json", meta_json());
        diag_ = std::make_unique<DiagnosticsWriter>(out_dir_ / "diagnostics.csv");
        report_.output_dir = out_dir_;

        try {
            run_initial_duality_maps();
            switch (cfg_.equation.family) {
                case EquationFamily::modular: run_modular(); break;
                case EquationFamily::hj_classical: run_hj(); break;
                case EquationFamily::heat_forward: run_heat(false); break;
                case EquationFamily::heat_backward: run_heat(true); break;
                case EquationFamily::fokker_planck: run_fokker_planck(); break;
            }
        } catch (const Error& e) {
            report_.status = "aborted";
            report_.exit_code = 4;
            report_.error = e.kind() + ": " + e.what();
            report_.error_kind = e.kind();
        }

        finalize_checks();
        if (report_.status != "aborted") {
            const bool all_pass = std::all_of(report_.checks.begin(), report_.checks.end(),
                                              [](const CheckResult& c) { return c.pass; });
            report_.status = all_pass ? "pass" : "invariant_failure";
            report_.exit_code = all_pass ? 0 : 2;
        }

        diag_->flush();
        write_json(out_dir_ / "report.json", report_json());
        if (!cfg_.run.quiet) print_summary();
        return report_;
    }

    // Construction helpers are public so that studies can reuse them.
    Grid1D make_grid() const {
        return Grid1D(cfg_.grid.n, cfg_.grid.x_min, cfg_.grid.x_max, cfg_.grid.boundary);
    }

    Potential make_potential(const Grid1D& g) const {
        Potential pot = [&] {
            switch (cfg_.potential.kind) {
                case PotentialKind::zero: return zero_potential(g);
                case PotentialKind::harmonic:
                    return harmonic_potential(g, cfg_.physics.m, cfg_.potential.omega,
                                              cfg_.potential.center);
                case PotentialKind::inverted_harmonic:
                    return inverted_harmonic_potential(g, cfg_.physics.m, cfg_.potential.omega,
                                                       cfg_.potential.center);
                case PotentialKind::quartic:
                    return quartic_potential(g, cfg_.potential.a4, cfg_.potential.a2,
                                             cfg_.potential.c0, cfg_.potential.center);
                case PotentialKind::custom_table: {
                    const Table t = read_table_csv(cfg_.potential.path);
                    return tabulated_potential(g, t.x, t.value).first;
                }
            }
            throw Error("unreachable potential kind");
        }();
        return cfg_.potential.flip_sign ? pot.flipped() : pot;
    }

    WaveFunction make_initial_psi(const Grid1D& g) const {
        switch (cfg_.initial.kind) {
            case InitialKind::gaussian:
                return gaussian_packet(g, cfg_.initial.sigma, cfg_.initial.x0, cfg_.initial.p0,
                                       cfg_.physics);
            case InitialKind::plane_wave: return plane_wave(g, cfg_.initial.mode);
            case InitialKind::eigenstate_guess: {
                // Ground-state width of the configured harmonic well; for
                // other wells this is just the starting guess it claims to be.
                const double sigma =
                    std::sqrt(cfg_.physics.hbar / (2.0 * cfg_.physics.m * cfg_.potential.omega));
                return gaussian_packet(g, sigma, cfg_.potential.center, 0.0, cfg_.physics);
            }
            case InitialKind::custom_table: {
                RealField rho = initial_density_from_table(g);
                MadelungFields f;
                f.grid = g;
                f.rho = std::move(rho);
                f.s.assign(g.n(), 0.0);
                return compose(f, cfg_.physics);
            }
        }
        throw Error("unreachable initial kind");
    }

    RealField make_drift(const Grid1D& g) const {
        switch (cfg_.drift.kind) {
            case DriftKind::none: return RealField(g.n(), 0.0);
            case DriftKind::linear: {
                RealField b(g.n());
                for (std::size_t i = 0; i < g.n(); ++i) b[i] = -cfg_.drift.c * g.x(i);
                return b;
            }
            case DriftKind::custom_table:
                return detail_run::interp_table_onto(read_table_csv(cfg_.drift.path), g);
        }
        throw Error("unreachable drift kind");
    }

private:
    RealField initial_density_from_table(const Grid1D& g) const {
        RealField rho = detail_run::interp_table_onto(read_table_csv(cfg_.initial.path), g);
        for (auto& r : rho) r = std::max(r, 0.0);
        const double mass = g.integrate(rho);
        if (!(mass > 0.0)) throw Error("initial table density has no mass");
        for (auto& r : rho) r /= mass;
        return rho;
    }

    bool enabled(const std::string& name) const {
        return std::find(cfg_.checks.begin(), cfg_.checks.end(), name) != cfg_.checks.end();
    }

    // ---- duality maps evaluated on the initial state -----------------------

    void run_initial_duality_maps() {
        if (cfg_.duality.map == DualityMap::scale_entropy_shift) {
            const Grid1D g = make_grid();
            WaveFunction w = make_initial_psi(g);
            const MadelungFields f = decompose(w, cfg_.physics);
            const Potential pot = make_potential(g);
            const auto sc =
                scale_fields(g, f.rho, f.s, pot, ScaleParams::from_beta(cfg_.duality.beta));
            const double shift = shannon_entropy(sc.grid, sc.rho, cfg_.physics.dl) -
                                 shannon_entropy(g, f.rho, cfg_.physics.dl) +
                                 std::log(cfg_.duality.beta);
            push_check({"entropy_scale_shift", std::abs(shift), 1e-8,
                        std::abs(shift) < 1e-8,
                        "S(rho') - S(rho) + ln(beta), beta = " + fmt17(cfg_.duality.beta)});
        }
        if (cfg_.duality.map == DualityMap::hyperbolic_invariant) {
            const Grid1D g = make_grid();
            WaveFunction w = make_initial_psi(g);
            const MadelungFields f = decompose(w, cfg_.physics);
            const Potential pot = make_potential(g);
            const Hamiltonians h = hamiltonians(f, pot, cfg_.physics);
            const HamiltonianPair p{h.H_kappa, h.K_kappa};
            const auto mixed = hyperbolic_mix(p, cfg_.duality.alpha);
            const double inv_gap = std::abs(mixed.invariant() - p.invariant());
            push_check({"hyperbolic_invariant", inv_gap, 1e-12, inv_gap < 1e-12,
                        "H'^2 - K'^2 vs H^2 - K^2, alpha = " + fmt17(cfg_.duality.alpha)});

            const auto sc = scale_fields(g, f.rho, f.s, pot,
                                         ScaleParams::from_alpha(cfg_.duality.alpha));
            const MadelungFields fp = madelung_from(sc.grid, sc.rho, sc.s, cfg_.physics);
            const Hamiltonians hp = hamiltonians(fp, sc.pot, cfg_.physics);
            const double gap = std::max(std::abs(hp.H_kappa - mixed.H),
                                        std::abs(hp.K_kappa - mixed.K));
            push_check({"scaling_vs_mix", gap, 1e-8, gap < 1e-8,
                        "functionals on scaled fields vs algebraic mix"});
        }
    }

    // ---- equation families -------------------------------------------------

    void run_modular() {
        const Grid1D g = make_grid();
        const Potential pot = make_potential(g);
        const PhysicalParams& p = cfg_.physics;
        WaveFunction w = make_initial_psi(g);

        const bool compare_heat = cfg_.duality.map == DualityMap::quantum_to_heat &&
                                  cfg_.duality.compare;
        const bool compare_reduce = cfg_.duality.map == DualityMap::kappa_reduce &&
                                    cfg_.duality.compare;

        RealField theta_star_direct;
        StepControl heat_ctl;
        if (compare_heat) {
            theta_star_direct = wick_quantum_to_heat(w, p).theta_star;
            heat_ctl.dt = cfg_.time.dt;
        }

        WaveFunction reduced;
        Potential pot_reduced = pot;
        PhysicalParams p_reduced = p;
        StepControl red_ctl;
        double lambda = 1.0;
        if (compare_reduce) {
            const auto red = kappa_reduce(w, pot, p.kappa, p);
            reduced = red.psi;
            pot_reduced = red.pot;
            lambda = red.time_dilation;
            p_reduced.kappa = red.target_kappa;
            red_ctl.dt = lambda * cfg_.time.dt;
        }

        StepControl ctl;
        ctl.dt = cfg_.time.dt;
        PhaseTracker tracker(p.hbar_eff());
        const std::size_t steps = total_steps();

        double H0 = 0.0;
        bool have_H0 = false;
        record_modular(w, pot, tracker, ctl.t, H0, have_H0, compare_heat ? &theta_star_direct
                                                                         : nullptr);
        for (std::size_t k = 1; k <= steps; ++k) {
            w = step_modular(w, pot, p, ctl);
            if (compare_heat)
                theta_star_direct = step_heat_forward(theta_star_direct, pot, p, heat_ctl);
            if (compare_reduce) reduced = step_modular(reduced, pot_reduced, p_reduced, red_ctl);
            if (k % cfg_.time.output_every == 0 || k == steps) {
                record_modular(w, pot, tracker, ctl.t, H0, have_H0,
                               compare_heat ? &theta_star_direct : nullptr);
                if (compare_reduce) {
                    const WaveFunction back = kappa_pullback(reduced, lambda, p_reduced);
                    // gauge-free L2 gap
                    std::complex<double> overlap = 0.0;
                    for (std::size_t i = 0; i < g.n(); ++i)
                        overlap += std::conj(back.psi[i]) * w.psi[i];
                    const auto phase = std::abs(overlap) > 0.0 ? overlap / std::abs(overlap)
                                                               : std::complex<double>(1.0);
                    RealField d2(g.n());
                    for (std::size_t i = 0; i < g.n(); ++i)
                        d2[i] = std::norm(w.psi[i] - phase * back.psi[i]);
                    reduce_gap_.track(std::sqrt(g.integrate(d2)));
                }
            }
        }
    }

    void record_modular(const WaveFunction& w, const Potential& pot, PhaseTracker& tracker,
                        double t, double& H0, bool& have_H0, const RealField* theta_star_direct) {
        const PhysicalParams& p = cfg_.physics;
        DiagnosticsRecord r;
        r.t = t;
        r.norm = w.norm();
        norm_worst_.track(std::abs(r.norm - 1.0));

        MadelungFields f = decompose(w, p);
        tracker.align(f);

        r.S = shannon_entropy(f.grid, f.rho, p.dl);
        const EntropyRate er = entropy_rate(f, p, 1e-3);  // reported; checked below
        r.S_dot = er.from_uv;
        entropy_forms_worst_.track(er.max_discrepancy);
        r.mean_v2 = mean_of_square(f.grid, f.rho, f.v);
        r.mean_u2 = mean_of_square(f.grid, f.rho, f.u);
        r.mean_Q = mean(f.grid, f.rho, f.Q);
        mean_q_worst_.track(std::abs(r.mean_Q - 0.5 * p.m * r.mean_u2));

        const Hamiltonians h = hamiltonians(f, pot, p);
        r.H_kappa = h.H_kappa;
        r.K_kappa = h.K_kappa;
        r.H_plus = h.H_plus;
        r.H_minus = h.H_minus;
        r.H_cl_plus = h.H_cl_plus;
        r.H_cl_minus = h.H_cl_minus;
        if (!have_H0) {
            H0 = h.H_kappa;
            have_H0 = true;
        } else if (H0 != 0.0) {
            hamiltonian_worst_.track(std::abs(h.H_kappa - H0) / std::abs(H0));
        }
        mass_update(f.grid.integrate(f.rho));

        r.F = lyapunov_F(f);
        lyapunov_update(t, r.F, H0, h_pm(f, pot, p, p.kappa, -1));
        onshell_update(t, f, h.H_kappa);

        if (theta_star_direct) {
            const DualPair d = wick_quantum_to_heat(f, p);
            if (d.range_warning) warn_once("wick range: max|s|/hbar exceeded 30");
            const double ref = l2_norm(f.grid, *theta_star_direct);
            if (ref > 0.0)
                heat_gap_.track(l2_distance(f.grid, d.theta_star, *theta_star_direct) / ref);
            const RealField fact = d.rho();
            double worst = 0.0;
            for (std::size_t i = 0; i < f.grid.n(); ++i)
                worst = std::max(worst, std::abs(fact[i] - f.rho[i]));
            factorization_worst_.track(worst);
            if (snapshot_index_ % 4 == 0)
                write_dual_pair_csv(out_dir_ / ("dual_pair_" + std::to_string(snapshot_index_) +
                                                ".csv"),
                                    d);
        }

        diag_->write(r);
        write_snapshot_csv(out_dir_ / ("snapshot_" + std::to_string(snapshot_index_) + ".csv"),
                           f, &w.psi);
        ++snapshot_index_;
        report_.snapshots = snapshot_index_;
    }

    void run_hj() {
        const Grid1D g = make_grid();
        const Potential pot = make_potential(g);
        const PhysicalParams& p = cfg_.physics;

        RealField rho0, s0;
        switch (cfg_.initial.kind) {
            case InitialKind::gaussian: {
                rho0.resize(g.n());
                s0.resize(g.n());
                const double s2 = cfg_.initial.sigma * cfg_.initial.sigma;
                for (std::size_t i = 0; i < g.n(); ++i) {
                    const double x = g.x(i);
                    rho0[i] = std::exp(-(x - cfg_.initial.x0) * (x - cfg_.initial.x0) /
                                       (2.0 * s2)) /
                              (cfg_.initial.sigma * std::sqrt(2.0 * M_PI));
                    s0[i] = cfg_.initial.p0 * x;
                }
                break;
            }
            case InitialKind::custom_table:
                rho0 = initial_density_from_table(g);
                s0.assign(g.n(), 0.0);
                break;
            default:
                throw ConfigInvalid({"initial.kind: hj_classical supports gaussian or "
                                     "custom_table"});
        }

        HJState st = hj_init(madelung_from(g, std::move(rho0), std::move(s0), p));
        StepControl ctl;
        ctl.dt = cfg_.time.dt;
        const std::size_t steps = total_steps();

        double H0 = 0.0;
        bool have_H0 = false;
        record_hj(st, pot, ctl.t, H0, have_H0);
        for (std::size_t k = 1; k <= steps; ++k) {
            st = step_hj_classical(st, pot, cfg_.equation.hj_sign, p, ctl);
            if (k % cfg_.time.output_every == 0 || k == steps)
                record_hj(st, pot, ctl.t, H0, have_H0);
        }
    }

    void record_hj(const HJState& st, const Potential& pot, double t, double& H0,
                   bool& have_H0) {
        const PhysicalParams& p = cfg_.physics;
        const MadelungFields& f = st.fields;
        DiagnosticsRecord r;
        r.t = t;
        r.norm = f.grid.integrate(f.rho);
        norm_worst_.track(std::abs(r.norm - 1.0));
        mass_update(r.norm);

        r.S = shannon_entropy(f.grid, f.rho, p.dl);
        r.mean_v2 = mean_of_square(f.grid, f.rho, f.v);
        r.mean_u2 = mean_of_square(f.grid, f.rho, f.u);
        r.mean_Q = mean(f.grid, f.rho, f.Q);

        const Hamiltonians h = hamiltonians(f, pot, p);
        r.H_kappa = h.value_H(1.0);
        r.K_kappa = h.value_K(1.0);
        r.H_cl_plus = h.H_cl_plus;
        r.H_cl_minus = h.H_cl_minus;

        // The conserved generator carries the configured sign of V.
        const double H_gen = cfg_.equation.hj_sign >= 0 ? h.H_cl_plus : h.H_cl_minus;
        if (!have_H0) {
            H0 = H_gen;
            have_H0 = true;
        } else if (H0 != 0.0) {
            hamiltonian_worst_.track(std::abs(H_gen - H0) / std::abs(H0));
        }

        r.F = lyapunov_F(f);
        // The dual partner flips the sign the equation actually carries.
        const double H_dual = cfg_.equation.hj_sign >= 0 ? h.H_cl_minus : h.H_cl_plus;
        lyapunov_update(t, r.F, H0, H_dual);
        onshell_update(t, f, H_gen);

        diag_->write(r);
        write_snapshot_csv(out_dir_ / ("snapshot_" + std::to_string(snapshot_index_) + ".csv"),
                           f, nullptr);
        ++snapshot_index_;
        report_.snapshots = snapshot_index_;
    }

    void run_heat(bool backward) {
        const Grid1D g = make_grid();
        const Potential pot = make_potential(g);
        const PhysicalParams& p = cfg_.physics;

        RealField theta(g.n());
        const double s2 = cfg_.initial.sigma * cfg_.initial.sigma;
        for (std::size_t i = 0; i < g.n(); ++i) {
            const double x = g.x(i) - cfg_.initial.x0;
            theta[i] = std::exp(-x * x / (2.0 * s2));
        }
        const double nrm = l2_norm(g, theta);
        for (auto& v : theta) v /= nrm;

        StepControl ctl;
        ctl.dt = cfg_.time.dt;
        const std::size_t steps = total_steps();
        record_heat(g, theta, ctl.t);
        for (std::size_t k = 1; k <= steps; ++k) {
            theta = backward
                        ? step_heat_backward(theta, pot, p, ctl, cfg_.equation.horizon)
                        : step_heat_forward(theta, pot, p, ctl);
            if (k % cfg_.time.output_every == 0 || k == steps) record_heat(g, theta, ctl.t);
        }
    }

    void record_heat(const Grid1D& g, const RealField& theta, double t) {
        DiagnosticsRecord r;
        r.t = t;
        r.norm = l2_norm(g, theta);
        double mn = 0.0, mx = 0.0;
        for (double v : theta) {
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        positivity_worst_.track(mx > 0.0 ? std::max(0.0, -mn / mx) : 0.0);
        diag_->write(r);

        MadelungFields f;
        f.grid = g;
        f.rho.resize(g.n());
        for (std::size_t i = 0; i < g.n(); ++i) f.rho[i] = theta[i] * theta[i];
        f.s.assign(g.n(), 0.0);
        f.v.assign(g.n(), 0.0);
        f.u.assign(g.n(), 0.0);
        f.b.assign(g.n(), 0.0);
        f.Q.assign(g.n(), 0.0);
        f.j.assign(g.n(), 0.0);
        write_snapshot_csv(out_dir_ / ("snapshot_" + std::to_string(snapshot_index_) + ".csv"),
                           f, nullptr);
        ++snapshot_index_;
        report_.snapshots = snapshot_index_;
    }

    void run_fokker_planck() {
        const Grid1D g = make_grid();
        const PhysicalParams& p = cfg_.physics;
        const RealField b = make_drift(g);

        RealField rho;
        if (cfg_.initial.kind == InitialKind::custom_table) {
            rho = initial_density_from_table(g);
        } else {
            rho.resize(g.n());
            const double s2 = cfg_.initial.sigma * cfg_.initial.sigma;
            for (std::size_t i = 0; i < g.n(); ++i) {
                const double x = g.x(i) - cfg_.initial.x0;
                rho[i] = std::exp(-x * x / (2.0 * s2)) / (cfg_.initial.sigma * std::sqrt(2.0 * M_PI));
            }
            const double mass = g.integrate(rho);
            for (auto& v : rho) v /= mass;
        }

        // The Smoluchowski potential of the configured drift: available in
        // closed form for the linear kind, zero for free diffusion.
        RealField script_V(g.n(), 0.0);
        bool have_script = cfg_.drift.kind != DriftKind::custom_table;
        if (cfg_.drift.kind == DriftKind::linear)
            for (std::size_t i = 0; i < g.n(); ++i)
                script_V[i] = 0.5 * p.m * p.gamma * cfg_.drift.c * g.x(i) * g.x(i);

        StationaryDensity sd;
        bool have_stationary = false;
        if (cfg_.drift.kind == DriftKind::linear && cfg_.drift.c > 0.0) {
            sd = stationary_density(g, script_V, p);
            have_stationary = true;
        }

        const auto scheme = cfg_.equation.fp_exp_fitted
                                ? FokkerPlanckScheme::exp_fitted_flux
                                : FokkerPlanckScheme::upwind_drift_spectral_diffusion;
        StepControl ctl;
        ctl.dt = cfg_.time.dt;
        const std::size_t steps = total_steps();
        record_fp(g, rho, b, script_V, have_script, sd, have_stationary, ctl.t);
        for (std::size_t k = 1; k <= steps; ++k) {
            rho = step_fokker_planck(rho, b, g, p, ctl, scheme);
            if (k % cfg_.time.output_every == 0 || k == steps)
                record_fp(g, rho, b, script_V, have_script, sd, have_stationary, ctl.t);
        }
    }

    void record_fp(const Grid1D& g, const RealField& rho, const RealField& b,
                   const RealField& script_V, bool have_script, const StationaryDensity& sd,
                   bool have_stationary, double t) {
        const PhysicalParams& p = cfg_.physics;
        DiagnosticsRecord r;
        r.t = t;
        r.norm = g.integrate(rho);
        mass_update(r.norm);
        double mn = 0.0, mx = 0.0;
        for (double v : rho) {
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        positivity_worst_.track(mx > 0.0 ? std::max(0.0, -mn / mx) : 0.0);

        const MadelungFields f = madelung_smoluchowski(g, rho, b, script_V, p);
        r.S = shannon_entropy(g, rho, p.dl);
        const EntropyRate er = entropy_rate(f, p, 1e-3);
        r.S_dot = er.from_uv;
        entropy_forms_worst_.track(er.max_discrepancy);
        debruijn_update(er, f);
        r.S_dot_int = er.S_dot_int;
        r.S_dot_ext = er.S_dot_ext;
        r.mean_v2 = mean_of_square(g, rho, f.v);
        r.mean_u2 = mean_of_square(g, rho, f.u);
        r.mean_Q = mean(g, rho, f.Q);
        r.F = lyapunov_F(f);

        if (have_script) {
            const FreeEnergy fe = free_energy(g, rho, script_V, p);
            r.Psi = fe.Psi;
            r.U = fe.U;
            psi_update(fe.Psi);
        }
        if (have_stationary) {
            r.Z = sd.Z;
            r.H_c = kl_entropy(g, rho, sd.rho_star);
            hc_update(r.H_c);
        }

        diag_->write(r);
        write_snapshot_csv(out_dir_ / ("snapshot_" + std::to_string(snapshot_index_) + ".csv"),
                           f, nullptr);
        ++snapshot_index_;
        report_.snapshots = snapshot_index_;
    }

    // ---- check accumulators -------------------------------------------------

    void mass_update(double mass) {
        if (have_mass_) {
            const double per_step = std::abs(mass - last_mass_) /
                                    std::max<std::size_t>(cfg_.time.output_every, 1);
            continuity_worst_.track(per_step);
        }
        last_mass_ = mass;
        have_mass_ = true;
    }

    void lyapunov_update(double t, double F, double H_gen, double H_dual_now) {
        const double L = F - t * H_gen;
        if (have_lyap_) lyapunov_worst_.track(L - last_lyap_);  // any increase is a violation
        last_lyap_ = L;
        have_lyap_ = true;

        // Centered cross-check of dF/dt against -H_dual(t) one output back.
        f_hist_.push_back({t, F});
        h_dual_hist_.push_back(H_dual_now);
        if (f_hist_.size() >= 3) {
            const auto& a = f_hist_[f_hist_.size() - 3];
            const auto& c = f_hist_.back();
            const double fd = (c.second - a.second) / (c.first - a.first);
            const double expected = -h_dual_hist_[h_dual_hist_.size() - 2];
            fdot_worst_.track(std::abs(fd - expected));
        }
        if (f_hist_.size() > 3) {
            f_hist_.pop_front();
            h_dual_hist_.pop_front();
        }
    }

    void onshell_update(double t, const MadelungFields& f, double H_gen_now) {
        s_hist_.push_back({t, f.s});
        rho_hist_.push_back(f.rho);
        H_hist_.push_back(H_gen_now);
        if (s_hist_.size() >= 3) {
            const auto& a = s_hist_[s_hist_.size() - 3];
            const auto& c = s_hist_.back();
            const RealField& rho_mid = rho_hist_[rho_hist_.size() - 2];
            RealField dsdt(f.grid.n());
            for (std::size_t i = 0; i < f.grid.n(); ++i)
                dsdt[i] = (c.second[i] - a.second[i]) / (c.first - a.first);
            const double mean_dts = mean(f.grid, rho_mid, dsdt);
            onshell_worst_.track(std::abs(mean_dts + H_hist_[H_hist_.size() - 2]));
        }
        if (s_hist_.size() > 3) {
            s_hist_.pop_front();
            rho_hist_.pop_front();
            H_hist_.pop_front();
        }
    }

    void psi_update(double psi) {
        if (have_psi_) psi_increase_worst_.track(psi - last_psi_);
        last_psi_ = psi;
        have_psi_ = true;
    }

    void hc_update(double hc) {
        if (have_hc_) hc_decrease_worst_.track(last_hc_ - hc);
        hc_bound_worst_.track(hc);  // must stay <= ~0
        last_hc_ = hc;
        have_hc_ = true;
    }

    void debruijn_update(const EntropyRate& er, const MadelungFields& f) {
        if (cfg_.drift.kind != DriftKind::none) return;
        const double u2 = mean_of_square(f.grid, f.rho, f.u);
        debruijn_worst_.track(std::abs(cfg_.physics.D() * er.from_div - u2));
    }

    void warn_once(const std::string& msg) {
        if (std::find(report_.warnings.begin(), report_.warnings.end(), msg) ==
            report_.warnings.end())
            report_.warnings.push_back(msg);
    }

    std::size_t total_steps() const {
        return static_cast<std::size_t>(std::llround(cfg_.time.t_end / cfg_.time.dt));
    }

    void push_check(CheckResult c) { report_.checks.push_back(std::move(c)); }

    void finalize_checks() {
        auto add = [&](const char* name, const detail_run::Worst& w, double tol,
                       const char* detail) {
            if (!enabled(name) || !w.touched) return;
            push_check({name, w.value, tol, w.value < tol, detail});
        };
        add("norm", norm_worst_, 1e-8, "max |norm - 1| over outputs");
        add("hamiltonian", hamiltonian_worst_, 1e-6, "max relative drift of the generator");
        add("continuity", continuity_worst_, 1e-10, "max per-step mass drift");
        add("entropy_forms", entropy_forms_worst_, 1e-6,
            "max pairwise gap of the three entropy-rate forms");
        add("mean_q", mean_q_worst_, 1e-8, "max |<Q> - (m/2)<u^2>|");
        add("lyapunov", lyapunov_worst_, 1e-10, "max increase of F(t) - t H_gen");
        add("fdot_cross", fdot_worst_, 1e-5, "max |dF/dt + H_dual| (centered differences)");
        add("onshell", onshell_worst_, 1e-5, "max |<dt s> + H_gen| (centered differences)");
        add("positivity", positivity_worst_, 1e-12, "max negative fraction of the field");
        add("psi_monotone", psi_increase_worst_, 1e-10, "max increase of Psi between outputs");
        add("hc_monotone", hc_decrease_worst_, 1e-10, "max decrease of H_c between outputs");
        if (enabled("hc_monotone") && hc_bound_worst_.touched)
            push_check({"hc_nonpositive", hc_bound_worst_.value, 1e-12,
                        hc_bound_worst_.value <= 1e-12, "max H_c (must stay <= 0)"});
        add("debruijn", debruijn_worst_, 1e-6, "max |D S_dot - <u^2>| on free diffusion");
        if (cfg_.duality.map == DualityMap::quantum_to_heat && cfg_.duality.compare) {
            if (heat_gap_.touched)
                push_check({"duality_compare", heat_gap_.value, 1e-6,
                            heat_gap_.value < 1e-6,
                            "max relative L2 gap: mapped theta* vs direct semigroup"});
            if (factorization_worst_.touched)
                push_check({"factorization", factorization_worst_.value, 1e-12,
                            factorization_worst_.value < 1e-12,
                            "max |theta theta* - rho| over outputs"});
        }
        if (cfg_.duality.map == DualityMap::kappa_reduce && cfg_.duality.compare &&
            reduce_gap_.touched)
            push_check({"kappa_reduce_gap", reduce_gap_.value, 1e-5,
                        reduce_gap_.value < 1e-5,
                        "max L2 gap: direct nonlinear vs reduced linear pulled back"});
    }

    nlohmann::json meta_json() const {
        nlohmann::json j;
        j["tool"] = kToolName;
        j["version"] = kVersion;
        j["config"] = cfg_.resolved_json();
        return j;
    }

    nlohmann::json report_json() const {
        nlohmann::json j;
        j["status"] = report_.status;
        j["exit_code"] = report_.exit_code;
        if (!report_.error.empty()) j["error"] = report_.error;
        if (!report_.error_kind.empty()) j["halted"] = report_.error_kind;
        j["snapshots"] = report_.snapshots;
        j["warnings"] = report_.warnings;
        j["checks"] = nlohmann::json::array();
        for (const auto& c : report_.checks)
            j["checks"].push_back({{"name", c.name},
                                   {"measured", c.measured},
                                   {"tolerance", c.tolerance},
                                   {"pass", c.pass},
                                   {"detail", c.detail}});
        return j;
    }

    void print_summary() const {
        for (const auto& c : report_.checks)
            std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name
                      << ": measured " << fmt17(c.measured) << " (tol " << fmt17(c.tolerance)
                      << ")\n";
        std::cout << "status: " << report_.status << "\n";
    }

    RunConfig cfg_;
    std::filesystem::path out_dir_;
    std::unique_ptr<DiagnosticsWriter> diag_;
    RunReport report_;
    std::size_t snapshot_index_ = 0;

    detail_run::Worst norm_worst_, hamiltonian_worst_, continuity_worst_, entropy_forms_worst_,
        mean_q_worst_, lyapunov_worst_, fdot_worst_, onshell_worst_, positivity_worst_,
        psi_increase_worst_, hc_decrease_worst_, hc_bound_worst_, debruijn_worst_, heat_gap_,
        factorization_worst_, reduce_gap_;

    bool have_mass_ = false, have_lyap_ = false, have_psi_ = false, have_hc_ = false;
    double last_mass_ = 0.0, last_lyap_ = 0.0, last_psi_ = 0.0, last_hc_ = 0.0;
    std::deque<std::pair<double, double>> f_hist_;
    std::deque<double> h_dual_hist_;
    std::deque<std::pair<double, RealField>> s_hist_;
    std::deque<RealField> rho_hist_;
    std::deque<double> H_hist_;
};

inline RunReport run(const RunConfig& cfg) { return Runner(cfg).execute(); }

/// One refinement level of a convergence study.
struct ConvergenceRow {
    std::size_t n;
    double dt;
    double error;
    double order;  // NaN when not defined for this row
};

/// Errors of each level against the finest level, measured on the final
/// state restricted to common grid points. Rows sharing n get an observed
/// order from consecutive dt pairs.
inline std::vector<ConvergenceRow> convergence_study(
    const RunConfig& base, const std::vector<std::pair<std::size_t, double>>& levels,
    const std::filesystem::path& out_dir) {
    if (levels.size() < 3) throw ConfigInvalid({"convergence study needs >= 3 levels"});

    struct Final {
        Grid1D grid;
        ComplexField psi;
        RealField rho;
        bool complex_state;
    };
    for (const auto& [n, dt] : levels) {
        (void)n;
        const double steps = base.time.t_end / dt;
        if (std::abs(steps - std::llround(steps)) > 1e-9)
            throw ConfigInvalid({"convergence level dt = " + fmt17(dt) +
                                 ": t_end must be an integer multiple of dt, otherwise the "
                                 "levels end at different times"});
    }

    auto run_level = [&](std::size_t n, double dt, const std::filesystem::path& dir) -> Final {
        RunConfig c = base;
        c.grid.n = n;
        c.time.dt = dt;
        c.run.output_dir = dir.string();
        c.run.quiet = true;
        c.time.output_every = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(c.time.t_end / dt)));
        Runner runner(c);
        const RunReport rep = runner.execute();
        if (rep.exit_code == 4) throw Error("convergence level aborted: " + rep.error);

        const Grid1D g = runner.make_grid();
        // Re-run the final state straight from the snapshot written last.
        const std::size_t last = rep.snapshots - 1;
        const Table t = [&] {
            Table tb;
            std::ifstream in(dir / ("snapshot_" + std::to_string(last) + ".csv"));
            std::string line;
            std::getline(in, line);  // header
            while (std::getline(in, line)) {
                std::stringstream ss(line);
                std::string cell;
                std::vector<double> cells;
                while (std::getline(ss, cell, ',')) cells.push_back(std::stod(cell));
                tb.x.push_back(cells[0]);
                tb.value.push_back(cells[3]);  // rho
            }
            return tb;
        }();
        Final f{g, {}, RealField(t.value.begin(), t.value.end()),
                base.equation.family == EquationFamily::modular};
        if (f.complex_state) {
            // rebuild psi from the snapshot columns
            std::ifstream in(dir / ("snapshot_" + std::to_string(last) + ".csv"));
            std::string line;
            std::getline(in, line);
            f.psi.clear();
            while (std::getline(in, line)) {
                std::stringstream ss(line);
                std::string cell;
                std::vector<double> cells;
                while (std::getline(ss, cell, ',')) cells.push_back(std::stod(cell));
                f.psi.emplace_back(cells[1], cells[2]);
            }
        }
        return f;
    };

    std::filesystem::create_directories(out_dir);
    std::vector<Final> finals;
    for (std::size_t i = 0; i < levels.size(); ++i)
        finals.push_back(run_level(levels[i].first, levels[i].second,
                                   out_dir / ("level_" + std::to_string(i))));

    const Final& ref = finals.back();
    std::vector<ConvergenceRow> rows;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        ConvergenceRow row{levels[i].first, levels[i].second, 0.0,
                           std::numeric_limits<double>::quiet_NaN()};
        if (i + 1 == levels.size()) {
            rows.push_back(row);
            break;
        }
        const std::size_t stride = ref.grid.n() / levels[i].first;
        if (stride * levels[i].first != ref.grid.n())
            throw ConfigInvalid({"convergence levels: n must divide the reference n"});
        RealField diff2(levels[i].first);
        for (std::size_t j = 0; j < levels[i].first; ++j) {
            if (ref.complex_state)
                diff2[j] = std::norm(finals[i].psi[j] - ref.psi[j * stride]);
            else {
                const double d = finals[i].rho[j] - ref.rho[j * stride];
                diff2[j] = d * d;
            }
        }
        row.error = std::sqrt(finals[i].grid.integrate(diff2));
        rows.push_back(row);
    }
    for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
        if (rows[i].n == rows[i - 1].n && rows[i].dt != rows[i - 1].dt && rows[i].error > 0.0)
            rows[i].order = std::log(rows[i - 1].error / rows[i].error) /
                            std::log(rows[i - 1].dt / rows[i].dt);
    }

    auto out = open_out(out_dir / "convergence.csv");
    out << "n,dt,error,observed_order\n";
    for (const auto& r : rows)
        out << r.n << ',' << fmt17(r.dt) << ',' << fmt17(r.error) << ',' << fmt17(r.order)
            << '\n';
    return rows;
}

/// Independent runs over one parameter axis; failures are isolated and the
/// summary marks them.
struct SweepResult {
    std::vector<RunReport> reports;
    std::filesystem::path summary_csv;
};

inline void set_config_value(RunConfig& c, const std::string& axis, const std::string& value) {
    auto as_double = [&] { return std::stod(value); };
    if (axis == "physics.kappa") c.physics.kappa = as_double();
    else if (axis == "physics.kT") c.physics.kT = as_double();
    else if (axis == "physics.gamma") c.physics.gamma = as_double();
    else if (axis == "physics.dl") c.physics.dl = as_double();
    else if (axis == "time.dt") c.time.dt = as_double();
    else if (axis == "time.t_end") c.time.t_end = as_double();
    else if (axis == "grid.n") c.grid.n = static_cast<std::size_t>(std::stoull(value));
    else if (axis == "potential.omega") c.potential.omega = as_double();
    else if (axis == "drift.c") c.drift.c = as_double();
    else if (axis == "initial.sigma") c.initial.sigma = as_double();
    else if (axis == "initial.p0") c.initial.p0 = as_double();
    else if (axis == "duality.beta") c.duality.beta = as_double();
    else if (axis == "duality.alpha") c.duality.alpha = as_double();
    else throw ConfigInvalid({"sweep axis not resolvable: " + axis});
}

inline SweepResult sweep(const RunConfig& base, const std::string& axis,
                         const std::vector<std::string>& values,
                         const std::filesystem::path& out_root) {
    std::filesystem::create_directories(out_root);
    SweepResult result;
    std::set<std::string> check_names;

    for (const auto& value : values) {
        RunConfig c = base;
        RunReport rep;
        try {
            set_config_value(c, axis, value);
            c.run.output_dir = (out_root / (axis + "_" + value)).string();
            c.run.quiet = true;
            rep = run(c);
        } catch (const ConfigInvalid& e) {
            rep.status = "aborted";
            rep.exit_code = 3;
            rep.error = e.what();
        } catch (const Error& e) {
            rep.status = "aborted";
            rep.exit_code = 4;
            rep.error = e.what();
        }
        for (const auto& ch : rep.checks) check_names.insert(ch.name);
        result.reports.push_back(std::move(rep));
    }

    result.summary_csv = out_root / "sweep_summary.csv";
    auto out = open_out(result.summary_csv);
    out << "value,status,exit_code";
    for (const auto& name : check_names) out << ',' << name;
    out << '\n';
    for (std::size_t i = 0; i < values.size(); ++i) {
        const RunReport& rep = result.reports[i];
        out << values[i] << ',' << rep.status << ',' << rep.exit_code;
        for (const auto& name : check_names) {
            const CheckResult* c = rep.find(name);
            out << ',' << (c ? fmt17(c->measured) : "");
        }
        out << '\n';
    }
    return result;
}

}  // namespace qdual
