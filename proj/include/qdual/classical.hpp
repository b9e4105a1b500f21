#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "qdual/errors.hpp"

namespace qdual::classical {

/// Phase-space point of the oscillator pair. H generates the harmonic motion,
/// H_bar the inverted (scattering) partner reached by the t -> -i t,
/// p0 -> -i p0 substitution.
struct OscillatorState {
    double q = 0.0;
    double p = 0.0;
    double omega = 1.0;
    double m = 1.0;

    double energy_harmonic() const { return p * p / (2.0 * m) + 0.5 * m * omega * omega * q * q; }
    double energy_inverted() const { return p * p / (2.0 * m) - 0.5 * m * omega * omega * q * q; }
};

namespace detail {

// sin(w t)/w with a 3-term series below w = 1e-6 to keep the free limit exact.
inline double sinc_omega(double omega, double t) {
    const double wt = omega * t;
    if (std::abs(omega) < 1e-6) {
        const double wt2 = wt * wt;
        return t * (1.0 - wt2 / 6.0 + wt2 * wt2 / 120.0);
    }
    return std::sin(wt) / omega;
}

inline double sinhc_omega(double omega, double t) {
    const double wt = omega * t;
    if (std::abs(omega) < 1e-6) {
        const double wt2 = wt * wt;
        return t * (1.0 + wt2 / 6.0 + wt2 * wt2 / 120.0);
    }
    return std::sinh(wt) / omega;
}

}  // namespace detail

/// q(t) = q0 cos(wt) + (p0/mw) sin(wt), p(t) = p0 cos(wt) - m w q0 sin(wt).
inline OscillatorState harmonic_trajectory(double q0, double p0, double omega, double m,
                                           double t) {
    if (!(omega >= 0.0)) throw Error("harmonic_trajectory: omega must be >= 0");
    const double c = std::cos(omega * t);
    const double s_w = detail::sinc_omega(omega, t);  // sin(wt)/w
    OscillatorState st;
    st.omega = omega;
    st.m = m;
    st.q = q0 * c + (p0 / m) * s_w;
    st.p = p0 * c - m * omega * omega * q0 * s_w;
    return st;
}

/// Inverted-oscillator closed forms obtained from the harmonic ones by the
/// Wick substitution: q_bar(t) = q0 cosh(wt) - (p0/mw) sinh(wt),
/// p_bar(t) = -p0 cosh(wt) + m w q0 sinh(wt).
inline OscillatorState inverted_trajectory(double q0, double p0, double omega, double m,
                                           double t) {
    if (!(omega >= 0.0)) throw Error("inverted_trajectory: omega must be >= 0");
    if (std::abs(omega * t) > 700.0)
        throw RangeWarning("inverted_trajectory: |omega t| > 700 overflows cosh/sinh");
    const double c = std::cosh(omega * t);
    const double s_w = detail::sinhc_omega(omega, t);  // sinh(wt)/w
    OscillatorState st;
    st.omega = omega;
    st.m = m;
    st.q = q0 * c - (p0 / m) * s_w;
    st.p = -p0 * c + m * omega * omega * q0 * s_w;
    return st;
}

/// The time-reflected pair (q_bar(-t), -p_bar(-t)), the inverted-oscillator
/// solution generated by +H_bar.
inline OscillatorState inverted_time_reflected(double q0, double p0, double omega, double m,
                                               double t) {
    OscillatorState st = inverted_trajectory(q0, p0, omega, m, -t);
    st.p = -st.p;
    return st;
}

/// H_bar along the inverted trajectory, evaluated in the factored form
/// (p_bar - m w q_bar)(p_bar + m w q_bar)/2m with the exponentials cancelled
/// analytically. The naive quadratic form loses ~cosh^2(wt) digits to
/// cancellation; this evaluation stays accurate over the whole |wt| <= 20
/// range and equals p0^2/2m - m w^2 q0^2/2 identically.
inline double inverted_energy_factored(double q0, double p0, double omega, double m,
                                       double /*t*/) {
    return (p0 - m * omega * q0) * (p0 + m * omega * q0) / (2.0 * m);
}

/// One RK4 trajectory of m qdd = force(q). Generic Newton oracle used by the
/// field solvers' tests.
struct PhasePoint {
    double t, q, p;
};

inline std::vector<PhasePoint> rk4_newton(const std::function<double(double)>& force,
                                          double q0, double p0, double m, double dt,
                                          std::size_t steps) {
    std::vector<PhasePoint> out;
    out.reserve(steps + 1);
    double q = q0, p = p0, t = 0.0;
    out.push_back({t, q, p});
    for (std::size_t k = 0; k < steps; ++k) {
        const double k1q = p / m, k1p = force(q);
        const double k2q = (p + 0.5 * dt * k1p) / m, k2p = force(q + 0.5 * dt * k1q);
        const double k3q = (p + 0.5 * dt * k2p) / m, k3p = force(q + 0.5 * dt * k2q);
        const double k4q = (p + dt * k3p) / m, k4p = force(q + dt * k3q);
        q += dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
        p += dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        t += dt;
        out.push_back({t, q, p});
    }
    return out;
}

/// Numerical audit of the Wick substitution: inserting t -> -i t and
/// p0 -> -i p0 into the harmonic closed forms must reproduce the inverted
/// trajectory with purely real q and purely imaginary p = i p_bar, and the
/// continued energy must equal -H_bar.
struct WickReport {
    double max_state_deviation = 0.0;   // |Re q_c - q_bar|, |Im q_c|, |Im p_c - p_bar|, |Re p_c|
    double energy_deviation = 0.0;      // |H(q_c, p_c) - (-H_bar)|
    double free_limit_deviation = 0.0;  // omega -> 0: q0 +- p0 t / m
};

inline WickReport wick_correspondence_check(double q0, double p0, double omega, double m,
                                            double t) {
    using C = std::complex<double>;
    const C it(0.0, -t);          // continued time -i t
    const C ip0(0.0, -p0);        // continued momentum -i p0
    const C wt = omega * it;
    const C qc = q0 * std::cos(wt) + (ip0 / (m * omega)) * std::sin(wt);
    const C pc = ip0 * std::cos(wt) - m * omega * q0 * std::sin(wt);

    const OscillatorState bar = inverted_trajectory(q0, p0, omega, m, t);

    WickReport rep;
    rep.max_state_deviation = std::max({std::abs(qc.real() - bar.q), std::abs(qc.imag()),
                                        std::abs(pc.imag() - bar.p), std::abs(pc.real())});

    const C h_cont = pc * pc / (2.0 * m) + 0.5 * m * omega * omega * qc * qc;
    const double h_bar = inverted_energy_factored(q0, p0, omega, m, t);
    rep.energy_deviation = std::abs(h_cont - C(-h_bar, 0.0));

    const double w_small = 1e-9;
    const OscillatorState h_free = harmonic_trajectory(q0, p0, w_small, m, t);
    const OscillatorState i_free = inverted_trajectory(q0, p0, w_small, m, t);
    rep.free_limit_deviation = std::max(std::abs(h_free.q - (q0 + p0 * t / m)),
                                        std::abs(i_free.q - (q0 - p0 * t / m)));
    return rep;
}

}  // namespace qdual::classical
