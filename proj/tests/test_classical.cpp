#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "qdual/classical.hpp"

using namespace qdual;
using namespace qdual::classical;

TEST_CASE("rest state stays at rest") {
    for (double t : {0.0, 1.0, 17.5}) {
        const auto st = harmonic_trajectory(0.0, 0.0, 2.0, 1.5, t);
        REQUIRE(st.q == 0.0);
        REQUIRE(st.p == 0.0);
    }
}

TEST_CASE("quarter period maps (q0, p0) to (p0/mw, -mw q0)") {
    const double q0 = 1.3, p0 = -0.4, omega = 2.0, m = 1.7;
    const auto st = harmonic_trajectory(q0, p0, omega, m, 0.5 * M_PI / omega);
    REQUIRE(std::abs(st.q - p0 / (m * omega)) < 1e-14);
    REQUIRE(std::abs(st.p + m * omega * q0) < 1e-14);
}

TEST_CASE("RK4 oracle reproduces the harmonic closed form over ten periods") {
    const double q0 = 1.0, p0 = 0.5, omega = 1.0, m = 1.0;
    const double T = 2.0 * M_PI / omega;
    const double dt = T / 1000.0;
    const std::size_t steps = 10000;  // ten periods
    const auto force = [&](double q) { return -m * omega * omega * q; };
    const auto traj = rk4_newton(force, q0, p0, m, dt, steps);
    double worst = 0.0;
    for (const auto& pt : traj) {
        const auto exact = harmonic_trajectory(q0, p0, omega, m, pt.t);
        worst = std::max({worst, std::abs(pt.q - exact.q), std::abs(pt.p - exact.p)});
    }
    REQUIRE(worst < 1e-9);
}

TEST_CASE("inverted trajectory at t = 0 is (q0, -p0)") {
    const auto st = inverted_trajectory(0.7, 1.1, 1.3, 2.0, 0.0);
    REQUIRE(st.q == Catch::Approx(0.7).margin(1e-15));
    REQUIRE(st.p == Catch::Approx(-1.1).margin(1e-15));
}

TEST_CASE("inverted trajectory satisfies m qdd = +m w^2 q by finite differences") {
    const double q0 = 0.8, p0 = 0.3, omega = 1.0, m = 1.0;
    const double h = 2e-4;
    for (double t = 0.1; t <= 5.0; t += 0.7) {
        const double qm = inverted_trajectory(q0, p0, omega, m, t - h).q;
        const double qc = inverted_trajectory(q0, p0, omega, m, t).q;
        const double qp = inverted_trajectory(q0, p0, omega, m, t + h).q;
        const double qdd = (qp - 2.0 * qc + qm) / (h * h);
        REQUIRE(std::abs(m * qdd - m * omega * omega * qc) < 1e-6);
    }
}

TEST_CASE("dual energy is conserved over |wt| <= 20") {
    const double q0 = 1.2, p0 = 0.9, omega = 1.0, m = 1.0;
    const double expected = p0 * p0 / (2.0 * m) - 0.5 * m * omega * omega * q0 * q0;
    // Factored evaluation: immune to the cosh^2(wt) cancellation.
    for (double t = 0.0; t <= 20.0; t += 0.5) {
        REQUIRE(std::abs(inverted_energy_factored(q0, p0, omega, m, t) - expected) < 1e-10);
    }
    // Direct evaluation from trajectory values holds in the moderate range.
    for (double t = 0.0; t <= 8.0; t += 0.5) {
        const auto st = inverted_trajectory(q0, p0, omega, m, t);
        REQUIRE(std::abs(st.energy_inverted() - expected) < 1e-9);
    }
}

TEST_CASE("hyperbolic overflow raises RangeWarning") {
    REQUIRE_THROWS_AS(inverted_trajectory(1.0, 0.0, 1.0, 1.0, 701.0), RangeWarning);
}

TEST_CASE("wick substitution reproduces the inverted trajectory and energy") {
    std::mt19937 rng(1234);
    std::uniform_real_distribution<double> coord(-1.5, 1.5);
    std::uniform_real_distribution<double> freq(0.2, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
        const double q0 = coord(rng), p0 = coord(rng), omega = freq(rng);
        std::uniform_real_distribution<double> time(0.0, 3.0 / omega);  // safe range |wt| <= 3
        const auto rep = wick_correspondence_check(q0, p0, omega, 1.0, time(rng));
        REQUIRE(rep.max_state_deviation < 1e-12);
        REQUIRE(rep.energy_deviation < 1e-12);
        REQUIRE(rep.free_limit_deviation < 1e-8);
    }
}

TEST_CASE("time reflection connects the two inverted branches") {
    // Dynamics generated by -H_bar runs backwards relative to +H_bar.
    const double q0 = 0.4, p0 = -1.0, omega = 1.5, m = 2.0;
    for (double t = 0.2; t < 3.0; t += 0.4) {
        const auto fwd = inverted_trajectory(q0, p0, omega, m, t);
        const auto refl = inverted_time_reflected(q0, p0, omega, m, -t);
        REQUIRE(fwd.q == Catch::Approx(refl.q).margin(1e-13));
        REQUIRE(fwd.p == Catch::Approx(-refl.p).margin(1e-13));
    }
}

TEST_CASE("small-omega branch joins the trig branch smoothly") {
    const double q0 = 1.0, p0 = 0.7, m = 1.0, t = 3.0;
    const auto below = harmonic_trajectory(q0, p0, 0.99e-6, m, t);
    const auto above = harmonic_trajectory(q0, p0, 1.01e-6, m, t);
    REQUIRE(std::abs(below.q - above.q) < 1e-12);
    REQUIRE(std::abs(below.p - above.p) < 1e-12);
}
