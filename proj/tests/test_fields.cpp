#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "qdual/fields.hpp"
#include "test_helpers.hpp"

using namespace qdual;

namespace {
PhysicalParams default_params() {
    PhysicalParams p;
    p.validate();
    return p;
}
}  // namespace

TEST_CASE("decompose of a real positive gaussian has zero phase and velocity") {
    Grid1D g = Grid1D::periodic(512, -12.0, 12.0);
    const PhysicalParams params = default_params();
    WaveFunction w = gaussian_packet(g, 1.0, 0.0, 0.0, params);
    const MadelungFields f = decompose(w, params);
    REQUIRE(max_abs(f.s) < 1e-12);
    REQUIRE(max_abs(f.v) < 1e-9);
    REQUIRE(std::abs(g.integrate(f.rho) - 1.0) < 1e-8);
}

TEST_CASE("decompose of a plane wave gives constant v and vanishing u, Q") {
    Grid1D g = Grid1D::periodic(256, 0.0, 2.0 * M_PI);
    const PhysicalParams params = default_params();
    const int mode = 4;
    WaveFunction w = plane_wave(g, mode);
    const MadelungFields f = decompose(w, params);
    const double k = 2.0 * M_PI * mode / g.length();
    const double v_expected = params.hbar * k / params.m;
    for (double v : f.v) REQUIRE(std::abs(v - v_expected) < 1e-10);
    REQUIRE(max_abs(f.u) < 1e-10);
    REQUIRE(max_abs(f.Q) < 1e-9);
}

TEST_CASE("compose then decompose round-trips up to a global phase") {
    Grid1D g = Grid1D::periodic(512, -12.0, 12.0);
    const PhysicalParams params = default_params();
    std::mt19937 rng(20240817);
    for (int trial = 0; trial < 100; ++trial) {
        WaveFunction w = testing::random_smooth_state(g, params, rng);
        const WaveFunction back = compose(decompose(w, params), params);
        REQUIRE(testing::max_pointwise_distance_mod_phase(g, w.psi, back.psi) < 1e-12);
    }
}

TEST_CASE("unwrapped phase follows a plane wave across many turns") {
    Grid1D g = Grid1D::periodic(512, 0.0, 2.0 * M_PI);
    const PhysicalParams params = default_params();
    WaveFunction w = plane_wave(g, 7);
    const MadelungFields f = decompose(w, params);
    const double k = 7.0;
    // s(x) = hbar k (x - x_anchor) + s(anchor); anchor sits at x = 0.
    for (std::size_t i = 0; i < g.n(); ++i)
        REQUIRE(std::abs(f.s[i] - params.hbar * k * g.x(i)) < 1e-10);
}

TEST_CASE("quantum potential of a gaussian matches the analytic profile") {
    Grid1D g = Grid1D::periodic(1024, -12.0, 12.0);
    PhysicalParams params = default_params();
    const double sigma = 1.0;
    RealField rho(g.n());
    for (std::size_t i = 0; i < g.n(); ++i) {
        const double x = g.x(i);
        rho[i] = std::exp(-x * x / (2.0 * sigma * sigma)) / (sigma * std::sqrt(2.0 * M_PI));
    }
    const auto qp = quantum_potential(rho, g, params);
    const double h2 = params.hbar * params.hbar;
    double scale = 0.0, worst = 0.0;
    for (std::size_t i = 0; i < g.n(); ++i) {
        if (qp.flagged[i]) continue;
        const double x = g.x(i);
        const double exact = h2 / (4.0 * params.m * sigma * sigma) *
                             (1.0 - x * x / (2.0 * sigma * sigma));
        scale = std::max(scale, std::abs(exact));
        worst = std::max(worst, std::abs(qp.Q[i] - exact));
    }
    REQUIRE(worst / scale < 1e-6);  // relative to the profile scale
}

TEST_CASE("mean quantum potential equals (m/2)<u^2>") {
    Grid1D g = Grid1D::periodic(1024, -14.0, 14.0);
    const PhysicalParams params = default_params();
    std::mt19937 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const RealField rho = testing::random_smooth_density(g, rng);
        const MadelungFields f = madelung_from(g, rho, RealField(g.n(), 0.0), params);
        const double mean_Q = mean(g, f.rho, f.Q);
        const double mean_u2 = mean_of_square(g, f.rho, f.u);
        REQUIRE(std::abs(mean_Q - 0.5 * params.m * mean_u2) < 1e-8);
        REQUIRE(mean_Q > 0.0);  // positive for every non-uniform density
        const RealField du = derivative(f.u, g);
        REQUIRE(mean(g, f.rho, du) < 0.0);  // osmotic divergence is negative
    }
}

TEST_CASE("decompose rejects non-finite input and split supports") {
    Grid1D g = Grid1D::periodic(256, -16.0, 16.0);
    const PhysicalParams params = default_params();

    WaveFunction bad = gaussian_packet(g, 1.0, 0.0, 0.0, params);
    bad.psi[10] = std::complex<double>(std::nan(""), 0.0);
    REQUIRE_THROWS_AS(decompose(bad, params), NonFinite);

    // Two islands separated by an under-floor valley: phase is ill-posed.
    ComplexField split(g.n());
    for (std::size_t i = 0; i < g.n(); ++i) {
        const double x = g.x(i);
        split[i] = std::exp(-(x - 6.0) * (x - 6.0)) + std::exp(-(x + 6.0) * (x + 6.0));
    }
    WaveFunction two{g, split};
    two.normalize();
    REQUIRE_THROWS_AS(decompose(two, params), PhaseUndefined);
}

TEST_CASE("compose validates density and reports the boosted velocity") {
    Grid1D g = Grid1D::periodic(1024, -16.0, 16.0);
    const PhysicalParams params = default_params();
    const double sigma = 1.2, p0 = 0.75;
    RealField rho(g.n()), s(g.n());
    for (std::size_t i = 0; i < g.n(); ++i) {
        const double x = g.x(i);
        rho[i] = std::exp(-x * x / (2.0 * sigma * sigma)) / (sigma * std::sqrt(2.0 * M_PI));
        s[i] = p0 * x;
    }
    MadelungFields f;
    f.grid = g;
    f.rho = rho;
    f.s = s;
    const WaveFunction w = compose(f, params);
    const MadelungFields d = decompose(w, params);
    REQUIRE(std::abs(mean(g, d.rho, d.v) - p0 / params.m) < 1e-8);

    f.rho[100] = -1e-10;
    REQUIRE_THROWS_AS(compose(f, params), NegativeDensity);
}

TEST_CASE("uniform density composes to a constant wavefunction") {
    Grid1D g = Grid1D::periodic(128, 0.0, 5.0);
    const PhysicalParams params = default_params();
    MadelungFields f;
    f.grid = g;
    f.rho.assign(g.n(), 1.0 / g.length());
    f.s.assign(g.n(), 0.0);
    const WaveFunction w = compose(f, params);
    for (const auto& v : w.psi) {
        REQUIRE(v.imag() == 0.0);
        REQUIRE(std::abs(v.real() - 1.0 / std::sqrt(g.length())) < 1e-14);
    }
}
