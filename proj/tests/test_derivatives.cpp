#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qdual/derivatives.hpp"

using namespace qdual;

TEST_CASE("spectral derivative of sin(kx) is k cos(kx) to 1e-10") {
    Grid1D g = Grid1D::periodic(256, 0.0, 2.0 * M_PI);
    const double k = 3.0;
    RealField f(g.n());
    for (std::size_t i = 0; i < g.n(); ++i) f[i] = std::sin(k * g.x(i));
    const RealField d = derivative(f, g);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.n(); ++i)
        worst = std::max(worst, std::abs(d[i] - k * std::cos(k * g.x(i))));
    REQUIRE(worst < 1e-10);
}

TEST_CASE("spectral laplacian of a gaussian matches the analytic form") {
    Grid1D g = Grid1D::periodic(1024, -10.0, 10.0);
    RealField f(g.n());
    for (std::size_t i = 0; i < g.n(); ++i) f[i] = std::exp(-0.5 * g.x(i) * g.x(i));
    const RealField lap = laplacian(f, g);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.n(); ++i) {
        const double x = g.x(i);
        worst = std::max(worst, std::abs(lap[i] - (x * x - 1.0) * std::exp(-0.5 * x * x)));
    }
    REQUIRE(worst < 1e-8);
}

TEST_CASE("derivative of a constant vanishes") {
    Grid1D r = Grid1D::reflecting(128, -1.0, 3.0);
    const RealField c(r.n(), 4.2);
    for (double v : derivative(c, r)) REQUIRE(std::abs(v) < 1e-12);

    Grid1D p = Grid1D::periodic(128, -1.0, 3.0);
    for (double v : derivative(c, p)) REQUIRE(std::abs(v) < 1e-11);
}

TEST_CASE("finite differences are 4th order and exact on quartics") {
    // Closure stencils are exact up to degree 4 (first) and 5 (second).
    Grid1D g = Grid1D::reflecting(128, -1.0, 1.0);
    RealField f(g.n());
    for (std::size_t i = 0; i < g.n(); ++i) {
        const double x = g.x(i);
        f[i] = 1.0 + x + x * x - 2.0 * x * x * x + 0.5 * x * x * x * x;
    }
    const RealField d1 = derivative(f, g);
    const RealField d2 = laplacian(f, g);
    for (std::size_t i = 0; i < g.n(); ++i) {
        const double x = g.x(i);
        REQUIRE(std::abs(d1[i] - (1.0 + 2.0 * x - 6.0 * x * x + 2.0 * x * x * x)) < 1e-11);
        REQUIRE(std::abs(d2[i] - (2.0 - 12.0 * x + 6.0 * x * x)) < 1e-10);
    }

    // Observed order on sin(x) under grid refinement.
    auto fd_error = [](std::size_t n) {
        Grid1D gr = Grid1D::reflecting(n, 0.0, M_PI);
        RealField s(gr.n());
        for (std::size_t i = 0; i < gr.n(); ++i) s[i] = std::sin(gr.x(i));
        const RealField d = derivative(s, gr);
        double worst = 0.0;
        for (std::size_t i = 0; i < gr.n(); ++i)
            worst = std::max(worst, std::abs(d[i] - std::cos(gr.x(i))));
        return worst;
    };
    const double e1 = fd_error(128), e2 = fd_error(256);
    const double order = std::log2(e1 / e2);
    REQUIRE(order > 3.7);
}

TEST_CASE("complex spectral laplacian acts mode by mode") {
    Grid1D g = Grid1D::periodic(128, 0.0, 2.0 * M_PI);
    const double k = 5.0;
    ComplexField f(g.n());
    for (std::size_t i = 0; i < g.n(); ++i) f[i] = std::polar(1.0, k * g.x(i));
    const ComplexField lap = laplacian(f, g);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.n(); ++i)
        worst = std::max(worst, std::abs(lap[i] + k * k * f[i]));
    REQUIRE(worst < 1e-9);
}

TEST_CASE("spectral tail fraction flags unresolved fields") {
    Grid1D g = Grid1D::periodic(128, 0.0, 2.0 * M_PI);
    ComplexField smooth(g.n()), rough(g.n());
    for (std::size_t i = 0; i < g.n(); ++i) {
        smooth[i] = std::polar(1.0, 2.0 * g.x(i));
        rough[i] = std::polar(1.0, 60.0 * g.x(i));
    }
    REQUIRE(spectral_tail_fraction(smooth, g) < 1e-12);
    REQUIRE(spectral_tail_fraction(rough, g) > 0.5);
}
