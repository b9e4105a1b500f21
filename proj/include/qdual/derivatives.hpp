#pragma once

#include <complex>

#include "qdual/fft.hpp"
#include "qdual/grid.hpp"

namespace qdual {

namespace detail {

// 4th-order finite differences; one-sided closures at the ends.
// The closure stencils are exact for polynomials up to degree 4 (first
// derivative) and degree 5 (second derivative).
inline RealField fd_derivative(const RealField& f, double h) {
    const std::size_t n = f.size();
    RealField d(n);
    const double c = 1.0 / (12.0 * h);
    d[0] = c * (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]);
    d[1] = c * (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]);
    for (std::size_t i = 2; i + 2 < n; ++i)
        d[i] = c * (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]);
    d[n - 2] = -c * (-3.0 * f[n - 1] - 10.0 * f[n - 2] + 18.0 * f[n - 3] - 6.0 * f[n - 4] + f[n - 5]);
    d[n - 1] = -c * (-25.0 * f[n - 1] + 48.0 * f[n - 2] - 36.0 * f[n - 3] + 16.0 * f[n - 4] - 3.0 * f[n - 5]);
    return d;
}

inline RealField fd_laplacian(const RealField& f, double h) {
    const std::size_t n = f.size();
    RealField d(n);
    const double c = 1.0 / (12.0 * h * h);
    d[0] = c * (45.0 * f[0] - 154.0 * f[1] + 214.0 * f[2] - 156.0 * f[3] + 61.0 * f[4] - 10.0 * f[5]);
    d[1] = c * (10.0 * f[0] - 15.0 * f[1] - 4.0 * f[2] + 14.0 * f[3] - 6.0 * f[4] + f[5]);
    for (std::size_t i = 2; i + 2 < n; ++i)
        d[i] = c * (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]);
    d[n - 2] = c * (10.0 * f[n - 1] - 15.0 * f[n - 2] - 4.0 * f[n - 3] + 14.0 * f[n - 4] - 6.0 * f[n - 5] + f[n - 6]);
    d[n - 1] = c * (45.0 * f[n - 1] - 154.0 * f[n - 2] + 214.0 * f[n - 3] - 156.0 * f[n - 4] + 61.0 * f[n - 5] - 10.0 * f[n - 6]);
    return d;
}

enum class SpectralOp { gradient, laplacian };

inline ComplexField spectral_apply(const ComplexField& f, const Grid1D& grid, SpectralOp op) {
    auto& fft = Fft::for_size(grid.n());
    ComplexField fhat, out;
    fft.forward(f, fhat);
    const RealField k = fft_wavenumbers(grid);
    const std::size_t nyquist = grid.n() / 2;
    for (std::size_t j = 0; j < grid.n(); ++j) {
        if (op == SpectralOp::gradient) {
            // The Nyquist mode has no well-defined odd derivative; drop it.
            const double kj = (j == nyquist) ? 0.0 : k[j];
            fhat[j] *= std::complex<double>(0.0, kj);
        } else {
            fhat[j] *= -k[j] * k[j];
        }
    }
    fft.inverse(fhat, out);
    return out;
}

inline RealField spectral_apply(const RealField& f, const Grid1D& grid, SpectralOp op) {
    ComplexField fc(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) fc[i] = f[i];
    const ComplexField out = spectral_apply(fc, grid, op);
    RealField r(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) r[i] = out[i].real();
    return r;
}

}  // namespace detail

/// d/dx of a sampled field: Fourier differentiation on periodic grids,
/// 4th-order finite differences on reflecting grids.
inline RealField derivative(const RealField& f, const Grid1D& grid) {
    if (!all_finite(f)) throw NonFinite("derivative: field has non-finite values");
    return grid.is_periodic() ? detail::spectral_apply(f, grid, detail::SpectralOp::gradient)
                              : detail::fd_derivative(f, grid.dx());
}

inline ComplexField derivative(const ComplexField& f, const Grid1D& grid) {
    if (!all_finite(f)) throw NonFinite("derivative: field has non-finite values");
    if (grid.is_periodic()) return detail::spectral_apply(f, grid, detail::SpectralOp::gradient);
    RealField re(f.size()), im(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) { re[i] = f[i].real(); im[i] = f[i].imag(); }
    const RealField dre = detail::fd_derivative(re, grid.dx());
    const RealField dim = detail::fd_derivative(im, grid.dx());
    ComplexField d(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) d[i] = {dre[i], dim[i]};
    return d;
}

inline RealField laplacian(const RealField& f, const Grid1D& grid) {
    if (!all_finite(f)) throw NonFinite("laplacian: field has non-finite values");
    return grid.is_periodic() ? detail::spectral_apply(f, grid, detail::SpectralOp::laplacian)
                              : detail::fd_laplacian(f, grid.dx());
}

inline ComplexField laplacian(const ComplexField& f, const Grid1D& grid) {
    if (!all_finite(f)) throw NonFinite("laplacian: field has non-finite values");
    if (grid.is_periodic()) return detail::spectral_apply(f, grid, detail::SpectralOp::laplacian);
    RealField re(f.size()), im(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) { re[i] = f[i].real(); im[i] = f[i].imag(); }
    const RealField dre = detail::fd_laplacian(re, grid.dx());
    const RealField dim = detail::fd_laplacian(im, grid.dx());
    ComplexField d(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) d[i] = {dre[i], dim[i]};
    return d;
}

/// Energy fraction carried by modes with |k| >= (2/3) k_max. Used to detect
/// under-resolved fields on periodic grids.
inline double spectral_tail_fraction(const ComplexField& f, const Grid1D& grid) {
    auto& fft = Fft::for_size(grid.n());
    ComplexField fhat;
    fft.forward(f, fhat);
    const RealField k = fft_wavenumbers(grid);
    const double k_cut = (2.0 / 3.0) * M_PI / grid.dx();
    double total = 0.0, tail = 0.0;
    for (std::size_t j = 0; j < grid.n(); ++j) {
        const double e = std::norm(fhat[j]);
        total += e;
        if (std::abs(k[j]) >= k_cut) tail += e;
    }
    return total > 0.0 ? tail / total : 0.0;
}

}  // namespace qdual
