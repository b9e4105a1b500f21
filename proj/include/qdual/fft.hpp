#pragma once

#include <complex>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "qdual/grid.hpp"

namespace qdual {

/// Cached FFTW plans for one transform size. Plans are created with
/// FFTW_ESTIMATE (deterministic, no runtime tuning) and own their aligned
/// buffers; callers copy in and out. Instances live in a thread_local cache,
/// so concurrent trajectories never share planner state. Plan creation is
/// serialized because the FFTW planner itself is not thread-safe.
class Fft {
public:
    explicit Fft(std::size_t n) : n_(n) {
        std::lock_guard<std::mutex> lock(planner_mutex());
        in_ = fftw_alloc_complex(n);
        out_ = fftw_alloc_complex(n);
        fwd_ = fftw_plan_dft_1d(static_cast<int>(n), in_, out_, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_1d(static_cast<int>(n), in_, out_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }

    ~Fft() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(in_);
        fftw_free(out_);
    }

    Fft(const Fft&) = delete;
    Fft& operator=(const Fft&) = delete;

    /// Unnormalized forward DFT.
    void forward(const ComplexField& f, ComplexField& fhat) {
        run(fwd_, f, fhat);
    }

    /// Inverse DFT including the 1/n normalization.
    void inverse(const ComplexField& fhat, ComplexField& f) {
        run(bwd_, fhat, f);
        const double scale = 1.0 / static_cast<double>(n_);
        for (auto& v : f) v *= scale;
    }

    static Fft& for_size(std::size_t n) {
        thread_local std::map<std::size_t, std::unique_ptr<Fft>> cache;
        auto it = cache.find(n);
        if (it == cache.end()) it = cache.emplace(n, std::make_unique<Fft>(n)).first;
        return *it->second;
    }

private:
    static std::mutex& planner_mutex() {
        static std::mutex m;
        return m;
    }

    void run(fftw_plan plan, const ComplexField& src, ComplexField& dst) {
        std::memcpy(in_, src.data(), n_ * sizeof(fftw_complex));
        fftw_execute(plan);
        dst.resize(n_);
        std::memcpy(dst.data(), out_, n_ * sizeof(fftw_complex));
    }

    std::size_t n_;
    fftw_complex* in_;
    fftw_complex* out_;
    fftw_plan fwd_;
    fftw_plan bwd_;
};

/// Angular wavenumbers in FFT storage order: k_j = 2*pi*j/L for j < n/2,
/// negative branch above.
inline RealField fft_wavenumbers(const Grid1D& grid) {
    const std::size_t n = grid.n();
    const double dk = 2.0 * M_PI / grid.length();
    RealField k(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double jj = (j <= n / 2) ? static_cast<double>(j)
                                       : static_cast<double>(j) - static_cast<double>(n);
        k[j] = dk * jj;
    }
    return k;
}

}  // namespace qdual
