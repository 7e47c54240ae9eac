#include "rbc/fft.hpp"

#include <cstring>
#include <mutex>

namespace rbc {

namespace {
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
} // namespace

Spectral::Spectral(const Grid& g)
    : nx_(g.nx), nz_(g.nz), nkx_(g.nx / 2 + 1),
      two_pi_over_l_(2.0 * 3.14159265358979323846264338327950288 / g.aspect) {
    rbuf_ = fftw_alloc_real(static_cast<size_t>(nx_) * nz_);
    cbuf_ = fftw_alloc_complex(static_cast<size_t>(nkx_) * nz_);
    std::lock_guard<std::mutex> lock(planner_mutex());
    // howmany = nz transforms of length nx, both sides strided by nz so that
    // physical index is i*nz + j and spectral index is k*nz + j.
    fwd_ = fftw_plan_many_dft_r2c(1, &nx_, nz_, rbuf_, nullptr, nz_, 1, cbuf_, nullptr, nz_, 1,
                                  FFTW_ESTIMATE);
    inv_ = fftw_plan_many_dft_c2r(1, &nx_, nz_, cbuf_, nullptr, nz_, 1, rbuf_, nullptr, nz_, 1,
                                  FFTW_ESTIMATE);
}

Spectral::~Spectral() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
    fftw_free(rbuf_);
    fftw_free(cbuf_);
}

void Spectral::forward(const Field& f, std::complex<double>* hat) {
    std::memcpy(rbuf_, f.data(), sizeof(double) * f.size());
    fftw_execute(fwd_);
    // std::complex<double> is layout-compatible with fftw_complex.
    std::memcpy(static_cast<void*>(hat), cbuf_,
                sizeof(fftw_complex) * static_cast<size_t>(nkx_) * nz_);
}

void Spectral::inverse(const std::complex<double>* hat, Field& f) {
    std::memcpy(cbuf_, static_cast<const void*>(hat),
                sizeof(fftw_complex) * static_cast<size_t>(nkx_) * nz_);
    fftw_execute(inv_);
    const double scale = 1.0 / nx_;
    const size_t n = f.size();
    for (size_t i = 0; i < n; ++i)
        f.v[i] = rbuf_[i] * scale;
}

} // namespace rbc
