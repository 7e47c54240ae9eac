#pragma once

// FFTW-backed horizontal transforms.  Layout matches Field: physical data is
// x-major (i*nz + j), spectral data is wavenumber-major (k*nz + j) so each
// wavenumber's vertical profile is contiguous for the banded solves.
//
// Plans are created with FFTW_ESTIMATE on internally aligned buffers, which
// keeps execution deterministic; a Spectral object is not thread-safe, so each
// solver owns its own.

#include <complex>
#include <vector>

#include <fftw3.h>

#include "rbc/grid.hpp"

namespace rbc {

class Spectral {
  public:
    explicit Spectral(const Grid& g);
    ~Spectral();
    Spectral(const Spectral&) = delete;
    Spectral& operator=(const Spectral&) = delete;

    int nx() const { return nx_; }
    int nz() const { return nz_; }
    int nkx() const { return nkx_; }

    // Fourier transform along x for every z level; hat must hold nkx()*nz().
    void forward(const Field& f, std::complex<double>* hat);
    // Inverse transform, normalized by 1/nx.
    void inverse(const std::complex<double>* hat, Field& f);

    // Wavenumber of spectral index k for domain width L = aspect.
    double kx(int k) const { return two_pi_over_l_ * k; }

    // 2/3-rule mask: true when the mode is kept.
    bool keep(int k) const { return 3 * k < nx_; }

  private:
    int nx_, nz_, nkx_;
    double two_pi_over_l_;
    double* rbuf_;
    fftw_complex* cbuf_;
    fftw_plan fwd_;
    fftw_plan inv_;
};

using SpectralBuffer = std::vector<std::complex<double>>;

} // namespace rbc
