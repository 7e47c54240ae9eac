#pragma once

// Discrete operators on the channel grid: trapezoid quadrature, spectral x
// derivatives, centered z derivatives, dealiased skew-symmetric advection,
// streamfunction Poisson and Stokes solves, wall vorticity closure.

#include <complex>
#include <functional>

#include "rbc/banded.hpp"
#include "rbc/fft.hpp"
#include "rbc/grid.hpp"

namespace rbc {

// --- quadrature -----------------------------------------------------------

// Trapezoid weight of vertical node j (without dx factor).
inline double zweight(const Grid& g, int j) {
    return (j == 0 || j == g.nz - 1) ? 0.5 * g.dz : g.dz;
}

double l2_inner(const Grid& g, const Field& a, const Field& b);
double l2_norm_sq(const Grid& g, const Field& f);
double l2_norm(const Grid& g, const Field& f);
// Lp norm via trapezoid quadrature; throws std::domain_error for p < 1.
double lp_norm(const Grid& g, const Field& f, double p);

// Velocity inner product and norms (sum over both components).
double velocity_inner(const Grid& g, const Field& a1, const Field& a2, const Field& b1,
                      const Field& b2);

// --- derivatives ----------------------------------------------------------

// Spectral d/dx (Nyquist mode zeroed).
void ddx(const Grid& g, Spectral& sp, const Field& f, Field& out);
// Centered d/dz in the interior, second-order one-sided at the walls.
void ddz(const Grid& g, const Field& f, Field& out);

// || grad f ||^2 with the quadrature above (spectral x, centered/one-sided z).
double grad_norm_sq(const Grid& g, Spectral& sp, const Field& f);
// Same for a velocity field (u1, u2).
double grad_norm_sq_velocity(const Grid& g, Spectral& sp, const Field& u1, const Field& u2);

// Project onto the 2/3-rule band (zero horizontal modes with 3k >= nx).
void dealias(const Grid& g, Spectral& sp, Field& f);

// --- advection -------------------------------------------------------------

// u . grad(s) as the average of conservative and advective forms (discretely
// skew-adjoint for wall-vanishing fields), dealiased output.
void advect(const Grid& g, Spectral& sp, const Field& u1, const Field& u2, const Field& s,
            Field& out);

// --- streamfunction / velocity ---------------------------------------------

// Solve lap(psi) = -omega with psi = 0 on both walls (per-wavenumber
// tridiagonal solves; the k = 0 mode uses the same wall-anchored system).
void poisson_streamfunction(const Grid& g, Spectral& sp, const Field& omega, Field& psi);

// u1 = d(psi)/dz, u2 = -d(psi)/dx with the discrete operators above; wall rows
// of both components are set to zero (no-slip).
void velocity_from_streamfunction(const Grid& g, Spectral& sp, const Field& psi, Field& u1,
                                  Field& u2);

// Thom wall closure: omega_wall = -2 psi_1 / dz^2 from the first interior row.
void thom_wall_vorticity(const Grid& g, const Field& psi, Field& omega);

// Max |d(u1)/dx + d(u2)/dz| over interior points (consistency diagnostic; the
// same discrete operators as velocity_from_streamfunction, so this vanishes to
// roundoff for streamfunction-derived fields).
double max_interior_divergence(const Grid& g, Spectral& sp, const Field& u1, const Field& u2);

// --- Stokes ----------------------------------------------------------------

// (d^2/dz^2 - k^2)^2 psi_k = Ra (i k) theta_k with clamped walls
// (psi = dpsi/dz = 0), the vorticity-free formulation of
// -lap(u) + grad(p) = Ra e_z theta.  Factorizations are built once per grid
// and Rayleigh number and reused every call.
class StokesOperator {
  public:
    StokesOperator(const Grid& g, double ra);

    // theta -> streamfunction.
    void solve(Spectral& sp, const Field& theta, Field& psi);
    double ra() const { return ra_; }

  private:
    Grid grid_;
    double ra_;
    std::vector<PentadiagFactor> factors_; // one per wavenumber k >= 1
    SpectralBuffer hat_;
};

// One-off convenience wrapper returning both streamfunction and velocity.
void stokes_solve(const Grid& g, Spectral& sp, double ra, const Field& theta, Field& psi,
                  Field& u1, Field& u2);

} // namespace rbc
