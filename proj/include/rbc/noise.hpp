#pragma once

// Forcing bases: eigenvalue-ordered wall-vanishing modes for the temperature
// noise, divergence-free streamfunction modes for the velocity noise, Wiener
// increment sampling, and the low-mode projections used by the nudging.

#include <cstdint>
#include <string>
#include <vector>

#include "rbc/grid.hpp"
#include "rbc/operators.hpp"
#include "rbc/philox.hpp"

namespace rbc {

enum class Parity { cos_phase = 0, sin_phase = 1 };

struct NoiseMode {
    int j = 0;      // horizontal wavenumber index, >= 0
    int m = 1;      // vertical mode index, >= 1
    Parity parity = Parity::cos_phase;
    double eigenvalue = 0.0; // (2 pi j / L)^2 + (pi m)^2, used for ordering
    double amplitude = 0.0;  // forcing amplitude of the unit-norm shape
};

enum class BasisKind { temperature, velocity };

// Immutable basis: metadata plus sampled shapes.  Temperature shapes have unit
// discrete L2 norm; velocity modes have unit discrete velocity norm (their
// streamfunctions are kept for diagnostics, the omega_source shapes are what
// the vorticity stepper adds so the induced velocity increment is exact).
struct NoiseBasis {
    BasisKind kind = BasisKind::temperature;
    std::vector<NoiseMode> modes;
    double total_norm_sq = 0.0; // sum over modes of amplitude^2

    std::vector<Field> shape;       // temperature: sigma_k; velocity: psi_k
    std::vector<Field> u1, u2;      // velocity only
    std::vector<Field> omega_source; // velocity only: -lap_d(psi_k), walls 0

    // Measured discrete Rayleigh quotients ||grad e||^2 / ||e||^2 per mode.
    std::vector<double> discrete_eigenvalue;
    // Analytic eigenvalue of the first mode *not* in the basis.
    double tail_eigenvalue = 0.0;

    int size() const { return static_cast<int>(modes.size()); }
};

// Enumerate the first `count` modes in eigenvalue order (ties by m, then j,
// cos before sin).  Throws "basis under-resolved" if any selected mode has
// m >= nz/2 or j >= nx/3.  Shared by both bases per the shape catalog.
std::vector<NoiseMode> enumerate_modes(int count, const Grid& grid);

// First n2 Dirichlet eigenfunctions, equal amplitudes with sum ||sigma_k||^2 = 1.
NoiseBasis build_temperature_basis(int n2, const Grid& grid);

// First n1 divergence-free curl modes, unit amplitude each; n1 = 0 gives an
// empty basis with total_norm_sq = 0.
NoiseBasis build_velocity_basis(int n1, const Grid& grid);

// Measured Rayleigh quotient of the first excluded mode (the tail constant in
// the inverse Poincare bound); built from a basis one mode wider.
double measured_tail_eigenvalue(const NoiseBasis& basis, const Grid& grid);

// Smallest mode count n with measured tail quotient >= 2 lambda, so the
// nudging strength is covered by the unresolved-scale dissipation.  Throws
// "basis under-resolved" when the grid cannot supply enough modes.
int auto_mode_count(BasisKind kind, double lambda, const Grid& grid);

// Sum_k amp_k sqrt(dt) g_k sigma_k added into `out` (not zeroed first).  The
// gaussians consumed are appended to *gaussians when non-null, in mode order.
void add_temperature_increment(const NoiseBasis& basis, const Grid& grid, double dt,
                               const WienerStream& stream, std::uint64_t step, Field& out,
                               std::vector<double>* gaussians = nullptr);

// Velocity-noise increment in vorticity form, all amplitudes scaled by
// `scale` (the per-mode strength sigma_tilde_norm / sqrt(n1)).
void add_vorticity_increment(const NoiseBasis& basis, const Grid& grid, double dt,
                             const WienerStream& stream, std::uint64_t step, double scale,
                             Field& omega_out, std::vector<double>* gaussians = nullptr);

// Same increment in velocity components (diagnostics and tests).
void add_velocity_increment(const NoiseBasis& basis, const Grid& grid, double dt,
                            const WienerStream& stream, std::uint64_t step, double scale,
                            Field& u1_out, Field& u2_out);

// L2-orthogonal projection onto the span of the first n modes.
void project_low_modes(const NoiseBasis& basis, const Grid& grid, const Field& f, int n,
                       Field& out);
void project_low_modes_velocity(const NoiseBasis& basis, const Grid& grid, const Field& v1,
                                const Field& v2, int n, Field& p1, Field& p2);

// Modal coefficients <f, e_k> for k < n (temperature basis).
std::vector<double> modal_coefficients(const NoiseBasis& basis, const Grid& grid, const Field& f,
                                       int n);
// Velocity-inner-product coefficients <(v1,v2), ehat_k> for k < n.
std::vector<double> modal_coefficients_velocity(const NoiseBasis& basis, const Grid& grid,
                                                const Field& v1, const Field& v2, int n);

// JSON manifest: [{"j":..,"m":..,"parity":"cos"|"sin","eigenvalue":..,"amplitude":..}, ...]
std::string basis_manifest_json(const NoiseBasis& basis);

} // namespace rbc
