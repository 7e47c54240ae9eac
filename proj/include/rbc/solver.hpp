#pragma once

// Time integration: Crank-Nicolson diffusion per horizontal wavenumber, AB2
// explicit advection and buoyancy (Euler on the first step), additive noise
// applied as an exact Gaussian increment after the implicit solve.

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>

#include "rbc/grid.hpp"
#include "rbc/noise.hpp"
#include "rbc/operators.hpp"
#include "rbc/params.hpp"
#include "rbc/philox.hpp"

namespace rbc {

struct StepConfig {
    double dt = 1e-3;
    double cfl_max = 0.5;

    void validate() const {
        if (!(dt > 0.0))
            throw std::invalid_argument("StepConfig: dt must be positive");
        if (!(cfl_max > 0.0) || cfl_max > 1.0)
            throw std::invalid_argument("StepConfig: cfl_max must be in (0, 1]");
    }
};

class CflError : public std::runtime_error {
  public:
    CflError(double cfl, double limit, double dt);
    double cfl;
    double suggested_dt;
};

class NumericalError : public std::runtime_error {
  public:
    NumericalError(std::uint64_t step, const std::string& detail);
    std::uint64_t step;
};

struct EnergyDiagnostics {
    double t = 0.0;
    double norm_u_sq = 0.0;
    double norm_theta_sq = 0.0;
    double grad_u_sq = 0.0;
    double grad_theta_sq = 0.0;
    double theta_l4 = 0.0;
    double flux_term = 0.0; // <theta, u2>
};

// CN + AB2 update for a wall-vanishing scalar: df = diffusivity*lap(f) dt +
// F dt with F supplied per step by the caller.  Holds the AB2 history.
class ScalarScheme {
  public:
    ScalarScheme(const Grid& g, double diffusivity, double dt);

    // One step of f given this step's explicit tendency F; f's wall rows must
    // be zero on entry and stay zero.
    void advance(Spectral& sp, Field& f, const Field& f_explicit);
    void reset_history();

    bool has_history() const { return has_history_; }
    const Field& previous_tendency() const { return prev_; }
    void set_history(const Field& prev, bool has) {
        prev_ = prev;
        has_history_ = has;
    }
    double dt() const { return dt_; }
    double diffusivity() const { return diffusivity_; }

  private:
    Grid grid_;
    double diffusivity_;
    double dt_;
    std::vector<TridiagFactor> solver_; // (I - a L_k) on interior rows, per k
    Field prev_;
    bool has_history_ = false;
    SpectralBuffer f_hat_, rhs_hat_;
    std::vector<std::complex<double>> col_;
};

// CN + AB2 update for the vorticity.  The Thom wall values are closed
// implicitly: per horizontal mode, the new walls and the streamfunction they
// induce satisfy a 2x2 linear system (wall -> CN solve -> Poisson -> Thom),
// solved exactly from factorizations built once.  Removes the dt ~ dz^2/Pr
// restriction of a lagged closure and keeps the step second order in dt.
class VorticityScheme {
  public:
    VorticityScheme(const Grid& g, double viscosity, double dt);

    // One step of omega given this step's explicit tendency; wall rows are
    // replaced by the implicitly consistent Thom values.
    void advance(Spectral& sp, Field& omega, const Field& f_explicit);
    void reset_history();

    bool has_history() const { return has_history_; }
    const Field& previous_tendency() const { return prev_; }
    void set_history(const Field& prev, bool has) {
        prev_ = prev;
        has_history_ = has;
    }
    double dt() const { return dt_; }
    double viscosity() const { return viscosity_; }

  private:
    Grid grid_;
    double viscosity_;
    double dt_;
    std::vector<TridiagFactor> cn_;      // (I - a L_k) on interior rows, per k
    std::vector<TridiagFactor> poisson_; // (D_zz - k^2), psi pinned at walls
    std::vector<std::vector<double>> wall_gain_b_, wall_gain_t_; // CN response to a unit wall
    std::vector<std::array<double, 4>> closure_; // (I - M_k)^{-1}, row-major
    Field prev_;
    bool has_history_ = false;
    SpectralBuffer f_hat_, rhs_hat_;
    std::vector<std::complex<double>> col_;
};

double advective_cfl(const Grid& g, const Field& u1, const Field& u2, double dt);
void require_cfl(const Grid& g, const Field& u1, const Field& u2, double dt, double cfl_max);
void require_finite(const Grid& g, const Field& f, std::uint64_t step, const char* what);

// Passive scalar dxi + v.grad(xi) dt = (buoyancy * v2 + lap(xi)) dt + noise
// with frozen velocity v.  Doubles as the comparison solution (buoyancy 0)
// and as the manufactured-forcing vehicle via set_source.
class DriftDiffusionSolver {
  public:
    DriftDiffusionSolver(const Grid& g, double buoyancy, StepConfig cfg,
                         const NoiseBasis* temp_basis, WienerStream stream);

    void set_velocity(const Field& u1, const Field& u2);
    void set_state(const Field& xi, double t = 0.0, std::uint64_t step = 0);
    // Extra explicit tendency added each step (manufactured forcing, nudging).
    void set_source(std::function<void(double, Field&)> source);
    void set_noise_enabled(bool on) { noise_enabled_ = on; }

    void step();

    const Field& field() const { return xi_; }
    const Field& u1() const { return u1_; }
    const Field& u2() const { return u2_; }
    double time() const { return t_; }
    std::uint64_t step_index() const { return step_; }
    const WienerStream& stream() const { return stream_; }
    const Grid& grid() const { return grid_; }

  private:
    Grid grid_;
    double buoyancy_;
    StepConfig cfg_;
    const NoiseBasis* basis_;
    WienerStream stream_;
    bool noise_enabled_ = true;
    Spectral sp_;
    ScalarScheme scheme_;
    Field xi_, u1_, u2_, tendency_, scratch_;
    std::function<void(double, Field&)> source_;
    double t_ = 0.0;
    std::uint64_t step_ = 0;
};

// Finite-Prandtl system in vorticity form:
//   d(theta) + u.grad(theta) dt = Ra~ u2 dt + lap(theta) dt + sum sigma_k dW
//   d(omega) + u.grad(omega) dt = Pr lap(omega) dt + Pr Ra d(theta)/dx dt
//                                 + Pr sum curl(sigma~_k) dW~
// with psi, u rebuilt from omega every step and Thom wall vorticity.
class BoussinesqSolver {
  public:
    BoussinesqSolver(const Grid& g, const NondimParams& params, StepConfig cfg,
                     const NoiseBasis* temp_basis, const NoiseBasis* vel_basis,
                     WienerStream stream);

    // Replaces theta (walls forced to zero).
    void set_theta(const Field& theta);
    // Replaces interior vorticity and rebuilds psi, u, wall vorticity.
    void set_omega(const Field& omega);

    void step() { step_with_drift(nullptr, nullptr, nullptr, nullptr); }
    // Extra explicit drifts (nudging) are added to the respective equations;
    // the Gaussian draws consumed this step are appended to the out vectors.
    void step_with_drift(const Field* theta_drift, const Field* omega_drift,
                         std::vector<double>* theta_gaussians,
                         std::vector<double>* velocity_gaussians);

    const Field& theta() const { return theta_; }
    const Field& omega() const { return omega_; }
    const Field& psi() const { return psi_; }
    const Field& u1() const { return u1_; }
    const Field& u2() const { return u2_; }
    double time() const { return t_; }
    std::uint64_t step_index() const { return step_; }
    const WienerStream& stream() const { return stream_; }
    const NondimParams& params() const { return params_; }
    const StepConfig& config() const { return cfg_; }
    const Grid& grid() const { return grid_; }
    double velocity_noise_scale() const { return velocity_scale_; }

    EnergyDiagnostics diagnostics();

    // Checkpoint payload: prognostic fields plus AB2 history and stream
    // position; restoring reproduces the continued trajectory bitwise.
    struct State {
        double t = 0.0;
        std::uint64_t step = 0;
        Field theta, omega;
        Field theta_prev, omega_prev;
        bool has_history = false;
    };
    State save_state() const;
    void restore_state(const State& s);

  private:
    void rebuild_velocity();

    Grid grid_;
    NondimParams params_;
    StepConfig cfg_;
    const NoiseBasis* temp_basis_;
    const NoiseBasis* vel_basis_;
    WienerStream stream_;
    double velocity_scale_ = 0.0; // sigma_tilde_norm / sqrt(n1)
    Spectral sp_;
    ScalarScheme theta_scheme_;
    VorticityScheme omega_scheme_;
    Field theta_, omega_, psi_, u1_, u2_;
    Field theta_tend_, omega_tend_, scratch_;
    double t_ = 0.0;
    std::uint64_t step_ = 0;
};

// xi and its comparison solution S under one Wiener stream and one frozen v:
// S starts from xi0 + buoyancy*(1 - z) in the interior (walls zero) and obeys
// the same advection-diffusion equation without the buoyancy drift.
class ComparisonPair {
  public:
    ComparisonPair(const Grid& g, double ra_tilde, StepConfig cfg, const NoiseBasis* temp_basis,
                   WienerStream stream, const Field& u1, const Field& u2, const Field& xi0);

    void step();
    const Field& xi() const { return xi_.field(); }
    const Field& comparison() const { return s_.field(); }
    double time() const { return xi_.time(); }

    // min over grid points of |S| + 2 Ra~ - |xi| (>= 0 up to scheme error).
    double pointwise_margin() const;

  private:
    double ra_tilde_;
    DriftDiffusionSolver xi_, s_;
};

} // namespace rbc
