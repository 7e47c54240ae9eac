#pragma once

// Infinite-Prandtl limit: the velocity is enslaved to the temperature through
// a clamped Stokes solve, and only theta is prognostic.

#include "rbc/solver.hpp"

namespace rbc {

class InfinitePrSolver {
  public:
    InfinitePrSolver(const Grid& g, const NondimParams& params, StepConfig cfg,
                     const NoiseBasis* temp_basis, WienerStream stream);

    // Replaces theta (walls zeroed) and refreshes the enslaved velocity.
    void set_theta(const Field& theta);

    void step() { step_with_drift(nullptr, nullptr); }
    void step_with_drift(const Field* theta_drift, std::vector<double>* theta_gaussians);

    const Field& theta() const { return theta_; }
    const Field& psi() const { return psi_; }
    const Field& u1() const { return u1_; }
    const Field& u2() const { return u2_; }
    double time() const { return t_; }
    std::uint64_t step_index() const { return step_; }
    const WienerStream& stream() const { return stream_; }
    const NondimParams& params() const { return params_; }
    const StepConfig& config() const { return cfg_; }
    const Grid& grid() const { return grid_; }

    EnergyDiagnostics diagnostics();

    struct State {
        double t = 0.0;
        std::uint64_t step = 0;
        Field theta;
        Field theta_prev;
        bool has_history = false;
    };
    State save_state() const;
    void restore_state(const State& s);

  private:
    void enslave_velocity();

    Grid grid_;
    NondimParams params_;
    StepConfig cfg_;
    const NoiseBasis* basis_;
    WienerStream stream_;
    Spectral sp_;
    StokesOperator stokes_;
    ScalarScheme scheme_;
    Field theta_, psi_, u1_, u2_, tendency_, scratch_;
    double t_ = 0.0;
    std::uint64_t step_ = 0;
};

} // namespace rbc
