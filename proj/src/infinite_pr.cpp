#include "rbc/infinite_pr.hpp"

namespace rbc {

InfinitePrSolver::InfinitePrSolver(const Grid& g, const NondimParams& params, StepConfig cfg,
                                   const NoiseBasis* temp_basis, WienerStream stream)
    : grid_(g),
      params_(params),
      cfg_(cfg),
      basis_(temp_basis),
      stream_(stream),
      sp_(g),
      stokes_(g, params.ra),
      scheme_(g, 1.0, cfg.dt),
      theta_(g),
      psi_(g),
      u1_(g),
      u2_(g),
      tendency_(g),
      scratch_(g) {
    cfg.validate();
    if (basis_ && basis_->kind != BasisKind::temperature)
        throw std::invalid_argument("InfinitePrSolver: basis must be a temperature basis");
}

void InfinitePrSolver::set_theta(const Field& theta) {
    check_shape(grid_, theta, "set_theta");
    theta_ = theta;
    for (int i = 0; i < grid_.nx; ++i) {
        theta_(i, 0) = 0.0;
        theta_(i, grid_.nz - 1) = 0.0;
    }
    scheme_.reset_history();
    enslave_velocity();
}

void InfinitePrSolver::enslave_velocity() {
    stokes_.solve(sp_, theta_, psi_);
    velocity_from_streamfunction(grid_, sp_, psi_, u1_, u2_);
}

void InfinitePrSolver::step_with_drift(const Field* theta_drift,
                                       std::vector<double>* theta_gaussians) {
    require_cfl(grid_, u1_, u2_, cfg_.dt, cfg_.cfl_max);

    advect(grid_, sp_, u1_, u2_, theta_, scratch_);
    for (size_t i = 0; i < tendency_.size(); ++i)
        tendency_.v[i] = -scratch_.v[i] + params_.ra_tilde * u2_.v[i];
    if (theta_drift)
        for (size_t i = 0; i < tendency_.size(); ++i)
            tendency_.v[i] += theta_drift->v[i];

    scheme_.advance(sp_, theta_, tendency_);
    if (basis_)
        add_temperature_increment(*basis_, grid_, cfg_.dt, stream_, step_, theta_,
                                  theta_gaussians);

    enslave_velocity();
    ++step_;
    t_ += cfg_.dt;
    require_finite(grid_, theta_, step_, "theta");
}

EnergyDiagnostics InfinitePrSolver::diagnostics() {
    EnergyDiagnostics d;
    d.t = t_;
    d.norm_u_sq = velocity_inner(grid_, u1_, u2_, u1_, u2_);
    d.norm_theta_sq = l2_norm_sq(grid_, theta_);
    d.grad_u_sq = grad_norm_sq_velocity(grid_, sp_, u1_, u2_);
    d.grad_theta_sq = grad_norm_sq(grid_, sp_, theta_);
    d.theta_l4 = lp_norm(grid_, theta_, 4.0);
    d.flux_term = l2_inner(grid_, theta_, u2_);
    return d;
}

InfinitePrSolver::State InfinitePrSolver::save_state() const {
    State s;
    s.t = t_;
    s.step = step_;
    s.theta = theta_;
    s.theta_prev = scheme_.previous_tendency();
    s.has_history = scheme_.has_history();
    return s;
}

void InfinitePrSolver::restore_state(const State& s) {
    check_shape(grid_, s.theta, "restore_state theta");
    theta_ = s.theta;
    scheme_.set_history(s.theta_prev, s.has_history);
    t_ = s.t;
    step_ = s.step;
    enslave_velocity();
}

} // namespace rbc
