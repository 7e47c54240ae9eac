#pragma once

// Paired trajectories under one Wiener stream with low-mode nudging, the
// Girsanov shift cost/log-density ledger with its budget latch, and the
// decay-rate fit used to decide synchronization.

#include <cstdint>
#include <vector>

#include "rbc/infinite_pr.hpp"
#include "rbc/solver.hpp"

namespace rbc {

struct CouplingConfig {
    enum class Mode { case_i, case_ii };
    Mode mode = Mode::case_ii;
    double lambda1 = 0.0; // velocity nudge strength
    double lambda2 = 0.0; // temperature nudge strength
    int n1_nudge = 0;     // velocity modes nudged
    int n2_nudge = 0;     // temperature modes nudged
    double r_budget = 1e6;

    // Throws listing every violation; n*_forced are the forcing-basis sizes.
    void validate(int n1_forced, int n2_forced, double pr, double dt) const;
};

struct CouplingTraceRow {
    double t = 0.0;
    double diff_u_sq = 0.0;
    double diff_theta_sq = 0.0;
    double girsanov_cost = 0.0;
    double log_density = 0.0;
    bool stopped = false;
};

struct DecayEstimate {
    double rate = 0.0;
    double r_squared = 0.0;
    bool synced = false;
    bool rate_defined = false;
};

// Least-squares slope of log(diff_sq) over the trailing fit_window fraction
// of the time span.  Rows at or below the resolution floor are excluded (a
// synchronized pair produces exact zeros); fewer than two usable rows leave
// the rate undefined.
DecayEstimate estimate_decay(const std::vector<double>& t, const std::vector<double>& diff_sq,
                             double fit_window, double sync_eps);

// FNV-1a over the bit patterns of consumed Gaussian draws; used to assert the
// two members of a pair saw identical noise.
class NoiseChecksum {
  public:
    void absorb(const std::vector<double>& draws);
    std::uint64_t value() const { return h_; }

  private:
    std::uint64_t h_ = 14695981039346656037ull;
};

// Shift bookkeeping: cost integral, log-density, and the permanent latch.  A
// step is admitted only if its cost increment fits inside the budget, so the
// accumulated cost never exceeds R and the stopped flag certifies the
// exp(R/2) Novikov bound directly.
class GirsanovLedger {
  public:
    explicit GirsanovLedger(double r_budget) : budget_(r_budget) {}

    bool stopped() const { return stopped_; }
    double cost() const { return cost_; }
    double log_density() const { return log_density_; }

    // Ask before applying the shift: true admits the step, false latches the
    // stop permanently (the increment would burst the budget).
    bool admit(double shift_norm_sq, double dt);
    // Accumulate an admitted step: a = modal shift components, draws = the
    // matching Gaussians.
    void settle(const std::vector<double>& a, const std::vector<double>& draws, double dt);

  private:
    double budget_;
    double cost_ = 0.0;
    double log_density_ = 0.0;
    bool stopped_ = false;
};

// Finite-Prandtl coupled pair.  The primary member evolves freely; the nudged
// member receives -lambda1 P_N1(u~ - u) in the momentum equation (vorticity
// form) and -lambda2 P_N2(theta~ - theta) in the temperature equation while
// the budget lasts.
class CoupledPair {
  public:
    CoupledPair(const Grid& g, const NondimParams& params, StepConfig cfg,
                const NoiseBasis& temp_basis, const NoiseBasis* vel_basis,
                const CouplingConfig& cc, WienerStream stream);

    void set_primary(const Field& theta, const Field& omega);
    void set_nudged(const Field& theta, const Field& omega);

    CouplingTraceRow step();

    const BoussinesqSolver& primary() const { return primary_; }
    const BoussinesqSolver& nudged() const { return nudged_; }
    const GirsanovLedger& ledger() const { return ledger_; }
    std::uint64_t primary_noise_checksum() const { return checksum_primary_.value(); }
    std::uint64_t nudged_noise_checksum() const { return checksum_nudged_.value(); }
    double diff_theta_sq();
    double diff_velocity_sq();

  private:
    const NoiseBasis& temp_basis_;
    const NoiseBasis* vel_basis_;
    CouplingConfig cc_;
    BoussinesqSolver primary_, nudged_;
    GirsanovLedger ledger_;
    NoiseChecksum checksum_primary_, checksum_nudged_;
    Field phi_, v1_, v2_, theta_drift_, omega_drift_;
};

// Infinite-Prandtl coupled pair (temperature nudging only).
class InfPrCoupledPair {
  public:
    InfPrCoupledPair(const Grid& g, const NondimParams& params, StepConfig cfg,
                     const NoiseBasis& temp_basis, const CouplingConfig& cc, WienerStream stream);

    void set_primary(const Field& theta);
    void set_nudged(const Field& theta);

    CouplingTraceRow step();

    const InfinitePrSolver& primary() const { return primary_; }
    const InfinitePrSolver& nudged() const { return nudged_; }
    const GirsanovLedger& ledger() const { return ledger_; }
    std::uint64_t primary_noise_checksum() const { return checksum_primary_.value(); }
    std::uint64_t nudged_noise_checksum() const { return checksum_nudged_.value(); }
    double diff_theta_sq();
    double diff_velocity_sq();

  private:
    const NoiseBasis& temp_basis_;
    CouplingConfig cc_;
    InfinitePrSolver primary_, nudged_;
    GirsanovLedger ledger_;
    NoiseChecksum checksum_primary_, checksum_nudged_;
    Field phi_, theta_drift_;
};

} // namespace rbc
