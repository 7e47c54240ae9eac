#pragma once

// Time averaging with batch-means error bars, the three Nusselt estimators
// and their cross-checks, the background-method bound, and the empirical
// martingale / exponential-moment monitors.

#include <cstdint>
#include <string>
#include <vector>

#include "rbc/grid.hpp"
#include "rbc/operators.hpp"
#include "rbc/params.hpp"

namespace rbc {

// Trapezoidal running averages of named functionals over t > t_start, with
// optional equal sub-window (batch) integrals for Monte-Carlo error bars.
// All accumulators are plain sums, so the state checkpoints exactly.
class TimeAverager {
  public:
    TimeAverager(double t_start, std::vector<std::string> names);

    // Fixes the averaging horizon and enables batch means.
    void set_horizon(double t_end, int n_batches);

    // Samples must arrive in nondecreasing time order (equal stamps add a
    // zero-length segment); rows at or before t_start only seed interpolation.
    void add_sample(double t, const std::vector<double>& values);

    size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    size_t index_of(const std::string& name) const;

    bool has_window() const { return covered_ > 0.0; }
    double window() const { return covered_; }
    double time() const { return t_now_; }
    double t_start() const { return t_start_; }

    double average(size_t idx) const;
    double average(const std::string& name) const { return average(index_of(name)); }

    int batch_count() const { return n_batches_; }
    int completed_batches() const;
    double batch_mean(size_t idx, int b) const;

    struct Snapshot {
        double t_start = 0.0, t_end = 0.0, t_now = 0.0, covered = 0.0;
        int n_batches = 0;
        bool have_prev = false;
        double prev_t = 0.0;
        std::vector<double> prev_values;
        std::vector<double> integral;
        std::vector<double> batch_integral; // flattened [batch][functional]
        std::vector<double> batch_cover;
    };
    Snapshot snapshot() const;
    void restore(const Snapshot& s);

  private:
    void integrate(double ta, const std::vector<double>& va, double tb,
                   const std::vector<double>& vb);

    std::vector<std::string> names_;
    double t_start_;
    double t_end_ = 0.0;
    int n_batches_ = 0;
    bool have_prev_ = false;
    double prev_t_ = 0.0;
    std::vector<double> prev_values_;
    double t_now_ = 0.0;
    double covered_ = 0.0;
    std::vector<double> integral_;
    std::vector<std::vector<double>> batch_integral_;
    std::vector<double> batch_cover_;
};

// Mean over completed batches plus the Student-t 95% halfwidth; throws
// "window too short" when fewer than min_batches batches have completed.
struct BatchStats {
    double mean = 0.0;
    double halfwidth = 0.0;
    int batches = 0;
};
BatchStats batch_statistics(const TimeAverager& avg, size_t idx, int min_batches);

struct NusseltEstimates {
    double nu_flux = 0.0;
    double nu_grad_t = 0.0;
    double nu_grad_u = 0.0;
    double hw_flux = 0.0;
    double hw_grad_t = 0.0;
    double hw_grad_u = 0.0;
    double window = 0.0;
    int batches = 0;
};

// Requires functionals "flux_term", "grad_theta_sq", "grad_u_sq".
//   nu_flux   = 1 + <flux>/(Ra~ |D|)
//   nu_grad_t = (<|grad theta|^2> + Ra~^2 |D|)/(Ra~^2 |D|) - 1/(2 Ra~^2 |D|)
//   nu_grad_u = <|grad u|^2>/(Ra Ra~ |D|) + 1
// (the temperature-gradient form uses |grad T|^2 = |grad theta|^2 + Ra~^2 |D|,
// which is exact for wall-vanishing theta and keeps the conduction state
// exact; the -1/(2 Ra~^2 |D|) offset is the Ito correction).
NusseltEstimates nusselt_estimates(const TimeAverager& avg, const NondimParams& params);

// (2/Ra~^2) integral of (tau')^2 + 1/(Ra~^2 |D|) - 1, closed form.
double background_bound(const NondimParams& params, const BackgroundProfile& profile);

// sqrt(Ra~/(2 Ra)) |grad u| |grad theta_f| - |integral of u2 tau' theta_f|
// with theta_f = T - tau; nonnegative up to discretization for the profile's
// delta choice.
double pointwise_background_inequality(const Grid& g, Spectral& sp, const Field& theta,
                                       const Field& u1, const Field& u2,
                                       const BackgroundProfile& profile,
                                       const NondimParams& params);

// One trajectory's cumulative martingale and quadratic variation series.
struct MartingaleTrace {
    std::vector<double> m;
    std::vector<double> quadratic_variation;
};

struct ExceedanceRow {
    double k = 0.0;
    double frequency = 0.0;
    double bound = 0.0;       // e^{-gamma k}
    double binomial_sigma = 0.0;
    int exceedances = 0;
    int traces = 0;
};

// Empirical frequency of sup_t (M_t - (gamma/2) <M>_t) >= k per k.  Throws
// "underpowered" with fewer than 100 traces.
std::vector<ExceedanceRow> martingale_exceedance_test(const std::vector<MartingaleTrace>& traces,
                                                      double gamma,
                                                      const std::vector<double>& k_list);

struct MomentRow {
    double eta = 0.0;
    double estimate = 0.0;
    double jackknife_se = 0.0;
    bool finite = true; // false: "eta too large", accumulation overflowed
};

// Empirical E exp(eta * s) over the samples with jackknife standard error.
std::vector<MomentRow> exponential_moment_report(const std::vector<double>& samples,
                                                 const std::vector<double>& eta_list);

} // namespace rbc
