#include "rbc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace rbc {

TimeAverager::TimeAverager(double t_start, std::vector<std::string> names)
    : names_(std::move(names)), t_start_(t_start), t_now_(t_start) {
    if (names_.empty())
        throw std::invalid_argument("TimeAverager needs at least one functional");
    integral_.assign(names_.size(), 0.0);
}

void TimeAverager::set_horizon(double t_end, int n_batches) {
    if (!(t_end > t_start_))
        throw std::invalid_argument("averaging horizon must exceed t_start");
    if (n_batches < 2)
        throw std::invalid_argument("need at least 2 batches");
    if (covered_ > 0.0)
        throw std::logic_error("set_horizon must precede sampling");
    t_end_ = t_end;
    n_batches_ = n_batches;
    batch_integral_.assign(static_cast<size_t>(n_batches), std::vector<double>(names_.size(), 0.0));
    batch_cover_.assign(static_cast<size_t>(n_batches), 0.0);
}

size_t TimeAverager::index_of(const std::string& name) const {
    for (size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return i;
    throw std::invalid_argument("unknown functional: " + name);
}

void TimeAverager::integrate(double ta, const std::vector<double>& va, double tb,
                             const std::vector<double>& vb) {
    const double dt = tb - ta;
    if (dt <= 0.0) return;
    covered_ += dt;
    for (size_t i = 0; i < names_.size(); ++i)
        integral_[i] += 0.5 * (va[i] + vb[i]) * dt;

    if (n_batches_ == 0) return;
    const double len = (t_end_ - t_start_) / n_batches_;
    // Split the segment at batch boundaries; values vary linearly inside it.
    double t0 = ta;
    std::vector<double> v0 = va;
    while (t0 < tb) {
        int b = static_cast<int>(std::floor((t0 - t_start_) / len));
        b = std::clamp(b, 0, n_batches_ - 1);
        double t1 = std::min(tb, t_start_ + (b + 1) * len);
        if (t1 <= t0) t1 = tb;
        const double w = (t1 - ta) / dt;
        std::vector<double> v1(names_.size());
        for (size_t i = 0; i < names_.size(); ++i)
            v1[i] = va[i] + w * (vb[i] - va[i]);
        auto& acc = batch_integral_[static_cast<size_t>(b)];
        for (size_t i = 0; i < names_.size(); ++i)
            acc[i] += 0.5 * (v0[i] + v1[i]) * (t1 - t0);
        batch_cover_[static_cast<size_t>(b)] += t1 - t0;
        t0 = t1;
        v0 = v1;
    }
}

void TimeAverager::add_sample(double t, const std::vector<double>& values) {
    if (values.size() != names_.size())
        throw std::invalid_argument("sample arity does not match registered functionals");
    if (have_prev_ && t < prev_t_)
        throw std::invalid_argument("out-of-order timestamp in time average");
    if (have_prev_ && t > prev_t_) {
        double ta = prev_t_;
        std::vector<double> va = prev_values_;
        if (ta < t_start_ && t > t_start_) {
            const double w = (t_start_ - ta) / (t - ta);
            for (size_t i = 0; i < va.size(); ++i)
                va[i] = va[i] + w * (values[i] - va[i]);
            ta = t_start_;
        }
        if (t > t_start_) integrate(ta, va, t, values);
    }
    have_prev_ = true;
    prev_t_ = t;
    prev_values_ = values;
    t_now_ = std::max(t_now_, t);
}

double TimeAverager::average(size_t idx) const {
    if (idx >= names_.size()) throw std::out_of_range("functional index");
    if (!(covered_ > 0.0))
        throw std::runtime_error("empty averaging window: no samples past t_start");
    return integral_[idx] / covered_;
}

int TimeAverager::completed_batches() const {
    if (n_batches_ == 0) return 0;
    const double len = (t_end_ - t_start_) / n_batches_;
    int done = 0;
    for (int b = 0; b < n_batches_; ++b) {
        // A batch counts once its sub-window is covered to rounding.
        if (batch_cover_[static_cast<size_t>(b)] >= len * (1.0 - 1e-9))
            ++done;
        else
            break;
    }
    return done;
}

double TimeAverager::batch_mean(size_t idx, int b) const {
    if (idx >= names_.size()) throw std::out_of_range("functional index");
    if (b < 0 || b >= n_batches_) throw std::out_of_range("batch index");
    const double cover = batch_cover_[static_cast<size_t>(b)];
    if (!(cover > 0.0)) throw std::runtime_error("batch has no coverage");
    return batch_integral_[static_cast<size_t>(b)][idx] / cover;
}

TimeAverager::Snapshot TimeAverager::snapshot() const {
    Snapshot s;
    s.t_start = t_start_;
    s.t_end = t_end_;
    s.t_now = t_now_;
    s.covered = covered_;
    s.n_batches = n_batches_;
    s.have_prev = have_prev_;
    s.prev_t = prev_t_;
    s.prev_values = prev_values_;
    s.integral = integral_;
    for (const auto& row : batch_integral_)
        s.batch_integral.insert(s.batch_integral.end(), row.begin(), row.end());
    s.batch_cover = batch_cover_;
    return s;
}

void TimeAverager::restore(const Snapshot& s) {
    if (s.integral.size() != names_.size())
        throw std::invalid_argument("snapshot arity does not match registered functionals");
    t_start_ = s.t_start;
    t_end_ = s.t_end;
    t_now_ = s.t_now;
    covered_ = s.covered;
    n_batches_ = s.n_batches;
    have_prev_ = s.have_prev;
    prev_t_ = s.prev_t;
    prev_values_ = s.prev_values;
    integral_ = s.integral;
    batch_integral_.assign(static_cast<size_t>(std::max(0, n_batches_)),
                           std::vector<double>(names_.size(), 0.0));
    if (s.batch_integral.size() != names_.size() * static_cast<size_t>(std::max(0, n_batches_)))
        throw std::invalid_argument("snapshot batch table has wrong shape");
    for (int b = 0; b < n_batches_; ++b)
        for (size_t i = 0; i < names_.size(); ++i)
            batch_integral_[static_cast<size_t>(b)][i] =
                s.batch_integral[static_cast<size_t>(b) * names_.size() + i];
    batch_cover_ = s.batch_cover;
    if (n_batches_ > 0 && batch_cover_.size() != static_cast<size_t>(n_batches_))
        throw std::invalid_argument("snapshot batch cover has wrong shape");
}

BatchStats batch_statistics(const TimeAverager& avg, size_t idx, int min_batches) {
    const int done = avg.completed_batches();
    if (done < min_batches)
        throw std::runtime_error("window too short: " + std::to_string(done) +
                                 " completed batches, need " + std::to_string(min_batches));
    double mean = 0.0;
    for (int b = 0; b < done; ++b) mean += avg.batch_mean(idx, b);
    mean /= done;
    double var = 0.0;
    for (int b = 0; b < done; ++b) {
        const double d = avg.batch_mean(idx, b) - mean;
        var += d * d;
    }
    var /= (done - 1);
    boost::math::students_t dist(done - 1);
    const double tq = boost::math::quantile(dist, 0.975);
    BatchStats out;
    out.mean = mean;
    out.halfwidth = tq * std::sqrt(var / done);
    out.batches = done;
    return out;
}

NusseltEstimates nusselt_estimates(const TimeAverager& avg, const NondimParams& params) {
    const double area = params.aspect;
    const double rt = params.ra_tilde;
    const BatchStats flux = batch_statistics(avg, avg.index_of("flux_term"), 8);
    const BatchStats gth = batch_statistics(avg, avg.index_of("grad_theta_sq"), 8);
    const BatchStats gu = batch_statistics(avg, avg.index_of("grad_u_sq"), 8);

    NusseltEstimates out;
    out.nu_flux = 1.0 + flux.mean / (rt * area);
    out.hw_flux = flux.halfwidth / (rt * area);
    const double denom_t = rt * rt * area;
    out.nu_grad_t = (gth.mean + denom_t) / denom_t - 0.5 / denom_t;
    out.hw_grad_t = gth.halfwidth / denom_t;
    out.nu_grad_u = gu.mean / (params.ra * rt * area) + 1.0;
    out.hw_grad_u = gu.halfwidth / (params.ra * rt * area);
    out.window = avg.window();
    out.batches = flux.batches;
    return out;
}

double background_bound(const NondimParams& params, const BackgroundProfile& profile) {
    const double area = params.aspect;
    const double rt2 = params.ra_tilde * params.ra_tilde;
    return 2.0 / rt2 * profile.grad_sq_integral() + 1.0 / (rt2 * area) - 1.0;
}

double pointwise_background_inequality(const Grid& g, Spectral& sp, const Field& theta,
                                       const Field& u1, const Field& u2,
                                       const BackgroundProfile& profile,
                                       const NondimParams& params) {
    check_shape(g, theta, "theta");
    check_shape(g, u1, "u1");
    check_shape(g, u2, "u2");
    // Fluctuation about the background: theta_f = T - tau = theta + conduction - tau.
    Field tf(g);
    for (int j = 0; j < g.nz; ++j) {
        const double z = g.z(j);
        const double shift = params.ra_tilde * (1.0 - z) - profile.tau(z);
        for (int i = 0; i < g.nx; ++i) tf(i, j) = theta(i, j) + shift;
    }
    Field prod(g);
    for (int j = 0; j < g.nz; ++j) {
        const double dt = profile.dtau(g.z(j));
        for (int i = 0; i < g.nx; ++i) prod(i, j) = u2(i, j) * dt * tf(i, j);
    }
    double coupling = 0.0;
    for (int j = 0; j < g.nz; ++j) {
        const double w = zweight(g, j);
        for (int i = 0; i < g.nx; ++i) coupling += prod(i, j) * w;
    }
    coupling *= g.dx;

    const double gu = std::sqrt(grad_norm_sq_velocity(g, sp, u1, u2));
    const double gt = std::sqrt(grad_norm_sq(g, sp, tf));
    return std::sqrt(params.ra_tilde / (2.0 * params.ra)) * gu * gt - std::abs(coupling);
}

std::vector<ExceedanceRow> martingale_exceedance_test(const std::vector<MartingaleTrace>& traces,
                                                      double gamma,
                                                      const std::vector<double>& k_list) {
    if (traces.size() < 100)
        throw std::runtime_error("underpowered: need at least 100 traces, got " +
                                 std::to_string(traces.size()));
    std::vector<double> sup(traces.size());
    for (size_t n = 0; n < traces.size(); ++n) {
        const auto& tr = traces[n];
        if (tr.m.size() != tr.quadratic_variation.size())
            throw std::invalid_argument("trace arrays differ in length");
        double s = 0.0; // the process starts at 0
        for (size_t i = 0; i < tr.m.size(); ++i)
            s = std::max(s, tr.m[i] - 0.5 * gamma * tr.quadratic_variation[i]);
        sup[n] = s;
    }
    std::vector<ExceedanceRow> out;
    out.reserve(k_list.size());
    for (double k : k_list) {
        ExceedanceRow row;
        row.k = k;
        row.traces = static_cast<int>(traces.size());
        for (double s : sup)
            if (s >= k) ++row.exceedances;
        row.frequency = static_cast<double>(row.exceedances) / traces.size();
        row.bound = std::exp(-gamma * k);
        const double p = std::min(1.0, row.bound);
        row.binomial_sigma = std::sqrt(p * (1.0 - p) / traces.size());
        out.push_back(row);
    }
    return out;
}

std::vector<MomentRow> exponential_moment_report(const std::vector<double>& samples,
                                                 const std::vector<double>& eta_list) {
    if (samples.size() < 2)
        throw std::invalid_argument("need at least 2 samples");
    const double n = static_cast<double>(samples.size());
    std::vector<MomentRow> out;
    out.reserve(eta_list.size());
    for (double eta : eta_list) {
        MomentRow row;
        row.eta = eta;
        if (eta == 0.0) {
            row.estimate = 1.0;
            row.jackknife_se = 0.0;
            out.push_back(row);
            continue;
        }
        double sum = 0.0;
        bool finite = true;
        std::vector<double> ex(samples.size());
        for (size_t i = 0; i < samples.size(); ++i) {
            ex[i] = std::exp(eta * samples[i]);
            if (!std::isfinite(ex[i])) finite = false;
            sum += ex[i];
        }
        if (!finite || !std::isfinite(sum)) {
            row.finite = false;
            row.estimate = std::numeric_limits<double>::infinity();
            row.jackknife_se = std::numeric_limits<double>::infinity();
            out.push_back(row);
            continue;
        }
        row.estimate = sum / n;
        // Jackknife over leave-one-out means.
        double jmean = 0.0;
        std::vector<double> loo(samples.size());
        for (size_t i = 0; i < samples.size(); ++i) {
            loo[i] = (sum - ex[i]) / (n - 1.0);
            jmean += loo[i];
        }
        jmean /= n;
        double jvar = 0.0;
        for (double v : loo) jvar += (v - jmean) * (v - jmean);
        row.jackknife_se = std::sqrt((n - 1.0) / n * jvar);
        out.push_back(row);
    }
    return out;
}

} // namespace rbc
