#include "rbc/coupling.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace rbc {

void CouplingConfig::validate(int n1_forced, int n2_forced, double pr, double dt) const {
    std::vector<std::string> errs;
    if (lambda1 < 0.0)
        errs.push_back("lambda1 must be >= 0");
    if (lambda2 < 0.0)
        errs.push_back("lambda2 must be >= 0");
    if (mode == Mode::case_ii && lambda1 != 0.0)
        errs.push_back("case_ii requires lambda1 = 0");
    if (n1_nudge < 0 || n2_nudge < 0)
        errs.push_back("nudge mode counts must be >= 0");
    if (!(r_budget > 0.0))
        errs.push_back("r_budget must be positive");
    if (lambda2 > 0.0 && n2_nudge > n2_forced)
        errs.push_back("Girsanov shift not representable: temperature nudge spans " +
                       std::to_string(n2_nudge) + " modes but only " + std::to_string(n2_forced) +
                       " are forced");
    if (lambda1 > 0.0 && n1_nudge > n1_forced)
        errs.push_back("Girsanov shift not representable: velocity nudge spans " +
                       std::to_string(n1_nudge) + " modes but only " + std::to_string(n1_forced) +
                       " are forced");
    if (lambda2 * dt > 0.5)
        errs.push_back("lambda2 * dt must be <= 0.5 (nudging is integrated explicitly)");
    if (pr * lambda1 * dt > 0.5)
        errs.push_back("pr * lambda1 * dt must be <= 0.5 (nudging is integrated explicitly)");
    if (!errs.empty()) {
        std::string msg = "invalid coupling configuration: ";
        for (size_t i = 0; i < errs.size(); ++i)
            msg += (i ? "; " : "") + errs[i];
        throw std::invalid_argument(msg);
    }
}

DecayEstimate estimate_decay(const std::vector<double>& t, const std::vector<double>& diff_sq,
                             double fit_window, double sync_eps) {
    if (t.size() != diff_sq.size())
        throw std::invalid_argument("estimate_decay: mismatched trace lengths");
    if (t.size() < 2)
        throw std::invalid_argument("estimate_decay: trace shorter than the fit window");
    if (!(fit_window > 0.0) || fit_window >= 1.0)
        throw std::invalid_argument("estimate_decay: fit_window must be in (0, 1)");

    DecayEstimate est;
    est.synced = diff_sq.back() < sync_eps;

    // Values at the rounding floor carry no slope information (a synchronized
    // pair sits at exactly zero), so they are excluded from the fit.
    constexpr double kFloor = 1e-28;
    const double t0 = t.back() - fit_window * (t.back() - t.front());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    size_t n = 0;
    for (size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t0 || !(diff_sq[i] > kFloor))
            continue;
        const double x = t[i];
        const double y = std::log(diff_sq[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
        ++n;
    }
    if (n < 2)
        return est; // degenerate: rate stays undefined
    const double denom = n * sxx - sx * sx;
    if (denom <= 0.0)
        return est;
    est.rate = (n * sxy - sx * sy) / denom;
    est.rate_defined = true;
    const double ss_tot = syy - sy * sy / n;
    if (ss_tot > 0.0) {
        const double ss_reg = est.rate * (sxy - sx * sy / n);
        est.r_squared = ss_reg / ss_tot;
    } else {
        est.r_squared = 0.0; // constant data: slope 0 explains nothing
    }
    return est;
}

void NoiseChecksum::absorb(const std::vector<double>& draws) {
    for (double d : draws) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, sizeof bits);
        for (int b = 0; b < 8; ++b) {
            h_ ^= (bits >> (8 * b)) & 0xffu;
            h_ *= 1099511628211ull;
        }
    }
}

bool GirsanovLedger::admit(double shift_norm_sq, double dt) {
    if (stopped_)
        return false;
    if (cost_ + shift_norm_sq * dt > budget_) {
        stopped_ = true;
        return false;
    }
    return true;
}

void GirsanovLedger::settle(const std::vector<double>& a, const std::vector<double>& draws,
                            double dt) {
    if (a.empty())
        return;
    if (a.size() != draws.size())
        throw std::invalid_argument("GirsanovLedger: shift and draw counts differ");
    const double sq = std::sqrt(dt);
    double a_sq = 0.0, a_dw = 0.0;
    for (size_t k = 0; k < a.size(); ++k) {
        a_sq += a[k] * a[k];
        a_dw += a[k] * sq * draws[k];
    }
    log_density_ += a_dw - 0.5 * a_sq * dt;
    cost_ += a_sq * dt;
}

// --- CoupledPair -------------------------------------------------------------

CoupledPair::CoupledPair(const Grid& g, const NondimParams& params, StepConfig cfg,
                         const NoiseBasis& temp_basis, const NoiseBasis* vel_basis,
                         const CouplingConfig& cc, WienerStream stream)
    : temp_basis_(temp_basis),
      vel_basis_(vel_basis),
      cc_(cc),
      primary_(g, params, cfg, &temp_basis, vel_basis, stream),
      nudged_(g, params, cfg, &temp_basis, vel_basis, stream),
      ledger_(cc.r_budget),
      phi_(g),
      v1_(g),
      v2_(g),
      theta_drift_(g),
      omega_drift_(g) {
    cc.validate(vel_basis ? vel_basis->size() : 0, temp_basis.size(), params.pr, cfg.dt);
    if (cc.lambda1 > 0.0 && primary_.velocity_noise_scale() == 0.0)
        throw std::invalid_argument("Girsanov shift not representable: velocity nudging "
                                    "requires nonzero velocity forcing");
}

void CoupledPair::set_primary(const Field& theta, const Field& omega) {
    primary_.set_theta(theta);
    primary_.set_omega(omega);
}

void CoupledPair::set_nudged(const Field& theta, const Field& omega) {
    nudged_.set_theta(theta);
    nudged_.set_omega(omega);
}

double CoupledPair::diff_theta_sq() {
    for (size_t i = 0; i < phi_.size(); ++i)
        phi_.v[i] = nudged_.theta().v[i] - primary_.theta().v[i];
    return l2_norm_sq(primary_.grid(), phi_);
}

double CoupledPair::diff_velocity_sq() {
    for (size_t i = 0; i < v1_.size(); ++i) {
        v1_.v[i] = nudged_.u1().v[i] - primary_.u1().v[i];
        v2_.v[i] = nudged_.u2().v[i] - primary_.u2().v[i];
    }
    return velocity_inner(primary_.grid(), v1_, v2_, v1_, v2_);
}

CouplingTraceRow CoupledPair::step() {
    const Grid& g = primary_.grid();
    const bool active = !ledger_.stopped();
    bool nudge_theta = active && cc_.lambda2 > 0.0 && cc_.n2_nudge > 0;
    bool nudge_vel = active && cc_.lambda1 > 0.0 && cc_.n1_nudge > 0;

    std::vector<double> shift;
    size_t n_theta_shift = 0;
    if (nudge_theta || nudge_vel) {
        if (nudge_theta) {
            for (size_t i = 0; i < phi_.size(); ++i)
                phi_.v[i] = nudged_.theta().v[i] - primary_.theta().v[i];
            const std::vector<double> c = modal_coefficients(temp_basis_, g, phi_, cc_.n2_nudge);
            theta_drift_.zero();
            for (int k = 0; k < cc_.n2_nudge; ++k) {
                const double w = -cc_.lambda2 * c[k];
                const double* s = temp_basis_.shape[k].data();
                for (size_t i = 0; i < theta_drift_.size(); ++i)
                    theta_drift_.v[i] += w * s[i];
                shift.push_back(-cc_.lambda2 * c[k] / temp_basis_.modes[k].amplitude);
            }
        }
        n_theta_shift = shift.size();
        if (nudge_vel) {
            for (size_t i = 0; i < v1_.size(); ++i) {
                v1_.v[i] = nudged_.u1().v[i] - primary_.u1().v[i];
                v2_.v[i] = nudged_.u2().v[i] - primary_.u2().v[i];
            }
            const std::vector<double> d =
                modal_coefficients_velocity(*vel_basis_, g, v1_, v2_, cc_.n1_nudge);
            const double pr = primary_.params().pr;
            const double scale = primary_.velocity_noise_scale();
            omega_drift_.zero();
            for (int k = 0; k < cc_.n1_nudge; ++k) {
                const double w = -pr * cc_.lambda1 * d[k];
                const double* s = vel_basis_->omega_source[k].data();
                for (size_t i = 0; i < omega_drift_.size(); ++i)
                    omega_drift_.v[i] += w * s[i];
                shift.push_back(-cc_.lambda1 * d[k] / scale);
            }
        }
        double shift_sq = 0.0;
        for (double a : shift) shift_sq += a * a;
        if (!ledger_.admit(shift_sq, primary_.config().dt)) {
            // Budget exhausted: the nudge never acts again.
            nudge_theta = nudge_vel = false;
            shift.clear();
            n_theta_shift = 0;
        }
    }

    std::vector<double> gt_p, gv_p, gt_n, gv_n;
    primary_.step_with_drift(nullptr, nullptr, &gt_p, &gv_p);
    nudged_.step_with_drift(nudge_theta ? &theta_drift_ : nullptr,
                            nudge_vel ? &omega_drift_ : nullptr, &gt_n, &gv_n);
    checksum_primary_.absorb(gt_p);
    checksum_primary_.absorb(gv_p);
    checksum_nudged_.absorb(gt_n);
    checksum_nudged_.absorb(gv_n);

    if (!shift.empty()) {
        std::vector<double> draws;
        draws.reserve(shift.size());
        for (size_t k = 0; k < n_theta_shift; ++k)
            draws.push_back(gt_n[k]);
        for (size_t k = 0; k < shift.size() - n_theta_shift; ++k)
            draws.push_back(gv_n[k]);
        ledger_.settle(shift, draws, primary_.config().dt);
    }

    CouplingTraceRow row;
    row.t = primary_.time();
    row.diff_theta_sq = diff_theta_sq();
    row.diff_u_sq = diff_velocity_sq();
    row.girsanov_cost = ledger_.cost();
    row.log_density = ledger_.log_density();
    row.stopped = ledger_.stopped();
    return row;
}

// --- InfPrCoupledPair ---------------------------------------------------------

InfPrCoupledPair::InfPrCoupledPair(const Grid& g, const NondimParams& params, StepConfig cfg,
                                   const NoiseBasis& temp_basis, const CouplingConfig& cc,
                                   WienerStream stream)
    : temp_basis_(temp_basis),
      cc_(cc),
      primary_(g, params, cfg, &temp_basis, stream),
      nudged_(g, params, cfg, &temp_basis, stream),
      ledger_(cc.r_budget),
      phi_(g),
      theta_drift_(g) {
    cc.validate(0, temp_basis.size(), params.pr, cfg.dt);
    if (cc.lambda1 != 0.0)
        throw std::invalid_argument(
            "infinite-Pr coupling has no velocity equation; lambda1 must be 0");
}

void InfPrCoupledPair::set_primary(const Field& theta) { primary_.set_theta(theta); }
void InfPrCoupledPair::set_nudged(const Field& theta) { nudged_.set_theta(theta); }

double InfPrCoupledPair::diff_theta_sq() {
    for (size_t i = 0; i < phi_.size(); ++i)
        phi_.v[i] = nudged_.theta().v[i] - primary_.theta().v[i];
    return l2_norm_sq(primary_.grid(), phi_);
}

double InfPrCoupledPair::diff_velocity_sq() {
    Field w1(primary_.grid()), w2(primary_.grid());
    for (size_t i = 0; i < w1.size(); ++i) {
        w1.v[i] = nudged_.u1().v[i] - primary_.u1().v[i];
        w2.v[i] = nudged_.u2().v[i] - primary_.u2().v[i];
    }
    return velocity_inner(primary_.grid(), w1, w2, w1, w2);
}

CouplingTraceRow InfPrCoupledPair::step() {
    const Grid& g = primary_.grid();
    bool nudge_theta = !ledger_.stopped() && cc_.lambda2 > 0.0 && cc_.n2_nudge > 0;

    std::vector<double> shift;
    if (nudge_theta) {
        for (size_t i = 0; i < phi_.size(); ++i)
            phi_.v[i] = nudged_.theta().v[i] - primary_.theta().v[i];
        const std::vector<double> c = modal_coefficients(temp_basis_, g, phi_, cc_.n2_nudge);
        theta_drift_.zero();
        for (int k = 0; k < cc_.n2_nudge; ++k) {
            const double w = -cc_.lambda2 * c[k];
            const double* s = temp_basis_.shape[k].data();
            for (size_t i = 0; i < theta_drift_.size(); ++i)
                theta_drift_.v[i] += w * s[i];
            shift.push_back(-cc_.lambda2 * c[k] / temp_basis_.modes[k].amplitude);
        }
        double shift_sq = 0.0;
        for (double a : shift) shift_sq += a * a;
        if (!ledger_.admit(shift_sq, primary_.config().dt)) {
            nudge_theta = false;
            shift.clear();
        }
    }

    std::vector<double> g_p, g_n;
    primary_.step_with_drift(nullptr, &g_p);
    nudged_.step_with_drift(nudge_theta ? &theta_drift_ : nullptr, &g_n);
    checksum_primary_.absorb(g_p);
    checksum_nudged_.absorb(g_n);

    if (!shift.empty()) {
        std::vector<double> draws(g_n.begin(), g_n.begin() + static_cast<long>(shift.size()));
        ledger_.settle(shift, draws, primary_.config().dt);
    }

    CouplingTraceRow row;
    row.t = primary_.time();
    row.diff_theta_sq = diff_theta_sq();
    row.diff_u_sq = diff_velocity_sq();
    row.girsanov_cost = ledger_.cost();
    row.log_density = ledger_.log_density();
    row.stopped = ledger_.stopped();
    return row;
}

} // namespace rbc
