#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "rbc/philox.hpp"
#include "rbc/solver.hpp"
#include "rbc/stats.hpp"

using namespace rbc;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string thrown_message(const std::function<void()>& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

// --- time averaging -------------------------------------------------------------

TEST(TimeAverager, ConstantFunctionalIsExact) {
    TimeAverager avg(0.0, {"f"});
    for (int k = 0; k <= 16; ++k)
        avg.add_sample(k / 16.0, {3.5});
    EXPECT_DOUBLE_EQ(avg.average("f"), 3.5);
    EXPECT_DOUBLE_EQ(avg.window(), 1.0);
}

TEST(TimeAverager, LinearFunctionalAveragesToMidpoint) {
    TimeAverager avg(0.0, {"f"});
    for (int k = 0; k <= 16; ++k)
        avg.add_sample(k / 16.0, {k / 16.0});
    EXPECT_DOUBLE_EQ(avg.average("f"), 0.5);
}

TEST(TimeAverager, IrregularSamplingMatchesQuadratureOracle) {
    TimeAverager avg(0.0, {"f", "g"});
    std::vector<double> ts;
    for (int k = 0; k <= 400; ++k)
        ts.push_back(2.0 * std::sqrt(k / 400.0)); // clustered near t = 0
    long double int_f = 0.0L, int_g = 0.0L, span = 0.0L;
    double prev_t = 0.0, prev_f = 0.0, prev_g = 0.0;
    for (size_t k = 0; k < ts.size(); ++k) {
        const double t = ts[k];
        const double f = std::sin(3.0 * t) + 2.0;
        const double g = std::exp(-t) * std::cos(t);
        avg.add_sample(t, {f, g});
        if (k > 0) {
            const long double dt = (long double)t - prev_t;
            int_f += 0.5L * ((long double)prev_f + f) * dt;
            int_g += 0.5L * ((long double)prev_g + g) * dt;
            span += dt;
        }
        prev_t = t;
        prev_f = f;
        prev_g = g;
    }
    EXPECT_NEAR(avg.average("f"), (double)(int_f / span), 1e-12 * std::abs((double)(int_f / span)));
    EXPECT_NEAR(avg.average("g"), (double)(int_g / span), 1e-12);
}

TEST(TimeAverager, BurnInBoundaryIsInterpolated) {
    // f = t sampled across the burn-in edge: the average over [1, 2] is 1.5
    // exactly because both the interpolation and the trapezoid are linear.
    TimeAverager avg(1.0, {"f"});
    avg.add_sample(0.4, {0.4});
    avg.add_sample(1.6, {1.6});
    avg.add_sample(2.0, {2.0});
    EXPECT_DOUBLE_EQ(avg.average("f"), 1.5);
    EXPECT_DOUBLE_EQ(avg.window(), 1.0);
}

TEST(TimeAverager, RepeatedTimestampsAddNothing) {
    TimeAverager avg(0.0, {"f"});
    avg.add_sample(0.0, {1.0});
    avg.add_sample(0.5, {1.0});
    const double before = avg.window();
    avg.add_sample(0.5, {57.0}); // zero-length segment: value replaced, nothing integrated
    EXPECT_DOUBLE_EQ(avg.window(), before);
    EXPECT_DOUBLE_EQ(avg.average("f"), 1.0);
}

TEST(TimeAverager, GuardsRejectMalformedUse) {
    TimeAverager avg(0.0, {"f"});
    avg.add_sample(1.0, {2.0});
    EXPECT_NE(thrown_message([&] { avg.add_sample(0.5, {2.0}); })
                  .find("out-of-order timestamp"),
              std::string::npos);
    EXPECT_THROW(avg.add_sample(2.0, {1.0, 2.0}), std::invalid_argument);
    EXPECT_NE(thrown_message([&] { (void)avg.index_of("bogus"); }).find("unknown functional"),
              std::string::npos);
    TimeAverager empty(0.0, {"f"});
    EXPECT_NE(thrown_message([&] { (void)empty.average("f"); }).find("empty averaging window"),
              std::string::npos);
    EXPECT_THROW(TimeAverager(0.0, {}), std::invalid_argument);
}

TEST(TimeAverager, AverageIsLinearInFunctionals) {
    // avg(2f + 3g) must equal 2 avg(f) + 3 avg(g) to rounding.
    TimeAverager avg(0.0, {"f", "g", "h"});
    WienerStream ws(51, 0);
    double t = 0.0;
    for (int k = 0; k < 200; ++k) {
        const double f = ws.gaussian(k, kChannelTest, 0);
        const double g = ws.gaussian(k, kChannelTest, 1);
        avg.add_sample(t, {f, g, 2.0 * f + 3.0 * g});
        t += 0.01 + 0.005 * std::abs(ws.gaussian(k, kChannelTest, 2));
    }
    const double lhs = avg.average("h");
    const double rhs = 2.0 * avg.average("f") + 3.0 * avg.average("g");
    EXPECT_NEAR(lhs, rhs, 1e-13 * (std::abs(lhs) + 1.0));
}

TEST(TimeAverager, SnapshotRestoreContinuesExactly) {
    const std::vector<std::string> names = {"a", "b"};
    TimeAverager live(0.2, names);
    live.set_horizon(2.2, 4);
    auto feed = [](TimeAverager& av, double t) {
        av.add_sample(t, {std::sin(t), std::cos(2.0 * t)});
    };
    feed(live, 0.0);
    feed(live, 0.3);
    feed(live, 0.7);
    const TimeAverager::Snapshot snap = live.snapshot();

    TimeAverager resumed(0.0, names);
    resumed.restore(snap);
    for (double t : {1.1, 1.6, 2.2}) {
        feed(live, t);
        feed(resumed, t);
    }
    EXPECT_EQ(live.average("a"), resumed.average("a"));
    EXPECT_EQ(live.average("b"), resumed.average("b"));
    EXPECT_EQ(live.window(), resumed.window());
    EXPECT_EQ(live.completed_batches(), resumed.completed_batches());
    for (int b = 0; b < live.completed_batches(); ++b)
        EXPECT_EQ(live.batch_mean(0, b), resumed.batch_mean(0, b));
}

TEST(TimeAverager, SegmentsSplitExactlyAtBatchBoundaries) {
    // v = 2t over [0, 2] with two batches: one sample segment spans both, and
    // the split must integrate each half of the linear ramp exactly.
    TimeAverager avg(0.0, {"f"});
    avg.set_horizon(2.0, 2);
    avg.add_sample(0.0, {0.0});
    avg.add_sample(2.0, {4.0});
    ASSERT_EQ(avg.completed_batches(), 2);
    EXPECT_DOUBLE_EQ(avg.batch_mean(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(avg.batch_mean(0, 1), 3.0);
    EXPECT_DOUBLE_EQ(avg.average("f"), 2.0);
}

TEST(TimeAverager, CompletedBatchesRequireFullCoverage) {
    TimeAverager avg(0.0, {"f"});
    avg.set_horizon(2.0, 2);
    avg.add_sample(0.0, {1.0});
    avg.add_sample(1.2, {1.0});
    EXPECT_EQ(avg.completed_batches(), 1);
    avg.add_sample(2.0, {1.0});
    EXPECT_EQ(avg.completed_batches(), 2);
}

TEST(TimeAverager, HorizonGuards) {
    TimeAverager avg(1.0, {"f"});
    EXPECT_THROW(avg.set_horizon(0.5, 4), std::invalid_argument);
    EXPECT_THROW(avg.set_horizon(2.0, 1), std::invalid_argument);
    TimeAverager sampled(0.0, {"f"});
    sampled.add_sample(0.0, {1.0});
    sampled.add_sample(1.0, {1.0});
    EXPECT_THROW(sampled.set_horizon(2.0, 4), std::logic_error);
}

// --- batch statistics -------------------------------------------------------------

TimeAverager averager_with_batch_means(const std::vector<double>& means) {
    TimeAverager avg(0.0, {"f"});
    avg.set_horizon(static_cast<double>(means.size()), static_cast<int>(means.size()));
    for (size_t b = 0; b < means.size(); ++b) {
        avg.add_sample(static_cast<double>(b), {means[b]});
        avg.add_sample(static_cast<double>(b + 1), {means[b]});
        if (b + 1 < means.size())
            avg.add_sample(static_cast<double>(b + 1), {means[b + 1]}); // jump
    }
    return avg;
}

TEST(BatchStatistics, HalfwidthMatchesStudentTFixture) {
    TimeAverager avg = averager_with_batch_means({1.0, 2.0, 3.0, 4.0});
    ASSERT_EQ(avg.completed_batches(), 4);
    const BatchStats bs = batch_statistics(avg, 0, 4);
    EXPECT_DOUBLE_EQ(bs.mean, 2.5);
    EXPECT_EQ(bs.batches, 4);
    // 97.5% Student-t quantile at 3 dof, frozen from an independent evaluation.
    const double tq = 3.182446305283709592723;
    const double want = tq * std::sqrt((5.0 / 3.0) / 4.0);
    EXPECT_NEAR(bs.halfwidth, want, 1e-12 * want);
}

TEST(BatchStatistics, ShortWindowThrowsWithCounts) {
    TimeAverager avg(0.0, {"f"});
    avg.set_horizon(4.0, 4);
    avg.add_sample(0.0, {1.0});
    avg.add_sample(2.2, {1.0});
    EXPECT_NE(thrown_message([&] { batch_statistics(avg, 0, 8); })
                  .find("window too short: 2 completed batches, need 8"),
              std::string::npos);
}

// --- Nusselt estimators -------------------------------------------------------------

TimeAverager conduction_averager(double flux, double gth, double gu) {
    TimeAverager avg(0.0, {"flux_term", "grad_theta_sq", "grad_u_sq"});
    avg.set_horizon(8.0, 8);
    for (int k = 0; k <= 16; ++k)
        avg.add_sample(0.5 * k, {flux, gth, gu});
    return avg;
}

TEST(Nusselt, ConductionStateIsExact) {
    NondimParams p;
    p.ra = 100.0;
    p.ra_tilde = 3.0;
    p.aspect = 2.0;
    TimeAverager avg = conduction_averager(0.0, 0.0, 0.0);
    const NusseltEstimates nu = nusselt_estimates(avg, p);
    EXPECT_DOUBLE_EQ(nu.nu_flux, 1.0);
    EXPECT_DOUBLE_EQ(nu.nu_grad_u, 1.0);
    // The temperature-gradient estimator keeps its Ito offset in conduction.
    EXPECT_DOUBLE_EQ(nu.nu_grad_t, 1.0 - 0.5 / (3.0 * 3.0 * 2.0));
    EXPECT_EQ(nu.hw_flux, 0.0);
    EXPECT_EQ(nu.hw_grad_t, 0.0);
    EXPECT_EQ(nu.hw_grad_u, 0.0);
    EXPECT_EQ(nu.batches, 8);
    EXPECT_DOUBLE_EQ(nu.window, 8.0);
}

TEST(Nusselt, EstimatorFormulasMatchDefinitions) {
    NondimParams p;
    p.ra = 7.0;
    p.ra_tilde = 3.0;
    p.aspect = 2.0;
    const double f0 = 4.25, g0 = 11.5, u0 = 34.0;
    TimeAverager avg = conduction_averager(f0, g0, u0);
    const NusseltEstimates nu = nusselt_estimates(avg, p);
    const double area = p.aspect;
    EXPECT_DOUBLE_EQ(nu.nu_flux, 1.0 + f0 / (p.ra_tilde * area));
    const double denom_t = p.ra_tilde * p.ra_tilde * area;
    EXPECT_DOUBLE_EQ(nu.nu_grad_t, (g0 + denom_t) / denom_t - 0.5 / denom_t);
    EXPECT_DOUBLE_EQ(nu.nu_grad_u, u0 / (p.ra * p.ra_tilde * area) + 1.0);
}

// --- background bound -------------------------------------------------------------

TEST(BackgroundBound, ClosedFormFixture) {
    NondimParams p;
    p.ra_tilde = 2.0;
    p.aspect = 2.0;
    BackgroundProfile prof;
    prof.ra_tilde = 2.0;
    prof.delta = 1.0;
    // 20/(7 delta) + 1/(ra_tilde^2 |D|) - 1, frozen from symbolic integration.
    EXPECT_NEAR(background_bound(p, prof), 1.982142857142857142857, 1e-14);
}

TEST(BackgroundBound, GradientIntegralMatchesQuadrature) {
    BackgroundProfile prof;
    prof.ra_tilde = 1.7;
    prof.delta = 0.37;
    // Composite Simpson over tau'(z)^2; the closed form is (rt^2/delta) 10/7.
    const int n = 20000;
    const double h = 1.0 / n;
    double acc = 0.0;
    for (int k = 0; k <= n; ++k) {
        const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        const double d = prof.dtau(k * h);
        acc += w * d * d;
    }
    acc *= h / 3.0;
    EXPECT_NEAR(acc, prof.grad_sq_integral(), 1e-8 * prof.grad_sq_integral());
}

TEST(BackgroundBound, ScalesAsSqrtOfRayleighProduct) {
    NondimParams p;
    p.ra = 1e6;
    p.ra_tilde = 1.0;
    p.aspect = 2.0;
    const double b1 = background_bound(p, build_background_profile(p.ra, p.ra_tilde));
    NondimParams p4 = p;
    p4.ra = 4e6;
    const double b4 = background_bound(p4, build_background_profile(p4.ra, p4.ra_tilde));
    EXPECT_NEAR(b4 / b1, 2.0, 0.05 * 2.0);
}

TEST(BackgroundBound, ItoTermVanishesAtFixedProduct) {
    // Doubling ra_tilde at fixed ra*ra_tilde keeps delta (hence the gradient
    // term); only the Ito term 1/(rt^2 |D|) moves, and it shrinks.
    const double product = 5000.0;
    double prev = 0.0;
    bool first = true;
    for (double rt : {1.0, 2.0, 4.0}) {
        NondimParams p;
        p.ra = product / rt;
        p.ra_tilde = rt;
        p.aspect = 2.0;
        const double b = background_bound(p, build_background_profile(p.ra, p.ra_tilde));
        if (!first) {
            EXPECT_LT(b, prev);
            const double drop = prev - b;
            const double rt_prev = rt / 2.0;
            const double want = (1.0 - 0.25) / (rt_prev * rt_prev * p.aspect);
            EXPECT_NEAR(drop, want, 1e-12 * want);
        }
        prev = b;
        first = false;
    }
}

// --- pointwise background inequality ------------------------------------------------

Field random_theta(const Grid& g, WienerStream& ws, int trial) {
    Field th(g);
    for (int i = 0; i < g.nx; ++i) {
        const double x = g.x(i);
        for (int j = 0; j < g.nz; ++j) {
            const double z = g.z(j);
            double v = 0.0;
            for (int m = 0; m < 3; ++m) {
                const double cm = ws.gaussian(trial, kChannelTest, 6 * m + 2);
                const double dm = ws.gaussian(trial, kChannelTest, 6 * m + 3);
                v += std::sin((m + 1) * kPi * z) *
                     (cm * std::cos(2.0 * kPi * (m + 1) * x / g.aspect) +
                      dm * std::sin(2.0 * kPi * (m + 1) * x / g.aspect));
            }
            th(i, j) = 0.5 * v;
        }
    }
    return th;
}

void random_velocity(const Grid& g, Spectral& sp, WienerStream& ws, int trial, Field& u1,
                     Field& u2) {
    Field psi(g);
    for (int i = 0; i < g.nx; ++i) {
        const double x = g.x(i);
        for (int j = 0; j < g.nz; ++j) {
            const double z = g.z(j);
            const double env = z * z * (1.0 - z) * (1.0 - z); // no-slip envelope
            double v = 0.0;
            for (int m = 0; m < 3; ++m) {
                const double am = ws.gaussian(trial, kChannelTest, 6 * m);
                const double bm = ws.gaussian(trial, kChannelTest, 6 * m + 1);
                v += env * std::sin((m + 1) * kPi * z) *
                     (am * std::cos(2.0 * kPi * (m + 1) * x / g.aspect) +
                      bm * std::sin(2.0 * kPi * (m + 1) * x / g.aspect));
            }
            psi(i, j) = v;
        }
    }
    velocity_from_streamfunction(g, sp, psi, u1, u2);
}

double inequality_scale(const Grid& g, Spectral& sp, const Field& theta, const Field& u1,
                        const Field& u2, const BackgroundProfile& prof,
                        const NondimParams& p) {
    Field tf(g);
    for (int j = 0; j < g.nz; ++j) {
        const double z = g.z(j);
        const double shift = p.ra_tilde * (1.0 - z) - prof.tau(z);
        for (int i = 0; i < g.nx; ++i) tf(i, j) = theta(i, j) + shift;
    }
    const double gu = std::sqrt(grad_norm_sq_velocity(g, sp, u1, u2));
    const double gt = std::sqrt(grad_norm_sq(g, sp, tf));
    return std::sqrt(p.ra_tilde / (2.0 * p.ra)) * gu * gt;
}

TEST(PointwiseInequality, DegenerateStatesGiveZeroResidual) {
    Grid g(32, 33, 2.0);
    Spectral sp(g);
    NondimParams p;
    p.ra = 8.0;
    p.ra_tilde = 1.0;
    p.aspect = 2.0;
    const BackgroundProfile prof = build_background_profile(p.ra, p.ra_tilde);

    WienerStream ws(222, 0);
    Field theta = random_theta(g, ws, 0);
    Field zero(g), u1(g), u2(g);
    EXPECT_EQ(pointwise_background_inequality(g, sp, theta, zero, zero, prof, p), 0.0);

    // T = tau exactly: the fluctuation vanishes even with nonzero velocity.
    Field tf0(g);
    for (int j = 0; j < g.nz; ++j) {
        const double z = g.z(j);
        for (int i = 0; i < g.nx; ++i)
            tf0(i, j) = prof.tau(z) - p.ra_tilde * (1.0 - z);
    }
    random_velocity(g, sp, ws, 1, u1, u2);
    EXPECT_EQ(pointwise_background_inequality(g, sp, tf0, u1, u2, prof, p), 0.0);
}

TEST(PointwiseInequality, RandomWallCompatibleStatesSatisfyTheBound) {
    Grid g(32, 65, 2.0);
    Spectral sp(g);
    NondimParams p;
    p.ra = 8.0;
    p.ra_tilde = 1.0;
    p.aspect = 2.0;
    const BackgroundProfile prof = build_background_profile(p.ra, p.ra_tilde);
    ASSERT_GT(prof.delta, 4.0 * g.dz) << "boundary layer must be resolved for a meaningful check";

    WienerStream ws(123, 7);
    double min_rel = 1e300;
    for (int trial = 0; trial < 500; ++trial) {
        Field theta = random_theta(g, ws, trial);
        Field u1(g), u2(g);
        random_velocity(g, sp, ws, trial, u1, u2);
        const double r = pointwise_background_inequality(g, sp, theta, u1, u2, prof, p);
        const double scale = inequality_scale(g, sp, theta, u1, u2, prof, p);
        ASSERT_GT(scale, 0.0);
        EXPECT_GE(r, -1e-6 * scale);
        min_rel = std::min(min_rel, r / scale);
    }
    // The coupling term must actually bite: some state spends part of the allowance.
    EXPECT_LT(min_rel, 0.9999);
}

TEST(PointwiseInequality, SolverSnapshotsSatisfyTheBound) {
    Grid g(32, 33, 2.0);
    NondimParams p;
    p.pr = 1.0;
    p.ra = 8.0;
    p.ra_tilde = 1.0;
    p.aspect = 2.0;
    p.n1 = 2;
    p.n2 = 4;
    p.sigma_tilde_norm = 0.1;
    StepConfig cfg;
    cfg.dt = 1e-4;
    NoiseBasis tb = build_temperature_basis(4, g);
    NoiseBasis vb = build_velocity_basis(2, g);
    BoussinesqSolver s(g, p, cfg, &tb, &vb, WienerStream(5, 0));
    Field th(g);
    for (int i = 0; i < g.nx; ++i)
        for (int j = 0; j < g.nz; ++j)
            th(i, j) = 0.3 * std::sin(kPi * g.z(j)) *
                       (1.0 + std::cos(2.0 * kPi * g.x(i) / g.aspect));
    s.set_theta(th);
    const BackgroundProfile prof = build_background_profile(p.ra, p.ra_tilde);
    Spectral sp(g);
    for (int k = 0; k < 400; ++k) {
        s.step();
        const double r =
            pointwise_background_inequality(g, sp, s.theta(), s.u1(), s.u2(), prof, p);
        const double scale = inequality_scale(g, sp, s.theta(), s.u1(), s.u2(), prof, p);
        ASSERT_GE(r, -1e-6 * scale) << "at step " << k;
    }
}

// --- martingale exceedance ------------------------------------------------------

std::vector<MartingaleTrace> brownian_traces(int n, int steps, double dt, double sigma,
                                             std::uint64_t seed) {
    std::vector<MartingaleTrace> traces(n);
    for (int m = 0; m < n; ++m) {
        WienerStream ws(seed, static_cast<std::uint64_t>(m));
        double mval = 0.0;
        auto& tr = traces[m];
        tr.m.reserve(steps);
        tr.quadratic_variation.reserve(steps);
        for (int s = 0; s < steps; ++s) {
            mval += sigma * std::sqrt(dt) * ws.gaussian(s, kChannelTest, 0);
            tr.m.push_back(mval);
            tr.quadratic_variation.push_back(sigma * sigma * dt * (s + 1));
        }
    }
    return traces;
}

TEST(MartingaleExceedance, BrownianPathsRespectExponentialBound) {
    const auto traces = brownian_traces(400, 200, 0.01, 1.3, 404);
    const double gamma = 0.5;
    const auto table = martingale_exceedance_test(traces, gamma, {1.0, 2.0, 4.0});
    ASSERT_EQ(table.size(), 3u);
    double prev_freq = 1.0;
    for (const auto& row : table) {
        EXPECT_DOUBLE_EQ(row.bound, std::exp(-gamma * row.k));
        EXPECT_LE(row.frequency, row.bound + 3.0 * row.binomial_sigma)
            << "K=" << row.k << " freq=" << row.frequency;
        EXPECT_LE(row.frequency, prev_freq); // monotone in K
        prev_freq = row.frequency;
        EXPECT_EQ(row.traces, 400);
    }
}

TEST(MartingaleExceedance, ZeroGammaBoundIsTrivial) {
    const auto traces = brownian_traces(120, 50, 0.01, 1.0, 808);
    const auto table = martingale_exceedance_test(traces, 0.0, {1.0, 3.0});
    for (const auto& row : table) {
        EXPECT_EQ(row.bound, 1.0);
        EXPECT_LE(row.frequency, 1.0);
    }
}

TEST(MartingaleExceedance, FewTracesAreRejectedAsUnderpowered) {
    const auto traces = brownian_traces(99, 10, 0.01, 1.0, 11);
    EXPECT_NE(thrown_message([&] { martingale_exceedance_test(traces, 0.5, {1.0}); })
                  .find("underpowered: need at least 100 traces, got 99"),
              std::string::npos);
}

TEST(MartingaleExceedance, MismatchedSeriesThrow) {
    auto traces = brownian_traces(120, 10, 0.01, 1.0, 12);
    traces[5].quadratic_variation.pop_back();
    EXPECT_NE(thrown_message([&] { martingale_exceedance_test(traces, 0.5, {1.0}); })
                  .find("trace arrays differ in length"),
              std::string::npos);
}

// --- exponential moments ---------------------------------------------------------

TEST(ExponentialMoment, EtaZeroIsExactlyOne) {
    const auto rows = exponential_moment_report({0.4, 1.7, 2.9}, {0.0});
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].estimate, 1.0);
    EXPECT_EQ(rows[0].jackknife_se, 0.0);
    EXPECT_TRUE(rows[0].finite);
}

TEST(ExponentialMoment, AllZeroSamplesGiveOne) {
    const auto rows = exponential_moment_report({0.0, 0.0, 0.0, 0.0}, {0.7});
    EXPECT_DOUBLE_EQ(rows[0].estimate, 1.0);
    EXPECT_DOUBLE_EQ(rows[0].jackknife_se, 0.0);
}

TEST(ExponentialMoment, JackknifeMatchesHandComputation) {
    // samples {0, ln 2, ln 3} at eta = 1: exp values {1, 2, 3}, mean 2,
    // leave-one-out means {2.5, 2, 1.5}, se = sqrt(1/3).
    const auto rows =
        exponential_moment_report({0.0, std::log(2.0), std::log(3.0)}, {1.0});
    EXPECT_NEAR(rows[0].estimate, 2.0, 1e-15);
    EXPECT_NEAR(rows[0].jackknife_se, 0.5773502691896257645091, 1e-12);
}

TEST(ExponentialMoment, OverflowIsReportedNotThrown) {
    const auto rows = exponential_moment_report({1000.0, 2000.0}, {1.0, 0.0});
    EXPECT_FALSE(rows[0].finite);
    EXPECT_TRUE(std::isinf(rows[0].estimate));
    EXPECT_TRUE(rows[1].finite); // eta = 0 stays exact
    EXPECT_EQ(rows[1].estimate, 1.0);
}

TEST(ExponentialMoment, RejectsTooFewSamples) {
    EXPECT_NE(thrown_message([&] { exponential_moment_report({1.0}, {0.5}); })
                  .find("need at least 2 samples"),
              std::string::npos);
}

TEST(ExponentialMoment, StationaryWindowDoublingIsStable) {
    // iid positive samples: the estimate from the first half and from the full
    // window must agree within 10%, the monitor's stationarity criterion.
    WienerStream ws(313, 0);
    std::vector<double> half, full;
    for (int k = 0; k < 1000; ++k) {
        const double gk = ws.gaussian(k, kChannelTest, 0);
        const double s = 0.3 + 0.25 * gk * gk;
        full.push_back(s);
        if (k < 500) half.push_back(s);
    }
    const double a = exponential_moment_report(half, {0.5})[0].estimate;
    const double b = exponential_moment_report(full, {0.5})[0].estimate;
    EXPECT_NEAR(a, b, 0.1 * b);
}

} // namespace
