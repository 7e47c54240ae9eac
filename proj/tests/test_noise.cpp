#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "rbc/noise.hpp"
#include "rbc/operators.hpp"

using namespace rbc;

namespace {

constexpr double kPi = 3.14159265358979323846;

Field random_interior_field(const Grid& g, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Field f(g);
    for (int i = 0; i < g.nx; ++i)
        for (int j = 1; j < g.nz - 1; ++j)
            f(i, j) = u(rng);
    return f;
}

} // namespace

TEST(TemperatureBasis, SingleModeIsGroundState) {
    const Grid g(64, 33, 1.0);
    const auto b = build_temperature_basis(1, g);
    ASSERT_EQ(b.size(), 1);
    EXPECT_EQ(b.modes[0].j, 0);
    EXPECT_EQ(b.modes[0].m, 1);
    EXPECT_EQ(b.modes[0].parity, Parity::cos_phase);
    EXPECT_NEAR(b.modes[0].eigenvalue, kPi * kPi, 1e-12);
    EXPECT_NEAR(b.modes[0].amplitude, 1.0, 1e-12);
    EXPECT_NEAR(b.total_norm_sq, 1.0, 1e-12);
    EXPECT_NEAR(l2_norm_sq(g, b.shape[0]), 1.0, 1e-12);

    // The j = 0 ground state has no x dependence and a sin(pi z) profile.
    for (int i = 0; i < g.nx; ++i)
        for (int j = 0; j < g.nz; ++j)
            EXPECT_DOUBLE_EQ(b.shape[0](i, j), b.shape[0](0, j));
    const double scale = b.shape[0](0, g.nz / 2) / std::sin(kPi * g.z(g.nz / 2));
    for (int j = 1; j < g.nz - 1; ++j)
        EXPECT_NEAR(b.shape[0](0, j), scale * std::sin(kPi * g.z(j)), 1e-12);
}

TEST(TemperatureBasis, EqualAmplitudeSplit) {
    const Grid g(64, 33, 2.0);
    const auto b = build_temperature_basis(4, g);
    ASSERT_EQ(b.size(), 4);
    for (int k = 0; k < 4; ++k) {
        const double norm_sq = b.modes[k].amplitude * b.modes[k].amplitude *
                               l2_norm_sq(g, b.shape[k]);
        EXPECT_NEAR(norm_sq, 0.25, 1e-12);
    }
    EXPECT_NEAR(b.total_norm_sq, 1.0, 1e-12);
}

TEST(TemperatureBasis, TotalStrengthIsOneForEveryCount) {
    const Grid g(64, 33, 2.0);
    for (int n2 : {1, 2, 3, 5, 7, 12}) {
        const auto b = build_temperature_basis(n2, g);
        ASSERT_EQ(b.size(), n2);
        EXPECT_NEAR(b.total_norm_sq, 1.0, 1e-12);
        double sum = 0.0;
        for (const auto& m : b.modes) sum += m.amplitude * m.amplitude;
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(TemperatureBasis, OrderingMatchesBruteForceEnumeration) {
    const Grid g(64, 33, 2.0);
    const int n = 8;
    const auto got = enumerate_modes(n, g);

    // Independent enumeration: all admissible (j, m) pairs sorted by
    // eigenvalue, ties by m, then j, cos before sin; j = 0 has no sin phase.
    struct Entry {
        int j, m;
        Parity parity;
        double eig;
    };
    std::vector<Entry> all;
    for (int j = 0; 3 * j < g.nx; ++j)
        for (int m = 1; 2 * m < g.nz; ++m) {
            const double kx = 2.0 * kPi * j / g.aspect;
            const double eig = kx * kx + (kPi * m) * (kPi * m);
            all.push_back({j, m, Parity::cos_phase, eig});
            if (j > 0) all.push_back({j, m, Parity::sin_phase, eig});
        }
    std::stable_sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) {
        if (a.eig != b.eig) return a.eig < b.eig;
        if (a.m != b.m) return a.m < b.m;
        if (a.j != b.j) return a.j < b.j;
        return static_cast<int>(a.parity) < static_cast<int>(b.parity);
    });

    ASSERT_EQ(static_cast<int>(got.size()), n);
    for (int k = 0; k < n; ++k) {
        EXPECT_EQ(got[k].j, all[k].j) << "mode " << k;
        EXPECT_EQ(got[k].m, all[k].m) << "mode " << k;
        EXPECT_EQ(got[k].parity, all[k].parity) << "mode " << k;
        EXPECT_NEAR(got[k].eigenvalue, all[k].eig, 1e-12);
    }

    // Spot-check the degenerate pair at 5 pi^2: the m = 1 wave at j = 2 comes
    // before the m = 2 wave at j = 1.
    EXPECT_EQ(got[4].j, 2);
    EXPECT_EQ(got[4].m, 1);
    EXPECT_EQ(got[6].j, 1);
    EXPECT_EQ(got[6].m, 2);
}

TEST(TemperatureBasis, ShapesAreOrthonormalAndWallVanishing) {
    const Grid g(64, 33, 2.0);
    const auto b = build_temperature_basis(7, g);
    for (int a = 0; a < b.size(); ++a) {
        for (int i = 0; i < g.nx; ++i) {
            EXPECT_EQ(b.shape[a](i, 0), 0.0);
            EXPECT_EQ(b.shape[a](i, g.nz - 1), 0.0);
        }
        for (int c = 0; c <= a; ++c) {
            const double ip = l2_inner(g, b.shape[a], b.shape[c]);
            EXPECT_NEAR(ip, a == c ? 1.0 : 0.0, 1e-10) << a << "," << c;
        }
    }
}

TEST(TemperatureBasis, UnderResolvedGridIsRejected) {
    const Grid g(8, 9, 1.0);
    EXPECT_NO_THROW(build_temperature_basis(4, g));
    try {
        build_temperature_basis(64, g);
        FAIL() << "expected under-resolved error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("under-resolved"), std::string::npos);
    }
}

TEST(VelocityBasis, EmptyWhenDisabled) {
    const Grid g(64, 33, 2.0);
    const auto b = build_velocity_basis(0, g);
    EXPECT_EQ(b.size(), 0);
    EXPECT_EQ(b.total_norm_sq, 0.0);
}

TEST(VelocityBasis, ModesAreNoSlipDivergenceFreeOrthonormal) {
    const Grid g(64, 33, 2.0);
    Spectral sp(g);
    const auto b = build_velocity_basis(6, g);
    ASSERT_EQ(b.size(), 6);
    EXPECT_NEAR(b.total_norm_sq, 6.0, 1e-12);
    for (int k = 0; k < 6; ++k) {
        EXPECT_NEAR(b.modes[k].amplitude, 1.0, 1e-12);
        for (int i = 0; i < g.nx; ++i) {
            EXPECT_EQ(b.u1[k](i, 0), 0.0);
            EXPECT_EQ(b.u1[k](i, g.nz - 1), 0.0);
            EXPECT_EQ(b.u2[k](i, 0), 0.0);
            EXPECT_EQ(b.u2[k](i, g.nz - 1), 0.0);
        }
        EXPECT_LE(max_interior_divergence(g, sp, b.u1[k], b.u2[k]), 1e-10);
        for (int c = 0; c <= k; ++c) {
            const double ip = velocity_inner(g, b.u1[k], b.u2[k], b.u1[c], b.u2[c]);
            EXPECT_NEAR(ip, k == c ? 1.0 : 0.0, 1e-10) << k << "," << c;
        }
    }
}

TEST(VelocityBasis, VorticitySourceReproducesVelocity) {
    // Solving lap(psi) = -omega_source and taking the discrete curl must give
    // back exactly the stored mode velocity: the stepper adds vorticity, and
    // the induced velocity increment has to match the advertised basis.
    const Grid g(64, 33, 2.0);
    Spectral sp(g);
    const auto b = build_velocity_basis(4, g);
    Field psi(g), v1(g), v2(g);
    for (int k = 0; k < b.size(); ++k) {
        poisson_streamfunction(g, sp, b.omega_source[k], psi);
        velocity_from_streamfunction(g, sp, psi, v1, v2);
        double err = 0.0;
        for (size_t p = 0; p < psi.size(); ++p) {
            err = std::max(err, std::abs(v1.v[p] - b.u1[k].v[p]));
            err = std::max(err, std::abs(v2.v[p] - b.u2[k].v[p]));
        }
        EXPECT_LE(err, 1e-10) << "mode " << k;
    }
}

TEST(Increments, SqrtDtScalingIsExactForSharedDraws) {
    const Grid g(32, 17, 1.0);
    const auto b = build_temperature_basis(4, g);
    const WienerStream s(3, 0);
    const double dt = 1.0 / 1024.0;
    Field a(g), c(g);
    add_temperature_increment(b, g, dt, s, 11, a);
    add_temperature_increment(b, g, 4.0 * dt, s, 11, c);
    for (size_t p = 0; p < a.size(); ++p)
        EXPECT_DOUBLE_EQ(c.v[p], 2.0 * a.v[p]);
}

TEST(Increments, NormScalingAcrossIndependentDraws) {
    const Grid g(32, 17, 1.0);
    const auto b = build_temperature_basis(4, g);
    const WienerStream s(4, 0);
    const double dt = 1e-3;
    const int n = 10000;
    double sum_small = 0.0, sum_big = 0.0;
    Field inc(g);
    for (int k = 0; k < n; ++k) {
        inc.zero();
        add_temperature_increment(b, g, dt, s, 2 * k, inc);
        sum_small += l2_norm_sq(g, inc);
        inc.zero();
        add_temperature_increment(b, g, 4.0 * dt, s, 2 * k + 1, inc);
        sum_big += l2_norm_sq(g, inc);
    }
    EXPECT_NEAR(sum_big / sum_small, 4.0, 0.2);
}

TEST(Increments, MeanZeroAndItoIsometry) {
    const Grid g(32, 17, 1.0);
    const auto b = build_temperature_basis(4, g);
    const WienerStream s(5, 1);
    const double dt = 1e-3;
    const int n = 10000;
    Field inc(g), mean(g);
    double sum = 0.0, sum_sq = 0.0;
    for (int k = 0; k < n; ++k) {
        inc.zero();
        add_temperature_increment(b, g, dt, s, k, inc);
        const double nsq = l2_norm_sq(g, inc);
        sum += nsq;
        sum_sq += nsq * nsq;
        for (size_t p = 0; p < inc.size(); ++p) mean.v[p] += inc.v[p] / n;
    }
    // E||inc||^2 = dt * total_norm_sq = dt, self-normalized 3 sigma band.
    const double avg = sum / n;
    const double sd = std::sqrt((sum_sq / n - avg * avg) / n);
    EXPECT_NEAR(avg, dt, 3.0 * sd);
    // The averaged field shrinks like sqrt(dt / n).
    EXPECT_LE(l2_norm_sq(g, mean), 9.0 * dt / n);
}

TEST(Increments, VorticityFormMatchesVelocityForm) {
    const Grid g(64, 33, 2.0);
    Spectral sp(g);
    const auto b = build_velocity_basis(4, g);
    const WienerStream s(6, 0);
    const double dt = 1e-3, scale = 0.7;
    Field domega(g), psi(g), w1(g), w2(g), v1(g), v2(g);
    add_vorticity_increment(b, g, dt, s, 42, scale, domega);
    poisson_streamfunction(g, sp, domega, psi);
    velocity_from_streamfunction(g, sp, psi, w1, w2);
    add_velocity_increment(b, g, dt, s, 42, scale, v1, v2);
    double err = 0.0;
    for (size_t p = 0; p < v1.size(); ++p) {
        err = std::max(err, std::abs(w1.v[p] - v1.v[p]));
        err = std::max(err, std::abs(w2.v[p] - v2.v[p]));
    }
    EXPECT_LE(err, 1e-12);
}

TEST(Increments, BitwiseDeterministicAcrossRebuilds) {
    const Grid g(32, 17, 1.0);
    const auto b1 = build_temperature_basis(4, g);
    const auto b2 = build_temperature_basis(4, g);
    const WienerStream s1(77, 3), s2(77, 3), other(77, 4);
    Field a(g), c(g), d(g);
    add_temperature_increment(b1, g, 1e-3, s1, 9, a);
    add_temperature_increment(b2, g, 1e-3, s2, 9, c);
    add_temperature_increment(b1, g, 1e-3, other, 9, d);
    EXPECT_EQ(std::memcmp(a.data(), c.data(), a.size() * sizeof(double)), 0);
    EXPECT_NE(std::memcmp(a.data(), d.data(), a.size() * sizeof(double)), 0);
}

TEST(Projection, IdempotentAndIdentityOnSpan) {
    const Grid g(64, 33, 2.0);
    const auto b = build_temperature_basis(8, g);
    const Field f = random_interior_field(g, 11);
    Field p1(g), p2(g);
    project_low_modes(b, g, f, 5, p1);
    project_low_modes(b, g, p1, 5, p2);
    for (size_t p = 0; p < p1.size(); ++p)
        EXPECT_NEAR(p2.v[p], p1.v[p], 1e-12);

    Field span(g);
    const double c[5] = {0.3, -1.2, 0.8, 2.0, -0.5};
    for (int k = 0; k < 5; ++k)
        for (size_t p = 0; p < span.size(); ++p)
            span.v[p] += c[k] * b.shape[k].v[p];
    Field back(g);
    project_low_modes(b, g, span, 5, back);
    for (size_t p = 0; p < span.size(); ++p)
        EXPECT_NEAR(back.v[p], span.v[p], 1e-10);

    const auto coeff = modal_coefficients(b, g, span, 5);
    ASSERT_EQ(coeff.size(), 5u);
    for (int k = 0; k < 5; ++k)
        EXPECT_NEAR(coeff[k], c[k], 1e-10);
}

TEST(Projection, PythagorasSplit) {
    const Grid g(64, 33, 2.0);
    const auto b = build_temperature_basis(8, g);
    const Field f = random_interior_field(g, 12);
    Field pf(g);
    project_low_modes(b, g, f, 6, pf);
    Field rest(g);
    for (size_t p = 0; p < f.size(); ++p) rest.v[p] = f.v[p] - pf.v[p];
    const double total = l2_norm_sq(g, f);
    const double split = l2_norm_sq(g, pf) + l2_norm_sq(g, rest);
    EXPECT_NEAR(split, total, 1e-8 * total);
    EXPECT_NEAR(l2_inner(g, pf, rest), 0.0, 1e-10 * total);
}

TEST(Projection, VelocityVariantIdempotentAndIdentityOnSpan) {
    const Grid g(64, 33, 2.0);
    Spectral sp(g);
    const auto b = build_velocity_basis(5, g);

    // A random solenoidal field from a clamped streamfunction.
    Field psi(g);
    for (int i = 0; i < g.nx; ++i)
        for (int j = 0; j < g.nz; ++j) {
            const double z = g.z(j), x = g.x(i);
            const double env = z * z * (1.0 - z) * (1.0 - z);
            psi(i, j) = env * (std::sin(2.0 * kPi * x / g.aspect) + 0.3 * std::cos(4.0 * kPi * x / g.aspect) + 0.1);
        }
    Field v1(g), v2(g);
    velocity_from_streamfunction(g, sp, psi, v1, v2);

    Field p1(g), p2(g), q1(g), q2(g);
    project_low_modes_velocity(b, g, v1, v2, 3, p1, p2);
    project_low_modes_velocity(b, g, p1, p2, 3, q1, q2);
    for (size_t p = 0; p < p1.size(); ++p) {
        EXPECT_NEAR(q1.v[p], p1.v[p], 1e-12);
        EXPECT_NEAR(q2.v[p], p2.v[p], 1e-12);
    }

    Field s1(g), s2(g);
    const double c[3] = {1.5, -0.4, 0.9};
    for (int k = 0; k < 3; ++k)
        for (size_t p = 0; p < s1.size(); ++p) {
            s1.v[p] += c[k] * b.u1[k].v[p];
            s2.v[p] += c[k] * b.u2[k].v[p];
        }
    project_low_modes_velocity(b, g, s1, s2, 3, q1, q2);
    for (size_t p = 0; p < s1.size(); ++p) {
        EXPECT_NEAR(q1.v[p], s1.v[p], 1e-10);
        EXPECT_NEAR(q2.v[p], s2.v[p], 1e-10);
    }
    const auto coeff = modal_coefficients_velocity(b, g, s1, s2, 3);
    for (int k = 0; k < 3; ++k)
        EXPECT_NEAR(coeff[k], c[k], 1e-10);
}

TEST(Projection, TailSatisfiesInversePoincare) {
    // Anything orthogonal to the first N modes carries at least the (N+1)-st
    // eigenvalue's worth of gradient per unit mass, up to discretization.
    const Grid g(64, 65, 2.0);
    Spectral sp(g);
    const int keep = 4;
    const auto b = build_temperature_basis(12, g);
    std::mt19937 rng(21);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Field tail(g);
    for (int k = keep; k < 12; ++k) {
        const double c = u(rng);
        for (size_t p = 0; p < tail.size(); ++p) tail.v[p] += c * b.shape[k].v[p];
    }
    Field proj(g);
    project_low_modes(b, g, tail, keep, proj);
    EXPECT_LE(l2_norm_sq(g, proj), 1e-16 * l2_norm_sq(g, tail));

    const double quotient = grad_norm_sq(g, sp, tail) / l2_norm_sq(g, tail);
    EXPECT_GE(quotient, 0.98 * b.modes[keep].eigenvalue);
}

TEST(ModeCount, AutoRuleIsTightAndMonotone) {
    const Grid g(64, 65, 2.0);
    for (BasisKind kind : {BasisKind::temperature, BasisKind::velocity}) {
        int prev = 0;
        for (double lambda : {1.0, 5.0, 20.0, 60.0}) {
            const int n = auto_mode_count(kind, lambda, g);
            EXPECT_GE(n, prev);
            prev = n;
            const auto b = kind == BasisKind::temperature ? build_temperature_basis(n, g)
                                                          : build_velocity_basis(n, g);
            EXPECT_GE(measured_tail_eigenvalue(b, g), 2.0 * lambda);
            if (n > 1) {
                const auto smaller = kind == BasisKind::temperature
                                         ? build_temperature_basis(n - 1, g)
                                         : build_velocity_basis(n - 1, g);
                EXPECT_LT(measured_tail_eigenvalue(smaller, g), 2.0 * lambda);
            }
        }
    }
    const Grid tiny(8, 9, 1.0);
    EXPECT_THROW(auto_mode_count(BasisKind::temperature, 1e9, tiny), std::runtime_error);
}

TEST(Manifest, JsonListsEveryMode) {
    const Grid g(64, 33, 2.0);
    const auto b = build_temperature_basis(5, g);
    const auto j = nlohmann::json::parse(basis_manifest_json(b));
    ASSERT_TRUE(j.is_array());
    ASSERT_EQ(j.size(), 5u);
    EXPECT_EQ(j[0]["j"], 0);
    EXPECT_EQ(j[0]["m"], 1);
    EXPECT_EQ(j[0]["parity"], "cos");
    EXPECT_NEAR(j[0]["eigenvalue"].get<double>(), kPi * kPi, 1e-12);
    EXPECT_NEAR(j[0]["amplitude"].get<double>(), 1.0 / std::sqrt(5.0), 1e-12);
    for (const auto& entry : j) {
        EXPECT_TRUE(entry.contains("j"));
        EXPECT_TRUE(entry.contains("m"));
        EXPECT_TRUE(entry.contains("parity"));
        EXPECT_TRUE(entry.contains("eigenvalue"));
        EXPECT_TRUE(entry.contains("amplitude"));
    }
}
