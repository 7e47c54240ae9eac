#include "rbc/noise.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace rbc {

namespace {

constexpr double kPi = 3.14159265358979323846264338328;

double mode_eigenvalue(int j, int m, double aspect) {
    const double kx = 2.0 * kPi * j / aspect;
    const double kz = kPi * m;
    return kx * kx + kz * kz;
}

bool mode_resolvable(const Grid& g, int j, int m) {
    return 2 * m < g.nz && 3 * j < g.nx;
}

// All candidates with j, m up to one step past the resolvable range, in basis
// order.  Any under-resolved prefix is guaranteed to contain one of the
// boundary candidates, so selecting from this list detects under-resolution.
std::vector<NoiseMode> enumerate_raw(const Grid& g) {
    int j_cap = 0;
    while (3 * j_cap < g.nx)
        ++j_cap;
    int m_cap = 1;
    while (2 * m_cap < g.nz)
        ++m_cap;
    std::vector<NoiseMode> all;
    all.reserve(static_cast<size_t>(j_cap + 1) * m_cap * 2);
    for (int j = 0; j <= j_cap; ++j) {
        for (int m = 1; m <= m_cap; ++m) {
            NoiseMode md;
            md.j = j;
            md.m = m;
            md.eigenvalue = mode_eigenvalue(j, m, g.aspect);
            md.parity = Parity::cos_phase;
            all.push_back(md);
            if (j > 0) {
                md.parity = Parity::sin_phase;
                all.push_back(md);
            }
        }
    }
    std::sort(all.begin(), all.end(), [](const NoiseMode& a, const NoiseMode& b) {
        if (a.eigenvalue != b.eigenvalue)
            return a.eigenvalue < b.eigenvalue;
        if (a.m != b.m)
            return a.m < b.m;
        if (a.j != b.j)
            return a.j < b.j;
        return static_cast<int>(a.parity) < static_cast<int>(b.parity);
    });
    return all;
}

[[noreturn]] void throw_under_resolved(const Grid& g, int j, int m) {
    throw std::runtime_error("basis under-resolved: mode (j=" + std::to_string(j) +
                             ", m=" + std::to_string(m) + ") needs m < nz/2 and j < nx/3 on a " +
                             std::to_string(g.nx) + "x" + std::to_string(g.nz) + " grid");
}

// Shifted Legendre polynomial P_{deg}(2z - 1) by the three-term recurrence.
double shifted_legendre(int deg, double z) {
    const double s = 2.0 * z - 1.0;
    double pm1 = 1.0, p = s;
    if (deg == 0)
        return pm1;
    for (int n = 1; n < deg; ++n) {
        const double pn1 = ((2.0 * n + 1.0) * s * p - n * pm1) / (n + 1.0);
        pm1 = p;
        p = pn1;
    }
    return p;
}

// Clamped vertical profile for velocity mode m: double roots at both walls.
double clamped_profile(int m, double z) {
    const double w = z * z * (1.0 - z) * (1.0 - z);
    return w * shifted_legendre(m - 1, z);
}

// Trapezoid inner product of two z-profiles.
double zdot(const Grid& g, const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (int j = 0; j < g.nz; ++j)
        s += zweight(g, j) * a[j] * b[j];
    return s;
}

// Centered derivative of a z-profile with wall entries zeroed (the wall rows
// of u1 are no-slip, so they never enter the velocity inner product).
std::vector<double> zderiv_noslip(const Grid& g, const std::vector<double>& q) {
    std::vector<double> d(g.nz, 0.0);
    for (int j = 1; j < g.nz - 1; ++j)
        d[j] = (q[j + 1] - q[j - 1]) / (2.0 * g.dz);
    return d;
}

} // namespace

std::vector<NoiseMode> enumerate_modes(int count, const Grid& grid) {
    if (count < 0)
        throw std::invalid_argument("enumerate_modes: count must be >= 0");
    const std::vector<NoiseMode> all = enumerate_raw(grid);
    if (count > static_cast<int>(all.size()))
        throw_under_resolved(grid, all.back().j, all.back().m);
    std::vector<NoiseMode> out(all.begin(), all.begin() + count);
    for (const NoiseMode& md : out)
        if (!mode_resolvable(grid, md.j, md.m))
            throw_under_resolved(grid, md.j, md.m);
    return out;
}

NoiseBasis build_temperature_basis(int n2, const Grid& grid) {
    if (n2 < 1)
        throw std::invalid_argument("build_temperature_basis: n2 must be >= 1");
    NoiseBasis basis;
    basis.kind = BasisKind::temperature;
    basis.modes = enumerate_modes(n2, grid);

    Spectral sp(grid);
    const double amp = 1.0 / std::sqrt(static_cast<double>(n2));
    basis.shape.reserve(n2);
    for (NoiseMode& md : basis.modes) {
        md.amplitude = amp;
        basis.total_norm_sq += amp * amp;

        Field f(grid);
        const double kx = 2.0 * kPi * md.j / grid.aspect;
        for (int i = 0; i < grid.nx; ++i) {
            const double trig = (md.parity == Parity::cos_phase) ? std::cos(kx * grid.x(i))
                                                                 : std::sin(kx * grid.x(i));
            for (int j = 1; j < grid.nz - 1; ++j)
                f(i, j) = trig * std::sin(kPi * md.m * grid.z(j));
        }
        const double nrm = l2_norm(grid, f);
        for (double& v : f.v)
            v /= nrm;
        basis.discrete_eigenvalue.push_back(grad_norm_sq(grid, sp, f) / l2_norm_sq(grid, f));
        basis.shape.push_back(std::move(f));
    }

    const std::vector<NoiseMode> raw = enumerate_raw(grid);
    basis.tail_eigenvalue = (n2 < static_cast<int>(raw.size()))
                                ? raw[n2].eigenvalue
                                : basis.modes.back().eigenvalue + kPi * kPi;
    return basis;
}

NoiseBasis build_velocity_basis(int n1, const Grid& grid) {
    if (n1 < 0)
        throw std::invalid_argument("build_velocity_basis: n1 must be >= 0");
    NoiseBasis basis;
    basis.kind = BasisKind::velocity;
    if (n1 == 0) {
        const std::vector<NoiseMode> raw = enumerate_raw(grid);
        basis.tail_eigenvalue = raw.front().eigenvalue;
        return basis;
    }
    basis.modes = enumerate_modes(n1, grid);

    Spectral sp(grid);
    basis.shape.resize(n1);
    basis.u1.resize(n1);
    basis.u2.resize(n1);
    basis.omega_source.resize(n1);

    // Orthonormalize vertical profiles family by family (same j and parity);
    // distinct families are orthogonal already through the horizontal trig
    // factors, which the uniform x grid integrates exactly.
    std::vector<std::vector<double>> q_cache(n1), dq_cache(n1);
    const double idz2 = 1.0 / (grid.dz * grid.dz);
    for (int i = 0; i < n1; ++i) {
        const NoiseMode& md = basis.modes[i];
        const double kx = 2.0 * kPi * md.j / grid.aspect;
        const double trig_mass = (md.j == 0) ? grid.aspect : 0.5 * grid.aspect;

        std::vector<double> q(grid.nz);
        for (int j = 0; j < grid.nz; ++j)
            q[j] = clamped_profile(md.m, grid.z(j));
        std::vector<double> dq = zderiv_noslip(grid, q);

        auto vdot = [&](const std::vector<double>& qa, const std::vector<double>& dqa,
                        const std::vector<double>& qb, const std::vector<double>& dqb) {
            return trig_mass * (zdot(grid, dqa, dqb) + kx * kx * zdot(grid, qa, qb));
        };

        // Two passes against the already-final members of the same family.
        for (int pass = 0; pass < 2; ++pass) {
            for (int p = 0; p < i; ++p) {
                if (basis.modes[p].j != md.j || basis.modes[p].parity != md.parity)
                    continue;
                const double c = vdot(q, dq, q_cache[p], dq_cache[p]);
                for (int j = 0; j < grid.nz; ++j) {
                    q[j] -= c * q_cache[p][j];
                    dq[j] -= c * dq_cache[p][j];
                }
            }
        }
        const double nrm = std::sqrt(vdot(q, dq, q, dq));
        if (!(nrm > 1e-14))
            throw std::runtime_error("build_velocity_basis: degenerate profile family");
        for (int j = 0; j < grid.nz; ++j) {
            q[j] /= nrm;
            dq[j] /= nrm;
        }
        q_cache[i] = q;
        dq_cache[i] = dq;

        // Vorticity-space source: -lap(psi) profile, interior rows only.
        std::vector<double> w(grid.nz, 0.0);
        for (int j = 1; j < grid.nz - 1; ++j)
            w[j] = -((q[j + 1] - 2.0 * q[j] + q[j - 1]) * idz2 - kx * kx * q[j]);

        Field psi(grid), u1(grid), u2(grid), wsrc(grid);
        for (int ix = 0; ix < grid.nx; ++ix) {
            const double c = std::cos(kx * grid.x(ix));
            const double s = std::sin(kx * grid.x(ix));
            const double trig = (md.parity == Parity::cos_phase) ? c : s;
            const double u2trig = (md.j == 0) ? 0.0
                                  : (md.parity == Parity::cos_phase) ? kx * s
                                                                     : -kx * c;
            for (int j = 0; j < grid.nz; ++j) {
                psi(ix, j) = trig * q[j];
                u1(ix, j) = trig * dq[j];
                u2(ix, j) = u2trig * q[j];
                wsrc(ix, j) = trig * w[j];
            }
        }
        basis.discrete_eigenvalue.push_back(grad_norm_sq_velocity(grid, sp, u1, u2) /
                                            velocity_inner(grid, u1, u2, u1, u2));
        basis.shape[i] = std::move(psi);
        basis.u1[i] = std::move(u1);
        basis.u2[i] = std::move(u2);
        basis.omega_source[i] = std::move(wsrc);

        NoiseMode& mutable_md = basis.modes[i];
        mutable_md.amplitude = 1.0;
        basis.total_norm_sq += 1.0;
    }

    const std::vector<NoiseMode> raw = enumerate_raw(grid);
    basis.tail_eigenvalue = (n1 < static_cast<int>(raw.size()))
                                ? raw[n1].eigenvalue
                                : basis.modes.back().eigenvalue + kPi * kPi;
    return basis;
}

double measured_tail_eigenvalue(const NoiseBasis& basis, const Grid& grid) {
    const int n = basis.size() + 1;
    const NoiseBasis wider = (basis.kind == BasisKind::temperature)
                                 ? build_temperature_basis(n, grid)
                                 : build_velocity_basis(n, grid);
    return wider.discrete_eigenvalue.back();
}

int auto_mode_count(BasisKind kind, double lambda, const Grid& grid) {
    if (lambda <= 0.0)
        return 0;
    // Smallest n whose first excluded mode still has quotient >= 2 lambda.
    for (int n = 1;; ++n) {
        const NoiseBasis b = (kind == BasisKind::temperature)
                                 ? build_temperature_basis(n + 1, grid)
                                 : build_velocity_basis(n + 1, grid);
        if (b.discrete_eigenvalue.back() >= 2.0 * lambda)
            return n;
    }
}

void add_temperature_increment(const NoiseBasis& basis, const Grid& grid, double dt,
                               const WienerStream& stream, std::uint64_t step, Field& out,
                               std::vector<double>* gaussians) {
    if (basis.kind != BasisKind::temperature)
        throw std::invalid_argument("add_temperature_increment: wrong basis kind");
    check_shape(grid, out, "add_temperature_increment");
    const double sq = std::sqrt(dt);
    for (int k = 0; k < basis.size(); ++k) {
        const double g = stream.gaussian(step, kChannelTemperature, static_cast<std::uint32_t>(k));
        if (gaussians)
            gaussians->push_back(g);
        const double c = basis.modes[k].amplitude * sq * g;
        const double* s = basis.shape[k].data();
        double* o = out.data();
        for (size_t idx = 0; idx < out.size(); ++idx)
            o[idx] += c * s[idx];
    }
}

namespace {

void add_velocity_draws(const NoiseBasis& basis, const Grid& grid, double dt,
                        const WienerStream& stream, std::uint64_t step, double scale,
                        const std::vector<Field>& shapes, Field& out,
                        std::vector<double>* gaussians) {
    if (basis.kind != BasisKind::velocity)
        throw std::invalid_argument("velocity increment: wrong basis kind");
    check_shape(grid, out, "velocity increment");
    const double sq = std::sqrt(dt);
    for (int k = 0; k < basis.size(); ++k) {
        const double g = stream.gaussian(step, kChannelVelocity, static_cast<std::uint32_t>(k));
        if (gaussians)
            gaussians->push_back(g);
        const double c = scale * basis.modes[k].amplitude * sq * g;
        const double* s = shapes[k].data();
        double* o = out.data();
        for (size_t idx = 0; idx < out.size(); ++idx)
            o[idx] += c * s[idx];
    }
}

} // namespace

void add_vorticity_increment(const NoiseBasis& basis, const Grid& grid, double dt,
                             const WienerStream& stream, std::uint64_t step, double scale,
                             Field& omega_out, std::vector<double>* gaussians) {
    add_velocity_draws(basis, grid, dt, stream, step, scale, basis.omega_source, omega_out,
                       gaussians);
}

void add_velocity_increment(const NoiseBasis& basis, const Grid& grid, double dt,
                            const WienerStream& stream, std::uint64_t step, double scale,
                            Field& u1_out, Field& u2_out) {
    add_velocity_draws(basis, grid, dt, stream, step, scale, basis.u1, u1_out, nullptr);
    add_velocity_draws(basis, grid, dt, stream, step, scale, basis.u2, u2_out, nullptr);
}

std::vector<double> modal_coefficients(const NoiseBasis& basis, const Grid& grid, const Field& f,
                                       int n) {
    if (basis.kind != BasisKind::temperature)
        throw std::invalid_argument("modal_coefficients: wrong basis kind");
    if (n > basis.size())
        throw std::invalid_argument("modal_coefficients: n exceeds basis size");
    std::vector<double> c(static_cast<size_t>(std::max(n, 0)));
    for (int k = 0; k < n; ++k)
        c[k] = l2_inner(grid, f, basis.shape[k]);
    return c;
}

std::vector<double> modal_coefficients_velocity(const NoiseBasis& basis, const Grid& grid,
                                                const Field& v1, const Field& v2, int n) {
    if (basis.kind != BasisKind::velocity)
        throw std::invalid_argument("modal_coefficients_velocity: wrong basis kind");
    if (n > basis.size())
        throw std::invalid_argument("modal_coefficients_velocity: n exceeds basis size");
    std::vector<double> c(static_cast<size_t>(std::max(n, 0)));
    for (int k = 0; k < n; ++k)
        c[k] = velocity_inner(grid, v1, v2, basis.u1[k], basis.u2[k]);
    return c;
}

void project_low_modes(const NoiseBasis& basis, const Grid& grid, const Field& f, int n,
                       Field& out) {
    const std::vector<double> c = modal_coefficients(basis, grid, f, n);
    out = Field(grid);
    for (int k = 0; k < n; ++k) {
        const double* s = basis.shape[k].data();
        for (size_t idx = 0; idx < out.size(); ++idx)
            out.v[idx] += c[k] * s[idx];
    }
}

void project_low_modes_velocity(const NoiseBasis& basis, const Grid& grid, const Field& v1,
                                const Field& v2, int n, Field& p1, Field& p2) {
    const std::vector<double> c = modal_coefficients_velocity(basis, grid, v1, v2, n);
    p1 = Field(grid);
    p2 = Field(grid);
    for (int k = 0; k < n; ++k) {
        for (size_t idx = 0; idx < p1.size(); ++idx) {
            p1.v[idx] += c[k] * basis.u1[k].v[idx];
            p2.v[idx] += c[k] * basis.u2[k].v[idx];
        }
    }
}

std::string basis_manifest_json(const NoiseBasis& basis) {
    nlohmann::json arr = nlohmann::json::array();
    for (const NoiseMode& md : basis.modes) {
        arr.push_back({{"j", md.j},
                       {"m", md.m},
                       {"parity", md.parity == Parity::cos_phase ? "cos" : "sin"},
                       {"eigenvalue", md.eigenvalue},
                       {"amplitude", md.amplitude}});
    }
    return arr.dump(2);
}

} // namespace rbc
