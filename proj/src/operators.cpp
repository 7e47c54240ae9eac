#include "rbc/operators.hpp"

#include <cmath>
#include <stdexcept>

namespace rbc {

double l2_inner(const Grid& g, const Field& a, const Field& b) {
    check_shape(g, a, "l2_inner");
    check_shape(g, b, "l2_inner");
    double s = 0.0;
    for (int i = 0; i < g.nx; ++i) {
        const double* pa = a.data() + static_cast<size_t>(i) * g.nz;
        const double* pb = b.data() + static_cast<size_t>(i) * g.nz;
        double col = 0.5 * (pa[0] * pb[0] + pa[g.nz - 1] * pb[g.nz - 1]);
        for (int j = 1; j < g.nz - 1; ++j)
            col += pa[j] * pb[j];
        s += col;
    }
    return s * g.dx * g.dz;
}

double l2_norm_sq(const Grid& g, const Field& f) { return l2_inner(g, f, f); }

double l2_norm(const Grid& g, const Field& f) { return std::sqrt(l2_norm_sq(g, f)); }

double lp_norm(const Grid& g, const Field& f, double p) {
    check_shape(g, f, "lp_norm");
    if (p < 1.0)
        throw std::domain_error("lp_norm: p must be >= 1");
    double s = 0.0;
    for (int i = 0; i < g.nx; ++i)
        for (int j = 0; j < g.nz; ++j)
            s += std::pow(std::abs(f(i, j)), p) * zweight(g, j);
    return std::pow(s * g.dx, 1.0 / p);
}

double velocity_inner(const Grid& g, const Field& a1, const Field& a2, const Field& b1,
                      const Field& b2) {
    return l2_inner(g, a1, b1) + l2_inner(g, a2, b2);
}

void ddx(const Grid& g, Spectral& sp, const Field& f, Field& out) {
    check_shape(g, f, "ddx");
    SpectralBuffer hat(static_cast<size_t>(sp.nkx()) * g.nz);
    sp.forward(f, hat.data());
    for (int k = 0; k < sp.nkx(); ++k) {
        const std::complex<double> ik(0.0, 2 * k == g.nx ? 0.0 : sp.kx(k));
        std::complex<double>* col = hat.data() + static_cast<size_t>(k) * g.nz;
        for (int j = 0; j < g.nz; ++j)
            col[j] *= ik;
    }
    out = Field(g);
    sp.inverse(hat.data(), out);
}

void ddz(const Grid& g, const Field& f, Field& out) {
    check_shape(g, f, "ddz");
    out = Field(g);
    const double inv2dz = 1.0 / (2.0 * g.dz);
    const int n = g.nz - 1;
    for (int i = 0; i < g.nx; ++i) {
        const double* p = f.data() + static_cast<size_t>(i) * g.nz;
        double* q = out.data() + static_cast<size_t>(i) * g.nz;
        q[0] = (-3.0 * p[0] + 4.0 * p[1] - p[2]) * inv2dz;
        for (int j = 1; j < n; ++j)
            q[j] = (p[j + 1] - p[j - 1]) * inv2dz;
        q[n] = (3.0 * p[n] - 4.0 * p[n - 1] + p[n - 2]) * inv2dz;
    }
}

double grad_norm_sq(const Grid& g, Spectral& sp, const Field& f) {
    Field fx, fz;
    ddx(g, sp, f, fx);
    ddz(g, f, fz);
    return l2_norm_sq(g, fx) + l2_norm_sq(g, fz);
}

double grad_norm_sq_velocity(const Grid& g, Spectral& sp, const Field& u1, const Field& u2) {
    return grad_norm_sq(g, sp, u1) + grad_norm_sq(g, sp, u2);
}

void dealias(const Grid& g, Spectral& sp, Field& f) {
    check_shape(g, f, "dealias");
    SpectralBuffer hat(static_cast<size_t>(sp.nkx()) * g.nz);
    sp.forward(f, hat.data());
    for (int k = 0; k < sp.nkx(); ++k) {
        if (sp.keep(k))
            continue;
        std::complex<double>* col = hat.data() + static_cast<size_t>(k) * g.nz;
        for (int j = 0; j < g.nz; ++j)
            col[j] = 0.0;
    }
    sp.inverse(hat.data(), f);
}

void advect(const Grid& g, Spectral& sp, const Field& u1, const Field& u2, const Field& s,
            Field& out) {
    check_shape(g, u1, "advect");
    check_shape(g, u2, "advect");
    check_shape(g, s, "advect");
    Field prod(g), tmp(g);
    out = Field(g);

    // conservative half: d/dx(u1 s) + d/dz(u2 s)
    for (size_t n = 0; n < prod.size(); ++n)
        prod.v[n] = u1.v[n] * s.v[n];
    ddx(g, sp, prod, tmp);
    for (size_t n = 0; n < out.size(); ++n)
        out.v[n] = 0.5 * tmp.v[n];
    for (size_t n = 0; n < prod.size(); ++n)
        prod.v[n] = u2.v[n] * s.v[n];
    ddz(g, prod, tmp);
    for (size_t n = 0; n < out.size(); ++n)
        out.v[n] += 0.5 * tmp.v[n];

    // advective half: u1 ds/dx + u2 ds/dz
    ddx(g, sp, s, tmp);
    for (size_t n = 0; n < out.size(); ++n)
        out.v[n] += 0.5 * u1.v[n] * tmp.v[n];
    ddz(g, s, tmp);
    for (size_t n = 0; n < out.size(); ++n)
        out.v[n] += 0.5 * u2.v[n] * tmp.v[n];

    dealias(g, sp, out);
}

void poisson_streamfunction(const Grid& g, Spectral& sp, const Field& omega, Field& psi) {
    check_shape(g, omega, "poisson_streamfunction");
    SpectralBuffer hat(static_cast<size_t>(sp.nkx()) * g.nz);
    sp.forward(omega, hat.data());
    const int n = g.nz;
    const double idz2 = 1.0 / (g.dz * g.dz);
    std::vector<double> sub(n - 1), diag(n), sup(n - 1);
    TridiagFactor tf;
    for (int k = 0; k < sp.nkx(); ++k) {
        std::complex<double>* col = hat.data() + static_cast<size_t>(k) * g.nz;
        const double k2 = sp.kx(k) * sp.kx(k);
        // rows 0 and n-1 pin psi = 0; interior: (D_zz - k^2) psi = -omega
        diag[0] = 1.0;
        sup[0] = 0.0;
        col[0] = 0.0;
        for (int j = 1; j < n - 1; ++j) {
            sub[j - 1] = idz2;
            diag[j] = -2.0 * idz2 - k2;
            sup[j] = idz2;
            col[j] = -col[j];
        }
        sub[n - 2] = 0.0;
        diag[n - 1] = 1.0;
        col[n - 1] = 0.0;
        tf.factor(sub, diag, sup);
        tf.solve(col);
    }
    psi = Field(g);
    sp.inverse(hat.data(), psi);
}

void velocity_from_streamfunction(const Grid& g, Spectral& sp, const Field& psi, Field& u1,
                                  Field& u2) {
    ddz(g, psi, u1);
    ddx(g, sp, psi, u2);
    for (size_t n = 0; n < u2.size(); ++n)
        u2.v[n] = -u2.v[n];
    for (int i = 0; i < g.nx; ++i) {
        u1(i, 0) = 0.0;
        u1(i, g.nz - 1) = 0.0;
        u2(i, 0) = 0.0;
        u2(i, g.nz - 1) = 0.0;
    }
}

void thom_wall_vorticity(const Grid& g, const Field& psi, Field& omega) {
    const double c = -2.0 / (g.dz * g.dz);
    for (int i = 0; i < g.nx; ++i) {
        omega(i, 0) = c * psi(i, 1);
        omega(i, g.nz - 1) = c * psi(i, g.nz - 2);
    }
}

double max_interior_divergence(const Grid& g, Spectral& sp, const Field& u1, const Field& u2) {
    Field du1, du2;
    ddx(g, sp, u1, du1);
    // centered-only d/dz, matching the operator that velocity derivation uses
    // in the interior
    du2 = Field(g);
    const double inv2dz = 1.0 / (2.0 * g.dz);
    for (int i = 0; i < g.nx; ++i)
        for (int j = 1; j < g.nz - 1; ++j)
            du2(i, j) = (u2(i, j + 1) - u2(i, j - 1)) * inv2dz;
    double m = 0.0;
    for (int i = 0; i < g.nx; ++i)
        for (int j = 1; j < g.nz - 1; ++j)
            m = std::max(m, std::abs(du1(i, j) + du2(i, j)));
    return m;
}

StokesOperator::StokesOperator(const Grid& g, double ra) : grid_(g), ra_(ra) {
    const int n = g.nz - 2; // interior unknowns
    const double dz2 = g.dz * g.dz;
    const double idz4 = 1.0 / (dz2 * dz2);
    const double idz2 = 1.0 / dz2;
    const int nkx = g.nx / 2 + 1;
    factors_.resize(nkx);
    hat_.resize(static_cast<size_t>(nkx) * g.nz);
    for (int k = 1; k < nkx; ++k) {
        const double kx = 2.0 * 3.14159265358979323846264338327950288 * k / g.aspect;
        const double k2 = kx * kx;
        const double k4 = k2 * k2;
        std::vector<std::vector<double>> bands(5, std::vector<double>(n, 0.0));
        for (int r = 0; r < n; ++r) {
            bands[0][r] = idz4;
            bands[1][r] = -4.0 * idz4 - 2.0 * k2 * idz2;
            bands[2][r] = 6.0 * idz4 + 4.0 * k2 * idz2 + k4;
            bands[3][r] = -4.0 * idz4 - 2.0 * k2 * idz2;
            bands[4][r] = idz4;
        }
        // clamped walls: psi = 0 and dpsi/dz = 0 give ghost psi(-1) = psi(1)
        bands[2][0] += idz4;
        bands[2][n - 1] += idz4;
        factors_[k].factor(std::move(bands));
    }
}

void StokesOperator::solve(Spectral& sp, const Field& theta, Field& psi) {
    check_shape(grid_, theta, "StokesOperator::solve");
    sp.forward(theta, hat_.data());
    const int n = grid_.nz - 2;
    std::vector<std::complex<double>> rhs(n);
    for (int k = 0; k < sp.nkx(); ++k) {
        std::complex<double>* col = hat_.data() + static_cast<size_t>(k) * grid_.nz;
        if (k == 0 || !sp.keep(k)) {
            // no horizontal mean forcing (ik theta = 0) and nothing outside the
            // dealiased band drives a flow
            for (int j = 0; j < grid_.nz; ++j)
                col[j] = 0.0;
            continue;
        }
        const std::complex<double> ik(0.0, sp.kx(k));
        for (int j = 0; j < n; ++j)
            rhs[j] = ra_ * ik * col[j + 1];
        factors_[k].solve(rhs.data());
        col[0] = 0.0;
        for (int j = 0; j < n; ++j)
            col[j + 1] = rhs[j];
        col[grid_.nz - 1] = 0.0;
    }
    psi = Field(grid_);
    sp.inverse(hat_.data(), psi);
}

void stokes_solve(const Grid& g, Spectral& sp, double ra, const Field& theta, Field& psi,
                  Field& u1, Field& u2) {
    StokesOperator op(g, ra);
    op.solve(sp, theta, psi);
    velocity_from_streamfunction(g, sp, psi, u1, u2);
}

} // namespace rbc
