#pragma once

// Uniform grid on [0, aspect) x [0, 1]: Fourier collocation in x (periodic,
// no duplicated endpoint) and a vertically bounded channel with walls at
// z = 0 and z = 1 (z holds both endpoints).

#include <stdexcept>
#include <string>
#include <vector>

namespace rbc {

struct Grid {
    int nx = 0;
    int nz = 0;
    double aspect = 0.0;
    double dx = 0.0;
    double dz = 0.0;

    Grid() = default;
    Grid(int nx_, int nz_, double aspect_) : nx(nx_), nz(nz_), aspect(aspect_) {
        std::string err;
        if (nx < 8 || (nx & (nx - 1)) != 0)
            err += "nx must be a power of two >= 8; ";
        if (nz < 9 || nz % 2 == 0)
            err += "nz must be odd and >= 9; ";
        if (!(aspect > 0.0))
            err += "aspect must be positive; ";
        if (!err.empty())
            throw std::invalid_argument("invalid grid: " + err);
        dx = aspect / nx;
        dz = 1.0 / (nz - 1);
    }

    double x(int i) const { return dx * i; }
    double z(int j) const { return dz * j; }
    double area() const { return aspect; }
    int size() const { return nx * nz; }
};

// Scalar field sampled on the grid, row-major in x: value(i, j) = v[i*nz + j],
// so each vertical column is contiguous (banded solves run along z).
struct Field {
    int nx = 0;
    int nz = 0;
    std::vector<double> v;

    Field() = default;
    explicit Field(const Grid& g) : nx(g.nx), nz(g.nz), v(static_cast<size_t>(g.nx) * g.nz, 0.0) {}

    double& operator()(int i, int j) { return v[static_cast<size_t>(i) * nz + j]; }
    double operator()(int i, int j) const { return v[static_cast<size_t>(i) * nz + j]; }
    double* data() { return v.data(); }
    const double* data() const { return v.data(); }
    size_t size() const { return v.size(); }
    void zero() { std::fill(v.begin(), v.end(), 0.0); }
    bool same_shape(const Field& o) const { return nx == o.nx && nz == o.nz; }
};

inline void check_shape(const Grid& g, const Field& f, const char* what) {
    if (f.nx != g.nx || f.nz != g.nz)
        throw std::invalid_argument(std::string(what) + ": field shape does not match grid");
}

} // namespace rbc
