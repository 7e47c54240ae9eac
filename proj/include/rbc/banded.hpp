#pragma once

// Small banded direct solvers for the per-wavenumber vertical systems.
// Factorizations are reused across many right-hand sides (one per step per
// wavenumber), so factor and solve are split.  No pivoting: every matrix here
// is diagonally dominant or symmetric positive definite.

#include <algorithm>
#include <complex>
#include <stdexcept>
#include <vector>

namespace rbc {

class TridiagFactor {
  public:
    TridiagFactor() = default;

    // a = sub-diagonal (n-1), b = diagonal (n), c = super-diagonal (n-1).
    void factor(std::vector<double> a, std::vector<double> b, std::vector<double> c) {
        n_ = static_cast<int>(b.size());
        sub_ = std::move(a);
        diag_ = std::move(b);
        sup_ = std::move(c);
        mult_.assign(n_, 0.0);
        for (int i = 1; i < n_; ++i) {
            if (diag_[i - 1] == 0.0)
                throw std::runtime_error("tridiagonal factorization hit a zero pivot");
            mult_[i] = sub_[i - 1] / diag_[i - 1];
            diag_[i] -= mult_[i] * sup_[i - 1];
        }
        if (diag_[n_ - 1] == 0.0)
            throw std::runtime_error("tridiagonal factorization hit a zero pivot");
    }

    template <typename T> void solve(T* x) const {
        for (int i = 1; i < n_; ++i)
            x[i] -= mult_[i] * x[i - 1];
        x[n_ - 1] /= diag_[n_ - 1];
        for (int i = n_ - 2; i >= 0; --i)
            x[i] = (x[i] - sup_[i] * x[i + 1]) / diag_[i];
    }

    int size() const { return n_; }

  private:
    int n_ = 0;
    std::vector<double> sub_, diag_, sup_, mult_;
};

// Banded LU with lower/upper bandwidth 2, stored as five diagonals.
class PentadiagFactor {
  public:
    PentadiagFactor() = default;

    // bands[d] holds diagonal at offset d-2 (d=0 lowest, d=4 highest); entries
    // outside the matrix are ignored.  band[d][i] multiplies x[i + d - 2] in row i.
    void factor(std::vector<std::vector<double>> bands) {
        b_ = std::move(bands);
        if (b_.size() != 5)
            throw std::invalid_argument("pentadiagonal factor expects 5 bands");
        n_ = static_cast<int>(b_[2].size());
        for (int k = 0; k < n_ - 1; ++k) {
            const double piv = b_[2][k];
            if (piv == 0.0)
                throw std::runtime_error("pentadiagonal factorization hit a zero pivot");
            for (int i = k + 1; i <= std::min(k + 2, n_ - 1); ++i) {
                const int off = i - k; // 1 or 2
                double& m = b_[2 - off][i];
                m /= piv;
                // row_i -= m * row_k for columns k+1 .. k+2
                for (int j = k + 1; j <= std::min(k + 2, n_ - 1); ++j) {
                    const int dk = j - k + 2; // band index of A(k, j)
                    const int di = j - i + 2; // band index of A(i, j)
                    b_[di][i] -= m * b_[dk][k];
                }
            }
        }
        if (b_[2][n_ - 1] == 0.0)
            throw std::runtime_error("pentadiagonal factorization hit a zero pivot");
    }

    template <typename T> void solve(T* x) const {
        for (int i = 1; i < n_; ++i) {
            x[i] -= b_[1][i] * x[i - 1];
            if (i >= 2)
                x[i] -= b_[0][i] * x[i - 2];
        }
        for (int i = n_ - 1; i >= 0; --i) {
            if (i + 1 < n_)
                x[i] -= b_[3][i] * x[i + 1];
            if (i + 2 < n_)
                x[i] -= b_[4][i] * x[i + 2];
            x[i] /= b_[2][i];
        }
    }

    int size() const { return n_; }

  private:
    int n_ = 0;
    std::vector<std::vector<double>> b_;
};

} // namespace rbc
