#!/usr/bin/env python3
"""High-precision reference values for the test fixtures.

Run with: python3 tools/reference_values.py
Values printed here are frozen into the C++ tests; regenerate to audit.
"""
from mpmath import mp, mpf, sqrt, pi, exp
import sympy as sp

mp.dps = 40

def nondim(nu, kappa, g, alpha, gamma, h, T1, d):
    pr = nu / kappa
    ra = g * alpha * gamma * h ** (4 - mpf(d) / 2) / (nu * kappa ** mpf("1.5"))
    ra_tilde = sqrt(kappa) * h ** (mpf(d) / 2 - 1) * T1 / gamma
    return pr, ra, ra_tilde

# water-like fixture
pr, ra, rt = nondim(mpf("1e-6"), mpf("1.4e-7"), mpf("9.81"), mpf("2e-4"),
                    mpf(1), mpf(1), mpf(1), 2)
print("fixture pr       =", mp.nstr(pr, 22))
print("fixture ra       =", mp.nstr(ra, 22))
print("fixture ra_tilde =", mp.nstr(rt, 22))
print("fixture ra*rt    =", mp.nstr(ra * rt, 22))

# gamma-scaling invariance: ra*ra_tilde independent of gamma
pr2, ra2, rt2 = nondim(mpf("1e-6"), mpf("1.4e-7"), mpf("9.81"), mpf("2e-4"),
                       mpf(3), mpf(1), mpf(1), 2)
assert abs(ra2 / ra - 3) < mpf("1e-35")
assert abs(rt2 * 3 / rt - 1) < mpf("1e-35")

# mollifier psi(z) = 30 z^2 (1-z)^2
z = sp.symbols("z")
psi = 30 * z**2 * (1 - z) ** 2
assert sp.integrate(psi, (z, 0, 1)) == 1
ps2 = sp.integrate(psi**2, (z, 0, 1))
print("int psi^2        =", ps2, "=", sp.nsimplify(ps2), float(ps2))
Psi = sp.integrate(psi, z)  # 10 z^3 - 15 z^4 + 6 z^5
print("Psi(z)           =", sp.expand(Psi))

# heat kernel amplitude at t = 0.1
print("exp(-pi^2/10)    =", mp.nstr(exp(-pi**2 / 10), 22))

# Dirichlet eigenvalues (2 pi j / L)^2 + (pi m)^2 for L = 2, first few by value
L = 2.0
import math
evs = []
for m in range(1, 7):
    for j in range(0, 7):
        lam = (2 * math.pi * j / L) ** 2 + (math.pi * m) ** 2
        evs.append((lam, m, j))
evs.sort()
for lam, m, j in evs[:12]:
    mult = 1 if j == 0 else 2
    print(f"eig m={m} j={j} lam={lam:.15g} x{mult}")

# Student-t two-sided 95% quantiles for batch-means halfwidths
from mpmath import mpf as _mpf
def t_quantile(p, df):
    # invert the regularized incomplete beta via bisection on the t CDF
    from mpmath import betainc, sqrt as msqrt
    def cdf(x):
        if x == 0:
            return mpf("0.5")
        ib = betainc(df / mpf(2), mpf("0.5"), 0, df / (df + x * x), regularized=True)
        return 1 - ib / 2 if x > 0 else ib / 2
    lo, hi = mpf(0), mpf(50)
    for _ in range(200):
        mid = (lo + hi) / 2
        if cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2
for df in (3, 7):
    print(f"t quantile 0.975 df={df} =", mp.nstr(t_quantile(mpf("0.975"), df), 22))

# background bound fixture: delta = 1, ra_tilde = 2, |D| = 2
rt_f, area_f, delta_f = mpf(2), mpf(2), mpf(1)
bound = 2 / rt_f**2 * (rt_f**2 / delta_f * mpf(10) / 7) + 1 / (rt_f**2 * area_f) - 1
print("background bound (rt=2,|D|=2,delta=1) =", mp.nstr(bound, 22))

# int tau'^2 for a mollified profile, numeric audit of the closed form
tau_d = sp.symbols("d", positive=True)
s = sp.symbols("s")
num = sp.integrate((30 * s**2 * (1 - s)**2)**2, (s, 0, 1))
print("closed-form check: int psi^2 == 10/7:", num == sp.Rational(10, 7))

# jackknife fixture: samples {0, ln 2, ln 3}, eta = 1
ex = [mpf(1), mpf(2), mpf(3)]
n_j = mpf(3)
s_j = sum(ex)
loo = [(s_j - e) / (n_j - 1) for e in ex]
jm = sum(loo) / n_j
jv = sum((v - jm) ** 2 for v in loo)
se = sqrt((n_j - 1) / n_j * jv)
print("jackknife fixture estimate =", mp.nstr(s_j / n_j, 22))
print("jackknife fixture se       =", mp.nstr(se, 22))
