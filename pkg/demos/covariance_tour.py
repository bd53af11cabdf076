"""Tour of the fOU autocovariance evaluators.

Compares the incomplete-gamma closed form with the spectral quadrature,
shows the power-law tail taking over at large lags, and fits the tail
coefficient numerically to settle its normalization in lambda.

    python demos/covariance_tour.py
"""
import numpy as np

from fougmm.covmodel import (FouParams, fit_tail_coefficient, fou_rho_closed, fou_rho_spectral,
                             fou_rho_tail, fou_var0, rho, tail_coefficient)

p = FouParams(H=0.75, lam=1.1, sigma=0.9)
print(f"Var(X0) = {fou_var0(p):.12f}")

# both exact evaluators on a short grid of lags
t = 0.5 * np.arange(8)
closed = fou_rho_closed(p, t)
spectral = fou_rho_spectral(p, t, tol=1e-12)
print("\n  t      closed form        spectral          rel. gap")
for ti, c, s in zip(t, closed, spectral):
    print(f"{ti:4.1f}  {c:.14f}  {s:.14f}  {abs(c - s) / s:.1e}")

# the dispatcher hands over to the tail expansion past lambda t = 30
lags = np.array([10.0, 25.0, 27.0, 28.0, 60.0, 200.0])
print("\n  t      rho(t)        leading power law")
for ti, r in zip(lags, rho(p, lags)):
    print(f"{ti:6.1f}  {r:.10f}  {fou_rho_tail(p, ti):.10f}")

# which lambda power belongs in the tail coefficient?
for lam in (0.5, 1.0, 2.0):
    q = p.replace(lam=lam)
    print(f"\nlambda = {lam}: fitted {fit_tail_coefficient(q):.6f}, "
          f"sigma^2 H(2H-1)/lambda^2 = {tail_coefficient(q, 'exact'):.6f}, "
          f"sigma^2 H(2H-1)/lambda = {tail_coefficient(q, 'lambda1'):.6f}")

# rough paths (H < 1/2) only have the spectral evaluator
rough = FouParams(0.3, 1.0, 1.0)
print("\nH = 0.3:", np.round(rho(rough, [0.0, 0.1, 1.0, 5.0]), 8))
