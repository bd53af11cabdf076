"""Non-Gaussian regime of the unfiltered (order-0) moment.

For H > 3/4 the variance of mean(X_i^2) - rho(0) decays like N^(4H-4), not
1/N, and at H = 3/4 like log N / N.  The exact double sum, a Monte Carlo
estimate and the limiting constants are printed side by side.

    python demos/variance_rates.py
"""
from fougmm import FouParams
from fougmm.gmm import rate_diagnostic

print("H = 0.85, alpha = 0.5")
print(rate_diagnostic(FouParams(0.85, 1.0, 1.0), 0.5, (500, 1000, 2000), m=300, seed=1).table())

print("\nH = 0.75, alpha = 0.5 (exact sums only)")
rep = rate_diagnostic(FouParams(0.75, 1.0, 1.0), 0.5, (1000, 4000, 16000), m=0)
print(rep.table())
print("the N/log N scaled sequence creeps toward its limit; the log correction is slow")
