"""A miniature version of the accuracy tables.

Two Hurst exponents, L = 3 and 4 filters, and m = 20 replications per cell,
so it finishes in a couple of minutes.  The full grids live in configs/ and
run through ``fougmm montecarlo``.

    python demos/small_monte_carlo.py
"""
import logging

from fougmm import FouParams, Scenario, run_scenario, run_table

logging.basicConfig(level=logging.ERROR)

reports = []
for H in (0.55, 0.85):
    s = Scenario(params_true=FouParams(H, 1.0, 1.0), alpha=0.1, N=1000, m=20, L_values=(3, 4))
    rep = run_scenario(s, progress=lambda sc, c: print(f"H={sc.params_true.H} L={c.L}: "
                                                       f"{c.m_used} fits in {c.wall_clock:.1f}s"))
    reports.append(rep)

print()
print(run_table(reports).markdown)
for rep in reports:
    for L, cell in rep.cells.items():
        print(f"H={rep.scenario.params_true.H} L={L}: weighting {cell.weighting}, "
              f"boundary estimates {cell.boundary}, 99% coverage {cell.coverage:.2f}")
