"""
Quantum locking of the end mirror
=================================

A weakly coupled sensor cavity (xi_b = xi_a/5) measures the end mirror
against a reference mirror; feedback pins one to the other.
"""

# %%
import numpy as np

from qlock import scenarios as S
from qlock.network import FrequencyGrid, budget
from qlock.optimizer import auto_region, grid_search_oracle, optimize_gain

grid = FrequencyGrid.default()
xa = S.XI_A_NORMALIZED

free = budget(S.free(), grid).total
inf = budget(S.locking(xa / 5), grid).total
opt = budget(S.locking(xa / 5, gain="optimized"), grid)

# %%
# Infinite gain trades the interferometer's back-action for the sensor's:
# 1/2 + 12.5 + 0.02 Omega^-4.  At low frequency that is 25x quieter.
print("infinite gain at 0.1:", inf[0], " closed form:", 0.5 + 12.5 + 0.02 * 0.1**-4)
print("free / locked at 0.01:", S.free_sigma(xa, 1, 0.01) / S.locking_sigma_inf(xa, xa / 5, 1, 0.01))

# %%
# Optimized complex gain, one per frequency.  Low: follows the locked curve.
# High: the loop switches off, but the sensor beam still pushes on m, so
# the curve sits a hair above the free interferometer.
for w in (0.1, 1.0, 1.22, 10.0):
    k = np.argmin(abs(grid.values - w))
    print(f"Omega={grid.values[k]:6.3f}  free={free[k]:.6f}  inf={inf[k]:.4f}  opt={opt.total[k]:.6f}  |g|={abs(opt.gain[k]):.3g}")

# %%
# Cross-check the eigen solution against brute force
sc = S.locking(xa / 5, gain="optimized")
sol = optimize_gain(sc, 0.5)
ref = grid_search_oracle(sc, 0.5, auto_region(sol.optimal_gain), n=201)
print("eigen", sol.sigma_opt, " grid", ref.sigma_opt, " boundary?", ref.diagnostics["on_boundary"])
