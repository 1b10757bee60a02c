"""
Free interferometer and the standard quantum limit
===================================================

Phase noise falls as the coupling grows, radiation-pressure noise rises.
Their sum touches hbar/(M Omega^2) at exactly one frequency.
"""

# %%
import numpy as np

from qlock import scenarios as S
from qlock.network import FrequencyGrid, budget

grid = FrequencyGrid.default()          # 400 log points, Omega/Omega_SQL in [0.1, 10]
free = budget(S.free(), grid)
sql = S.budget_for(S.sql_reference(), grid)

# %%
# Normalized units: 1/(2 xi_a^2) = 1 and Omega_SQL = 1, so the free curve is
# (1 + Omega^-4)/2 and the SQL is Omega^-2.
for w in (0.1, 1.0, 10.0):
    k = np.argmin(abs(grid.values - w))
    print(f"Omega={grid.values[k]:6.3f}  free={free.total[k]:10.5f}  sql={sql.total[k]:10.5f}")

# %%
# per-source split: a0 is radiation pressure, a90 is shot (phase) noise
k = np.argmin(abs(grid.values - 1.0))
print({src: round(v[k], 6) for src, v in free.per_source.items()})

# %%
# The SQL is an envelope: scanning the coupling at fixed frequency never goes below it.
w = 0.4
xis = np.logspace(-2, 2, 2001)
best = S.free_sigma(xis, 1.0, w).min()
print(f"min over xi at Omega={w}: {best:.6f}   hbar/(M Omega^2) = {S.sql_envelope(1.0, w):.6f}")

# %%
try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    plt.loglog(grid.values, free.total, label="free")
    plt.loglog(grid.values, sql.total, "--", label="SQL")
    plt.xlabel(r"$\Omega/\Omega_{SQL}$")
    plt.ylabel(r"$\Sigma$ [$1/2\xi_a^2$]")
    plt.legend()
    plt.savefig("free_interferometer.png", dpi=120)
