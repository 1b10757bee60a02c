"""
Back-action cancellation in the sensor
======================================

Reading the sensor at cot(theta) = (Omega_b_SQL/Omega)^2 removes the
radiation-pressure noise of the sensor itself.  With xi_b = xi_a the
result is flat at 1/4xi_a^2 + 1/4xi_b^2.
"""

# %%
import numpy as np

from qlock import scenarios as S
from qlock.network import SENSOR, FrequencyGrid, assemble, budget, solve

grid = FrequencyGrid.default()
xa = S.XI_A_NORMALIZED

e = budget(S.backaction_cancel(xa), grid).total
print("flat:", e.min(), e.max())

# %%
# The sensor error Xhat_m - X_m keeps only phase noise b90
sol = solve(assemble(S.backaction_cancel(xa), 0.3))
err = sol.coefficients(SENSOR) - sol.coefficients("X_m")
print({k: abs(v) for k, v in err.items() if k.startswith("b")})

# %%
# Losses in the sensor let vacuum in and spoil the cancellation a little
for eps in (0.0, 0.001, 0.01, 0.05):
    b = budget(S.backaction_cancel(xa, loss=eps), FrequencyGrid(np.array([0.1, 1.0])))
    print(f"loss={eps:5.3f}  Sigma(0.1)={b.total[0]:9.3f}  Sigma(1)={b.total[1]:.4f}")
print("free at 0.1:", S.free_sigma(xa, 1.0, 0.1) * 2 * xa**2)
