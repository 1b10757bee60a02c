"""
Locking the whole cavity
========================

The sensor watches both m and the reference r, and the estimate drives the
input mirror i with feedforward gain 2.  The interferometer length then no
longer feels radiation pressure.
"""

# %%
from qlock import scenarios as S
from qlock.network import FrequencyGrid, budget

grid = FrequencyGrid.default()
xa = S.XI_A_NORMALIZED

for ratio in (1.0, 2.0, 4.0):
    tot = budget(S.cavity_locking(xa * ratio), grid).total
    closed = S.cavity_locking_sigma(xa, xa * ratio) * 2 * xa**2
    print(f"xi_b/xi_a={ratio}:  min={tot.min():.9f}  max={tot.max():.9f}  closed form={closed}")

# %%
# Wrong feedforward gain leaves part of the back-action in
for G in (0.0, 1.0, 2.0, 3.0):
    sc = S.cavity_locking(xa, feedforward=G)
    print(G, budget(sc, FrequencyGrid.make(0.1, 1, 2)).total)

# %%
# Momentum bookkeeping: radiation pressure cancels in sum Z_k X_k
print("force sum residual:", S.force_sum_residual(S.cavity_locking(), 0.7))

# %%
# Same information, no actuator: subtract w(Omega) * Xhat_m from the output
sc = S.cavity_locking()
for w in (0.2, 2.0):
    print(w, S.signal_correction_sigma(sc, w), budget(sc, FrequencyGrid.make(w, 2 * w, 2)).total[0])
