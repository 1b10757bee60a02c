"""
Physical design: equal couplings from very different cavities
==============================================================

A long-baseline arm (finesse 600, 15 kW circulating) and a small
high-finesse sensor (finesse 1e5, 90 W) at the same wavelength have the
same optomechanical coupling.
"""

# %%
import math

from qlock.elements import FieldChannel, incident_power_for, sql_frequency
from qlock.specalg import Constants

si = Constants.for_units("si")
lam = 1064e-9
arm = FieldChannel.from_power("a", lam, 600, 15e3, si)
sensor = FieldChannel.from_power("b", lam, 1e5, 90.0, si)
print(f"xi_a = {arm.xi:.6e}   xi_b = {sensor.xi:.6e}   ratio = {sensor.xi / arm.xi:.9f}")

# %%
# incident power on the sensor cavity: build-up 2F/pi
p_in = incident_power_for(90.0, 1e5)
print(f"P_in = {p_in * 1e3:.3f} mW")

# %%
# SQL frequency for a 10 kg mirror
M = 10.0
w_sql = sql_frequency(arm.xi, M, si.hbar)
print(f"Omega_SQL = {w_sql:.4g} rad/s  ({w_sql / (2 * math.pi):.4g} Hz)")
