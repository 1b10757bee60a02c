"""Ready-made measurement configurations and their closed-form spectra.

Builders default to normalized units (hbar = M = 1, xi_a = 1/sqrt(2), so
that Omega_a_SQL = 1 and 1/2xi_a^2 = 1).  Closed forms take the same
arguments in any consistent unit system and broadcast over numpy arrays;
they serve as independent oracles for the network solve.
"""

from __future__ import annotations

import math
from typing import Callable, Optional, Union

import numpy as np

from .elements import (
    AngleRule,
    ControlKind,
    ControlLaw,
    DetectionPolicy,
    FieldChannel,
    GainMode,
    MechanicalMode,
    arccot,
)
from .errors import ConfigurationError
from .network import (
    ACTUATOR,
    FrequencyGrid,
    NoiseBudget,
    Scenario,
    budget,
    budget_metadata,
    internal_omegas,
    open_loop,
    solve,
    assemble,
)
from .specalg import LinComb, SourceKind, Units

__all__ = [
    "XI_A_NORMALIZED",
    "Scenario",
    "free",
    "sql_reference",
    "squeezed_input",
    "variational_readout",
    "locking",
    "backaction_cancel",
    "cavity_locking",
    "signal_correction",
    "build",
    "budget_for",
    "fig3",
    "free_sigma",
    "sql_envelope",
    "squeezed_input_sigma",
    "variational_sigma",
    "locking_sigma_inf",
    "backaction_cancel_sigma",
    "cavity_locking_sigma",
    "cavity_locking_angle",
    "signal_correction_sigma",
    "force_sum_residual",
]

XI_A_NORMALIZED = 1.0 / math.sqrt(2.0)

GainSpec = Union[str, complex, float, Callable[[float], complex]]


# --------------------------------------------------------------------------
# builders


def control_law(gain: GainSpec, kind: ControlKind = ControlKind.FEEDBACK) -> ControlLaw:
    """Control law from ``'infinite'``, ``'optimized'``, ``'off'`` or a finite gain."""
    if isinstance(gain, str):
        try:
            mode = GainMode(gain)
        except ValueError:
            raise ConfigurationError(f"unknown gain mode {gain!r}") from None
        if mode is GainMode.FIXED:
            raise ConfigurationError("fixed gain needs a value")
        return ControlLaw(kind, mode)
    return ControlLaw(kind, GainMode.FIXED, gain)


def _mirror(name, mass, force_noise=0.0):
    return MechanicalMode(name, mass, force_noise=force_noise)


def free(
    xi_a: float = XI_A_NORMALIZED,
    mass: float = 1.0,
    *,
    units: Units | str = Units.NORMALIZED,
    force_noise: float = 0.0,
    readout: DetectionPolicy = DetectionPolicy(),
    label: Optional[str] = None,
) -> Scenario:
    """Single cavity with a suspended end mirror and phase readout."""
    return Scenario(
        "free",
        a=FieldChannel("a", xi_a),
        m=_mirror("m", mass, force_noise),
        readout_a=readout,
        units=units,
        label=label,
    )


def sql_reference(
    xi_a: float = XI_A_NORMALIZED, mass: float = 1.0, *, units=Units.NORMALIZED, label=None
) -> Scenario:
    """Carrier for the closed-form standard-quantum-limit curve."""
    return Scenario("sql-envelope", a=FieldChannel("a", xi_a), m=_mirror("m", mass), units=units, label=label)


def squeezed_input(
    r: float,
    xi_a: float = XI_A_NORMALIZED,
    mass: float = 1.0,
    *,
    squeeze_angle: Optional[float] = None,
    units=Units.NORMALIZED,
    label=None,
) -> Scenario:
    """Free interferometer fed with squeezed light.

    By default the squeezing angle tracks the frequency-dependent quadrature
    that carries all the quantum noise; a fixed ``squeeze_angle`` is also
    accepted for comparison.
    """
    return Scenario(
        "squeezed-input",
        a=FieldChannel("a", xi_a),
        m=_mirror("m", mass),
        squeeze_r=r,
        squeeze_angle=squeeze_angle,
        units=units,
        label=label,
    )


def variational_readout(
    xi_a: float = XI_A_NORMALIZED,
    mass: float = 1.0,
    *,
    readout: DetectionPolicy = DetectionPolicy(AngleRule.OPTIMAL),
    units=Units.NORMALIZED,
    label=None,
) -> Scenario:
    """Free interferometer read out at the back-action-cancelling quadrature."""
    return Scenario(
        "variational-readout",
        a=FieldChannel("a", xi_a),
        m=_mirror("m", mass),
        readout_a=readout,
        units=units,
        label=label,
    )


def _sensor_scenario(sid, xi_a, xi_b, mass, gain, readout_b, loss, units, label, force_noise_m, force_noise_r):
    return Scenario(
        sid,
        a=FieldChannel("a", xi_a),
        m=_mirror("m", mass, force_noise_m),
        b=FieldChannel("b", xi_b),
        r=_mirror("r", mass, force_noise_r),
        control=control_law(gain),
        readout_b=readout_b,
        loss=loss,
        units=units,
        label=label,
    )


def locking(
    xi_b: Optional[float] = None,
    xi_a: float = XI_A_NORMALIZED,
    mass: float = 1.0,
    *,
    gain: GainSpec = "infinite",
    readout_b: DetectionPolicy = DetectionPolicy(),
    loss: float = 0.0,
    force_noise_m: float = 0.0,
    force_noise_r: float = 0.0,
    units=Units.NORMALIZED,
    label=None,
) -> Scenario:
    """Mirror m locked by feedback on a reference mirror r (default xi_b = xi_a/5)."""
    xi_b = xi_a / 5.0 if xi_b is None else xi_b
    return _sensor_scenario(
        "locking", xi_a, xi_b, mass, gain, readout_b, loss, units, label, force_noise_m, force_noise_r
    )


def backaction_cancel(
    xi_b: Optional[float] = None,
    xi_a: float = XI_A_NORMALIZED,
    mass: float = 1.0,
    *,
    gain: GainSpec = "infinite",
    readout_b: DetectionPolicy = DetectionPolicy(AngleRule.EVADING),
    loss: float = 0.0,
    units=Units.NORMALIZED,
    label=None,
) -> Scenario:
    """Quantum locking with a back-action-evading sensor readout (default xi_b = xi_a)."""
    xi_b = xi_a if xi_b is None else xi_b
    return _sensor_scenario("backaction-cancel", xi_a, xi_b, mass, gain, readout_b, loss, units, label, 0.0, 0.0)


def cavity_locking(
    xi_b: Optional[float] = None,
    xi_a: float = XI_A_NORMALIZED,
    mass: float = 1.0,
    *,
    feedforward: GainSpec = 2.0,
    loss: float = 0.0,
    units=Units.NORMALIZED,
    label=None,
) -> Scenario:
    """Whole-cavity locking: sensor on m and r, feedforward onto input mirror i."""
    xi_b = xi_a if xi_b is None else xi_b
    return Scenario(
        "cavity-locking",
        a=FieldChannel("a", xi_a),
        m=_mirror("m", mass),
        b=FieldChannel("b", xi_b),
        r=_mirror("r", mass),
        i=_mirror("i", mass),
        control=control_law(feedforward, ControlKind.FEEDFORWARD),
        readout_b=DetectionPolicy(AngleRule.EVADING_CAVITY),
        loss=loss,
        units=units,
        label=label,
    )


def signal_correction(actuated: Scenario, weight: Optional[GainSpec] = None, label=None) -> Scenario:
    """Replace the actuator of ``actuated`` by numerical subtraction.

    The mirrors are left alone and ``w Xhat_m`` is subtracted from the
    interferometer output.  By default ``w(Omega)`` is the weight that makes
    the result identical to the actuated configuration.
    """
    if weight is None:
        if not actuated.actuated:
            raise ConfigurationError(f"{actuated.name}: nothing to convert into a subtraction")
        law = actuated.control
        if law.mode is GainMode.OPTIMIZED:
            from .optimizer import optimize_gain

            def gain_at(omega):
                return optimize_gain(actuated, omega).optimal_gain
        elif law.mode is GainMode.INFINITE:
            def gain_at(omega):
                return complex(np.inf)
        else:
            gain_at = law.value

        def weight(omega):
            return open_loop(actuated, omega).subtraction_weight(gain_at(omega))

    return actuated.replace(
        id="signal-correction",
        control=ControlLaw(ControlKind.SUBTRACTION, GainMode.FIXED, weight),
        label=label,
    )


def build(sid: str, **params) -> Scenario:
    """Builder lookup by scenario id."""
    builders = {
        "free": free,
        "sql-envelope": sql_reference,
        "squeezed-input": squeezed_input,
        "variational-readout": variational_readout,
        "locking": locking,
        "backaction-cancel": backaction_cancel,
        "cavity-locking": cavity_locking,
    }
    if sid == "signal-correction":
        base = params.pop("base", "cavity-locking")
        label = params.pop("label", None)
        return signal_correction(build(base, **params), label=label)
    try:
        builder = builders[sid]
    except KeyError:
        raise ConfigurationError(f"unknown scenario id {sid!r}") from None
    return builder(**params)


def fig3(extended: bool = False) -> list[Scenario]:
    """Curves of the sensitivity figure, normalized units.

    a: free, b: SQL, c/d: locking with xi_b = xi_a/5 at infinite/optimal gain,
    e: back-action cancellation with xi_b = xi_a.  ``extended`` adds curve e
    with optimized gain and a 1% lossy sensor.
    """
    xa = XI_A_NORMALIZED
    curves = [
        free(label="a_free"),
        sql_reference(label="b_sql"),
        locking(xa / 5, label="c_locking_inf"),
        locking(xa / 5, gain="optimized", label="d_locking_opt"),
        backaction_cancel(xa, label="e_backaction_inf"),
    ]
    if extended:
        curves += [
            backaction_cancel(xa, gain="optimized", label="e_backaction_opt"),
            backaction_cancel(xa, loss=0.01, label="f_backaction_loss1pct"),
        ]
    return curves


def budget_for(sc: Scenario, grid: FrequencyGrid) -> NoiseBudget:
    """Noise budget of any scenario id, including the closed-form SQL curve."""
    if sc.id != "sql-envelope":
        return budget(sc, grid)
    omegas = internal_omegas(sc, grid)
    total = sql_envelope(sc.m.mass, omegas, sc.constants.hbar)
    if grid.mode is Units.NORMALIZED:
        total = total * 2.0 * sc.a.xi**2
    return NoiseBudget(
        name=sc.name,
        scenario_id=sc.id,
        omega=np.array(grid.values, dtype=float),
        total=total,
        per_source={"sql": total.copy()},
        normalization=grid.mode,
        metadata=budget_metadata(sc),
    )


# --------------------------------------------------------------------------
# closed forms


def free_sigma(xi_a, mass, omega, sigma_ff=0.0, hbar=1.0):
    """Phase noise + radiation-pressure noise + classical force noise, suspended mirror."""
    omega = np.asarray(omega, dtype=float)
    z2 = (omega * mass) ** 2
    return 1.0 / (4 * xi_a**2) + (hbar**2 * xi_a**2 + sigma_ff) / (omega**2 * z2)


def sql_envelope(mass, omega, hbar=1.0):
    """``hbar / (M Omega^2)``: lower envelope of ``free_sigma`` over the coupling."""
    omega = np.asarray(omega, dtype=float)
    return hbar / (mass * omega**2)


def squeezed_input_sigma(xi_a, mass, omega, r, hbar=1.0):
    omega = np.asarray(omega, dtype=float)
    cot = (2 * hbar * xi_a**2 / mass) / omega**2
    return math.exp(-2 * r) * (1 + cot**2) / (4 * xi_a**2)


def variational_sigma(xi_a, omega=1.0):
    return np.full(np.shape(omega), 1.0 / (4 * xi_a**2))


def locking_sigma_inf(xi_a, xi_b, mass, omega, hbar=1.0):
    omega = np.asarray(omega, dtype=float)
    return 1 / (4 * xi_a**2) + 1 / (4 * xi_b**2) + hbar**2 * xi_b**2 / (omega**4 * mass**2)


def backaction_cancel_sigma(xi_a, xi_b):
    return 1 / (4 * xi_a**2) + 1 / (4 * xi_b**2)


def cavity_locking_sigma(xi_a, xi_b):
    return 1 / (4 * xi_a**2) + 1 / xi_b**2


def cavity_locking_angle(omega, omega_b_sql):
    """Sensor readout angle with ``cot theta = 1.5 (Omega_b_SQL / Omega)^2``."""
    if np.ndim(omega):
        return np.arctan2(1.0, 1.5 * (omega_b_sql / np.asarray(omega, dtype=float)) ** 2)
    return arccot(1.5 * (omega_b_sql / omega) ** 2)


def signal_correction_sigma(sc: Scenario, omega: float, weight: Optional[GainSpec] = None) -> float:
    """Sigma with the sensor estimate subtracted instead of actuated.

    ``sc`` is an actuated scenario; ``omega`` is in internal units.
    """
    corrected = signal_correction(sc, weight)
    return solve(assemble(corrected, omega)).spectrum()


def force_sum_residual(sc: Scenario, omega: float) -> float:
    """Relative residual of ``sum_k Z_k X_k = F_fb / (-i Omega)`` over the optical sources.

    Radiation pressure only moves momentum between the mirrors of one
    cavity, so it drops out of the impedance-weighted sum of displacements;
    the feedforward force is the only optical term left.  Classical force
    noise is external and is excluded.
    """
    sol = solve(assemble(sc, omega))
    mirrors = [n for n in ("i", "m", "r") if getattr(sc, n) is not None]
    optical = [s for s, src in sol.system.sources.items() if src.kind is SourceKind.QUANTUM]
    total = LinComb()
    for name in mirrors:
        total = total + getattr(sc, name).Z(omega) * sol.coefficients(f"X_{name}")
    if ACTUATOR in sol.system.unknowns:
        total = total - sol.coefficients(ACTUATOR) / (-1j * omega)
    scale = max(abs(sol.coefficients(f"X_{n}").coeff(s)) for n in mirrors for s in optical)
    return max(abs(total.coeff(s)) for s in optical) / scale
