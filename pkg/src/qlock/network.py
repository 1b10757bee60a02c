"""Per-frequency linear network: assembly, solve and noise budget.

A :class:`Scenario` describes which beams, mirrors, readouts and control law
are present.  At each analysis frequency :func:`assemble` writes every
dynamical relation as a linear equation ``expr == 0`` over unknown
observables (mirror displacements, sensor estimate, actuator force,
interferometer estimate) and noise sources; :func:`solve` eliminates the
unknowns and returns each observable as a combination of sources.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Optional

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
    cavity_reflect,
    homodyne,
    lossy_sensor_port,
    mirror_response,
    radiation_force,
    sql_frequency,
)
from .errors import ConfigurationError, SingularDynamicsError, UnitsError
from .specalg import (
    Constants,
    LinComb,
    NoiseSource,
    SourceKind,
    Units,
    spectrum_of,
    squeezed_field,
    squeezed_sources,
)

SCENARIO_IDS = (
    "free",
    "sql-envelope",
    "squeezed-input",
    "variational-readout",
    "locking",
    "backaction-cancel",
    "cavity-locking",
    "signal-correction",
)

SIGNAL = "X_sig"
PROBE = "U_fb"
ESTIMATOR = "Xhat_sig"
SENSOR = "Xhat_m"
ACTUATOR = "F_fb"

# Conditioning limit of the row/column-equilibrated system matrix.
_COND_LIMIT = 1e12
_RESIDUAL_TOL = 1e-10
# Per-source parts below this fraction of the total are written as zero.
_ROUNDOFF_FLOOR = 1e-15


@dataclass(frozen=True)
class Scenario:
    """A measurement configuration.

    ``a`` and ``m`` (interferometer beam and end mirror) are always present.
    The sensor cavity is ``b`` with reference mirror ``r``; ``i`` is the
    interferometer input mirror.
    """

    id: str
    a: FieldChannel
    m: MechanicalMode
    b: Optional[FieldChannel] = None
    r: Optional[MechanicalMode] = None
    i: Optional[MechanicalMode] = None
    control: Optional[ControlLaw] = None
    readout_a: DetectionPolicy = DetectionPolicy()
    readout_b: DetectionPolicy = DetectionPolicy()
    loss: float = 0.0
    squeeze_r: float = 0.0
    squeeze_angle: Optional[float] = None
    units: Units = Units.NORMALIZED
    label: Optional[str] = None
    parameters: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "units", Units.parse(self.units))

    @property
    def name(self) -> str:
        return self.label or self.id

    @property
    def constants(self) -> Constants:
        return Constants.for_units(self.units)

    @property
    def sql_a(self) -> float:
        return sql_frequency(self.a.xi, self.m.mass, self.constants.hbar)

    @property
    def sql_b(self) -> Optional[float]:
        if self.b is None:
            return None
        mirror = self.r if self.r is not None else self.m
        return sql_frequency(self.b.xi, mirror.mass, self.constants.hbar)

    @property
    def has_sensor(self) -> bool:
        return self.b is not None

    @property
    def actuated(self) -> bool:
        return self.control is not None and self.control.kind is not ControlKind.SUBTRACTION

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def validate(self) -> None:
        sid = self.id
        if sid not in SCENARIO_IDS:
            raise ConfigurationError(f"unknown scenario id {sid!r}")
        if sid == "sql-envelope":
            raise ConfigurationError("'sql-envelope' is a closed-form curve, not a network")
        if (self.b is None) != (self.r is None):
            raise ConfigurationError(f"{sid}: sensor beam b and reference mirror r go together")
        if self.control is not None and self.b is None:
            raise ConfigurationError(f"{sid}: control law without a sensor channel (xi_b)")
        if self.control is not None and self.control.kind is ControlKind.FEEDFORWARD and self.i is None:
            raise ConfigurationError(f"{sid}: feedforward needs the input mirror i")
        if self.loss and self.b is None:
            raise ConfigurationError(f"{sid}: sensor loss without a sensor channel")
        if self.readout_b.rule in (AngleRule.EVADING, AngleRule.EVADING_CAVITY) and self.b is None:
            raise ConfigurationError(f"{sid}: evading readout needs a sensor channel")
        if self.squeeze_r < 0:
            raise ConfigurationError(f"{sid}: squeeze parameter must be >= 0")
        if not (0.0 <= self.loss < 1.0):
            raise ConfigurationError(f"{sid}: loss must lie in [0, 1)")
        if sid in ("locking", "backaction-cancel"):
            if self.control is None or self.control.kind is not ControlKind.FEEDBACK:
                raise ConfigurationError(f"{sid}: needs a feedback control law on mirror m")
        if sid == "cavity-locking":
            if self.i is None or self.r is None:
                raise ConfigurationError("cavity-locking needs three mirrors (m, r, i)")
            if self.readout_b.rule is not AngleRule.EVADING_CAVITY:
                raise ConfigurationError("cavity-locking needs the evading-cavity angle rule")
        if sid == "signal-correction":
            if self.control is None or self.control.kind is not ControlKind.SUBTRACTION:
                raise ConfigurationError("signal-correction needs a subtraction weight")


@dataclass(frozen=True)
class LinearSystem:
    """Equations ``expr == 0`` over ``unknowns`` and ``sources`` at one frequency."""

    omega: float
    scenario: str
    unknowns: tuple
    sources: dict
    equations: tuple
    observable: str = ESTIMATOR

    def matrices(self) -> tuple[np.ndarray, np.ndarray]:
        uidx = {u: k for k, u in enumerate(self.unknowns)}
        sidx = {s: k for k, s in enumerate(self.sources)}
        M = np.zeros((len(self.equations), len(self.unknowns)), dtype=complex)
        R = np.zeros((len(self.equations), len(self.sources)), dtype=complex)
        for row, (label, expr) in enumerate(self.equations):
            for sym, c in expr.items():
                if sym in uidx:
                    M[row, uidx[sym]] += c
                elif sym in sidx:
                    R[row, sidx[sym]] -= c
                else:
                    raise ConfigurationError(
                        f"equation {label!r} references unregistered symbol {sym!r}"
                    )
        return M, R


@dataclass(frozen=True)
class Solution:
    """Every unknown as a combination of sources: ``values[unknown, source]``."""

    system: LinearSystem
    values: np.ndarray
    residual: float

    def coefficients(self, unknown: str) -> LinComb:
        row = self.values[self.system.unknowns.index(unknown)]
        return LinComb(zip(self.system.sources, row))

    @property
    def estimator(self) -> LinComb:
        return self.coefficients(self.system.observable)

    def noise(self, unknown: str | None = None) -> LinComb:
        """Coefficients on genuine noise sources only (signal and probe dropped)."""
        expr = self.coefficients(unknown or self.system.observable)
        return expr.restrict(s for s, src in self.system.sources.items() if src.counts_as_noise)

    def spectrum(self, unknown: str | None = None, per_source: bool = False):
        return spectrum_of(self.noise(unknown), self.system.sources, self.system.omega, per_source=per_source)


# --------------------------------------------------------------------------
# assembly


def _loop_factor(sc: Scenario, omega: float) -> complex:
    """Actuator force per unit gain per unit sensor estimate."""
    kind = sc.control.kind
    if kind is ControlKind.FEEDBACK:
        return 1j * omega
    if kind is ControlKind.FEEDFORWARD:
        return -1j * omega * _mirror(sc, sc.control.target).Z(omega)
    raise ConfigurationError(f"control kind {kind.value!r} has no actuator")


def _mirror(sc: Scenario, name: str) -> MechanicalMode:
    mirror = getattr(sc, name, None) if name in ("m", "r", "i") else None
    if mirror is None:
        raise ConfigurationError(f"{sc.id}: control target mirror {name!r} is absent")
    return mirror


def assemble(sc: Scenario, omega: float, *, open_loop: bool = False) -> LinearSystem:
    """Build the linear system of ``sc`` at angular frequency ``omega`` (internal units).

    With ``open_loop=True`` the control law is cut and the actuator force is
    driven by the zero-spectrum probe source ``U_fb`` instead.
    """
    sc.validate()
    hbar = sc.constants.hbar
    sources: dict[str, NoiseSource] = {}

    def register(*srcs):
        for s in srcs:
            sources[s.id] = s

    register(NoiseSource(SIGNAL, SourceKind.SIGNAL, 0.0))

    # interferometer input field
    if sc.squeeze_r > 0:
        if sc.squeeze_angle is None:
            phi = -arccot((sc.sql_a / omega) ** 2)
        else:
            phi = sc.squeeze_angle
        register(*squeezed_sources(sc.a.name, sc.squeeze_r))
        a0, a90 = squeezed_field(sc.a.name, phi)
    else:
        a0, a90, srcs = sc.a.vacuum_inputs()
        register(*srcs)

    unknowns = ["X_m"]
    X_m = LinComb.symbol("X_m")
    X_r = X_i = None
    if sc.r is not None:
        unknowns.append("X_r")
        X_r = LinComb.symbol("X_r")
    if sc.i is not None:
        unknowns.append("X_i")
        X_i = LinComb.symbol("X_i")

    forces = {"m": radiation_force(sc.a, "m", a0, hbar)}
    if sc.i is not None:
        forces["i"] = radiation_force(sc.a, "i", a0, hbar)

    if sc.b is not None:
        b0, b90, srcs = sc.b.vacuum_inputs()
        register(*srcs)
        forces["m"] = forces["m"] + radiation_force(sc.b, "m", b0, hbar)
        forces["r"] = radiation_force(sc.b, "r", b0, hbar)

    for name in forces:
        mirror = getattr(sc, name)
        src = mirror.force_source()
        register(src)
        forces[name] = forces[name] + LinComb.symbol(src.id)

    equations = []
    actuated = sc.actuated
    if actuated:
        unknowns.append(ACTUATOR)
        target = sc.control.target
        _mirror(sc, target)
        forces[target] = forces[target] + LinComb.symbol(ACTUATOR)

    displacements = {"m": X_m, "r": X_r, "i": X_i}
    for name, force in forces.items():
        mirror = getattr(sc, name)
        equations.append(
            (f"motion of {name}", displacements[name] - mirror_response(mirror.Z(omega), force, omega))
        )

    # sensor cavity: length X_r - X_m, estimate of X_m
    if sc.b is not None:
        unknowns.append(SENSOR)
        theta_b = sc.readout_b.angle(omega, sql_a=sc.sql_a, sql_b=sc.sql_b)
        out0, out90 = cavity_reflect(b0, b90, X_r - X_m, sc.b.xi)
        xi_eff = sc.b.xi
        if sc.loss > 0:
            out0, out90, srcs = lossy_sensor_port(out0, out90, sc.loss, prefix="v")
            register(*srcs)
            xi_eff = sc.b.xi * math.sqrt(1.0 - sc.loss)
        estimate = -homodyne(out0, out90, theta_b, xi_eff)
        equations.append(("sensor readout", LinComb.symbol(SENSOR) - estimate))

    if actuated:
        law = sc.control
        if open_loop or law.mode is GainMode.OFF:
            register(NoiseSource(PROBE, SourceKind.PROBE, 0.0))
            equations.append(("actuator (open loop)", LinComb.symbol(ACTUATOR) - LinComb.symbol(PROBE)))
        elif law.mode is GainMode.INFINITE:
            # Large-gain limit: the loop forces the sensor estimate to zero.
            equations.append(("control (infinite gain)", LinComb.symbol(SENSOR)))
        elif law.mode is GainMode.FIXED:
            k = _loop_factor(sc, omega) * law.value(omega)
            equations.append(("control", LinComb.symbol(ACTUATOR) - k * LinComb.symbol(SENSOR)))
        else:
            raise ConfigurationError(
                f"{sc.id}: optimized gain must be resolved by the optimizer before assembly"
            )

    # interferometer readout
    length = LinComb.symbol(SIGNAL) + X_m
    if X_i is not None:
        length = length - X_i
    theta_a = sc.readout_a.angle(omega, sql_a=sc.sql_a, sql_b=sc.sql_b)
    out0, out90 = cavity_reflect(a0, a90, length, sc.a.xi)
    raw = homodyne(out0, out90, theta_a, sc.a.xi)
    row = LinComb.symbol(ESTIMATOR) - raw
    if sc.control is not None and sc.control.kind is ControlKind.SUBTRACTION:
        row = row + sc.control.value(omega) * LinComb.symbol(SENSOR)
    unknowns.append(ESTIMATOR)
    equations.append(("interferometer readout", row))

    return LinearSystem(
        omega=float(omega),
        scenario=sc.name,
        unknowns=tuple(unknowns),
        sources=sources,
        equations=tuple(equations),
    )


def solve(system: LinearSystem) -> Solution:
    """Solve ``system`` exactly; raises :class:`SingularDynamicsError` if singular."""
    M, R = system.matrices()
    n, k = M.shape
    if n != k:
        raise SingularDynamicsError(
            f"system is not square ({n} equations, {k} unknowns)",
            omega=system.omega,
            scenario=system.scenario,
        )
    row_scale = 1.0 / np.maximum(np.abs(M).max(axis=1), np.finfo(float).tiny)
    Ms = M * row_scale[:, None]
    col_scale = 1.0 / np.maximum(np.abs(Ms).max(axis=0), np.finfo(float).tiny)
    Ms = Ms * col_scale[None, :]
    if not np.all(np.isfinite(Ms)) or np.linalg.cond(Ms) > _COND_LIMIT:
        raise SingularDynamicsError("singular dynamics", omega=system.omega, scenario=system.scenario)
    Y = np.linalg.solve(Ms, R * row_scale[:, None])
    X = Y * col_scale[:, None]
    resid = np.abs(M @ X - R).max(initial=0.0)
    scale = (np.abs(M).max() * np.abs(X).max(initial=0.0)) + np.abs(R).max(initial=0.0)
    rel = resid / scale if scale > 0 else resid
    if rel > _RESIDUAL_TOL:
        raise SingularDynamicsError(
            f"residual {rel:.3g} exceeds tolerance", omega=system.omega, scenario=system.scenario
        )
    return Solution(system, X, float(rel))


# --------------------------------------------------------------------------
# loop breaking


@dataclass(frozen=True)
class OpenLoop:
    """Open-loop responses at one frequency.

    ``A`` and ``S`` are the interferometer and sensor estimates with the
    actuator idle, ``h_sig`` and ``h_m`` their responses to a unit actuator
    force, and ``kappa`` the actuator force per unit gain per unit sensor
    estimate.  Closing the loop with gain ``g`` gives::

        Xhat_sig(g) = A + kappa g h_sig S / (1 - kappa g h_m)
    """

    omega: float
    source_ids: tuple
    spectra: np.ndarray
    A: np.ndarray
    S: np.ndarray
    h_sig: complex
    h_m: complex
    kappa: complex

    def closed(self, gain: complex) -> np.ndarray:
        if np.isinf(gain):
            return self.A - self.h_sig * self.S / self.h_m
        k = self.kappa * gain
        return self.A + k * self.h_sig * self.S / (1.0 - k * self.h_m)

    def sigma(self, gain: complex) -> float:
        c = self.closed(gain)
        return float(np.sum(np.abs(c) ** 2 * self.spectra))

    def subtraction_weight(self, gain: complex) -> complex:
        """Weight ``w`` such that ``A - w S`` equals the closed-loop estimate."""
        if np.isinf(gain):
            return self.h_sig / self.h_m
        k = self.kappa * gain
        return -k * self.h_sig / (1.0 - k * self.h_m)


def open_loop(sc: Scenario, omega: float) -> OpenLoop:
    if not sc.actuated:
        raise ConfigurationError(f"{sc.id}: no actuated control law to open")
    sol = solve(assemble(sc, omega, open_loop=True))
    noise_ids = tuple(s for s, src in sol.system.sources.items() if src.counts_as_noise)
    A, S = sol.coefficients(ESTIMATOR), sol.coefficients(SENSOR)
    return OpenLoop(
        omega=float(omega),
        source_ids=noise_ids,
        spectra=np.array([sol.system.sources[s].evaluate(omega) for s in noise_ids]),
        A=np.array([A.coeff(s) for s in noise_ids]),
        S=np.array([S.coeff(s) for s in noise_ids]),
        h_sig=A.coeff(PROBE),
        h_m=S.coeff(PROBE),
        kappa=_loop_factor(sc, omega),
    )


# --------------------------------------------------------------------------
# budgets


@dataclass(frozen=True)
class FrequencyGrid:
    """Ascending analysis frequencies in one unit mode.

    Normalized grids hold ``Omega / Omega_a_SQL``; SI grids hold rad/s.
    """

    values: np.ndarray
    mode: Units = Units.NORMALIZED

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ConfigurationError("frequency grid must be a non-empty 1-d array")
        if np.any(~np.isfinite(v)) or np.any(v <= 0):
            raise ConfigurationError("frequencies must be finite and > 0")
        if np.any(np.diff(v) <= 0):
            raise ConfigurationError("frequency grid must be strictly ascending")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "mode", Units.parse(self.mode))

    @classmethod
    def make(cls, lo: float, hi: float, n: int, log: bool = True, mode=Units.NORMALIZED):
        if not lo < hi:
            raise ConfigurationError(f"grid min {lo} must be < max {hi}")
        if n < 2:
            raise ConfigurationError(f"grid needs at least 2 points, got {n}")
        if log:
            if lo <= 0:
                raise ConfigurationError("log grid needs min > 0")
            values = np.logspace(math.log10(lo), math.log10(hi), n)
        else:
            values = np.linspace(lo, hi, n)
        return cls(values, mode)

    @classmethod
    def default(cls) -> "FrequencyGrid":
        return cls.make(0.1, 10.0, 400, log=True, mode=Units.NORMALIZED)

    def __len__(self) -> int:
        return self.values.size


@dataclass
class NoiseBudget:
    """Equivalent input noise of one scenario on a frequency grid."""

    name: str
    scenario_id: str
    omega: np.ndarray
    total: np.ndarray
    per_source: dict
    normalization: Units
    metadata: dict = field(default_factory=dict)
    gain: Optional[np.ndarray] = None

    def normalized(self) -> "NoiseBudget":
        """Frequencies over ``Omega_a_SQL`` and spectra in units of ``1/2 xi_a^2``."""
        if self.normalization is Units.NORMALIZED:
            return self
        xi_a, sql_a = self.metadata["xi_a"], self.metadata["sql_a"]
        f = 2.0 * xi_a**2
        return dataclasses.replace(
            self,
            omega=self.omega / sql_a,
            total=self.total * f,
            per_source={k: v * f for k, v in self.per_source.items()},
            normalization=Units.NORMALIZED,
        )

    def check(self, rtol: float = 1e-12) -> None:
        """Assert the decomposition sums to the total and nothing is negative."""
        if self.per_source:
            parts = np.sum(list(self.per_source.values()), axis=0)
            if not np.allclose(parts, self.total, rtol=rtol, atol=0):
                raise AssertionError(f"{self.name}: per-source decomposition does not sum to total")
        if np.any(self.total < 0):
            raise AssertionError(f"{self.name}: negative spectrum")


def internal_omegas(sc: Scenario, grid: FrequencyGrid) -> np.ndarray:
    if grid.mode is not sc.units:
        raise UnitsError(
            f"{sc.name}: {grid.mode.value} grid used with a {sc.units.value} scenario"
        )
    return grid.values * sc.sql_a if grid.mode is Units.NORMALIZED else grid.values


def budget_metadata(sc: Scenario) -> dict[str, Any]:
    meta = {
        "scenario": sc.id,
        "units": sc.units.value,
        "xi_a": sc.a.xi,
        "sql_a": sc.sql_a,
        "mass": sc.m.mass,
        "readout_a": sc.readout_a.label(),
    }
    if sc.b is not None:
        meta.update(xi_b=sc.b.xi, sql_b=sc.sql_b, readout_b=sc.readout_b.label(), loss=sc.loss)
    if sc.control is not None:
        meta.update(control=sc.control.kind.value, gain_mode=sc.control.mode.value)
    if sc.squeeze_r:
        meta["squeeze_r"] = sc.squeeze_r
    meta.update(sc.parameters)
    return meta


def budget(sc: Scenario, grid: FrequencyGrid) -> NoiseBudget:
    """Equivalent input noise of ``sc`` at every grid point, with per-source parts."""
    sc.validate()
    omegas = internal_omegas(sc, grid)
    scale = 2.0 * sc.a.xi**2 if grid.mode is Units.NORMALIZED else 1.0
    optimized = sc.control is not None and sc.control.mode is GainMode.OPTIMIZED
    if optimized:
        from .optimizer import optimize_gain

    totals = np.empty(len(grid))
    gains = np.empty(len(grid), dtype=complex) if optimized else None
    rows: list[dict[str, float]] = []
    for k, omega in enumerate(omegas):
        current = sc
        if optimized:
            sol_g = optimize_gain(sc, omega)
            gains[k] = sol_g.optimal_gain
            if np.isinf(sol_g.optimal_gain):
                law = sc.control.with_mode(GainMode.INFINITE)
            else:
                law = sc.control.with_mode(GainMode.FIXED, gain=sol_g.optimal_gain)
            current = sc.replace(control=law)
        try:
            sol = solve(assemble(current, omega))
        except SingularDynamicsError as exc:
            raise SingularDynamicsError(
                "singular dynamics", omega=float(grid.values[k]), scenario=sc.name
            ) from exc
        parts = sol.spectrum(per_source=True)
        rows.append(parts)
        totals[k] = sum(parts.values()) * scale

    keys: list[str] = []
    for parts in rows:
        keys.extend(s for s in parts if s not in keys)
    per_source = {s: np.array([p.get(s, 0.0) for p in rows]) * scale for s in keys}
    # exact cancellations leave roundoff residue; keep output platform-stable
    for values in per_source.values():
        values[values < _ROUNDOFF_FLOOR * totals] = 0.0
    return NoiseBudget(
        name=sc.name,
        scenario_id=sc.id,
        omega=np.array(grid.values, dtype=float),
        total=totals,
        per_source=per_source,
        normalization=grid.mode,
        metadata=budget_metadata(sc),
        gain=gains,
    )
