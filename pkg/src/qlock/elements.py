"""Optomechanical building blocks.

Each block maps linear combinations (:class:`~qlock.specalg.LinComb`) of
quadratures, displacements and forces to new linear combinations at a single
analysis frequency.  Cavities are resonant, lossless single-ended cavities
observed well below their bandwidth, so their response is frequency flat.

Sign conventions (force on a mirror along its own displacement coordinate):

=========  =======  ==============
beam       mirror   radiation force
=========  =======  ==============
a          m        ``+hbar xi_a a0``
a          i        ``-hbar xi_a a0``
b          m        ``-hbar xi_b b0``
b          r        ``+hbar xi_b b0``
=========  =======  ==============

The interferometer length is ``X_sig + X_m - X_i`` and the sensor length is
``X_r - X_m``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

from .errors import ConfigurationError, DegenerateReadoutError, DomainError, SingularDynamicsError
from .specalg import (
    Constants,
    LinComb,
    NoiseSource,
    SourceKind,
    Spectrum,
    rotate_quadrature,
)

RADIATION_PRESSURE_SIGN = {
    ("a", "m"): +1,
    ("a", "i"): -1,
    ("b", "m"): -1,
    ("b", "r"): +1,
}


# --------------------------------------------------------------------------
# element descriptions


@dataclass(frozen=True)
class FieldChannel:
    """An optical probe beam and its cavity.

    ``xi`` is the optomechanical coupling; the optional physical fields are
    kept for bookkeeping when the channel was built from laboratory numbers.
    """

    name: str
    xi: float
    wavelength: Optional[float] = None
    finesse: Optional[float] = None
    alpha: Optional[float] = None

    def __post_init__(self):
        if not (self.xi > 0 and math.isfinite(self.xi)):
            raise DomainError(f"channel {self.name!r}: coupling xi must be > 0, got {self.xi}")

    @classmethod
    def from_power(
        cls,
        name: str,
        wavelength: float,
        finesse: float,
        cavity_power: float,
        constants: Constants = Constants.for_units("si"),
    ) -> "FieldChannel":
        alpha = intracavity_amplitude(cavity_power, wavelength, constants)
        xi = optomech_coupling(wavelength, finesse, alpha)
        return cls(name, xi, wavelength=wavelength, finesse=finesse, alpha=alpha)

    @property
    def amplitude_id(self) -> str:
        return f"{self.name}0"

    @property
    def phase_id(self) -> str:
        return f"{self.name}90"

    def vacuum_inputs(self) -> tuple[LinComb, LinComb, list[NoiseSource]]:
        """Coherent-state input quadratures ``(x0, x90)`` with unit spectra."""
        return (
            LinComb.symbol(self.amplitude_id),
            LinComb.symbol(self.phase_id),
            [NoiseSource(self.amplitude_id), NoiseSource(self.phase_id)],
        )


def suspended(mass: float) -> Callable[[float], complex]:
    """Free-mass impedance ``-i Omega M``."""
    return lambda omega: -1j * omega * mass


@dataclass(frozen=True)
class MechanicalMode:
    """A mirror: mass, mechanical impedance and classical force noise."""

    name: str
    mass: float
    impedance: Optional[Callable[[float], complex]] = None
    force_noise: Spectrum = 0.0

    def __post_init__(self):
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise DomainError(f"mirror {self.name!r}: mass must be > 0, got {self.mass}")

    @property
    def is_suspended(self) -> bool:
        return self.impedance is None

    def Z(self, omega: float) -> complex:
        if self.impedance is None:
            return -1j * omega * self.mass
        return complex(self.impedance(omega))

    @property
    def force_id(self) -> str:
        return f"F_{self.name}"

    def force_source(self) -> NoiseSource:
        return NoiseSource(self.force_id, SourceKind.FORCE, self.force_noise)


class GainMode(str, enum.Enum):
    FIXED = "fixed"
    INFINITE = "infinite"
    OPTIMIZED = "optimized"
    OFF = "off"


class ControlKind(str, enum.Enum):
    FEEDBACK = "feedback-to-m"
    FEEDFORWARD = "feedforward-to-i"
    SUBTRACTION = "signal-subtraction"


_DEFAULT_TARGET = {
    ControlKind.FEEDBACK: "m",
    ControlKind.FEEDFORWARD: "i",
    ControlKind.SUBTRACTION: "",
}


@dataclass(frozen=True)
class ControlLaw:
    """How the sensor estimate is used.

    ``gain`` is a complex number or a callable of the angular frequency.  Its
    meaning depends on ``kind``:

    * feedback-to-m: the feedback impedance ``Z_fb`` (force ``i Omega Z_fb Xhat_m``);
    * feedforward-to-i: a dimensionless factor ``G`` times the target
      impedance (force ``-i Omega G Z_i Xhat_m``, i.e. displacement ``G Xhat_m``);
    * signal-subtraction: the weight ``w`` in ``Xhat_sig - w Xhat_m``.
    """

    kind: ControlKind = ControlKind.FEEDBACK
    mode: GainMode = GainMode.INFINITE
    gain: Union[complex, Callable[[float], complex]] = 0.0
    target: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ControlKind(self.kind))
        object.__setattr__(self, "mode", GainMode(self.mode))
        if self.target is None:
            object.__setattr__(self, "target", _DEFAULT_TARGET[self.kind])
        if self.kind is ControlKind.FEEDFORWARD and self.mode is GainMode.INFINITE:
            raise ConfigurationError(
                "feedforward has no infinite-gain limit (the actuated mirror is "
                "not seen by the sensor); use a fixed gain"
            )
        if self.kind is ControlKind.SUBTRACTION and self.mode not in (GainMode.FIXED, GainMode.OFF):
            raise ConfigurationError("signal subtraction takes a fixed weight")

    def value(self, omega: float) -> complex:
        if self.mode is GainMode.OFF:
            return 0j
        if self.mode is not GainMode.FIXED:
            raise ConfigurationError(f"gain mode {self.mode.value!r} has no finite value")
        g = self.gain(omega) if callable(self.gain) else self.gain
        return complex(g)

    def with_mode(self, mode: GainMode | str, gain=None) -> "ControlLaw":
        return ControlLaw(self.kind, GainMode(mode), self.gain if gain is None else gain, self.target)


class AngleRule(str, enum.Enum):
    PHASE = "phase"
    FIXED = "fixed"
    EVADING = "evading"
    EVADING_CAVITY = "evading-cavity"
    OPTIMAL = "optimal"


@dataclass(frozen=True)
class DetectionPolicy:
    """Homodyne detection angle, possibly frequency dependent.

    * ``phase``: theta = pi/2;
    * ``fixed``: a constant theta;
    * ``evading``: cot theta = (Omega_b_SQL / Omega)^2;
    * ``evading-cavity``: cot theta = 1.5 (Omega_b_SQL / Omega)^2;
    * ``optimal``: cot theta = (Omega_a_SQL / Omega)^2.
    """

    rule: AngleRule = AngleRule.PHASE
    theta: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "rule", AngleRule(self.rule))
        if self.rule is AngleRule.FIXED:
            if self.theta is None:
                raise ConfigurationError("fixed detection angle needs a value")
            if math.sin(self.theta) == 0.0 or abs(math.sin(self.theta)) < 1e-12:
                raise DegenerateReadoutError(f"detection angle {self.theta} has sin(theta) = 0")

    @classmethod
    def parse(cls, text: str) -> "DetectionPolicy":
        text = text.strip()
        if text.startswith("fixed="):
            try:
                theta = float(text.split("=", 1)[1])
            except ValueError:
                raise ConfigurationError(f"bad fixed angle {text!r}") from None
            return cls(AngleRule.FIXED, theta)
        try:
            return cls(AngleRule(text))
        except ValueError:
            raise ConfigurationError(
                f"unknown detection rule {text!r}; expected phase, fixed=<rad>, "
                "evading, evading-cavity or optimal"
            ) from None

    def label(self) -> str:
        if self.rule is AngleRule.FIXED:
            return f"fixed={self.theta!r}"
        return self.rule.value

    def angle(self, omega: float, *, sql_a: float | None = None, sql_b: float | None = None) -> float:
        rule = self.rule
        if rule is AngleRule.PHASE:
            return math.pi / 2
        if rule is AngleRule.FIXED:
            return float(self.theta)
        if rule is AngleRule.OPTIMAL:
            ref, factor = sql_a, 1.0
        elif rule is AngleRule.EVADING:
            ref, factor = sql_b, 1.0
        else:
            ref, factor = sql_b, 1.5
        if ref is None:
            raise ConfigurationError(f"detection rule {rule.value!r} needs the matching SQL frequency")
        return arccot(factor * (ref / omega) ** 2)


def arccot(x: float) -> float:
    """Inverse cotangent on (0, pi) for x in R, (0, pi/2] for x >= 0."""
    return math.atan2(1.0, x)


# --------------------------------------------------------------------------
# operations


def cavity_reflect(in0, in90, length, xi: float):
    """Reflected quadratures of a resonant lossless cavity.

    The amplitude quadrature is unchanged; the phase quadrature picks up
    ``2 xi`` times the cavity length change ``length``.
    """
    return in0, in90 + 2.0 * xi * length


def optomech_coupling(wavelength: float, finesse: float, alpha: float) -> float:
    """Coupling ``xi = (4 pi / lambda) alpha sqrt(2 F / pi)``.

    ``alpha`` is the intracavity mean amplitude with ``|alpha|^2`` the
    intracavity photon flux (photons per second).
    """
    if wavelength <= 0 or finesse <= 0:
        raise DomainError(f"wavelength and finesse must be > 0 (got {wavelength}, {finesse})")
    if alpha < 0:
        raise DomainError(f"mean amplitude must be >= 0, got {alpha}")
    return 4.0 * math.pi / wavelength * alpha * math.sqrt(2.0 * finesse / math.pi)


def intracavity_amplitude(cavity_power: float, wavelength: float, constants: Constants) -> float:
    """``alpha = sqrt(P_cav / (hbar omega_L))`` for an intracavity power ``P_cav``."""
    if cavity_power < 0 or wavelength <= 0:
        raise DomainError(f"need P_cav >= 0 and wavelength > 0 (got {cavity_power}, {wavelength})")
    omega_laser = 2.0 * math.pi * constants.c / wavelength
    return math.sqrt(cavity_power / (constants.hbar * omega_laser))


def incident_power_for(cavity_power: float, finesse: float) -> float:
    """Incident power of a resonant single-ended cavity, buildup ``2F/pi``."""
    if cavity_power <= 0 or finesse <= 0:
        raise DomainError(f"need positive power and finesse (got {cavity_power}, {finesse})")
    return cavity_power * math.pi / (2.0 * finesse)


def mirror_response(Z: complex, forces, omega: float):
    """Displacement ``X = F / (-i Omega Z)`` driven by ``forces``."""
    denom = -1j * omega * complex(Z)
    if denom == 0:
        raise SingularDynamicsError("mechanical impedance vanishes", omega=omega)
    return forces * (1.0 / denom)


def radiation_force(channel: FieldChannel, mirror: str, amplitude, hbar: float):
    """Radiation-pressure force of ``channel`` on ``mirror`` (see sign table)."""
    try:
        sign = RADIATION_PRESSURE_SIGN[(channel.name, mirror)]
    except KeyError:
        raise ConfigurationError(f"beam {channel.name!r} does not push mirror {mirror!r}") from None
    return sign * hbar * channel.xi * amplitude


def sql_frequency(xi: float, mass: float, hbar: float = 1.0) -> float:
    """Frequency ``sqrt(2 hbar xi^2 / M)`` where shot and back-action noise balance."""
    if xi <= 0 or mass <= 0:
        raise DomainError(f"need xi > 0 and M > 0 (got {xi}, {mass})")
    return math.sqrt(2.0 * hbar * xi**2 / mass)


def homodyne(out0, out90, theta: float, xi: float):
    """Displacement estimator ``a_theta^out / (2 xi sin theta)``."""
    s = math.sin(theta)
    if abs(s) < 1e-12:
        raise DegenerateReadoutError(f"homodyne angle {theta} has sin(theta) = 0")
    return rotate_quadrature(out0, out90, theta) * (1.0 / (2.0 * xi * s))


def lossy_sensor_port(out0, out90, eps: float, prefix: str = "v"):
    """Beamsplitter loss on an output beam.

    Scales the beam by ``sqrt(1 - eps)`` and admixes a fresh vacuum with
    amplitude ``sqrt(eps)``.  Returns ``(out0, out90, sources)``.
    """
    if not (0.0 <= eps < 1.0):
        raise DomainError(f"loss fraction must lie in [0, 1), got {eps}")
    t = math.sqrt(1.0 - eps)
    r = math.sqrt(eps)
    v0, v90 = f"{prefix}0", f"{prefix}90"
    sources = [NoiseSource(v0, SourceKind.VACUUM_LOSS), NoiseSource(v90, SourceKind.VACUUM_LOSS)]
    return (
        t * out0 + r * LinComb.symbol(v0),
        t * out90 + r * LinComb.symbol(v90),
        sources,
    )
