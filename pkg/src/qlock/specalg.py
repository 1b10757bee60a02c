"""Spectral and quadrature algebra.

Everything downstream is expressed as linear combinations of named symbols
(noise sources, the signal, and dynamical unknowns) with complex
per-frequency coefficients.  Only second moments are tracked: a quadrature of
a coherent or vacuum field has a flat noise spectrum equal to 1, spectra are
one-sided and symmetrized, and distinct sources are uncorrelated.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, Union

from .errors import ConfigurationError, DomainError, UnitsError

__all__ = [
    "HBAR_SI",
    "C_SI",
    "Units",
    "Constants",
    "AngularFrequency",
    "LinComb",
    "SourceKind",
    "NoiseSource",
    "rotate_quadrature",
    "rotate_pair",
    "spectrum_of",
    "squeezed_sources",
    "squeezed_field",
    "ZERO",
]

HBAR_SI = 1.0545718e-34  # J s
C_SI = 299792458.0  # m / s

Number = Union[int, float, complex]


class Units(str, enum.Enum):
    SI = "si"
    NORMALIZED = "normalized"

    @classmethod
    def parse(cls, value: "Units | str") -> "Units":
        if isinstance(value, Units):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigurationError(
                f"unknown units mode {value!r} (expected 'si' or 'normalized')"
            ) from None


@dataclass(frozen=True)
class Constants:
    hbar: float
    c: float

    @classmethod
    def for_units(cls, units: Units | str) -> "Constants":
        units = Units.parse(units)
        if units is Units.SI:
            return cls(hbar=HBAR_SI, c=C_SI)
        return cls(hbar=1.0, c=1.0)


@dataclass(frozen=True)
class AngularFrequency:
    """A strictly positive analysis frequency tagged with its unit mode.

    In SI mode ``value`` is in rad/s; in normalized mode it is the ratio to
    the interferometer's SQL frequency.
    """

    value: float
    mode: Units = Units.NORMALIZED

    def __post_init__(self):
        object.__setattr__(self, "mode", Units.parse(self.mode))
        if not (math.isfinite(self.value) and self.value > 0):
            raise DomainError(f"angular frequency must be > 0, got {self.value!r}")

    def _check(self, other: "AngularFrequency"):
        if other.mode is not self.mode:
            raise UnitsError(
                f"cannot combine {self.mode.value} and {other.mode.value} frequencies"
            )

    def __lt__(self, other: "AngularFrequency") -> bool:
        self._check(other)
        return self.value < other.value

    def ratio(self, other: "AngularFrequency") -> float:
        self._check(other)
        return self.value / other.value


class LinComb(Mapping[str, complex]):
    """Immutable linear combination ``sum_k c_k * symbol_k``.

    Supports ``+``, ``-``, unary ``-``, and multiplication/division by
    scalars.  Zero coefficients are kept so that the set of symbols an
    expression touches stays visible.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[str, Number] | Iterable[tuple[str, Number]] = ()):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[str, complex] = {}
        for key, value in items:
            acc[key] = acc.get(key, 0j) + complex(value)
        self._terms = acc

    @classmethod
    def symbol(cls, name: str, coeff: Number = 1.0) -> "LinComb":
        return cls({name: coeff})

    def __getitem__(self, key: str) -> complex:
        return self._terms[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def coeff(self, name: str) -> complex:
        return self._terms.get(name, 0j)

    def __add__(self, other: "LinComb") -> "LinComb":
        if not isinstance(other, LinComb):
            return NotImplemented
        return LinComb(list(self._terms.items()) + list(other._terms.items()))

    def __sub__(self, other: "LinComb") -> "LinComb":
        if not isinstance(other, LinComb):
            return NotImplemented
        return self + (-other)

    def __neg__(self) -> "LinComb":
        return LinComb({k: -v for k, v in self._terms.items()})

    def __mul__(self, scalar: Number) -> "LinComb":
        if isinstance(scalar, LinComb):
            return NotImplemented
        s = complex(scalar)
        return LinComb({k: s * v for k, v in self._terms.items()})

    __rmul__ = __mul__

    def __truediv__(self, scalar: Number) -> "LinComb":
        return self * (1.0 / complex(scalar))

    def restrict(self, names: Iterable[str]) -> "LinComb":
        keep = set(names)
        return LinComb({k: v for k, v in self._terms.items() if k in keep})

    def drop(self, names: Iterable[str]) -> "LinComb":
        skip = set(names)
        return LinComb({k: v for k, v in self._terms.items() if k not in skip})

    def __eq__(self, other) -> bool:
        if not isinstance(other, LinComb):
            return NotImplemented
        keys = set(self._terms) | set(other._terms)
        return all(self.coeff(k) == other.coeff(k) for k in keys)

    __hash__ = None

    def __repr__(self) -> str:
        body = " + ".join(f"({v:.6g})*{k}" for k, v in self._terms.items())
        return f"LinComb({body or '0'})"


ZERO = LinComb()


class SourceKind(str, enum.Enum):
    QUANTUM = "quantum-quadrature"
    FORCE = "classical-force"
    VACUUM_LOSS = "vacuum-loss"
    # Zero-spectrum bookkeeping symbols: the length signal itself and the
    # actuator injection port used for loop breaking.
    SIGNAL = "signal"
    PROBE = "probe"


Spectrum = Union[float, Callable[[float], float]]


@dataclass(frozen=True)
class NoiseSource:
    """An uncorrelated noise input with a real, non-negative spectrum."""

    id: str
    kind: SourceKind = SourceKind.QUANTUM
    spectrum: Spectrum = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", SourceKind(self.kind))
        if not callable(self.spectrum) and self.spectrum < 0:
            raise DomainError(f"source {self.id!r}: negative spectrum {self.spectrum}")

    def evaluate(self, omega: float) -> float:
        value = self.spectrum(omega) if callable(self.spectrum) else self.spectrum
        value = float(value)
        if value < 0 or not math.isfinite(value):
            raise DomainError(f"source {self.id!r}: invalid spectrum {value} at omega={omega}")
        return value

    @property
    def counts_as_noise(self) -> bool:
        return self.kind not in (SourceKind.SIGNAL, SourceKind.PROBE)


def rotate_quadrature(c0, c90, theta: float):
    """Quadrature ``a_theta = cos(theta) a_0 + sin(theta) a_pi/2``.

    ``c0`` and ``c90`` may be complex numbers or :class:`LinComb` expressions
    for the amplitude and phase quadratures; the result has the same type.
    """
    return math.cos(theta) * c0 + math.sin(theta) * c90


def rotate_pair(c0, c90, theta: float):
    """Return the pair ``(a_theta, a_theta+pi/2)`` built from ``(a_0, a_pi/2)``."""
    return (
        rotate_quadrature(c0, c90, theta),
        rotate_quadrature(c0, c90, theta + math.pi / 2),
    )


def spectrum_of(
    observable: Mapping[str, Number],
    sources: Mapping[str, NoiseSource],
    omega: float,
    *,
    per_source: bool = False,
):
    """Noise spectrum ``sum_i |c_i|^2 S_i(omega)`` of a linear observable.

    With ``per_source=True`` the individual contributions are returned as a
    dict instead of their sum.
    """
    parts: dict[str, float] = {}
    for sid, c in observable.items():
        try:
            src = sources[sid]
        except KeyError:
            raise ConfigurationError(f"observable references unknown source {sid!r}") from None
        c = complex(c)
        if not cmath.isfinite(c):
            raise DomainError(f"non-finite coefficient on source {sid!r}")
        parts[sid] = abs(c) ** 2 * src.evaluate(omega)
    if per_source:
        return parts
    return float(sum(parts.values()))


def squeezed_sources(prefix: str, r: float) -> tuple[NoiseSource, NoiseSource]:
    """Squeezed and anti-squeezed quadrature sources, spectra ``e^-2r``, ``e^2r``."""
    if r < 0 or not math.isfinite(r):
        raise DomainError(f"squeeze parameter must be >= 0, got {r}")
    return (
        NoiseSource(f"{prefix}_sq", SourceKind.QUANTUM, math.exp(-2 * r)),
        NoiseSource(f"{prefix}_asq", SourceKind.QUANTUM, math.exp(2 * r)),
    )


def squeezed_field(prefix: str, phi: float) -> tuple[LinComb, LinComb]:
    """Amplitude/phase quadratures of a field squeezed along angle ``phi``.

    The squeezed quadrature ``a_phi`` and its conjugate ``a_phi+pi/2`` are the
    independent sources; inverting the rotation gives ``a_0`` and ``a_pi/2``.
    """
    sq = LinComb.symbol(f"{prefix}_sq")
    asq = LinComb.symbol(f"{prefix}_asq")
    return rotate_pair(sq, asq, -phi)
