"""CSV and JSON plot-data writers (and a JSON reader for round trips)."""

from __future__ import annotations

import csv
import functools
import io
import json
import subprocess
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError
from .network import NoiseBudget
from .specalg import Units


def fmt(x: float) -> str:
    return f"{x + 0.0:.12g}"


@functools.lru_cache(maxsize=None)
def version_string() -> str:
    from . import __version__

    try:
        described = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return __version__
    tag = described.stdout.strip()
    return f"{__version__}+{tag}" if described.returncode == 0 and tag else __version__


def _check_common_grid(budgets: Sequence[NoiseBudget]) -> np.ndarray:
    if not budgets:
        raise ConfigurationError("no budgets to write")
    omega = budgets[0].omega
    for b in budgets[1:]:
        if b.normalization is not budgets[0].normalization:
            raise ConfigurationError("budgets mix normalized and SI units")
        if b.omega.shape != omega.shape or not np.array_equal(b.omega, omega):
            raise ConfigurationError("budgets do not share one frequency grid")
    names = [b.name for b in budgets]
    if len(set(names)) != len(names):
        raise ConfigurationError(f"duplicate budget names in {names}")
    return omega


def to_csv(budgets: Sequence[NoiseBudget]) -> str:
    """``omega``, one total column per budget, then ``<name>:<source>`` columns
    and, for optimized budgets, ``<name>:gain_re`` / ``<name>:gain_im``."""
    omega = _check_common_grid(budgets)
    header = ["omega"] + [b.name for b in budgets]
    columns = [omega] + [b.total for b in budgets]
    for b in budgets:
        for sid, values in b.per_source.items():
            header.append(f"{b.name}:{sid}")
            columns.append(values)
    for b in budgets:
        if b.gain is not None:
            header += [f"{b.name}:gain_re", f"{b.name}:gain_im"]
            columns += [b.gain.real, b.gain.imag]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in zip(*columns):
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _rounded(values: Iterable[float]) -> list:
    # JSON keeps full double precision so that a round trip is lossless;
    # the 12-digit rendering is for CSV only.  Non-finite values (infinite
    # optimal gains) become strings, since JSON has no literal for them.
    out = []
    for v in values:
        v = float(v) + 0.0
        out.append(v if np.isfinite(v) else fmt(v))
    return out


def _plain(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, Units):
        return value.value
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def to_json(budgets: Sequence[NoiseBudget]) -> str:
    omega = _check_common_grid(budgets)
    doc = {
        "version": version_string(),
        "units": budgets[0].normalization.value,
        "omega_units": "Omega/Omega_a_SQL" if budgets[0].normalization is Units.NORMALIZED else "rad/s",
        "sigma_units": "1/(2 xi_a^2)" if budgets[0].normalization is Units.NORMALIZED else "m^2/Hz",
        "omega": _rounded(omega),
        "budgets": [
            {
                "name": b.name,
                "scenario": b.scenario_id,
                "parameters": _plain(b.metadata),
                "total": _rounded(b.total),
                "per_source": {k: _rounded(v) for k, v in b.per_source.items()},
                "gain": None
                if b.gain is None
                else {"re": _rounded(b.gain.real), "im": _rounded(b.gain.imag)},
            }
            for b in budgets
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def _floats(values) -> np.ndarray:
    return np.array([float(v) for v in values])


def from_json(text: str) -> list[NoiseBudget]:
    doc = json.loads(text)
    units = Units.parse(doc["units"])
    omega = _floats(doc["omega"])
    budgets = []
    for entry in doc["budgets"]:
        gain = None
        if entry.get("gain") is not None:
            gain = _floats(entry["gain"]["re"]) + 1j * _floats(entry["gain"]["im"])
        budgets.append(
            NoiseBudget(
                name=entry["name"],
                scenario_id=entry["scenario"],
                omega=omega.copy(),
                total=_floats(entry["total"]),
                per_source={k: _floats(v) for k, v in entry["per_source"].items()},
                normalization=units,
                metadata=entry.get("parameters", {}),
                gain=gain,
            )
        )
    return budgets


def emit(budgets: Sequence[NoiseBudget], fmt_name: str = "csv", path=None) -> str:
    """Render ``budgets`` as ``csv`` or ``json``; write to ``path`` if given."""
    if fmt_name == "csv":
        text = to_csv(budgets)
    elif fmt_name == "json":
        text = to_json(budgets)
    else:
        raise ConfigurationError(f"unknown output format {fmt_name!r} (csv or json)")
    if path is not None and str(path) != "-":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text
