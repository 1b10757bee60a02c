"""Command-line sweeps: ``qlock --config run.toml --format csv --out budget.csv``.

Config files are TOML::

    units = "normalized"          # or "si"
    format = "csv"                # or "json"
    out = "budget.csv"            # optional, stdout otherwise
    preset = "fig3"               # optional: fig3 or fig3-extended

    [grid]
    min = 0.1
    max = 10.0
    points = 400
    log = true

    [scenario.locked]
    id = "locking"
    xi_a = 0.7071067811865476
    xi_b = 0.1414213562373095
    gain = "optimized"            # infinite | optimized | off | fixed=<re>,<im>

In SI mode each scenario gives ``mass`` and either ``xi_a`` or the
physical triple ``wavelength``, ``finesse_a``, ``power_a`` (intracavity
power, W); likewise for the sensor with ``finesse_b``, ``power_b``.

Exit codes: 0 success, 2 configuration error, 3 numeric error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from . import scenarios as S
from .elements import AngleRule, DetectionPolicy, FieldChannel
from .errors import ConfigurationError, DomainError, NumericError
from .network import FrequencyGrid, NoiseBudget, Scenario, internal_omegas
from .output import emit
from .specalg import Constants, Units

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

TOP_KEYS = {"units", "format", "out", "preset", "grid", "scenario", "verify"}
GRID_KEYS = {"min", "max", "points", "log"}
SCENARIO_KEYS = {
    "id",
    "label",
    "xi_a",
    "xi_b",
    "mass",
    "wavelength",
    "finesse_a",
    "power_a",
    "finesse_b",
    "power_b",
    "loss",
    "squeeze_r",
    "squeeze_angle",
    "gain",
    "feedforward",
    "angle",
    "angle_a",
    "angle_b",
    "base",
    "force_noise_m",
    "force_noise_r",
}
SENSOR_IDS = {"locking", "backaction-cancel", "cavity-locking", "signal-correction"}
NUMERIC_KEYS = SCENARIO_KEYS - {"id", "label", "gain", "feedforward", "angle", "angle_a", "angle_b", "base"}


@dataclass
class RunConfig:
    scenarios: list
    grid: FrequencyGrid
    units: Units = Units.NORMALIZED
    format: str = "csv"
    out: Optional[str] = None
    verify: bool = False


# --------------------------------------------------------------------------
# parsing


def parse_gain(text) -> Any:
    if isinstance(text, (int, float)):
        return complex(text)
    text = str(text).strip()
    if text.startswith("fixed="):
        parts = text.split("=", 1)[1].split(",")
        try:
            re = float(parts[0])
            im = float(parts[1]) if len(parts) > 1 else 0.0
        except (ValueError, IndexError):
            raise ConfigurationError(f"bad fixed gain {text!r}; expected fixed=<re>,<im>") from None
        if len(parts) > 2:
            raise ConfigurationError(f"bad fixed gain {text!r}; expected fixed=<re>,<im>")
        return complex(re, im)
    if text in ("infinite", "optimized", "off"):
        return text
    raise ConfigurationError(f"unknown gain {text!r}; expected fixed=<re>,<im>, infinite, optimized or off")


def parse_grid(text: str, mode: Units) -> FrequencyGrid:
    """``min:max:n[:log]``."""
    parts = text.split(":")
    if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] != "log"):
        raise ConfigurationError(f"bad grid {text!r}; expected min:max:n[:log]")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigurationError(f"bad grid {text!r}; expected min:max:n[:log]") from None
    return FrequencyGrid.make(lo, hi, n, log=len(parts) == 4, mode=mode)


def _grid_from_table(table: dict, mode: Units) -> FrequencyGrid:
    unknown = set(table) - GRID_KEYS
    if unknown:
        raise ConfigurationError(f"unknown key grid.{sorted(unknown)[0]}")
    try:
        lo, hi = float(table["min"]), float(table["max"])
        n = int(table.get("points", 400))
    except KeyError as exc:
        raise ConfigurationError(f"missing key grid.{exc.args[0]}") from None
    except (TypeError, ValueError):
        raise ConfigurationError("grid.min, grid.max and grid.points must be numbers") from None
    log = table.get("log", True)
    if not isinstance(log, bool):
        raise ConfigurationError("grid.log must be true or false")
    return FrequencyGrid.make(lo, hi, n, log=log, mode=mode)


def _default_grid(mode: Units) -> FrequencyGrid:
    if mode is Units.NORMALIZED:
        return FrequencyGrid.default()
    raise ConfigurationError("SI runs need an explicit [grid] in rad/s")


def _channel_xi(params: dict, beam: str, where: str, units: Units) -> Optional[float]:
    xi_key = f"xi_{beam}"
    physical = [k for k in ("wavelength", f"finesse_{beam}", f"power_{beam}") if k in params]
    has_phys = f"finesse_{beam}" in params or f"power_{beam}" in params
    if xi_key in params and has_phys:
        raise ConfigurationError(f"{where}: give either {xi_key} or finesse/power for beam {beam}, not both")
    if xi_key in params:
        return params[xi_key]
    if not has_phys:
        return None
    if units is not Units.SI:
        raise ConfigurationError(f"{where}: physical parameters need units = 'si'")
    missing = {"wavelength", f"finesse_{beam}", f"power_{beam}"} - set(physical)
    if missing:
        raise ConfigurationError(f"{where}: missing key {sorted(missing)[0]!r}")
    ch = FieldChannel.from_power(
        beam, params["wavelength"], params[f"finesse_{beam}"], params[f"power_{beam}"], Constants.for_units("si")
    )
    return ch.xi


def _readouts(params: dict, has_sensor: bool, where: str) -> dict:
    """Detection policies keyed by ``readout_a`` / ``readout_b``.

    A bare ``angle`` goes to the sensor when there is one, except the
    interferometer-optimal rule which always refers to beam a.
    """
    out = {}
    if "angle" in params:
        policy = DetectionPolicy.parse(params["angle"])
        to_a = policy.rule is AngleRule.OPTIMAL or not has_sensor
        out["readout_a" if to_a else "readout_b"] = policy
    if "angle_a" in params:
        out["readout_a"] = DetectionPolicy.parse(params["angle_a"])
    if "angle_b" in params:
        if not has_sensor:
            raise ConfigurationError(f"{where}: angle_b given but scenario has no sensor")
        out["readout_b"] = DetectionPolicy.parse(params["angle_b"])
    return out


def build_scenario(name: str, params: dict, units: Units, *, require: bool = True) -> Scenario:
    """Scenario from one ``[scenario.<name>]`` table.

    With ``require=False`` (scenarios named on the command line) missing
    couplings fall back to the builders' normalized defaults.
    """
    where = f"scenario.{name}"
    unknown = set(params) - SCENARIO_KEYS
    if unknown:
        raise ConfigurationError(f"unknown key {where}.{sorted(unknown)[0]}")
    sid = params.get("id")
    if sid is None:
        raise ConfigurationError(f"{where}: missing key 'id'")
    for key in NUMERIC_KEYS & set(params):
        if isinstance(params[key], bool) or not isinstance(params[key], (int, float)):
            raise ConfigurationError(f"{where}.{key}: expected a number, got {params[key]!r}")

    base_sid = params.get("base", "cavity-locking") if sid == "signal-correction" else sid
    has_sensor = base_sid in SENSOR_IDS
    kwargs: dict[str, Any] = {"units": units, "label": params.get("label", name)}

    xi_a = _channel_xi(params, "a", where, units)
    xi_b = _channel_xi(params, "b", where, units) if has_sensor else None
    if not has_sensor and any(k in params for k in ("xi_b", "finesse_b", "power_b", "loss", "gain", "feedforward")):
        extra = next(k for k in ("xi_b", "finesse_b", "power_b", "loss", "gain", "feedforward") if k in params)
        raise ConfigurationError(f"{where}: key {extra!r} does not apply to scenario id {sid!r}")
    if xi_a is None and (require or units is Units.SI):
        raise ConfigurationError(f"{where}: missing key 'xi_a'")
    if has_sensor and xi_b is None and (require or units is Units.SI):
        raise ConfigurationError(f"{where}: missing key 'xi_b'")
    if "mass" in params:
        kwargs["mass"] = params["mass"]
    elif units is Units.SI:
        raise ConfigurationError(f"{where}: missing key 'mass' (required in SI mode)")
    if xi_a is not None:
        kwargs["xi_a"] = xi_a
    if xi_b is not None:
        kwargs["xi_b"] = xi_b

    if base_sid in ("squeezed-input",):
        if "squeeze_r" not in params:
            raise ConfigurationError(f"{where}: missing key 'squeeze_r'")
        kwargs["r"] = params["squeeze_r"]
        if "squeeze_angle" in params:
            kwargs["squeeze_angle"] = params["squeeze_angle"]
    elif "squeeze_r" in params or "squeeze_angle" in params:
        raise ConfigurationError(f"{where}: squeezing only applies to 'squeezed-input'")

    if "loss" in params:
        kwargs["loss"] = params["loss"]
    if "force_noise_m" in params or "force_noise_r" in params:
        if base_sid not in ("free", "locking"):
            raise ConfigurationError(f"{where}: classical force noise is supported for free and locking")
        if base_sid == "free":
            if "force_noise_r" in params:
                raise ConfigurationError(f"{where}: 'free' has no reference mirror")
            kwargs["force_noise"] = params["force_noise_m"]
        else:
            kwargs.update({k: params[k] for k in ("force_noise_m", "force_noise_r") if k in params})

    if base_sid == "cavity-locking":
        if "gain" in params:
            raise ConfigurationError(f"{where}: cavity-locking uses 'feedforward', not 'gain'")
        if "feedforward" in params:
            kwargs["feedforward"] = parse_gain(params["feedforward"])
    elif "feedforward" in params:
        raise ConfigurationError(f"{where}: 'feedforward' only applies to cavity-locking")
    elif "gain" in params:
        kwargs["gain"] = parse_gain(params["gain"])

    readouts = _readouts(params, has_sensor, where)
    if "readout_a" in readouts:
        if base_sid not in ("free", "variational-readout"):
            raise ConfigurationError(f"{where}: interferometer angle is fixed to phase readout for {base_sid!r}")
        kwargs["readout"] = readouts["readout_a"]
    if "readout_b" in readouts:
        if base_sid == "cavity-locking":
            raise ConfigurationError(f"{where}: cavity-locking requires the evading-cavity angle")
        kwargs["readout_b"] = readouts["readout_b"]

    try:
        if sid == "signal-correction":
            label = kwargs.pop("label")
            sc = S.build("signal-correction", base=base_sid, label=label, **kwargs)
        else:
            sc = S.build(sid, **kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"{where}: {exc}") from None
    except DomainError as exc:
        raise ConfigurationError(f"{where}: {exc}") from None
    if sc.id != "sql-envelope":
        sc.validate()
    return sc


def config_from_dict(doc: dict, *, require: bool = True) -> RunConfig:
    unknown = set(doc) - TOP_KEYS
    if unknown:
        raise ConfigurationError(f"unknown top-level key {sorted(unknown)[0]!r}")
    units = Units.parse(doc.get("units", "normalized"))
    fmt_name = doc.get("format", "csv")
    if fmt_name not in ("csv", "json"):
        raise ConfigurationError(f"format: expected 'csv' or 'json', got {fmt_name!r}")
    grid = _grid_from_table(doc["grid"], units) if "grid" in doc else _default_grid(units)

    scenarios: list[Scenario] = []
    preset = doc.get("preset")
    if preset is not None:
        if preset not in ("fig3", "fig3-extended"):
            raise ConfigurationError(f"unknown preset {preset!r}")
        if units is not Units.NORMALIZED:
            raise ConfigurationError("the fig3 presets are defined in normalized units")
        scenarios += S.fig3(extended=preset == "fig3-extended")
    table = doc.get("scenario", {})
    if not isinstance(table, dict):
        raise ConfigurationError("'scenario' must be a table of [scenario.<name>] sections")
    for name, params in table.items():
        if not isinstance(params, dict):
            raise ConfigurationError(f"scenario.{name} must be a table")
        scenarios.append(build_scenario(name, params, units, require=require))
    if not scenarios:
        raise ConfigurationError("no scenarios")
    names = [sc.name for sc in scenarios]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ConfigurationError(f"duplicate scenario name {dupes[0]!r}")
    return RunConfig(
        scenarios=scenarios,
        grid=grid,
        units=units,
        format=fmt_name,
        out=doc.get("out"),
        verify=bool(doc.get("verify", False)),
    )


def parse_config(text: str) -> RunConfig:
    """Validated :class:`RunConfig` from TOML text."""
    return config_from_dict(load_toml(text))


def load_toml(text: str) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"config is not valid TOML: {exc}") from None


# --------------------------------------------------------------------------
# running


def run(config: RunConfig) -> list[NoiseBudget]:
    """One budget per scenario, in config order."""
    if not config.scenarios:
        raise ConfigurationError("no scenarios")
    budgets = []
    for sc in config.scenarios:
        try:
            budgets.append(S.budget_for(sc, config.grid))
        except NumericError as exc:
            raise type(exc)(f"{sc.name}: {exc}") from exc
    return budgets


def verify_optimized(config: RunConfig, budgets: list[NoiseBudget], n: int = 201) -> float:
    """Largest relative gap between eigen and grid-oracle optima over the run."""
    from .optimizer import auto_region, grid_search_oracle

    worst = 0.0
    for sc, b in zip(config.scenarios, budgets):
        if b.gain is None:
            continue
        omegas = internal_omegas(sc, config.grid)
        scale = 2 * sc.a.xi**2 if config.units is Units.NORMALIZED else 1.0
        for omega, g, total in zip(omegas, b.gain, b.total):
            if not np.isfinite(g) or g == 0:
                continue
            oracle = grid_search_oracle(sc, omega, auto_region(g), n)
            gap = abs(oracle.sigma_opt * scale - total) / (oracle.sigma_opt * scale)
            worst = max(worst, gap)
    return worst


def _apply_overrides(doc: dict, args) -> dict:
    doc = dict(doc)
    if args.units:
        doc["units"] = args.units
    if args.format:
        doc["format"] = args.format
    if args.out:
        doc["out"] = args.out
    if args.preset:
        doc["preset"] = args.preset
    if args.scenario:
        doc["scenario"] = {sid: {"id": sid} for sid in args.scenario}
        if not args.preset:
            doc.pop("preset", None)
    overrides = {}
    if args.gain is not None:
        overrides["gain"] = args.gain
    if args.angle is not None:
        overrides["angle"] = args.angle
    if args.loss is not None:
        overrides["loss"] = args.loss
    if overrides:
        for name, params in doc.get("scenario", {}).items():
            sid = params.get("id")
            base = params.get("base", "cavity-locking") if sid == "signal-correction" else sid
            merged = dict(params)
            for key, value in overrides.items():
                if key in ("gain", "loss") and base not in SENSOR_IDS:
                    continue
                if key == "gain" and base == "cavity-locking":
                    merged["feedforward"] = value
                    continue
                if key == "angle" and base == "cavity-locking":
                    continue
                merged[key] = value
            doc.setdefault("scenario", {})[name] = merged
    return doc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qlock",
        description="Equivalent-input-noise budgets for quantum-locked interferometers.",
    )
    p.add_argument("--config", help="TOML run description")
    p.add_argument("--scenario", action="append", metavar="ID",
                   help="scenario id with default parameters (repeatable; replaces config scenarios)")
    p.add_argument("--preset", choices=["fig3", "fig3-extended"], help="built-in curve set")
    p.add_argument("--grid", metavar="MIN:MAX:N[:log]", help="frequency grid")
    p.add_argument("--units", choices=["si", "normalized"])
    p.add_argument("--gain", metavar="MODE", help="fixed=<re>,<im> | infinite | optimized | off")
    p.add_argument("--angle", metavar="RULE", help="phase | fixed=<rad> | evading | evading-cavity | optimal")
    p.add_argument("--loss", type=float, help="sensor loss fraction in [0, 1)")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--verify", action="store_true",
                   help="cross-check optimized gains against a 201x201 grid search")
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc: dict = {}
        if args.config:
            try:
                with open(args.config, encoding="utf-8") as fh:
                    doc = load_toml(fh.read())
            except OSError as exc:
                print(f"qlock: cannot read config: {exc}", file=sys.stderr)
                return EXIT_IO
        doc = _apply_overrides(doc, args)
        require = not args.scenario
        if args.grid:
            doc.pop("grid", None)
        config = config_from_dict(doc, require=require)
        if args.grid:
            config.grid = parse_grid(args.grid, config.units)
        config.verify = config.verify or args.verify
        budgets = run(config)
        if config.verify:
            worst = verify_optimized(config, budgets)
            print(f"qlock: verify: max relative gap eigen vs grid oracle = {worst:.3e}", file=sys.stderr)
            if worst > 1e-3:
                print("qlock: verify failed (tolerance 1e-3)", file=sys.stderr)
                return EXIT_NUMERIC
        try:
            text = emit(budgets, config.format, config.out)
        except OSError as exc:
            print(f"qlock: cannot write output: {exc}", file=sys.stderr)
            return EXIT_IO
        if config.out is None or config.out == "-":
            sys.stdout.write(text)
    except (ConfigurationError, DomainError) as exc:
        print(f"qlock: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"qlock: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
