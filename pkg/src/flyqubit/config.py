"""TOML experiment configuration with a fixed schema and unit-checked quantities.

Example::

    scenario = "fig2"
    units = "natural"
    tiers = ["clock", "perturbative", "grid"]
    output = "fig2.csv"

    [fig2]
    delta_x = "0.05 L"
    k0_delta_x = 50

Every physical quantity is a string with a unit. Unknown keys are errors.
"""

from __future__ import annotations

import copy
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from flyqubit.errors import ConfigError
from flyqubit.units import HBAR, KINDS, parse_quantity, split_unit

TIERS = ("clock", "perturbative", "grid")
SCENARIOS = ("fig2", "gate", "twobody", "trapped", "sweep")

TOP_KEYS = {"scenario", "units", "tiers", "output", "seed", "workers"}

_TWO_PI = f"{2.0 * math.pi!r}"


@dataclass(frozen=True)
class Field:
    kind: str
    default: object = None
    choices: tuple | None = None
    natural_default: bool = False  # default given in natural units only


def _f(kind, default=None, choices=None):
    natural = isinstance(default, str) and kind in KINDS
    return Field(kind, default, choices, natural)


SCHEMA = {
    "fig2": {
        "L": _f("length", "1 L"),
        "v0": _f("velocity", "1 L/T"),
        "omega_q": _f("frequency", f"{_TWO_PI} 1/T"),
        "chi0": _f("frequency", f"{_TWO_PI} 1/T"),
        "delta_x": _f("length", "0.05 L"),
        "k0_delta_x": _f("number", 50.0),
        "x0": _f("length"),
        "n_times": _f("int", 201),
        "n_nodes": _f("int", 21),
    },
    "gate": {
        "kind": _f("str", "NOT", ("NOT", "PHASE")),
        "omega_q": _f("frequency", f"{_TWO_PI} 1/T"),
        "v0": _f("velocity", "1 L/T"),
        "delta_x": _f("length", "0.01 L"),
        "a0": _f("number", 0.5),
        "theta": _f("number", 0.0),
        "phi": _f("number", math.pi / 2),
        "profile": _f("str", "gaussian", ("gaussian", "rect")),
        "k0_delta_x": _f("number", 50.0),
        "n_times": _f("int", 201),
        "n_nodes": _f("int", 21),
    },
    "twobody": {
        "omega_q": _f("frequency", f"{_TWO_PI} 1/T"),
        "v1": _f("velocity", "1 L/T"),
        "v2": _f("velocity", "0 L/T"),
        "m1": _f("mass", "1e4 M"),
        "m2": _f("mass", "1e4 M"),
        "dx1": _f("length", "0.01 L"),
        "dx2": _f("length", "0.01 L"),
        "correlation": _f("area", "0 L^2"),
        "p": _f("number", 0.5),
        "n_times": _f("int", 201),
        "n_nodes": _f("int", 21),
    },
    "trapped": {
        "preset": _f("str", None, ("surfing", "shuttling", "rydberg")),
        "kind": _f("str", "harmonic", ("harmonic", "box")),
        "delta_x": _f("length"),
        "m": _f("mass"),
        "v0": _f("velocity"),
        "tau": _f("time"),
        "deviation": _f("bool", False),
    },
    "sweep": {
        "scenario": _f("str", None, ("fig2", "gate", "twobody", "trapped")),
        "axis": _f("str"),
        "values": _f("list", []),
    },
}


def _line_of(text: str, key: str, table: str | None = None) -> int | None:
    """1-based line where ``key`` is assigned (inside ``[table]`` if given)."""
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        m = re.match(r"^\[([^\]]+)\]", stripped)
        if m:
            current = m.group(1).strip()
            continue
        if current == table and re.match(rf"^{re.escape(key)}\s*=", stripped):
            return i
    return None


@dataclass
class ExperimentConfig:
    """Validated experiment description.

    ``params`` holds the scenario table converted to base units of the
    chosen system; ``raw`` keeps the strings as written.
    """

    scenario: str
    units: str = "natural"
    tiers: tuple = ("clock", "perturbative")
    output: str = "out.csv"
    seed: int = 0
    workers: int = 1
    params: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)
    sweep: dict | None = None
    source: str = "<config>"
    text: str = ""

    @property
    def hbar(self) -> float:
        return HBAR[self.units]

    def error(self, msg: str, key: str | None = None, table: str | None = None) -> ConfigError:
        line = _line_of(self.text, key, table) if key else None
        where = f"{self.source}:{line}" if line else self.source
        return ConfigError(f"{where}: {msg}")

    def with_value(self, key: str, value) -> "ExperimentConfig":
        """Copy with one scenario field replaced and re-validated.

        A bare number inherits the unit of the current value.
        """
        table = self.scenario
        schema = SCHEMA[table]
        check_axis(self, key)
        raw = copy.deepcopy(self.raw)
        if schema[key].kind in KINDS:
            num, unit = split_unit(value)
            if unit is None:
                base = raw.get(key, schema[key].default)
                _, base_unit = split_unit(base) if base is not None else (None, None)
                if base_unit is None:
                    raise ConfigError(f"{self.source}: sweep value {value!r} for {key!r} needs a unit")
                value = f"{num} {base_unit}"
        elif isinstance(value, str):
            try:
                value = int(value) if schema[key].kind == "int" else float(value)
            except ValueError:
                raise ConfigError(f"{self.source}: sweep value {value!r} for {key!r} is not a number") from None
        raw[key] = value
        out = copy.copy(self)
        out.raw = raw
        out.params = _parse_table(out, table, raw)
        return out


def _parse_value(cfg: ExperimentConfig, table: str, key: str, spec: Field, value):
    try:
        if spec.kind in KINDS:
            return parse_quantity(value, spec.kind, cfg.units)
        if spec.kind == "number":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"expected a number, got {value!r}")
            return float(value)
        if spec.kind == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"expected an integer, got {value!r}")
            return value
        if spec.kind == "bool":
            if not isinstance(value, bool):
                raise ConfigError(f"expected true/false, got {value!r}")
            return value
        if spec.kind == "list":
            if not isinstance(value, list):
                raise ConfigError(f"expected a list, got {value!r}")
            return value
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}")
        if spec.choices and value not in spec.choices:
            raise ConfigError(f"{value!r} is not one of {list(spec.choices)}")
        return value
    except ConfigError as exc:
        raise cfg.error(f"[{table}] {key}: {exc}", key, table) from None


def _parse_table(cfg: ExperimentConfig, table: str, raw: dict) -> dict:
    schema = SCHEMA[table]
    for key in raw:
        if key not in schema:
            raise cfg.error(f"unknown key {key!r} in [{table}]", key, table)
    out = {}
    for key, spec in schema.items():
        if key in raw:
            out[key] = _parse_value(cfg, table, key, spec, raw[key])
        elif spec.default is None:
            out[key] = None
        elif spec.natural_default and cfg.units != "natural":
            out[key] = None
        else:
            out[key] = _parse_value(cfg, table, key, spec, spec.default)
    return out


def _required(cfg, table, params, keys):
    for key in keys:
        if params.get(key) is None:
            raise cfg.error(f"[{table}] requires {key!r}", None)


def loads(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse and validate configuration text.

    Raises
    ------
    ConfigError
        With ``source:line`` where the offending key can be located.
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    cfg = ExperimentConfig(scenario="", source=source, text=text)
    tables = {k for k, v in data.items() if isinstance(v, dict)}
    for key in data:
        if key not in TOP_KEYS and key not in SCHEMA:
            raise cfg.error(f"unknown key {key!r}", key)
    scenario = data.get("scenario")
    if scenario not in SCENARIOS:
        raise cfg.error(f"scenario must be one of {list(SCENARIOS)}, got {scenario!r}", "scenario")
    cfg.scenario = scenario
    units = data.get("units", "natural")
    if units not in HBAR:
        raise cfg.error(f"units must be 'SI' or 'natural', got {units!r}", "units")
    cfg.units = units
    tiers = data.get("tiers", ["clock", "perturbative"])
    if not isinstance(tiers, list) or any(t not in TIERS for t in tiers):
        raise cfg.error(f"tiers must be a subset of {list(TIERS)}", "tiers")
    cfg.tiers = tuple(t for t in TIERS if t in tiers)
    cfg.output = data.get("output", f"{scenario}.csv")
    if not isinstance(cfg.output, str):
        raise cfg.error("output must be a path string", "output")
    for key in ("seed", "workers"):
        value = data.get(key, getattr(cfg, key))
        if isinstance(value, bool) or not isinstance(value, int) or value < 0:
            raise cfg.error(f"{key} must be a non-negative integer", key)
        setattr(cfg, key, value)
    if cfg.workers == 0:
        raise cfg.error("workers must be at least 1", "workers")

    if scenario == "sweep":
        sw = _parse_table(cfg, "sweep", data.get("sweep", {}))
        _required(cfg, "sweep", sw, ("scenario", "axis"))
        cfg.sweep = sw
        scenario = sw["scenario"]
        cfg.scenario = scenario
    extra = tables - {scenario, "sweep"}
    if extra:
        raise cfg.error(f"table [{sorted(extra)[0]}] does not belong to scenario {scenario!r}", None)
    cfg.raw = dict(data.get(scenario, {}))
    cfg.params = _parse_table(cfg, scenario, cfg.raw)
    _check_scenario(cfg)
    if cfg.sweep is not None:
        check_axis(cfg, cfg.sweep["axis"])
    return cfg


def check_axis(cfg: ExperimentConfig, axis: str):
    """Raise unless ``axis`` names a numeric field of the scenario table."""
    spec = SCHEMA[cfg.scenario].get(axis)
    if spec is None:
        raise ConfigError(f"{cfg.source}: sweep axis {axis!r} is not a field of [{cfg.scenario}]")
    if spec.kind not in ("number", "int", *KINDS):
        raise ConfigError(f"{cfg.source}: sweep axis {axis!r} is not numeric")


def _check_scenario(cfg: ExperimentConfig):
    p = cfg.params
    table = cfg.scenario
    if table == "fig2":
        _required(cfg, table, p, ("L", "v0", "omega_q", "chi0", "delta_x"))
    elif table == "gate":
        _required(cfg, table, p, ("omega_q", "v0", "delta_x"))
        if not 0.0 <= p["a0"] <= 1.0:
            raise cfg.error("[gate] a0 must lie in [0, 1]", "a0", table)
    elif table == "twobody":
        _required(cfg, table, p, ("omega_q", "v1", "v2", "m1", "m2", "dx1", "dx2", "correlation"))
        if not 0.0 <= p["p"] <= 1.0:
            raise cfg.error("[twobody] p must lie in [0, 1]", "p", table)
    elif table == "trapped":
        if p["preset"] is None:
            _required(cfg, table, p, ("delta_x", "m", "v0", "tau"))
        elif cfg.units != "SI":
            raise cfg.error("trapped presets are defined in SI units; set units = \"SI\"", "units")
    for key in ("n_times", "n_nodes"):
        if key in p and p[key] is not None and p[key] < 1:
            raise cfg.error(f"[{table}] {key} must be positive", key, table)
    if cfg.scenario in ("trapped",) and "grid" in cfg.tiers:
        raise cfg.error("grid tier does not apply to trapped scenarios", "tiers")


def load(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read configuration ({exc.strerror})") from None
    return loads(text, str(path))
