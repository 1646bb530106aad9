"""Unit-suffixed quantities for configuration files.

A quantity is written ``"<number> <unit expression>"``, for example
``"10 nm"``, ``"1e4 m/s"`` or ``"6.2832 1/T"``. Two unit systems exist:
SI (``hbar = 1.054571817e-34 J s``) and natural units with base symbols
``L``, ``T``, ``M`` and ``hbar = 1``. A configuration uses one system.
"""

from __future__ import annotations

import re

from flyqubit.errors import ConfigError
from flyqubit.trapped import HBAR_SI

# dimension exponents (length, time, mass)
LENGTH = (1, 0, 0)
TIME = (0, 1, 0)
MASS = (0, 0, 1)
AREA = (2, 0, 0)
VELOCITY = (1, -1, 0)
FREQUENCY = (0, -1, 0)
DIMENSIONLESS = (0, 0, 0)

KINDS = {
    "length": LENGTH,
    "area": AREA,
    "time": TIME,
    "mass": MASS,
    "velocity": VELOCITY,
    "frequency": FREQUENCY,
}

_SI = {
    "m": (LENGTH, 1.0),
    "cm": (LENGTH, 1e-2),
    "mm": (LENGTH, 1e-3),
    "um": (LENGTH, 1e-6),
    "nm": (LENGTH, 1e-9),
    "pm": (LENGTH, 1e-12),
    "s": (TIME, 1.0),
    "ms": (TIME, 1e-3),
    "us": (TIME, 1e-6),
    "ns": (TIME, 1e-9),
    "ps": (TIME, 1e-12),
    "fs": (TIME, 1e-15),
    "kg": (MASS, 1.0),
    "g": (MASS, 1e-3),
}
_NATURAL = {
    "L": (LENGTH, 1.0),
    "T": (TIME, 1.0),
    "M": (MASS, 1.0),
}
_NEUTRAL = {"1": (DIMENSIONLESS, 1.0), "rad": (DIMENSIONLESS, 1.0)}

SYSTEMS = {"SI": _SI, "natural": _NATURAL}
HBAR = {"SI": HBAR_SI, "natural": 1.0}

_TOKEN = re.compile(r"^([A-Za-z1]+)(?:\^(-?\d+))?$")


def _parse_unit(expr: str, system: str):
    table = {**SYSTEMS[system], **_NEUTRAL}
    dims = [0, 0, 0]
    factor = 1.0
    parts = re.split(r"([*/])", expr.replace(" ", ""))
    sign = 1
    for part in parts:
        if part == "*":
            sign = 1
            continue
        if part == "/":
            sign = -1
            continue
        m = _TOKEN.match(part)
        if not m:
            raise ConfigError(f"cannot parse unit {expr!r}")
        sym, power = m.group(1), int(m.group(2) or 1)
        if sym not in table:
            other = [name for name, units in SYSTEMS.items() if name != system and sym in units]
            hint = f" (belongs to the {other[0]} system)" if other else ""
            raise ConfigError(f"unknown unit {sym!r} in {expr!r} for the {system} system{hint}")
        d, f = table[sym]
        p = sign * power
        dims = [a + p * b for a, b in zip(dims, d)]
        factor *= f**p
    return tuple(dims), factor


def parse_quantity(text, kind: str, system: str = "SI") -> float:
    """Convert a unit-suffixed string into a value in the base units of ``system``.

    Raises
    ------
    ConfigError
        On a missing or unknown unit, a unit from the other system, or a
        dimension that does not match ``kind``.
    """
    if system not in SYSTEMS:
        raise ConfigError(f"unknown unit system {system!r}; use 'SI' or 'natural'")
    want = KINDS[kind]
    if not isinstance(text, str):
        raise ConfigError(f"{kind} value {text!r} needs a unit, e.g. \"{text} {example_unit(kind, system)}\"")
    pieces = text.strip().split(None, 1)
    if len(pieces) != 2:
        raise ConfigError(f"{kind} value {text!r} needs a unit, e.g. \"{text} {example_unit(kind, system)}\"")
    try:
        number = float(pieces[0])
    except ValueError:
        raise ConfigError(f"cannot parse number in {text!r}") from None
    dims, factor = _parse_unit(pieces[1], system)
    if dims != want:
        raise ConfigError(f"{text!r} is not a {kind}")
    return number * factor


def split_unit(text) -> tuple[str, str | None]:
    """``"10 nm" -> ("10", "nm")``; bare numbers give ``None`` for the unit."""
    if not isinstance(text, str):
        return str(text), None
    pieces = text.strip().split(None, 1)
    return pieces[0], (pieces[1] if len(pieces) == 2 else None)


def example_unit(kind: str, system: str) -> str:
    return {
        ("length", "SI"): "nm", ("length", "natural"): "L",
        ("area", "SI"): "nm^2", ("area", "natural"): "L^2",
        ("time", "SI"): "ns", ("time", "natural"): "T",
        ("mass", "SI"): "kg", ("mass", "natural"): "M",
        ("velocity", "SI"): "m/s", ("velocity", "natural"): "L/T",
        ("frequency", "SI"): "1/s", ("frequency", "natural"): "1/T",
    }[(kind, system)]
