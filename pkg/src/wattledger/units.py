"""Power and energy quantities with exact SI-prefix conversions.

Canonical internal units are watts and joules. Watt-hours only appear at the
boundary (reports, carbon math).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import UnitError

__all__ = [
    "Base",
    "Energy",
    "Kind",
    "Power",
    "UnitScale",
    "JOULES_PER_KWH",
    "convert",
    "energy_from_constant_power",
    "parse_unit",
]

JOULES_PER_KWH = 3.6e6


class Kind(str, Enum):
    micro = "micro"
    milli = "milli"
    unit = "unit"
    kilo = "kilo"
    mega = "mega"


class Base(str, Enum):
    watt = "watt"
    joule = "joule"
    watt_hour = "watt_hour"


_EXPONENT = {Kind.micro: -6, Kind.milli: -3, Kind.unit: 0, Kind.kilo: 3, Kind.mega: 6}
_PREFIX = {Kind.micro: "u", Kind.milli: "m", Kind.unit: "", Kind.kilo: "k", Kind.mega: "M"}
_BASE_SYMBOL = {Base.watt: "W", Base.joule: "J", Base.watt_hour: "Wh"}
# joules per base unit; watt is its own dimension
_BASE_FACTOR = {Base.watt: 1, Base.joule: 1, Base.watt_hour: 3600}


def _dimension(base: Base) -> str:
    return "power" if base is Base.watt else "energy"


@dataclass(frozen=True)
class UnitScale:
    kind: Kind
    base: Base

    @property
    def symbol(self) -> str:
        return _PREFIX[self.kind] + _BASE_SYMBOL[self.base]

    @property
    def dimension(self) -> str:
        return _dimension(self.base)

    def __str__(self) -> str:
        return self.symbol


_SYMBOLS = {
    "uJ": UnitScale(Kind.micro, Base.joule),
    "mJ": UnitScale(Kind.milli, Base.joule),
    "J": UnitScale(Kind.unit, Base.joule),
    "kJ": UnitScale(Kind.kilo, Base.joule),
    "MJ": UnitScale(Kind.mega, Base.joule),
    "Wh": UnitScale(Kind.unit, Base.watt_hour),
    "kWh": UnitScale(Kind.kilo, Base.watt_hour),
    "uW": UnitScale(Kind.micro, Base.watt),
    "mW": UnitScale(Kind.milli, Base.watt),
    "W": UnitScale(Kind.unit, Base.watt),
    "kW": UnitScale(Kind.kilo, Base.watt),
    "MW": UnitScale(Kind.mega, Base.watt),
}

WATT = _SYMBOLS["W"]
JOULE = _SYMBOLS["J"]


def parse_unit(symbol: str | UnitScale) -> UnitScale:
    """Look up a case-sensitive unit symbol such as ``"mW"`` or ``"kWh"``."""
    if isinstance(symbol, UnitScale):
        return symbol
    try:
        return _SYMBOLS[symbol.strip()]
    except KeyError:
        raise UnitError(
            f"unknown unit symbol {symbol!r}; expected one of {', '.join(_SYMBOLS)}"
        ) from None


def convert(value: float, src: UnitScale | str, dst: UnitScale | str) -> float:
    """Convert ``value`` between two scales of the same dimension.

    >>> convert(2500, "mW", "W")
    2.5
    >>> convert(1, "Wh", "J")
    3600.0
    """
    src, dst = parse_unit(src), parse_unit(dst)
    if src.dimension != dst.dimension:
        raise UnitError(
            f"cannot convert {src.symbol} ({src.dimension}) to {dst.symbol} "
            f"({dst.dimension}) without a duration"
        )
    exp = _EXPONENT[src.kind] - _EXPONENT[dst.kind]
    num, den = _BASE_FACTOR[src.base], _BASE_FACTOR[dst.base]
    # Dividing by an exact power of ten rounds once; multiplying by its
    # inexact reciprocal would round twice.
    if exp >= 0:
        return value * (num * 10**exp) / den
    return value * num / (den * 10**-exp)


def _check_quantity(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    if value < 0:
        raise ValueError(f"{name} must be non-negative, got {value!r}")


@dataclass(frozen=True, order=True)
class Power:
    watts: float

    def __post_init__(self):
        _check_quantity("watts", self.watts)


@dataclass(frozen=True, order=True)
class Energy:
    joules: float

    def __post_init__(self):
        _check_quantity("joules", self.joules)

    @property
    def kwh(self) -> float:
        return self.joules / JOULES_PER_KWH


def energy_from_constant_power(p: Power | float, duration: float) -> Energy:
    """Energy drawn by a constant power over ``duration`` seconds."""
    watts = p.watts if isinstance(p, Power) else Power(float(p)).watts
    if not duration >= 0:
        raise ValueError(f"duration must be non-negative, got {duration!r}")
    return Energy(watts * duration)
