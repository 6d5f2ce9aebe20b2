"""Proxy estimates when no power measurement exists.

Loadline utilizations are fractions of the benchmark's maximum throughput
``M`` (a load level of 0.9 means the benchmark ran at ``0.9 * M``), not
OS-reported CPU utilization. OS utilization is passed through one-to-one and
every proxy estimate says so in its notes.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CoverageError, DataError
from .estimation import Basis, EnergyEstimate, Method, Scope, _zero_order_energy
from .telemetry import HierarchyLevel, UtilizationTrace

__all__ = [
    "LoadlineMeta",
    "Loadline",
    "SystemDescriptor",
    "CalibrationFactor",
    "OvercommitWarning",
    "loadline_power",
    "loadline_inverse",
    "energy_from_utilization",
    "normalize_hyperthread_utilization",
    "tdp_energy_bound",
    "score_loadline",
    "select_loadline",
    "apply_calibration",
    "load_loadline",
    "load_catalog",
]

UTILIZATION_ASSUMPTION = (
    "assumes OS utilization equals the loadline's fraction of max throughput M"
)


class OvercommitWarning(UserWarning):
    """Normalized utilization exceeded 1 and was clamped."""


@dataclass(frozen=True)
class LoadlineMeta:
    architecture: str
    tdp_watts: float
    base_clock_ghz: float
    workload_name: str
    max_throughput_M: float | None = None

    def to_dict(self) -> dict:
        return {
            "architecture": self.architecture,
            "tdp_watts": self.tdp_watts,
            "base_clock_ghz": self.base_clock_ghz,
            "workload_name": self.workload_name,
            "max_throughput_M": self.max_throughput_M,
        }


@dataclass(frozen=True, eq=False)
class Loadline:
    """Calibrated utilization-to-power curve, linear between points.

    The active-idle point (u = 0) and the full-load point (u = 1) are both
    required; curves that would need extrapolation to idle are rejected.
    """

    utilization: np.ndarray
    watts: np.ndarray
    meta: LoadlineMeta

    def __post_init__(self):
        u = np.array(self.utilization, dtype=float)
        w = np.array(self.watts, dtype=float)
        if u.ndim != 1 or u.shape != w.shape or u.size < 2:
            raise DataError("a loadline needs at least two (utilization, watts) points")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(w))):
            raise DataError("loadline points must be finite")
        if u[0] != 0.0:
            raise DataError("loadline must include the active-idle point at utilization 0")
        if u[-1] != 1.0:
            raise DataError("loadline must end at utilization 1")
        if np.any(np.diff(u) <= 0):
            raise DataError("loadline utilizations must be strictly increasing")
        if np.any(w < 0) or np.any(np.diff(w) < 0):
            raise DataError("loadline watts must be non-negative and non-decreasing")
        u.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "utilization", u)
        object.__setattr__(self, "watts", w)

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.utilization.tolist(), self.watts.tolist()))

    @classmethod
    def from_points(cls, points: Iterable[tuple[float, float]], **meta) -> "Loadline":
        pts = list(points)
        meta.setdefault("architecture", "unknown")
        meta.setdefault("tdp_watts", max(w for _, w in pts))
        meta.setdefault("base_clock_ghz", 0.0)
        meta.setdefault("workload_name", "unspecified")
        return cls([u for u, _ in pts], [w for _, w in pts], LoadlineMeta(**meta))

    def to_dict(self) -> dict:
        return {
            "meta": self.meta.to_dict(),
            "points": [{"utilization": u, "watts": w} for u, w in self.points],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Loadline":
        try:
            meta = LoadlineMeta(**d["meta"])
            pts = [(float(p["utilization"]), float(p["watts"])) for p in d["points"]]
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed loadline document: {exc}") from None
        return cls([u for u, _ in pts], [w for _, w in pts], meta)


@dataclass(frozen=True)
class SystemDescriptor:
    architecture: str
    tdp_watts: float
    base_clock_ghz: float = 0.0
    workload_name: str | None = None

    def __post_init__(self):
        if not self.tdp_watts > 0:
            raise ValueError("tdp_watts must be positive")


@dataclass(frozen=True)
class CalibrationFactor:
    scale: float
    source: str

    def __post_init__(self):
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError("calibration scale must be positive")


def loadline_power(ll: Loadline, utilization):
    """Watts at ``utilization`` (scalar or array), linear between points."""
    u = np.asarray(utilization, dtype=float)
    if np.any(~np.isfinite(u)) or np.any(u < 0) or np.any(u > 1):
        raise ValueError(
            "utilization must lie in [0, 1]; normalize hyperthreaded readings first"
        )
    out = np.interp(u, ll.utilization, ll.watts)
    return float(out) if out.ndim == 0 else out


def loadline_inverse(ll: Loadline, watts: float) -> float:
    """Lowest utilization at which the loadline reaches ``watts``."""
    w = float(watts)
    lo, hi = ll.watts[0], ll.watts[-1]
    if not lo <= w <= hi:
        raise ValueError(f"{w} W lies outside the loadline range [{lo}, {hi}] W")
    for i in range(len(ll.watts) - 1):
        w0, w1 = ll.watts[i], ll.watts[i + 1]
        if w0 <= w <= w1:
            if w == w0:
                return float(ll.utilization[i])
            u0, u1 = ll.utilization[i], ll.utilization[i + 1]
            return float(u0 + (w - w0) / (w1 - w0) * (u1 - u0))
    return 1.0  # unreachable: w <= hi is handled by the last segment


def energy_from_utilization(
    util: UtilizationTrace,
    ll: Loadline,
    interval: tuple[float, float] | None = None,
    level: HierarchyLevel | str = HierarchyLevel.node,
) -> EnergyEstimate:
    """Map utilization samples through the loadline, then integrate (zero order)."""
    if np.any(util.utilization > 1):
        raise ValueError(
            "utilization above 1; apply normalize_hyperthread_utilization first"
        )
    ts = util.timestamps
    if interval is None:
        interval = (float(ts[0]), float(ts[-1]))
    start, end = map(float, interval)
    if not end > start:
        raise ValueError(f"empty interval [{start}, {end}]")
    if start < ts[0] or end > ts[-1]:
        raise CoverageError(
            f"utilization covers [{ts[0]}, {ts[-1]}], requested [{start}, {end}]",
            (start, end),
        )
    watts = loadline_power(ll, util.utilization)
    joules = _zero_order_energy(ts, np.atleast_1d(watts)[:-1], start, end)
    notes = [
        f"loadline {ll.meta.workload_name!r} on {ll.meta.architecture} "
        f"(TDP {ll.meta.tdp_watts!r} W)",
        UTILIZATION_ASSUMPTION,
    ]
    if util.workload_name and util.workload_name != ll.meta.workload_name:
        notes.append(
            f"workload mismatch: measured {util.workload_name!r}, loadline "
            f"benchmarked on {ll.meta.workload_name!r}"
        )
    return EnergyEstimate(
        joules=joules,
        start=start,
        end=end,
        method=Method.proxy_loadline,
        scope=Scope(level, (util.source_id,)),
        basis=Basis.absolute,
        notes=tuple(notes),
    )


def normalize_hyperthread_utilization(reported_percent: float, physical_cores: int) -> float:
    """Reported percentage (summed over logical cores) as a fraction of the
    physical cores, clamped to 1 with an ``OvercommitWarning``.
    """
    if not reported_percent >= 0:
        raise ValueError("reported utilization must be non-negative")
    if physical_cores < 1:
        raise ValueError("physical_cores must be at least 1")
    u = reported_percent / (100.0 * physical_cores)
    if u > 1:
        warnings.warn(
            f"utilization {reported_percent}% on {physical_cores} physical cores "
            f"normalizes to {u:g} > 1; clamped to 1",
            OvercommitWarning,
            stacklevel=2,
        )
        return 1.0
    return u


def tdp_energy_bound(
    desc: SystemDescriptor, duration: float, start: float = 0.0
) -> EnergyEstimate:
    """Worst-case energy: TDP held for the whole duration."""
    if not duration >= 0:
        raise ValueError("duration must be non-negative")
    return EnergyEstimate(
        joules=desc.tdp_watts * duration,
        start=start,
        end=start + duration,
        method=Method.tdp_bound,
        scope=Scope(HierarchyLevel.component, (desc.architecture,)),
        basis=Basis.absolute,
        notes=(
            f"upper-bound proxy from TDP {desc.tdp_watts!r} W; thermal rating, "
            "not a measurement",
        ),
    )


def _closeness(candidate: float, target: float) -> float:
    if target <= 0:
        return 0.0
    return max(0.0, 1.0 - abs(candidate - target) / target)


def score_loadline(ll: Loadline, desc: SystemDescriptor) -> float:
    m = ll.meta
    score = 0.0
    if m.architecture.casefold() == desc.architecture.casefold():
        score += 4.0
    score += 2.0 * _closeness(m.tdp_watts, desc.tdp_watts)
    score += 1.0 * _closeness(m.base_clock_ghz, desc.base_clock_ghz)
    if desc.workload_name and m.workload_name.casefold() == desc.workload_name.casefold():
        score += 2.0
    return score


def select_loadline(
    catalog: Sequence[Loadline], desc: SystemDescriptor
) -> tuple[Loadline, float]:
    """Best-matching loadline and its score.

    Score = 4 (same architecture) + 2 x TDP closeness + 1 x clock closeness
    + 2 (same workload), closeness being ``max(0, 1 - |x - target| / target)``.
    Ties go to the smaller TDP difference, then the lexicographically first
    workload name.
    """
    if not catalog:
        raise ValueError("loadline catalog is empty")
    ranked = sorted(
        catalog,
        key=lambda ll: (
            -score_loadline(ll, desc),
            abs(ll.meta.tdp_watts - desc.tdp_watts),
            ll.meta.workload_name,
        ),
    )
    best = ranked[0]
    return best, score_loadline(best, desc)


def apply_calibration(estimate: EnergyEstimate, factor: CalibrationFactor) -> EnergyEstimate:
    return estimate.with_note(
        f"calibrated x{factor.scale!r} ({factor.source})",
        joules=estimate.joules * factor.scale,
    )


def load_loadline(path: str | os.PathLike) -> Loadline:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from None
    return Loadline.from_dict(doc)


def load_catalog(directory: str | os.PathLike) -> list[Loadline]:
    """Every ``*.json`` loadline in ``directory``, in filename order."""
    paths = sorted(Path(directory).glob("*.json"))
    if not paths:
        raise DataError(f"no loadline files in {directory}")
    return [load_loadline(p) for p in paths]
