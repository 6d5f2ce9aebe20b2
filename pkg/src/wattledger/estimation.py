"""From power traces to energy estimates.

Every ``EnergyEstimate`` carries its provenance (method, basis, scope, PUE)
so that downstream comparisons can refuse to mix methodologies.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import CoverageError, DataError, InsufficientDataError
from .telemetry import HierarchyLevel, PowerTrace, SampleKind

logger = logging.getLogger(__name__)

__all__ = [
    "Method",
    "Basis",
    "Scope",
    "EnergyEstimate",
    "IdleBaseline",
    "OffsetFit",
    "integrate",
    "hold_segments",
    "nearest_rank",
    "estimate_idle_baseline",
    "declared_baseline",
    "marginal_energy",
    "standardize_to_reference",
    "fit_offsets",
    "apply_pue",
]


class Method(str, Enum):
    zero_order = "zero_order"
    trapezoid = "trapezoid"
    proxy_loadline = "proxy_loadline"
    tdp_bound = "tdp_bound"


class Basis(str, Enum):
    absolute = "absolute"
    marginal = "marginal"


@dataclass(frozen=True)
class Scope:
    level: HierarchyLevel
    sources: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "level", HierarchyLevel(self.level))
        object.__setattr__(self, "sources", tuple(self.sources))

    def to_dict(self) -> dict:
        return {"level": self.level.value, "sources": list(self.sources)}

    @classmethod
    def from_dict(cls, d: dict) -> "Scope":
        return cls(level=d["level"], sources=tuple(d.get("sources", ())))


@dataclass(frozen=True)
class EnergyEstimate:
    """Joules over ``[start, end]`` with method, basis and scope attached.

    Marginal estimates may be negative; absolute ones may not.
    """

    joules: float
    start: float
    end: float
    method: Method
    scope: Scope
    basis: Basis = Basis.absolute
    pue_applied: float | None = None
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "basis", Basis(self.basis))
        object.__setattr__(self, "notes", tuple(self.notes))
        if not math.isfinite(self.joules):
            raise ValueError("joules must be finite")
        if not self.end >= self.start:
            raise ValueError(f"interval end {self.end} precedes start {self.start}")
        if self.basis is Basis.absolute and self.joules < 0:
            raise ValueError(f"absolute energy cannot be negative ({self.joules} J)")
        if self.pue_applied is not None and not self.pue_applied >= 1:
            raise ValueError("pue_applied must be >= 1")

    @property
    def duration(self) -> float:
        return self.end - self.start

    @property
    def mean_watts(self) -> float:
        return self.joules / self.duration if self.duration > 0 else 0.0

    @property
    def kwh(self) -> float:
        return self.joules / 3.6e6

    def with_note(self, note: str, **changes) -> "EnergyEstimate":
        return replace(self, notes=self.notes + (note,), **changes)

    def to_dict(self) -> dict:
        return {
            "joules": self.joules,
            "unit": "J",
            "interval": [self.start, self.end],
            "duration_s": self.duration,
            "method": self.method.value,
            "basis": self.basis.value,
            "scope": self.scope.to_dict(),
            "pue_applied": self.pue_applied,
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnergyEstimate":
        if d.get("unit", "J") != "J":
            raise DataError(f"estimate unit must be 'J', got {d.get('unit')!r}")
        missing = [k for k in ("joules", "interval", "method", "basis", "scope") if k not in d]
        if missing:
            raise DataError(f"estimate is missing provenance fields: {missing}")
        start, end = d["interval"]
        return cls(
            joules=float(d["joules"]),
            start=float(start),
            end=float(end),
            method=d["method"],
            basis=d["basis"],
            scope=Scope.from_dict(d["scope"]),
            pue_applied=d.get("pue_applied"),
            notes=tuple(d.get("notes", ())),
        )


@dataclass(frozen=True)
class IdleBaseline:
    watts: float
    method: str  # "percentile" or "declared"
    window: tuple[float, float]
    source_id: str
    p: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.watts) and self.watts >= 0):
            raise ValueError("baseline watts must be finite and non-negative")
        if self.method not in ("percentile", "declared"):
            raise ValueError(f"unknown baseline method {self.method!r}")
        if self.method == "percentile" and not (self.p is not None and 0 < self.p < 1):
            raise ValueError("percentile baselines need p in (0, 1)")

    @property
    def method_label(self) -> str:
        return f"percentile(p={self.p!r})" if self.method == "percentile" else "declared"

    def to_dict(self) -> dict:
        return {
            "watts": self.watts,
            "unit": "W",
            "method": self.method,
            "p": self.p,
            "window": list(self.window),
            "source_id": self.source_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IdleBaseline":
        return cls(
            watts=float(d["watts"]),
            method=d["method"],
            window=tuple(d.get("window", (0.0, 0.0))),
            source_id=d["source_id"],
            p=d.get("p"),
        )


@dataclass(frozen=True)
class OffsetFit:
    offsets: dict[str, float]
    residual_rms: float
    reference: str
    common_watts: float = 0.0

    def to_dict(self) -> dict:
        return {
            "offsets_w": dict(sorted(self.offsets.items())),
            "reference": self.reference,
            "common_watts": self.common_watts,
            "residual_rms_w": self.residual_rms,
        }


# -- integration -------------------------------------------------------------


def hold_segments(trace: PowerTrace) -> tuple[np.ndarray, np.ndarray]:
    """Edges and values of the zero-order-hold signal of a power trace.

    Instantaneous samples hold forward until the next sample. Interval
    averages (stamped at interval end) hold backward over their interval; the
    first interval is only known when ``metadata["interval_origin"]`` is set.
    """
    ts, vs = trace.timestamps, trace.values
    if trace.sample_kind is SampleKind.instantaneous_power:
        return ts, vs[:-1]
    if trace.sample_kind is SampleKind.interval_average_power:
        origin = trace.metadata.get("interval_origin")
        if origin is not None and float(origin) < ts[0]:
            return np.concatenate(([float(origin)], ts)), vs
        return ts, vs[1:]
    raise ValueError("cumulative_energy traces must be decoded before integration")


def _check_cover(edges: np.ndarray, start: float, end: float, source: str) -> None:
    if not end > start:
        raise ValueError(f"empty interval [{start}, {end}]")
    if start < edges[0] or end > edges[-1]:
        lo = min(start, edges[0])
        hi = max(end, edges[-1])
        span = (start, float(edges[0])) if start < edges[0] else (float(edges[-1]), end)
        raise CoverageError(
            f"trace {source!r} covers [{edges[0]}, {edges[-1]}] but "
            f"[{start}, {end}] was requested; uncovered span {span} within [{lo}, {hi}]",
            span,
        )


def _zero_order_energy(edges, seg_values, start, end) -> float:
    lo = np.maximum(edges[:-1], start)
    hi = np.minimum(edges[1:], end)
    overlap = np.clip(hi - lo, 0.0, None)
    return float(np.sum(seg_values * overlap))


def _trapezoid_energy(ts, vs, start, end) -> float:
    t0, t1 = ts[:-1], ts[1:]
    v0, v1 = vs[:-1], vs[1:]
    lo = np.maximum(t0, start)
    hi = np.minimum(t1, end)
    keep = hi > lo
    t0, t1, v0, v1, lo, hi = (a[keep] for a in (t0, t1, v0, v1, lo, hi))
    slope = (v1 - v0) / (t1 - t0)
    p_lo = v0 + slope * (lo - t0)
    p_hi = v0 + slope * (hi - t0)
    return float(np.sum((p_lo + p_hi) / 2 * (hi - lo)))


def integrate(
    trace: PowerTrace,
    interval: tuple[float, float] | None = None,
    method: Method | str = Method.zero_order,
) -> EnergyEstimate:
    """Energy of ``trace`` over ``interval`` (defaults to the covered span).

    ``zero_order`` integrates the held signal exactly; ``trapezoid`` uses
    the piecewise-linear signal through the samples. Nothing is
    extrapolated outside the samples.
    """
    method = Method(_normalize_method(method))
    if method not in (Method.zero_order, Method.trapezoid):
        raise ValueError(f"integrate does not support method {method.value!r}")
    if not trace.sample_kind.is_power:
        raise ValueError("cumulative_energy traces must be decoded before integration")
    if len(trace) < 2 and trace.metadata.get("interval_origin") is None:
        raise CoverageError("a single sample covers no interval")
    edges, seg = hold_segments(trace)
    if interval is None:
        interval = (float(edges[0]), float(edges[-1]))
    start, end = float(interval[0]), float(interval[1])
    if method is Method.zero_order:
        _check_cover(edges, start, end, trace.source_id)
        joules = _zero_order_energy(edges, seg, start, end)
    else:
        _check_cover(trace.timestamps, start, end, trace.source_id)
        joules = _trapezoid_energy(trace.timestamps, trace.values, start, end)
    notes = list(trace.notes)
    if trace.sample_kind is SampleKind.interval_average_power and method is Method.trapezoid:
        notes.append("trapezoid applied to interval-average samples")
    return EnergyEstimate(
        joules=max(joules, 0.0),
        start=start,
        end=end,
        method=method,
        scope=Scope(trace.level, (trace.source_id,)),
        basis=Basis.absolute,
        notes=tuple(notes),
    )


def _normalize_method(method) -> str:
    if isinstance(method, Enum):
        return method.value
    return str(method).replace("-", "_")


# -- baselines ---------------------------------------------------------------


def nearest_rank(values: Sequence[float], p: float) -> float:
    """Nearest-rank ``p``-quantile: the ``ceil(p * n)``-th smallest value."""
    arr = np.sort(np.asarray(values, dtype=float))
    k = max(1, math.ceil(p * arr.size - 1e-9))
    return float(arr[k - 1])


def estimate_idle_baseline(
    trace: PowerTrace,
    p: float = 0.02,
    window: tuple[float, float] | None = None,
) -> IdleBaseline:
    """Idle draw as a low nearest-rank percentile of the observed power."""
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p!r}")
    if not trace.sample_kind.is_power:
        raise ValueError("baseline needs a power trace")
    data = trace if window is None else trace.window(*window)
    n = len(data)
    if n * p < 1 - 1e-9:
        raise InsufficientDataError(
            f"{n} samples cannot populate the {p:g}-quantile; need at least "
            f"{math.ceil(1 / p - 1e-9)} (use a longer window)"
        )
    return IdleBaseline(
        watts=nearest_rank(data.values, p),
        method="percentile",
        p=p,
        window=(data.start, data.end),
        source_id=trace.source_id,
    )


def declared_baseline(watts: float, source_id: str, window=(0.0, 0.0)) -> IdleBaseline:
    return IdleBaseline(watts=float(watts), method="declared", window=tuple(window), source_id=source_id)


def marginal_energy(absolute: EnergyEstimate, baseline: IdleBaseline) -> EnergyEstimate:
    """Energy above the idle baseline. Negative results are kept, with a note."""
    if absolute.basis is not Basis.absolute:
        raise ValueError("marginal_energy needs an absolute estimate")
    if baseline.source_id not in absolute.scope.sources:
        raise ValueError(
            f"baseline source {baseline.source_id!r} not in estimate scope "
            f"{list(absolute.scope.sources)}"
        )
    idle = baseline.watts * absolute.duration
    joules = absolute.joules - idle
    notes = [f"idle baseline {baseline.watts!r} W ({baseline.method_label}) subtracted"]
    if joules < 0:
        msg = (
            f"marginal energy is negative ({joules:.6g} J): workload drew less than "
            "the idle baseline; baseline may be misestimated"
        )
        logger.warning(msg)
        notes.append("warning: " + msg)
    return replace(absolute, joules=joules, basis=Basis.marginal, notes=absolute.notes + tuple(notes))


def standardize_to_reference(
    absolute: EnergyEstimate,
    node_baseline: IdleBaseline,
    reference_baseline: IdleBaseline,
) -> EnergyEstimate:
    """Shift an estimate by the idle-power difference to a reference node class."""
    if node_baseline.method_label != reference_baseline.method_label:
        raise ValueError(
            f"baseline methods differ ({node_baseline.method_label} vs "
            f"{reference_baseline.method_label})"
        )
    delta_w = node_baseline.watts - reference_baseline.watts
    joules = absolute.joules - delta_w * absolute.duration
    note = (
        f"standardized from {node_baseline.source_id} idle {node_baseline.watts!r} W "
        f"to {reference_baseline.source_id} idle {reference_baseline.watts!r} W "
        f"(offset {delta_w!r} W)"
    )
    if absolute.basis is Basis.absolute and joules < 0:
        raise DataError(f"standardized absolute energy is negative ({joules} J)")
    return absolute.with_note(note, joules=joules)


def fit_offsets(
    repetitions: Iterable[tuple[str, EnergyEstimate]],
    reference: str | None = None,
) -> OffsetFit:
    """Least-squares constant power offset per node class.

    Each repetition of the same workload is modelled as
    ``joules = (common_watts + offset[class]) * duration``, with the
    reference class (default: first in sorted order) pinned to zero.
    Residuals are minimized in joules; the RMS is reported in watts.
    """
    reps = list(repetitions)
    classes = sorted({c for c, _ in reps})
    if len(classes) < 2:
        raise ValueError("offset fit needs at least two node classes")
    counts = {c: sum(1 for k, _ in reps if k == c) for c in classes}
    short = [c for c, n in counts.items() if n < 2]
    if short:
        raise InsufficientDataError(f"classes with fewer than 2 repetitions: {short}")
    reference = classes[0] if reference is None else reference
    if reference not in classes:
        raise ValueError(f"reference class {reference!r} has no repetitions")
    free = [c for c in classes if c != reference]

    d = np.array([e.duration for _, e in reps])
    if np.any(d <= 0):
        raise DataError("repetitions must have positive duration")
    y = np.array([e.joules for _, e in reps])
    X = np.zeros((len(reps), 1 + len(free)))
    X[:, 0] = d
    for row, (c, _) in enumerate(reps):
        if c != reference:
            X[row, 1 + free.index(c)] = d[row]
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise DataError("singular design; offsets are not identifiable")
    resid_w = (y - X @ coef) / d
    offsets = {reference: 0.0}
    offsets.update({c: float(coef[1 + i]) for i, c in enumerate(free)})
    return OffsetFit(
        offsets=offsets,
        residual_rms=float(np.sqrt(np.mean(resid_w**2))),
        reference=reference,
        common_watts=float(coef[0]),
    )


# -- facility scaling --------------------------------------------------------


def apply_pue(estimate: EnergyEstimate, pue: float) -> EnergyEstimate:
    """Gross up IT energy to facility energy by a Power Usage Effectiveness."""
    if not (math.isfinite(pue) and pue >= 1):
        raise ValueError(f"PUE must be >= 1, got {pue!r}")
    if estimate.pue_applied is not None:
        raise ValueError(f"PUE {estimate.pue_applied!r} already applied to this estimate")
    return estimate.with_note(
        f"scaled by PUE {pue!r} to facility energy",
        joules=estimate.joules * pue,
        pue_applied=float(pue),
    )
