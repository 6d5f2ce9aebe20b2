"""Synthetic traces with analytic ground-truth energy.

The true signal is piecewise constant: a sequence of phases, optionally
overridden by short spikes. It is point-sampled on a regular grid, which
reproduces the aliasing hazard of coarse sampling literally: a sample that
lands on a spike holds the spike level for a whole interval, one that misses
it drops the spike entirely.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .proxy import Loadline, loadline_inverse
from .telemetry import HierarchyLevel, PowerTrace, SampleKind, UtilizationTrace

__all__ = ["Phase", "Spike", "WorkloadSpec", "GroundTruth", "generate", "generate_utilization"]


@dataclass(frozen=True)
class Phase:
    duration: float
    watts: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("phase duration must be positive")
        if not (math.isfinite(self.watts) and self.watts >= 0):
            raise ValueError("phase watts must be finite and non-negative")


@dataclass(frozen=True)
class Spike:
    time: float
    duration: float
    watts: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("spike duration must be positive")
        if not (math.isfinite(self.watts) and self.watts >= 0):
            raise ValueError("spike watts must be finite and non-negative")


@dataclass(frozen=True)
class WorkloadSpec:
    phases: tuple[Phase, ...]
    noise_std: float = 0.0
    spikes: tuple[Spike, ...] = ()
    seed: int = 0
    source_id: str = "sim"

    def __post_init__(self):
        phases = tuple(p if isinstance(p, Phase) else Phase(*p) for p in self.phases)
        spikes = tuple(s if isinstance(s, Spike) else Spike(*s) for s in self.spikes)
        if not phases:
            raise ValueError("a workload needs at least one phase")
        if not self.noise_std >= 0:
            raise ValueError("noise_std must be non-negative")
        total = sum(p.duration for p in phases)
        ordered = sorted(spikes, key=lambda s: s.time)
        for s in ordered:
            if s.time < 0 or s.time + s.duration > total:
                raise ValueError(
                    f"spike [{s.time}, {s.time + s.duration}] outside span [0, {total}]"
                )
        for s0, s1 in zip(ordered, ordered[1:]):
            if s1.time < s0.time + s0.duration:
                raise ValueError("spikes must not overlap")
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "spikes", tuple(ordered))

    @property
    def total_duration(self) -> float:
        return float(sum(p.duration for p in self.phases))

    @property
    def boundaries(self) -> np.ndarray:
        return np.concatenate(([0.0], np.cumsum([p.duration for p in self.phases])))

    def signal(self, t) -> np.ndarray:
        """Noise-free power at instants ``t`` (phases are left-closed)."""
        t = np.asarray(t, dtype=float)
        bounds = self.boundaries
        idx = np.clip(np.searchsorted(bounds, t, side="right") - 1, 0, len(self.phases) - 1)
        out = np.array([p.watts for p in self.phases])[idx]
        for s in self.spikes:
            out = np.where((t >= s.time) & (t < s.time + s.duration), s.watts, out)
        return out

    def to_dict(self) -> dict:
        return {
            "phases": [{"duration": p.duration, "watts": p.watts} for p in self.phases],
            "noise_std": self.noise_std,
            "spikes": [
                {"time": s.time, "duration": s.duration, "watts": s.watts} for s in self.spikes
            ],
            "seed": self.seed,
            "source_id": self.source_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WorkloadSpec":
        return cls(
            phases=tuple(Phase(float(p["duration"]), float(p["watts"])) for p in d["phases"]),
            noise_std=float(d.get("noise_std", 0.0)),
            spikes=tuple(
                Spike(float(s["time"]), float(s["duration"]), float(s["watts"]))
                for s in d.get("spikes", ())
            ),
            seed=int(d.get("seed", 0)),
            source_id=d.get("source_id", "sim"),
        )

    @classmethod
    def load(cls, path) -> "WorkloadSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class GroundTruth:
    joules: float
    span: tuple[float, float] = field(default=(0.0, 0.0))

    def __post_init__(self):
        if not self.joules >= 0:
            raise ValueError("ground-truth energy must be non-negative")

    def to_dict(self) -> dict:
        return {"joules": self.joules, "unit": "J", "span": list(self.span)}


def _truth(spec: WorkloadSpec) -> float:
    bounds = spec.boundaries
    joules = sum(p.watts * p.duration for p in spec.phases)
    for s in spec.spikes:
        a, b = s.time, s.time + s.duration
        for i, p in enumerate(spec.phases):
            overlap = min(b, bounds[i + 1]) - max(a, bounds[i])
            if overlap > 0:
                joules += (s.watts - p.watts) * overlap
    return float(joules)


def _sample_grid(total: float, interval: float) -> np.ndarray:
    n = int(math.floor(total / interval * (1 + 1e-12) + 1e-9))
    grid = np.arange(n + 1) * interval
    if abs(grid[-1] - total) <= 1e-9 * max(total, 1.0):
        grid[-1] = total
    return grid


def generate(spec: WorkloadSpec, sample_interval: float) -> tuple[PowerTrace, GroundTruth]:
    """Point-sample the workload every ``sample_interval`` seconds.

    Seeded Gaussian noise is added and the result floored at zero. The
    ground truth is the exact integral of the noise-free signal.
    """
    if not sample_interval > 0:
        raise ValueError("sample_interval must be positive")
    total = spec.total_duration
    grid = _sample_grid(total, sample_interval)
    values = spec.signal(grid)
    if spec.noise_std > 0:
        rng = np.random.default_rng(spec.seed)
        values = np.maximum(values + rng.normal(0.0, spec.noise_std, values.size), 0.0)
    trace = PowerTrace(
        source_id=spec.source_id,
        level=HierarchyLevel.node,
        sample_kind=SampleKind.instantaneous_power,
        timestamps=grid,
        values=values,
        metadata={
            "sampling_tool": "simtrace",
            "declared_interval_s": repr(float(sample_interval)),
            "seed": str(spec.seed),
        },
    )
    return trace, GroundTruth(_truth(spec), (0.0, total))


def generate_utilization(
    spec: WorkloadSpec, ll: Loadline, sample_interval: float
) -> UtilizationTrace:
    """Utilization whose loadline power equals the noise-free signal."""
    if not sample_interval > 0:
        raise ValueError("sample_interval must be positive")
    grid = _sample_grid(spec.total_duration, sample_interval)
    levels = {float(w) for w in spec.signal(grid)}
    inverse = {w: loadline_inverse(ll, w) for w in sorted(levels)}
    u = np.array([inverse[float(w)] for w in spec.signal(grid)])
    return UtilizationTrace(
        source_id=spec.source_id,
        timestamps=grid,
        utilization=u,
        workload_name=ll.meta.workload_name,
    )
