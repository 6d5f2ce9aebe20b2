"""Operational emissions from energy and grid carbon intensity.

Intensity samples are held (zero order) until the next sample. The last
sample stays valid for one native interval of the series, or indefinitely
for a single-sample series, unless ``valid_until`` says otherwise.
"""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import CoverageError, DataError, ParseError
from .estimation import EnergyEstimate, hold_segments, integrate
from .telemetry import PowerTrace, _as_text, _parse_float, parse_timestamp
from .units import JOULES_PER_KWH

__all__ = [
    "IntensityBasis",
    "Alignment",
    "CarbonIntensitySeries",
    "EmissionsEstimate",
    "emissions_constant",
    "emissions_timeseries",
    "parse_intensity_csv",
]


class IntensityBasis(str, Enum):
    yearly_average = "yearly_average"
    realtime = "realtime"


class Alignment(str, Enum):
    upsample_intensity = "upsample_intensity"
    downsample_power = "downsample_power"
    constant = "constant"


@dataclass(frozen=True, eq=False)
class CarbonIntensitySeries:
    timestamps: np.ndarray
    intensity: np.ndarray  # gCO2 per kWh
    region: str
    basis: IntensityBasis
    valid_until: float | None = None

    def __post_init__(self):
        ts = np.array(self.timestamps, dtype=float)
        ci = np.array(self.intensity, dtype=float)
        if ts.ndim != 1 or ts.shape != ci.shape or ts.size == 0:
            raise DataError("intensity series needs matching, non-empty samples")
        if np.any(np.diff(ts) <= 0):
            raise DataError("intensity timestamps must be strictly increasing")
        if not np.all(np.isfinite(ci)) or np.any(ci < 0):
            raise DataError("intensity must be finite and non-negative")
        object.__setattr__(self, "basis", IntensityBasis(self.basis))
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "intensity", ci)

    @property
    def cover_end(self) -> float:
        if self.valid_until is not None:
            return float(self.valid_until)
        if self.timestamps.size == 1:
            return math.inf
        step = statistics.median_low(np.diff(self.timestamps).tolist())
        return float(self.timestamps[-1] + step)

    def windows(self) -> np.ndarray:
        """Edges of the hold windows, ``n + 1`` values."""
        return np.append(self.timestamps, self.cover_end)

    def at(self, t) -> np.ndarray:
        idx = np.searchsorted(self.timestamps, t, side="right") - 1
        return self.intensity[np.clip(idx, 0, None)]


@dataclass(frozen=True)
class EmissionsEstimate:
    grams_co2: float
    energy: EnergyEstimate
    intensity_basis: IntensityBasis | None
    alignment: Alignment | None
    region: str | None = None

    def __post_init__(self):
        if not (math.isfinite(self.grams_co2) and self.grams_co2 >= 0):
            raise ValueError("grams_co2 must be finite and non-negative")
        if self.intensity_basis is not None:
            object.__setattr__(self, "intensity_basis", IntensityBasis(self.intensity_basis))
        if self.alignment is not None:
            object.__setattr__(self, "alignment", Alignment(self.alignment))

    def to_dict(self) -> dict:
        return {
            "grams_co2": self.grams_co2,
            "unit": "gCO2",
            "energy": self.energy.to_dict(),
            "intensity_basis": self.intensity_basis.value if self.intensity_basis else None,
            "alignment": self.alignment.value if self.alignment else None,
            "region": self.region,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EmissionsEstimate":
        return cls(
            grams_co2=float(d["grams_co2"]),
            energy=EnergyEstimate.from_dict(d["energy"]),
            intensity_basis=d.get("intensity_basis"),
            alignment=d.get("alignment"),
            region=d.get("region"),
        )


def emissions_constant(
    energy: EnergyEstimate,
    intensity: float,
    *,
    basis: IntensityBasis | str = IntensityBasis.yearly_average,
    region: str | None = None,
) -> EmissionsEstimate:
    """Grams CO2 for ``energy`` at one intensity (gCO2/kWh)."""
    if not (math.isfinite(intensity) and intensity >= 0):
        raise ValueError("intensity must be non-negative")
    if energy.joules < 0:
        raise ValueError("emissions need a non-negative energy estimate")
    return EmissionsEstimate(
        grams_co2=energy.joules / JOULES_PER_KWH * intensity,
        energy=energy,
        intensity_basis=IntensityBasis(basis),
        alignment=Alignment.constant,
        region=region,
    )


def _native_step(ts: np.ndarray) -> float | None:
    if ts.size < 2:
        return None
    return statistics.median_low(np.diff(ts).tolist())


def emissions_timeseries(
    power: PowerTrace,
    ci: CarbonIntensitySeries,
    interval: tuple[float, float] | None = None,
    strategy: Alignment | str = Alignment.upsample_intensity,
) -> EmissionsEstimate:
    """Emissions of a power trace under a time-varying intensity.

    ``upsample_intensity`` reads the held intensity at every power segment
    and sums ``power * intensity * dt``. ``downsample_power`` integrates the
    power over each intensity window and weights each window energy by its
    intensity. Neither route extrapolates either series.
    """
    strategy = Alignment(strategy)
    if strategy is Alignment.constant:
        raise ValueError("use emissions_constant for a single intensity value")
    energy = integrate(power, interval)
    start, end = energy.start, energy.end
    if start < ci.timestamps[0]:
        raise CoverageError(
            f"intensity series starts at {ci.timestamps[0]}; span "
            f"[{start}, {ci.timestamps[0]}] uncovered",
            (start, float(ci.timestamps[0])),
        )
    if end > ci.cover_end:
        raise CoverageError(
            f"intensity series valid until {ci.cover_end}; span "
            f"[{ci.cover_end}, {end}] uncovered",
            (ci.cover_end, end),
        )
    edges, seg = hold_segments(power)
    p_step, c_step = _native_step(edges), _native_step(ci.timestamps)
    if p_step is not None and c_step is not None:
        if strategy is Alignment.upsample_intensity and p_step > c_step:
            raise ValueError(
                "upsample_intensity needs power sampled at least as often as intensity"
            )
        if strategy is Alignment.downsample_power and c_step < p_step:
            raise ValueError(
                "downsample_power needs intensity windows no finer than power samples"
            )

    if strategy is Alignment.upsample_intensity:
        # split at both series' breakpoints so each piece has one power and
        # one intensity value, even when the grids are not aligned
        cuts = np.union1d(edges, ci.windows())
        cuts = np.union1d(cuts[(cuts > start) & (cuts < end)], [start, end])
        lo, hi = cuts[:-1], cuts[1:]
        idx = np.clip(np.searchsorted(edges, lo, side="right") - 1, 0, seg.size - 1)
        grams = float(np.sum(seg[idx] * ci.at(lo) * (hi - lo))) / JOULES_PER_KWH
    else:
        w = ci.windows()
        grams = 0.0
        for k in range(ci.timestamps.size):
            a, b = max(w[k], start), min(w[k + 1], end)
            if b > a:
                window_j = integrate(power, (a, b)).joules
                grams += window_j / JOULES_PER_KWH * ci.intensity[k]
    return EmissionsEstimate(
        grams_co2=max(grams, 0.0),
        energy=energy,
        intensity_basis=ci.basis,
        alignment=strategy,
        region=ci.region,
    )


def parse_intensity_csv(stream, valid_until: float | None = None) -> CarbonIntensitySeries:
    """Read ``timestamp,intensity_gco2_per_kwh,region,basis`` rows."""
    reader = csv.DictReader(_as_text(stream))
    need = ("timestamp", "intensity_gco2_per_kwh", "region", "basis")
    if not reader.fieldnames or any(c not in reader.fieldnames for c in need):
        raise ParseError(f"intensity header must be {','.join(need)}", 1)
    ts, vals, regions, bases = [], [], set(), set()
    for row in reader:
        line = reader.line_num
        try:
            ts.append(parse_timestamp(row["timestamp"]))
        except ValueError as exc:
            raise ParseError(str(exc), line) from None
        vals.append(_parse_float(row["intensity_gco2_per_kwh"], "intensity", line))
        regions.add(row["region"].strip())
        bases.add(row["basis"].strip())
    if not ts:
        raise ParseError("no samples")
    if len(regions) > 1 or len(bases) > 1:
        raise ParseError("region and basis must be constant within one file")
    order = np.argsort(ts, kind="stable")
    try:
        basis = IntensityBasis(bases.pop())
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    return CarbonIntensitySeries(
        timestamps=np.asarray(ts)[order],
        intensity=np.asarray(vals)[order],
        region=regions.pop(),
        basis=basis,
        valid_until=valid_until,
    )
