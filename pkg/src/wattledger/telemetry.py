"""Power and utilization time series: parsing, validation, diagnostics.

Traces are immutable. Sample arrays are stored as read-only numpy arrays in
canonical units (watts for power kinds, joules for cumulative energy).
"""

from __future__ import annotations

import csv
import io
import logging
import math
import statistics
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import IO, Mapping

import numpy as np

from .errors import CoverageError, DataError, ParseError
from .units import JOULE, WATT, UnitScale, convert, parse_unit

logger = logging.getLogger(__name__)

__all__ = [
    "HierarchyLevel",
    "SampleKind",
    "PowerTrace",
    "UtilizationTrace",
    "TraceDiagnostics",
    "DEFAULT_COUNTER_MAX_UJ",
    "CANONICAL_HEADER",
    "parse_timestamp",
    "parse_power_csv",
    "write_power_csv",
    "read_trace",
    "decode_cumulative_counter",
    "counter_deltas_uj",
    "parse_device_monitor_table",
    "parse_utilization_csv",
    "diagnose",
    "resample",
]

DEFAULT_COUNTER_MAX_UJ = 2**32 - 1
CANONICAL_HEADER = ("timestamp", "value", "unit", "source_id", "level", "sample_kind")


class HierarchyLevel(str, Enum):
    facility = "facility"
    system = "system"
    platform = "platform"
    rack = "rack"
    node = "node"
    component = "component"


class SampleKind(str, Enum):
    instantaneous_power = "instantaneous_power"
    interval_average_power = "interval_average_power"
    cumulative_energy = "cumulative_energy"

    @property
    def is_power(self) -> bool:
        return self is not SampleKind.cumulative_energy


def _frozen(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise DataError(f"{name} must be one-dimensional")
    arr.flags.writeable = False
    return arr


def _check_timestamps(ts: np.ndarray) -> None:
    if ts.size == 0:
        raise DataError("no samples")
    if not np.all(np.isfinite(ts)):
        raise DataError("timestamps must be finite")
    steps = np.diff(ts)
    if np.any(steps <= 0):
        i = int(np.argmax(steps <= 0))
        kind = "duplicate" if steps[i] == 0 else "non-monotone"
        raise DataError(f"{kind} timestamp at index {i + 1} ({ts[i + 1]!r})")


@dataclass(frozen=True, eq=False)
class PowerTrace:
    """Timestamped samples from one source at one hierarchy level.

    Attributes
    ----------
    timestamps : ndarray
        Seconds since the epoch, strictly increasing.
    values : ndarray
        Watts for power kinds, joules for ``cumulative_energy``.
    metadata : dict
        Free-form string map (device model, sampling tool, declared
        interval, ``counter_max_uj`` ...).
    notes : tuple of str
        Warnings recorded while ingesting the data.
    """

    source_id: str
    level: HierarchyLevel
    sample_kind: SampleKind
    timestamps: np.ndarray
    values: np.ndarray
    metadata: Mapping[str, str] = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "level", HierarchyLevel(self.level))
        object.__setattr__(self, "sample_kind", SampleKind(self.sample_kind))
        ts = _frozen(self.timestamps, "timestamps")
        vals = _frozen(self.values, "values")
        if ts.shape != vals.shape:
            raise DataError("timestamps and values differ in length")
        _check_timestamps(ts)
        if not np.all(np.isfinite(vals)):
            raise DataError("values must be finite")
        if np.any(vals < 0):
            raise DataError("power and energy values must be non-negative")
        if self.sample_kind is SampleKind.cumulative_energy:
            cmax = self.counter_max_uj * 1e-6
            if np.any(vals > cmax):
                raise DataError("cumulative value exceeds counter_max")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "metadata", dict(self.metadata))
        object.__setattr__(self, "notes", tuple(self.notes))

    def __len__(self) -> int:
        return self.timestamps.size

    def __eq__(self, other):
        if not isinstance(other, PowerTrace):
            return NotImplemented
        return (
            self.source_id == other.source_id
            and self.level is other.level
            and self.sample_kind is other.sample_kind
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.values, other.values)
        )

    @property
    def start(self) -> float:
        return float(self.timestamps[0])

    @property
    def end(self) -> float:
        return float(self.timestamps[-1])

    @property
    def counter_max_uj(self) -> float:
        return float(self.metadata.get("counter_max_uj", DEFAULT_COUNTER_MAX_UJ))

    def replace(self, **changes) -> "PowerTrace":
        kwargs = dict(
            source_id=self.source_id,
            level=self.level,
            sample_kind=self.sample_kind,
            timestamps=self.timestamps,
            values=self.values,
            metadata=self.metadata,
            notes=self.notes,
        )
        kwargs.update(changes)
        return PowerTrace(**kwargs)

    def scaled(self, k: float) -> "PowerTrace":
        return self.replace(values=self.values * k)

    def window(self, start: float, end: float) -> "PowerTrace":
        mask = (self.timestamps >= start) & (self.timestamps <= end)
        return self.replace(timestamps=self.timestamps[mask], values=self.values[mask])


@dataclass(frozen=True, eq=False)
class UtilizationTrace:
    """Utilization samples as fractions of the physical capacity.

    Values above 1 are allowed here (logical over-commit under SMT) but must
    be normalized before they can be mapped through a loadline.
    """

    source_id: str
    timestamps: np.ndarray
    utilization: np.ndarray
    physical_cores: int = 1
    logical_per_core: int = 1
    workload_name: str | None = None

    def __post_init__(self):
        ts = _frozen(self.timestamps, "timestamps")
        u = _frozen(self.utilization, "utilization")
        if ts.shape != u.shape:
            raise DataError("timestamps and utilization differ in length")
        _check_timestamps(ts)
        if not np.all(np.isfinite(u)) or np.any(u < 0):
            raise DataError("utilization must be finite and non-negative")
        if self.physical_cores < 1 or self.logical_per_core < 1:
            raise ValueError("core counts must be positive")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "utilization", u)

    def __len__(self) -> int:
        return self.timestamps.size


@dataclass(frozen=True)
class TraceDiagnostics:
    uniform_interval: float | None
    gaps: tuple[tuple[float, float], ...]
    zero_variance: bool
    min_interval: float
    n_samples: int

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "uniform_interval_s": self.uniform_interval,
            "min_interval_s": None if math.isinf(self.min_interval) else self.min_interval,
            "gaps": [list(g) for g in self.gaps],
            "zero_variance": self.zero_variance,
        }


# -- parsing -----------------------------------------------------------------


def parse_timestamp(text: str) -> float:
    """Epoch seconds from either a number or an RFC 3339 string.

    Naive date-times (no offset) are read as UTC.
    """
    text = text.strip()
    try:
        value = float(text)
    except ValueError:
        pass
    else:
        if not math.isfinite(value):
            raise ValueError(f"timestamp {text!r} is not finite")
        return value
    s = text.replace("/", "-")
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(s)
    except ValueError:
        raise ValueError(f"unrecognized timestamp {text!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _as_text(stream) -> IO[str]:
    if isinstance(stream, (bytes, bytearray)):
        return io.StringIO(stream.decode("utf-8"))
    if isinstance(stream, str):
        return io.StringIO(stream)
    if isinstance(stream, io.TextIOBase):
        return stream
    return io.TextIOWrapper(stream, encoding="utf-8", newline="")


def _parse_float(text: str, what: str, line: int) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ParseError(f"{what} {text!r} is not a number", line) from None
    if not math.isfinite(value):
        raise ParseError(f"{what} {text!r} is not finite", line)
    return value


def parse_power_csv(
    stream,
    schema: Mapping[str, str] | None = None,
    unit: UnitScale | str | None = None,
    *,
    source_id: str | None = None,
    level: HierarchyLevel | str | None = None,
    sample_kind: SampleKind | str | None = None,
    metadata: Mapping[str, str] | None = None,
) -> PowerTrace:
    """Read a CSV power trace and normalize it to canonical units.

    ``schema`` maps the logical fields ``timestamp``, ``value`` and optionally
    ``unit``, ``source_id``, ``level`` and ``sample_kind`` to column names.
    The default schema reads the canonical trace format. Per-row columns take
    precedence over the keyword defaults. Rows are sorted by timestamp;
    duplicate timestamps are an error.
    """
    cols = {
        "timestamp": "timestamp",
        "value": "value",
        "unit": "unit",
        "source_id": "source_id",
        "level": "level",
        "sample_kind": "sample_kind",
    }
    if schema:
        cols.update(schema)
    reader = csv.DictReader(_as_text(stream))
    header = reader.fieldnames
    if not header:
        raise ParseError("missing header row", 1)
    header = [h.strip() for h in header]
    reader.fieldnames = header
    for required in ("timestamp", "value"):
        if cols[required] not in header:
            raise ParseError(
                f"column {cols[required]!r} not found; header has {header}", 1
            )
    default_unit = parse_unit(unit) if unit is not None else None

    rows: list[tuple[float, float, int]] = []
    seen: dict[str, str | None] = {"source_id": None, "level": None, "sample_kind": None}
    dimension: str | None = None
    for row in reader:
        line = reader.line_num
        if None in row or any(v is None for v in row.values()):
            raise ParseError("wrong number of fields", line)
        ts_text = row[cols["timestamp"]]
        try:
            ts = parse_timestamp(ts_text)
        except ValueError as exc:
            raise ParseError(str(exc), line) from None
        value = _parse_float(row[cols["value"]].strip(), "value", line)
        row_unit = row.get(cols["unit"]) if cols["unit"] in header else None
        try:
            scale = parse_unit(row_unit) if row_unit else default_unit
        except ValueError as exc:
            raise ParseError(str(exc), line) from None
        if scale is None:
            raise ParseError("no unit column and no unit given", line)
        for key in seen:
            if cols[key] in header:
                cell = row[cols[key]].strip()
                if seen[key] is None:
                    seen[key] = cell
                elif cell != seen[key]:
                    raise ParseError(f"{key} changes within one trace ({cell!r})", line)
        canonical = WATT if scale.dimension == "power" else JOULE
        if dimension is None:
            dimension = scale.dimension
        elif scale.dimension != dimension:
            raise ParseError("mixed power and energy units", line)
        rows.append((ts, convert(value, scale, canonical), line))

    if not rows:
        raise ParseError("no samples", reader.line_num or 1)

    rows.sort(key=lambda r: r[0])
    for prev, cur in zip(rows, rows[1:]):
        if prev[0] == cur[0]:
            raise ParseError(f"duplicate timestamp {cur[0]!r}", max(prev[2], cur[2]))

    kind = seen["sample_kind"] or sample_kind
    if kind is None:
        kind = (
            SampleKind.instantaneous_power
            if dimension == "power"
            else SampleKind.cumulative_energy
        )
    try:
        kind = SampleKind(kind)
        lvl = HierarchyLevel(seen["level"] or level or HierarchyLevel.node)
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    if kind.is_power != (dimension == "power"):
        raise ParseError(f"unit dimension does not match sample_kind {kind.value}")
    return PowerTrace(
        source_id=seen["source_id"] or source_id or "trace",
        level=lvl,
        sample_kind=kind,
        timestamps=[r[0] for r in rows],
        values=[r[1] for r in rows],
        metadata=metadata or {},
    )


def write_power_csv(trace: PowerTrace, stream: IO[str]) -> None:
    """Write ``trace`` in the canonical CSV format (lossless for floats)."""
    unit = "W" if trace.sample_kind.is_power else "J"
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CANONICAL_HEADER)
    for t, v in zip(trace.timestamps, trace.values):
        writer.writerow(
            [repr(float(t)), repr(float(v)), unit, trace.source_id,
             trace.level.value, trace.sample_kind.value]
        )


def read_trace(path: str, **kwargs) -> PowerTrace:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_power_csv(fh, **kwargs)


def counter_deltas_uj(trace: PowerTrace, counter_max: float | None = None) -> np.ndarray:
    """Per-interval energy in µJ from a wrapping cumulative register.

    Register readings are integer counts, so the canonical joule values are
    rounded back to whole µJ before the modular difference.
    """
    if trace.sample_kind is not SampleKind.cumulative_energy:
        raise ValueError("trace must hold cumulative_energy samples")
    cmax = trace.counter_max_uj if counter_max is None else float(counter_max)
    if not cmax > 0:
        raise ValueError("counter_max must be positive")
    if len(trace) < 2:
        raise DataError("need at least two counter readings")
    raw = np.round(trace.values * 1e6)
    if np.any(raw > cmax):
        raise DataError("counter reading exceeds counter_max; corrupted input")
    return np.mod(np.diff(raw), cmax)


def decode_cumulative_counter(
    trace: PowerTrace, counter_max: float | None = None
) -> PowerTrace:
    """Turn cumulative register readings into interval-average power.

    Each output sample is stamped at the end of its interval. The start of
    the first interval is kept in ``metadata["interval_origin"]`` so that the
    full span can still be integrated.
    """
    deltas = counter_deltas_uj(trace, counter_max)
    dt = np.diff(trace.timestamps)
    watts = deltas * 1e-6 / dt
    meta = dict(trace.metadata)
    meta["interval_origin"] = repr(trace.start)
    meta["decoded_from"] = "cumulative_energy"
    return PowerTrace(
        source_id=trace.source_id,
        level=trace.level,
        sample_kind=SampleKind.interval_average_power,
        timestamps=trace.timestamps[1:],
        values=watts,
        metadata=meta,
        notes=trace.notes,
    )


_DIALECT_POWER_COLUMNS = {
    "gpu_smi_csv": ("power.draw",),
    "generic": ("power", "power_w", "watts"),
}
_NA_CELLS = {"", "[N/A]", "N/A", "[Not Supported]", "[Unknown Error]"}


def _strip_unit(cell: str) -> tuple[str, str | None]:
    parts = cell.strip().split()
    if len(parts) == 2:
        return parts[0], parts[1]
    return cell.strip(), None


def parse_device_monitor_table(
    stream,
    dialect: str = "gpu_smi_csv",
    *,
    source_id: str | None = None,
    gpu_index: int | None = None,
) -> PowerTrace:
    """Parse the CSV emitted by a device monitor (e.g. ``nvidia-smi --query``).

    Cells such as ``[N/A]`` are skipped and recorded in ``trace.notes``.
    Multi-device tables need ``gpu_index`` to pick one device.
    """
    if dialect not in _DIALECT_POWER_COLUMNS:
        raise ValueError(f"unknown dialect {dialect!r}")
    text = _as_text(stream).read()
    reader = csv.reader(io.StringIO(text), skipinitialspace=True)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError("no samples") from None
    # a column is matched on its name with any bracketed unit suffix removed
    power_col = next(
        (h for name in _DIALECT_POWER_COLUMNS[dialect] for h in header
         if h.split("[")[0].strip() == name),
        None,
    )
    if power_col is None:
        raise ParseError(f"power column not found; columns present: {header}", 1)
    ts_col = next((c for c in header if c.startswith("timestamp")), None)
    if ts_col is None:
        raise ParseError(f"timestamp column not found; columns present: {header}", 1)
    idx_col = "index" if "index" in header else None
    header_unit = "W"
    if "[" in power_col:
        header_unit = power_col[power_col.index("[") + 1 : power_col.index("]")]

    notes: list[str] = []
    times: list[float] = []
    watts: list[float] = []
    devices: set[str] = set()
    for lineno, fields in enumerate(reader, start=2):
        if not fields or all(not f.strip() for f in fields):
            continue
        if len(fields) != len(header):
            raise ParseError("wrong number of fields", lineno)
        row = dict(zip(header, (f.strip() for f in fields)))
        if idx_col is not None:
            if gpu_index is not None and row[idx_col] != str(gpu_index):
                continue
            devices.add(row[idx_col])
        cell = row[power_col]
        if cell in _NA_CELLS:
            msg = f"line {lineno}: power cell {cell!r} skipped"
            notes.append(msg)
            logger.warning(msg)
            continue
        number, cell_unit = _strip_unit(cell)
        value = _parse_float(number, "power", lineno)
        try:
            ts = parse_timestamp(row[ts_col])
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        times.append(ts)
        watts.append(convert(value, cell_unit or header_unit, "W"))
    if len(devices) > 1:
        raise DataError(
            f"table holds {len(devices)} devices ({sorted(devices)}); pass gpu_index"
        )
    if not times:
        raise ParseError("no samples")
    order = np.argsort(times, kind="stable")
    ts_sorted = np.asarray(times)[order]
    if np.any(np.diff(ts_sorted) == 0):
        raise ParseError("duplicate timestamp in device table")
    device = next(iter(devices)) if devices else None
    return PowerTrace(
        source_id=source_id or (f"gpu{device}" if device is not None else "device"),
        level=HierarchyLevel.component,
        sample_kind=SampleKind.instantaneous_power,
        timestamps=ts_sorted,
        values=np.asarray(watts)[order],
        metadata={"sampling_tool": dialect},
        notes=tuple(notes),
    )


def parse_utilization_csv(
    stream,
    *,
    source_id: str = "cpu",
    percent: bool = False,
    physical_cores: int = 1,
    logical_per_core: int = 1,
    workload_name: str | None = None,
) -> UtilizationTrace:
    """Read ``timestamp,utilization`` rows.

    With ``percent=True`` the column holds OS-reported percentages summed
    over logical cores (``600`` means six busy cores); they are divided by
    ``100 * physical_cores`` on ingest.
    """
    reader = csv.DictReader(_as_text(stream))
    if not reader.fieldnames or "timestamp" not in reader.fieldnames:
        raise ParseError("header must contain 'timestamp' and 'utilization'", 1)
    col = "utilization" if "utilization" in reader.fieldnames else None
    if col is None:
        raise ParseError("header must contain 'timestamp' and 'utilization'", 1)
    rows = []
    for row in reader:
        line = reader.line_num
        try:
            ts = parse_timestamp(row["timestamp"])
        except ValueError as exc:
            raise ParseError(str(exc), line) from None
        u = _parse_float(row[col], "utilization", line)
        if percent:
            u = u / (100.0 * physical_cores)
        rows.append((ts, u))
    if not rows:
        raise ParseError("no samples")
    rows.sort()
    return UtilizationTrace(
        source_id=source_id,
        timestamps=[r[0] for r in rows],
        utilization=[r[1] for r in rows],
        physical_cores=physical_cores,
        logical_per_core=logical_per_core,
        workload_name=workload_name,
    )


# -- diagnostics and resampling ---------------------------------------------


def diagnose(trace: PowerTrace) -> TraceDiagnostics:
    """Sampling-regularity checks; never raises on a valid trace.

    The reference spacing is the low median of the intervals, so for two
    intervals the shorter one is the reference.
    """
    values = trace.values
    zero_var = bool(np.all(values == values[0]))
    if len(trace) < 2:
        return TraceDiagnostics(None, (), zero_var, math.inf, len(trace))
    steps = np.diff(trace.timestamps)
    ref = statistics.median_low(steps.tolist())
    uniform = bool(np.all(np.abs(steps - ref) <= 0.01 * ref))
    gaps = tuple(
        (float(trace.timestamps[i]), float(trace.timestamps[i + 1]))
        for i in np.flatnonzero(steps > 3 * ref)
    )
    return TraceDiagnostics(
        uniform_interval=float(ref) if uniform else None,
        gaps=gaps,
        zero_variance=zero_var,
        min_interval=float(steps.min()),
        n_samples=len(trace),
    )


def _grid(start: float, end: float, interval: float) -> np.ndarray:
    n = int(math.floor((end - start) / interval * (1 + 1e-12) + 1e-9))
    return start + np.arange(n + 1) * interval


def resample(
    trace: PowerTrace,
    interval: float,
    method: str = "zero_order_hold",
    start: float | None = None,
    end: float | None = None,
) -> PowerTrace:
    """Resample onto the arithmetic grid ``start, start + interval, ...``.

    No extrapolation: the grid must lie inside the trace span.
    """
    if not interval > 0:
        raise ValueError("interval must be positive")
    if len(trace) < 2:
        raise DataError("need at least two samples to resample")
    start = trace.start if start is None else float(start)
    end = trace.end if end is None else float(end)
    if start < trace.start or end > trace.end or end < start:
        raise CoverageError(
            f"grid [{start}, {end}] outside trace span [{trace.start}, {trace.end}]",
            (start, end),
        )
    grid = _grid(start, end, interval)
    ts, vs = trace.timestamps, trace.values
    if method in ("zero_order_hold", "zero_order"):
        if not trace.sample_kind.is_power:
            raise ValueError("hold resampling of cumulative counters is meaningless")
        # tolerance absorbs k * interval landing one ulp before a sample time
        tol = 1e-9 * interval
        idx = np.searchsorted(ts, grid + tol, side="right") - 1
        idx = np.clip(idx, 0, ts.size - 1)
        values = vs[idx]
    elif method == "linear":
        values = np.interp(grid, ts, vs)
    else:
        raise ValueError(f"unknown resampling method {method!r}")
    meta = dict(trace.metadata)
    meta["declared_interval_s"] = repr(float(interval))
    return trace.replace(timestamps=grid, values=values, metadata=meta)

