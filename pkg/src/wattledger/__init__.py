"""Energy and emissions accounting for computational workloads.

Power telemetry is parsed into traces, integrated into energy estimates that
carry their own provenance (method, basis, scope, PUE), optionally converted
to emissions, compared across repetitions and written up as a transparency
report. The scikit-learn wrappers live in :mod:`wattledger.estimators` and
are not imported here.
"""

__version__ = "0.1.0"

from .carbon import CarbonIntensitySeries, EmissionsEstimate, emissions_constant, emissions_timeseries
from .errors import (
    CoverageError,
    DataError,
    InsufficientDataError,
    ParseError,
    ReportValidationError,
    UnitError,
    WattLedgerError,
)
from .estimation import (
    Basis,
    EnergyEstimate,
    IdleBaseline,
    Method,
    Scope,
    apply_pue,
    estimate_idle_baseline,
    fit_offsets,
    integrate,
    marginal_energy,
    standardize_to_reference,
)
from .proxy import (
    CalibrationFactor,
    Loadline,
    LoadlineMeta,
    SystemDescriptor,
    apply_calibration,
    energy_from_utilization,
    loadline_power,
    select_loadline,
    tdp_energy_bound,
)
from .report import MeasurementReport, render, validate
from .simtrace import GroundTruth, WorkloadSpec, generate, generate_utilization
from .stats import RunSet, check_sampling, compare, summarize
from .telemetry import HierarchyLevel, PowerTrace, SampleKind, diagnose, parse_power_csv, resample
from .units import Energy, Power, convert, parse_unit
