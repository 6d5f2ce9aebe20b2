"""Transparency reports: validation rules and deterministic rendering.

Rule identifiers
----------------
R-RESULTS             a report must carry at least one energy result
R-RUNTIME             energy results require runtime over hardware
R-EMISSIONS-RUNTIME   emissions require runtime over hardware
R-EMISSIONS-POWER     emissions require the underlying power/energy estimates
R-EMISSIONS-BASIS     emissions must state the intensity basis and alignment
R-EMISSIONS-LOCATION  emissions must state the grid region
W-ERROR-SOURCES       no sources of error acknowledged
W-TOOLS               no measurement tools listed
W-HARDWARE            hardware characteristics missing
W-SOFTWARE            software characteristics missing
W-UNITS               units of measurement not declared
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from .carbon import EmissionsEstimate
from .errors import DataError, ReportValidationError
from .estimation import EnergyEstimate

__all__ = [
    "RULES",
    "Component",
    "Hardware",
    "Software",
    "Methodology",
    "RuntimeOverHardware",
    "MeasurementReport",
    "ValidationFinding",
    "validate",
    "render",
    "SECTION_HEADINGS",
]

RULES = {
    "R-RESULTS": "a report must carry at least one energy result",
    "R-RUNTIME": "do not report energy without reporting runtime over hardware",
    "R-EMISSIONS-RUNTIME": "do not report emissions without runtime over hardware",
    "R-EMISSIONS-POWER": "do not report emissions without the power estimates behind them",
    "R-EMISSIONS-BASIS": "state how emissions were derived (intensity basis and alignment)",
    "R-EMISSIONS-LOCATION": "state where the compute ran (grid region)",
    "W-ERROR-SOURCES": "acknowledge potential sources of error",
    "W-TOOLS": "list the measurement tools and devices",
    "W-HARDWARE": "describe the hardware components measured",
    "W-SOFTWARE": "describe the software environment",
    "W-UNITS": "state the units of measurement",
}

SECTION_HEADINGS = (
    "Hardware Characteristics",
    "Software Characteristics",
    "Measurement Methodology",
    "Additional Considerations",
    "Sources of Error",
)


def _drop_none(d: dict) -> dict:
    return {k: v for k, v in d.items() if v is not None}


@dataclass(frozen=True)
class Component:
    kind: str
    make: str | None = None
    model: str | None = None
    count: int | None = None
    clock_ghz: float | None = None
    cores: int | None = None
    memory_gib: float | None = None

    def to_dict(self) -> dict:
        return _drop_none(self.__dict__.copy())


@dataclass(frozen=True)
class Hardware:
    components: tuple[Component, ...]
    configuration: str = ""

    def to_dict(self) -> dict:
        return {
            "components": [c.to_dict() for c in self.components],
            "configuration": self.configuration,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Hardware":
        return cls(
            components=tuple(Component(**c) for c in d.get("components", ())),
            configuration=d.get("configuration", ""),
        )


@dataclass(frozen=True)
class Software:
    environment: str = ""
    versions: dict[str, str] = field(default_factory=dict)
    optimizations: str = ""
    parallelism: str = ""
    location: str = ""
    workload_context: str = ""

    def to_dict(self) -> dict:
        d = self.__dict__.copy()
        d["versions"] = dict(sorted(self.versions.items()))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Software":
        return cls(**d)


@dataclass(frozen=True)
class Methodology:
    tools: tuple[str, ...] = ()
    setup_conditions: str = ""
    calibration_notes: str = ""

    def to_dict(self) -> dict:
        return {
            "tools": list(self.tools),
            "setup_conditions": self.setup_conditions,
            "calibration_notes": self.calibration_notes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Methodology":
        return cls(
            tools=tuple(d.get("tools", ())),
            setup_conditions=d.get("setup_conditions", ""),
            calibration_notes=d.get("calibration_notes", ""),
        )


@dataclass(frozen=True)
class RuntimeOverHardware:
    duration_s: float
    resource_description: str

    @property
    def complete(self) -> bool:
        return self.duration_s > 0 and bool(self.resource_description.strip())

    def to_dict(self) -> dict:
        return {"duration_s": self.duration_s, "resource_description": self.resource_description}


@dataclass(frozen=True)
class MeasurementReport:
    results: tuple[EnergyEstimate, ...]
    hardware: Hardware | None = None
    software: Software | None = None
    methodology: Methodology | None = None
    runtime_over_hardware: RuntimeOverHardware | None = None
    emissions: EmissionsEstimate | None = None
    error_sources: tuple[str, ...] = ()
    units_declared: str = ""
    title: str = "Energy measurement report"

    def __post_init__(self):
        object.__setattr__(self, "results", tuple(self.results))
        object.__setattr__(self, "error_sources", tuple(self.error_sources))

    def to_dict(self) -> dict:
        def opt(x):
            return None if x is None else x.to_dict()

        return {
            "title": self.title,
            "hardware": opt(self.hardware),
            "software": opt(self.software),
            "methodology": opt(self.methodology),
            "runtime_over_hardware": opt(self.runtime_over_hardware),
            "results": [r.to_dict() for r in self.results],
            "emissions": opt(self.emissions),
            "error_sources": list(self.error_sources),
            "units_declared": self.units_declared,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MeasurementReport":
        try:
            rt = d.get("runtime_over_hardware")
            return cls(
                title=d.get("title", "Energy measurement report"),
                hardware=Hardware.from_dict(d["hardware"]) if d.get("hardware") else None,
                software=Software.from_dict(d["software"]) if d.get("software") else None,
                methodology=(
                    Methodology.from_dict(d["methodology"]) if d.get("methodology") else None
                ),
                runtime_over_hardware=(
                    RuntimeOverHardware(float(rt["duration_s"]), rt.get("resource_description", ""))
                    if rt
                    else None
                ),
                results=tuple(EnergyEstimate.from_dict(r) for r in d.get("results", ())),
                emissions=(
                    EmissionsEstimate.from_dict(d["emissions"]) if d.get("emissions") else None
                ),
                error_sources=tuple(d.get("error_sources", ())),
                units_declared=d.get("units_declared", ""),
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed report document: {exc!r}") from None


@dataclass(frozen=True)
class ValidationFinding:
    severity: str  # "error" or "warning"
    rule: str
    message: str

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"undocumented rule {self.rule!r}")

    def to_dict(self) -> dict:
        return {"severity": self.severity, "rule": self.rule, "message": self.message}


def validate(report: MeasurementReport) -> list[ValidationFinding]:
    """Check a report against the disclosure rules. Never raises."""
    out: list[ValidationFinding] = []

    def err(rule):
        out.append(ValidationFinding("error", rule, RULES[rule]))

    def warn(rule):
        out.append(ValidationFinding("warning", rule, RULES[rule]))

    runtime_ok = report.runtime_over_hardware is not None and report.runtime_over_hardware.complete
    if not report.results:
        err("R-RESULTS")
    elif not runtime_ok:
        err("R-RUNTIME")
    em = report.emissions
    if em is not None:
        if not runtime_ok:
            err("R-EMISSIONS-RUNTIME")
        if not report.results:
            err("R-EMISSIONS-POWER")
        if em.intensity_basis is None or em.alignment is None:
            err("R-EMISSIONS-BASIS")
        location = em.region or (report.software.location if report.software else "")
        if not location:
            err("R-EMISSIONS-LOCATION")
    if not report.error_sources:
        warn("W-ERROR-SOURCES")
    if report.methodology is None or not report.methodology.tools:
        warn("W-TOOLS")
    if report.hardware is None or not report.hardware.components:
        warn("W-HARDWARE")
    if report.software is None:
        warn("W-SOFTWARE")
    if not report.units_declared.strip():
        warn("W-UNITS")
    return out


def _num(x: float, unit: str) -> str:
    return f"{format(x, '.10g')} {unit}"


def _hours(seconds: float) -> str:
    return f"{_num(seconds, 's')} ({format(seconds / 3600, '.6g')} h)"


def _render_markdown(report: MeasurementReport, findings) -> str:
    lines: list[str] = [f"# {report.title}", ""]

    lines += [f"## {SECTION_HEADINGS[0]}", ""]
    hw = report.hardware
    if hw is None or not hw.components:
        lines.append("_Not reported._")
    else:
        for c in hw.components:
            parts = [c.kind]
            if c.count is not None:
                parts.insert(0, f"{c.count}x")
            if c.make or c.model:
                parts.append(" ".join(p for p in (c.make, c.model) if p))
            if c.clock_ghz is not None:
                parts.append(_num(c.clock_ghz, "GHz"))
            if c.cores is not None:
                parts.append(f"{c.cores} cores")
            if c.memory_gib is not None:
                parts.append(_num(c.memory_gib, "GiB"))
            lines.append("- " + ", ".join(parts))
        if hw.configuration:
            lines += ["", f"Configuration: {hw.configuration}"]
    lines.append("")

    lines += [f"## {SECTION_HEADINGS[1]}", ""]
    sw = report.software
    if sw is None:
        lines.append("_Not reported._")
    else:
        for label, value in (
            ("Environment", sw.environment),
            ("Optimizations", sw.optimizations),
            ("Parallelism", sw.parallelism),
            ("Location", sw.location),
            ("Workload context", sw.workload_context),
        ):
            if value:
                lines.append(f"- {label}: {value}")
        for name, version in sorted(sw.versions.items()):
            lines.append(f"- {name} {version}")
    lines.append("")

    lines += [f"## {SECTION_HEADINGS[2]}", ""]
    m = report.methodology
    if m is None:
        lines.append("_Not reported._")
    else:
        lines.append("- Tools: " + (", ".join(m.tools) if m.tools else "_none listed_"))
        if m.setup_conditions:
            lines.append(f"- Setup conditions: {m.setup_conditions}")
        if m.calibration_notes:
            lines.append(f"- Calibration: {m.calibration_notes}")
    lines.append("")

    lines += [f"## {SECTION_HEADINGS[3]}", ""]
    lines.append(f"- Units: {report.units_declared or '_not declared_'}")
    rt = report.runtime_over_hardware
    if rt is not None:
        lines.append(f"- Runtime over hardware: {_hours(rt.duration_s)} on {rt.resource_description}")
    lines += ["", "| # | Energy | Duration | Mean power | Method | Basis | Scope |",
              "|---|---|---|---|---|---|---|"]
    for i, r in enumerate(report.results, 1):
        scope = f"{r.scope.level.value}: {', '.join(r.scope.sources)}"
        lines.append(
            f"| {i} | {_num(r.joules, 'J')} ({format(r.kwh, '.6g')} kWh) | "
            f"{_num(r.duration, 's')} | {_num(r.mean_watts, 'W')} | {r.method.value} | "
            f"{r.basis.value} | {scope} |"
        )
    lines.append("")
    for i, r in enumerate(report.results, 1):
        if r.pue_applied is not None:
            lines.append(f"- Result {i}: PUE scaling applied, factor {format(r.pue_applied, '.10g')} (facility energy)")
        for note in r.notes:
            lines.append(f"- Result {i}: {note}")
    em = report.emissions
    if em is not None:
        basis = em.intensity_basis.value if em.intensity_basis else "unrecorded"
        align = em.alignment.value if em.alignment else "unrecorded"
        lines.append(
            f"- Emissions: {_num(em.grams_co2, 'gCO2')} from {_num(em.energy.joules, 'J')}, "
            f"intensity basis {basis}, alignment {align}, region {em.region or 'unrecorded'}"
        )
    lines.append("")

    lines += [f"## {SECTION_HEADINGS[4]}", ""]
    if report.error_sources:
        lines += [f"- {s}" for s in report.error_sources]
    else:
        lines.append("_None acknowledged._")
    lines.append("")

    warnings = [f for f in findings if f.severity == "warning"]
    if warnings:
        lines += ["## Validation Warnings", ""]
        lines += [f"- {f.rule}: {f.message}" for f in warnings]
        lines.append("")
    return "\n".join(lines)


def render(report: MeasurementReport, format: str = "markdown") -> bytes:
    """Render a validated report as canonical JSON or markdown (UTF-8 bytes).

    Raises ``ReportValidationError`` when validation finds errors. Warnings
    are embedded in the output.
    """
    findings = validate(report)
    if any(f.severity == "error" for f in findings):
        raise ReportValidationError(findings)
    if format == "json":
        doc: dict[str, Any] = report.to_dict()
        doc["findings"] = [f.to_dict() for f in findings]
        text = json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    elif format == "markdown":
        text = _render_markdown(report, findings)
    else:
        raise ValueError(f"unknown format {format!r}")
    return text.encode("utf-8")
