from __future__ import annotations

import pytest

from wattledger.telemetry import HierarchyLevel, PowerTrace, SampleKind


def make_trace(timestamps, values, *, kind="instantaneous_power", source_id="n1",
               level="node", metadata=None) -> PowerTrace:
    return PowerTrace(
        source_id=source_id,
        level=HierarchyLevel(level),
        sample_kind=SampleKind(kind),
        timestamps=list(timestamps),
        values=list(values),
        metadata=metadata or {},
    )


@pytest.fixture
def constant_100w():
    return make_trace([0.0, 60.0, 120.0], [100.0, 100.0, 100.0])


def full_report(**overrides):
    """A report with every disclosure field populated."""
    from wattledger.carbon import emissions_constant
    from wattledger.estimation import EnergyEstimate, Scope, apply_pue
    from wattledger.report import (
        Component,
        Hardware,
        MeasurementReport,
        Methodology,
        RuntimeOverHardware,
        Software,
    )

    energy = apply_pue(
        EnergyEstimate(3.6e6, 0.0, 3600.0, "zero_order", Scope("node", ("cpu1-07",))), 1.5
    )
    fields = dict(
        title="Inference energy, cpu1 node",
        hardware=Hardware(
            (Component("cpu", "Intel", "Xeon Gold 6154", count=2, clock_ghz=3.0, cores=18),
             Component("memory", memory_gib=384.0)),
            configuration="turbo disabled",
        ),
        software=Software("Ubuntu 22.04", {"python": "3.10", "torch": "2.3"}, "bf16",
                          "1 process", "Frankfurt, DE", "batch inference"),
        methodology=Methodology(("RAPL via powercap", "wall meter"), "idle for 10 min", "none"),
        runtime_over_hardware=RuntimeOverHardware(3600.0, "1 node, 2x Xeon Gold 6154"),
        results=(energy,),
        emissions=emissions_constant(energy, 400.0, region="DE"),
        error_sources=("RAPL excludes fans and PSU losses",),
        units_declared="J, W, gCO2",
    )
    fields.update(overrides)
    return MeasurementReport(**fields)


# Lines printed by the acceptance suite, echoed in the terminal summary so
# they are visible without ``-s``.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
