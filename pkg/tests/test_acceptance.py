"""Acceptance criteria, each with its tolerance and runtime budget.

Every criterion prints one ``PASS``/``FAIL`` line. Under pytest the lines
are also collected into the terminal summary; run this file directly
(``python3 tests/test_acceptance.py``) for the bare list.
"""

from __future__ import annotations

import functools
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE_LINES, full_report  # noqa: E402
from wattledger.carbon import CarbonIntensitySeries, emissions_constant, emissions_timeseries  # noqa: E402
from wattledger.errors import ReportValidationError  # noqa: E402
from wattledger.estimation import (  # noqa: E402
    EnergyEstimate,
    Scope,
    apply_pue,
    declared_baseline,
    integrate,
    standardize_to_reference,
)
from wattledger.proxy import (  # noqa: E402
    CalibrationFactor,
    Loadline,
    SystemDescriptor,
    apply_calibration,
    energy_from_utilization,
    loadline_power,
    tdp_energy_bound,
)
from wattledger.report import render, validate  # noqa: E402
from wattledger.simtrace import Phase, Spike, WorkloadSpec, generate, generate_utilization  # noqa: E402
from wattledger.stats import RunSet, compare  # noqa: E402
from wattledger.telemetry import (  # noqa: E402
    PowerTrace,
    counter_deltas_uj,
    decode_cumulative_counter,
)

CRITERIA = []


def criterion(number: int, title: str, budget_s: float):
    """Time the wrapped check and print its PASS/FAIL line."""

    def wrap(fn):
        @functools.wraps(fn)
        def test():
            t0 = time.perf_counter()
            try:
                fn()
                elapsed = time.perf_counter() - t0
                assert elapsed < budget_s, f"runtime {elapsed:.3f} s over budget {budget_s} s"
            except Exception as exc:
                line = f"FAIL {number:2d} {title} ({type(exc).__name__}: {exc})"
                print(line)
                ACCEPTANCE_LINES.append(line)
                raise
            line = f"PASS {number:2d} {title} ({elapsed:.3f} s, budget {budget_s:g} s)"
            print(line)
            ACCEPTANCE_LINES.append(line)

        CRITERIA.append(test)
        return test

    return wrap


def rel_err(got: float, want: float) -> float:
    return abs(got - want) / max(abs(want), 1e-300)


def estimate(joules, start=0.0, end=3600.0, source="n1"):
    return EnergyEstimate(joules, start, end, "zero_order", Scope("node", (source,)))


def grid_aligned_spec(rng, dt, watts_range=(0.0, 500.0), max_phases=8) -> WorkloadSpec:
    steps = rng.integers(1, 51, size=rng.integers(1, max_phases + 1))
    phases = tuple(Phase(float(m * dt), float(rng.uniform(*watts_range))) for m in steps)
    total_steps = int(steps.sum())
    spikes = []
    if total_steps >= 4:
        for _ in range(rng.integers(0, 3)):
            at = int(rng.integers(0, total_steps - 1))
            width = int(rng.integers(1, min(3, total_steps - at) + 1))
            if all(at >= s1 or at + width <= s0 for s0, s1 in spikes):
                spikes.append((at, at + width))
    return WorkloadSpec(
        phases=phases,
        spikes=tuple(Spike(a * dt, (b - a) * dt, float(rng.uniform(*watts_range)))
                     for a, b in spikes),
    )


# -- criteria -----------------------------------------------------------------------


@criterion(1, "standardization subtracts 89 W x duration (cpu3 309 W -> cpu1 220 W)", 1.0)
def test_standardization_regression():
    cpu1 = declared_baseline(220.0, "cpu1")
    cpu3 = declared_baseline(309.0, "cpu3")
    out = standardize_to_reference(estimate(1_000_000.0, source="cpu3"), cpu3, cpu1)
    assert 1_000_000.0 - out.joules == 320_400.0
    rng = np.random.default_rng(1)
    for _ in range(1000):
        duration = float(rng.integers(1, 100_000))
        joules = float(rng.uniform(309.0, 2000.0) * duration)
        out = standardize_to_reference(estimate(joules, 0.0, duration, "cpu3"), cpu3, cpu1)
        assert out.joules == joules - 89.0 * duration


@criterion(2, "zero-order integration matches ground truth on 200 specs (1e-9 rel)", 5.0)
def test_integration_oracle():
    rng = np.random.default_rng(2)
    for _ in range(200):
        dt = float(rng.choice([0.25, 0.5, 1.0, 2.0]))
        spec = grid_aligned_spec(rng, dt)
        trace, truth = generate(spec, dt)
        got = integrate(trace, (0.0, spec.total_duration), "zero_order").joules
        assert rel_err(got, truth.joules) <= 1e-9, (spec, got, truth.joules)


@criterion(3, "coarse sampling aliases a 1 s spike; 0.1 s sampling within 0.5%", 5.0)
def test_aliasing_reproduction():
    def spiked(at):
        return WorkloadSpec(phases=(Phase(600.0, 100.0),), spikes=(Spike(at, 1.0, 500.0),))

    hit, miss = spiked(60.0), spiked(90.0)
    for spec in (hit, miss):
        _, truth = generate(spec, 60.0)
        assert truth.joules == 60_400.0

    trace, truth = generate(hit, 60.0)
    over = integrate(trace).joules
    assert over > 1.03 * truth.joules, over

    trace, truth = generate(miss, 60.0)
    under = integrate(trace).joules
    assert under < truth.joules, under

    for spec in (hit, miss):
        trace, truth = generate(spec, 0.1)
        assert rel_err(integrate(trace).joules, truth.joules) <= 0.005


@criterion(4, "loadline interpolation matches brute force on 100 x 1e4 points (1e-12 rel)", 10.0)
def test_loadline_oracle():
    rng = np.random.default_rng(4)
    for _ in range(100):
        inner = np.sort(rng.uniform(0, 1, size=rng.integers(0, 10)))
        u = np.unique(np.concatenate(([0.0], inner, [1.0])))
        w = np.cumsum(rng.uniform(0, 50, size=u.size)) + rng.uniform(10, 100)
        ll = Loadline.from_points(list(zip(u.tolist(), w.tolist())), architecture="x",
                                  tdp_watts=float(w[-1]))
        x = rng.uniform(0, 1, size=10_000)
        x[:u.size] = u  # include the breakpoints themselves
        got = loadline_power(ll, x)

        want = np.full(x.size, np.nan)
        for i in range(u.size - 1):
            inside = (x >= u[i]) & (x <= u[i + 1])
            slope = (w[i + 1] - w[i]) / (u[i + 1] - u[i])
            want[inside] = w[i] + (x[inside] - u[i]) * slope
        assert not np.isnan(want).any()
        assert np.all(np.abs(got - want) <= 1e-12 * np.abs(want))
        assert np.all((got >= w[0]) & (got <= w[-1]))


@criterion(5, "utilization proxy round trip reproduces integrated power (1e-9)", 5.0)
def test_proxy_round_trip():
    rng = np.random.default_rng(5)
    ll = Loadline.from_points([(0.0, 60.0), (0.25, 110.0), (0.6, 170.0), (1.0, 240.0)],
                              architecture="x", tdp_watts=240.0, workload_name="ssj")
    for _ in range(50):
        dt = float(rng.choice([0.5, 1.0, 2.0]))
        spec = grid_aligned_spec(rng, dt, watts_range=(60.0, 240.0))
        trace, _ = generate(spec, dt)
        util = generate_utilization(spec, ll, dt)
        direct = integrate(trace).joules
        proxied = energy_from_utilization(util, ll).joules
        assert rel_err(proxied, direct) <= 1e-9, (proxied, direct)


@criterion(6, "cumulative counter with >= 3 wraps decodes to the exact total", 1.0)
def test_counter_wrap():
    rng = np.random.default_rng(6)
    cmax = 2**32 - 1
    for _ in range(20):
        deltas = rng.integers(0, 400_000_000, size=100)  # µJ per 1 s step, < 400 W
        start = int(rng.integers(0, cmax))
        readings = (start + np.concatenate(([0], np.cumsum(deltas)))) % cmax
        wraps = int((start + deltas.sum()) // cmax)
        assert wraps >= 3
        ts = np.arange(readings.size, dtype=float) * 1.0
        trace = PowerTrace("rapl", "component", "cumulative_energy", ts, readings * 1e-6,
                           metadata={"counter_max_uj": str(cmax)})
        decoded_uj = counter_deltas_uj(trace)
        assert np.array_equal(decoded_uj, deltas.astype(float))
        assert int(decoded_uj.sum()) == int(deltas.sum())
        power = decode_cumulative_counter(trace)
        assert np.all(power.values >= 0)
        total_j = integrate(power).joules
        assert rel_err(total_j, math.fsum(deltas.tolist()) * 1e-6) <= 1e-12


@criterion(7, "constant-intensity series agrees with emissions_constant; 1 kWh at 400 g/kWh", 1.0)
def test_carbon_consistency():
    assert emissions_constant(estimate(3.6e6), 400.0).grams_co2 == 400.0
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(10, 200))
        ts = np.arange(n + 1) * 60.0
        trace = PowerTrace("n1", "node", "instantaneous_power", ts, rng.uniform(0, 500, n + 1))
        intensity = float(rng.uniform(10, 900))
        ci = CarbonIntensitySeries(np.arange(0, ts[-1] + 1, 600.0),
                                   np.full(int(ts[-1] // 600) + 1, intensity), "DE", "realtime",
                                   valid_until=float(ts[-1]))
        want = emissions_constant(integrate(trace), intensity).grams_co2
        for strategy in ("upsample_intensity", "downsample_power"):
            got = emissions_timeseries(trace, ci, strategy=strategy).grams_co2
            assert rel_err(got, want) <= 1e-9, (strategy, got, want)


@criterion(8, "comparison statistics: self p = 1, separated means p < 0.001, seeded permutation", 5.0)
def test_statistics_sanity():
    rng = np.random.default_rng(8)
    a = RunSet.from_joules("a", rng.normal(100, 1, 30))
    b = RunSet.from_joules("b", rng.normal(105, 1, 30))
    same = compare(a, a, "welch_t")
    assert same.p_value == 1.0 and same.mean_diff_joules == 0.0
    assert compare(a, b, "welch_t").p_value < 0.001
    first = compare(a, b, "permutation", seed=11)
    second = compare(a, b, "permutation", seed=11)
    assert first.p_value == second.p_value and first == second
    assert first.p_value < 0.001


@criterion(9, "TDP bound 200 W x 3600 s = 720000 J; PUE 1.5 once only", 1.0)
def test_tdp_pue_regression():
    bound = tdp_energy_bound(SystemDescriptor("Xeon Gold 6154", 200.0), 3600.0)
    assert bound.joules == 720_000.0
    scaled = apply_pue(estimate(100.0), 1.5)
    assert scaled.joules == 150.0
    try:
        apply_pue(scaled, 1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("second PUE application was accepted")


@criterion(10, "reporting gates R-RUNTIME / R-EMISSIONS-BASIS; deterministic markdown", 1.0)
def test_reporting_gates():
    no_runtime = full_report(runtime_over_hardware=None)
    assert "R-RUNTIME" in {f.rule for f in validate(no_runtime) if f.severity == "error"}
    try:
        render(no_runtime)
    except ReportValidationError as exc:
        assert "R-RUNTIME" in {f.rule for f in exc.findings}
    else:
        raise AssertionError("report without runtime rendered")

    report = full_report()
    no_basis = replace(report, emissions=replace(report.emissions, intensity_basis=None))
    assert "R-EMISSIONS-BASIS" in {f.rule for f in validate(no_basis) if f.severity == "error"}

    first, second = render(report), render(full_report())
    assert first == second
    text = first.decode("utf-8")
    for heading in ("Hardware Characteristics", "Software Characteristics",
                    "Measurement Methodology", "Additional Considerations", "Sources of Error"):
        assert f"## {heading}\n" in text, heading


@criterion(11, "calibration factor 1.059 on 1 kWh gives 3.8124e6 J", 1.0)
def test_calibration_factor():
    out = apply_calibration(estimate(3.6e6), CalibrationFactor(1.059, "carbon tracker"))
    assert abs(out.joules - 3.8124e6) <= 1e-9


if __name__ == "__main__":
    failed = 0
    for check in CRITERIA:
        try:
            check()
        except Exception:
            failed += 1
    sys.exit(1 if failed else 0)
