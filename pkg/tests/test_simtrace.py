from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wattledger.estimation import integrate
from wattledger.proxy import Loadline, energy_from_utilization, loadline_power
from wattledger.simtrace import GroundTruth, Phase, Spike, WorkloadSpec, generate, generate_utilization

fast = settings(max_examples=40, deadline=None)
LINE = Loadline.from_points([(0, 50), (1, 200)])
THREE = Loadline.from_points([(0, 50), (0.5, 120), (1, 200)])


def test_constant_phase():
    trace, truth = generate(WorkloadSpec([Phase(120, 100)]), 60)
    assert trace.timestamps.tolist() == [0, 60, 120]
    assert trace.values.tolist() == [100, 100, 100]
    assert truth.joules == 12_000.0 and truth.span == (0.0, 120.0)


def test_spike_truth():
    spec = WorkloadSpec([Phase(100, 100)], spikes=[Spike(50, 1, 500)])
    assert generate(spec, 1)[1].joules == 10_400.0


def test_spike_across_phase_boundary():
    spec = WorkloadSpec([Phase(10, 100), Phase(10, 300)], spikes=[Spike(9, 2, 500)])
    # 1000 + 3000 plus excess 400 J over 100 W and 200 J over 300 W
    assert generate(spec, 1)[1].joules == 4600.0


def test_noise_is_seeded_and_floored():
    spec = WorkloadSpec([Phase(60, 2)], noise_std=5, seed=3)
    a, _ = generate(spec, 1)
    b, _ = generate(spec, 1)
    assert a == b
    assert np.all(a.values >= 0) and np.any(a.values == 0)
    c, _ = generate(WorkloadSpec([Phase(60, 2)], noise_std=5, seed=4), 1)
    assert c != a


def test_spec_validation():
    with pytest.raises(ValueError, match="outside span"):
        WorkloadSpec([Phase(10, 1)], spikes=[Spike(9.5, 1, 5)])
    with pytest.raises(ValueError, match="overlap"):
        WorkloadSpec([Phase(10, 1)], spikes=[Spike(1, 2, 5), Spike(2, 1, 5)])
    with pytest.raises(ValueError):
        WorkloadSpec([])
    with pytest.raises(ValueError):
        Phase(0, 1)
    with pytest.raises(ValueError):
        WorkloadSpec([Phase(1, 1)], noise_std=-1)
    with pytest.raises(ValueError):
        generate(WorkloadSpec([Phase(1, 1)]), 0)
    with pytest.raises(ValueError):
        GroundTruth(-1.0)


def test_spec_json_round_trip(tmp_path):
    spec = WorkloadSpec([Phase(60, 100), Phase(30, 250)], 1.5, [Spike(10, 1, 400)], 9, "s")
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec.to_dict()))
    assert WorkloadSpec.load(path) == spec


def test_generate_utilization_examples():
    u = generate_utilization(WorkloadSpec([Phase(60, 125)]), LINE, 10)
    assert set(u.utilization.tolist()) == {0.5}
    assert set(generate_utilization(WorkloadSpec([Phase(60, 50)]), LINE, 10).utilization) == {0.0}
    u = generate_utilization(WorkloadSpec([Phase(60, 160)]), THREE, 10)
    assert u.utilization[0] == pytest.approx(0.75, rel=1e-12)
    with pytest.raises(ValueError):
        generate_utilization(WorkloadSpec([Phase(60, 300)]), LINE, 10)


def grid_specs(unit):
    """Noise-free specs with every boundary on multiples of ``unit`` seconds."""
    phase = st.tuples(st.integers(1, 30), st.integers(0, 150).map(lambda w: 50.0 + w))
    return st.lists(phase, min_size=1, max_size=6).map(
        lambda ps: WorkloadSpec([Phase(d * unit, w) for d, w in ps])
    )


@fast
@given(grid_specs(1.0))
def test_grid_aligned_integration_is_exact(spec):
    trace, truth = generate(spec, 1.0)
    assert integrate(trace).joules == pytest.approx(truth.joules, rel=1e-12)


@fast
@given(grid_specs(1.0), st.sampled_from([1.0, 0.5, 0.25]))
def test_proxy_round_trip(spec, interval):
    trace, _ = generate(spec, interval)
    util = generate_utilization(spec, LINE, interval)
    assert np.allclose(loadline_power(LINE, util.utilization), trace.values, rtol=1e-12)
    direct = integrate(trace).joules
    assert energy_from_utilization(util, LINE).joules == pytest.approx(direct, rel=1e-9)


def transition_bound(spec, interval):
    """Worst-case point-sampling error: each level change is held at most one
    interval too long or too short."""
    levels = [p.watts for p in spec.phases]
    worst = sum(abs(b - a) for a, b in zip(levels, levels[1:]))
    for s in spec.spikes:
        under = spec.signal([s.time - 1e-12, s.time + s.duration])
        worst += 2 * max(abs(s.watts - w) for w in under)
    return worst * interval


phase_specs = st.lists(
    st.tuples(st.floats(0.5, 30), st.floats(0, 500)), min_size=1, max_size=5
).flatmap(lambda ps: st.tuples(
    st.just(ps), st.floats(0, 1), st.floats(0.01, 0.4), st.floats(0, 1000)
)).map(lambda t: WorkloadSpec(
    [Phase(d, w) for d, w in t[0]],
    spikes=[Spike(t[1] * (sum(d for d, _ in t[0]) - t[2]), t[2], t[3])],
))


@settings(max_examples=30, deadline=None)
@given(phase_specs)
def test_error_bounded_and_vanishing(spec):
    for interval in (1.0, 0.1, 0.01):
        trace, truth = generate(spec, interval)
        if len(trace) < 2:
            continue
        est = integrate(trace, (0.0, trace.end)).joules
        # the last grid point may fall short of the span end; account for it
        tail = (spec.total_duration - trace.end) * max(p.watts for p in spec.phases)
        assert abs(est - truth.joules) <= transition_bound(spec, interval) + tail + 1e-6


def test_finer_sampling_is_not_always_better():
    """Point-sampling error tends to zero only in the bound sense. A pulse on
    [0.4, 1.41) is held for 1 s at 1 s sampling (0.01 s short) but for 1.1 s
    at 0.1 s sampling (0.09 s long)."""
    spec = WorkloadSpec([Phase(3, 0)], spikes=[Spike(0.4, 1.01, 500)])
    errs = {h: abs(integrate(generate(spec, h)[0]).joules - generate(spec, h)[1].joules)
            for h in (1.0, 0.1, 0.01)}
    assert errs[1.0] == pytest.approx(5.0)
    assert errs[0.1] == pytest.approx(45.0)
    assert errs[0.01] < 5.0 + 1e-6
