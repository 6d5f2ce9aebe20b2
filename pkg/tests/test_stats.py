from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from conftest import make_trace
from wattledger.errors import DataError
from wattledger.estimation import EnergyEstimate, Scope, apply_pue
from wattledger.stats import RunSet, check_sampling, compare, summarize

fast = settings(max_examples=60, deadline=None)
# realistic joule magnitudes; subnormal inputs are not meaningful energies
samples = st.lists(st.floats(0, 1e6).filter(lambda x: x == 0 or x > 1e-6), min_size=2, max_size=15)


def rs(label, joules):
    return RunSet.from_joules(label, joules)


# -- summarize ----------------------------------------------------------------------


def test_summarize_examples():
    s = summarize(rs("a", [10, 10, 10]))
    assert (s.n, s.mean, s.stddev) == (3, 10.0, 0.0)
    assert s.ci95 == (10.0, 10.0)
    s = summarize(rs("a", [9, 11]))
    assert s.mean == 10.0 and s.stddev == pytest.approx(math.sqrt(2))
    lo, hi = s.ci95
    half = sps.t.ppf(0.975, 1) * math.sqrt(2) / math.sqrt(2)
    assert (lo, hi) == pytest.approx((10 - half, 10 + half))
    one = summarize(rs("a", [5]))
    assert one.mean == 5.0 and one.stddev is None
    with pytest.raises(ValueError):
        one.ci95


@fast
@given(samples, st.sampled_from([0.5, 2.0, 4.0, 1024.0]))
def test_summarize_scales(x, k):
    assert summarize(rs("a", [k * v for v in x])).mean == k * summarize(rs("a", x)).mean


# -- compare ---------------------------------------------------------------------------


def test_self_comparison():
    a = rs("a", [10, 10, 10])
    res = compare(a, a)
    assert res.mean_diff_joules == 0.0 and res.p_value == 1.0
    noisy = rs("a", [9.0, 10.5, 11.2, 10.1])
    res = compare(noisy, noisy)
    assert res.mean_diff_joules == 0.0 and res.p_value == 1.0


def test_degenerate_unequal_means():
    res = compare(rs("a", [10] * 4), rs("b", [20] * 4))
    assert res.p_value == 0.0 and res.mean_diff_joules == -10.0
    assert res.ci95[0] <= res.mean_diff_joules <= res.ci95[1]


def test_welch_detects_shift():
    rng = np.random.default_rng(2024)
    a, b = rng.normal(100, 1, 30), rng.normal(105, 1, 30)
    res = compare(rs("a", a), rs("b", b))
    assert res.p_value < 1e-3 and res.significant


@pytest.mark.filterwarnings("ignore:Precision loss:RuntimeWarning")
@fast
@given(samples, samples)
def test_welch_matches_scipy(a, b):
    res = compare(rs("a", a), rs("b", b))
    ref = sps.ttest_ind(a, b, equal_var=False)
    if np.isfinite(ref.pvalue):
        assert res.p_value == pytest.approx(ref.pvalue, rel=1e-6, abs=1e-12)
    assert 0.0 <= res.p_value <= 1.0
    assert res.ci95[0] <= res.mean_diff_joules <= res.ci95[1]


@fast
@given(samples, samples, st.sampled_from(["welch_t", "permutation"]))
def test_antisymmetric(a, b, test):
    ab = compare(rs("a", a), rs("b", b), test)
    ba = compare(rs("b", b), rs("a", a), test)
    assert ab.mean_diff_joules == -ba.mean_diff_joules
    assert ab.p_value == ba.p_value


def test_permutation_exact_small():
    a, b = [1.0, 2.0, 3.0], [4.0, 5.0, 6.0]
    res = compare(rs("a", a), rs("b", b), "permutation")
    # only the two extreme splits reach |diff| = 3 out of C(6, 3) = 20
    assert res.p_value == pytest.approx(2 / 20)


def test_permutation_monte_carlo_reproducible():
    rng = np.random.default_rng(5)
    a, b = rs("a", rng.normal(10, 1, 20)), rs("b", rng.normal(10.5, 1, 20))
    first = compare(a, b, "permutation", seed=11)
    second = compare(a, b, "permutation", seed=11)
    assert first.p_value == second.p_value
    assert first.to_dict() == second.to_dict()
    assert 0 < first.p_value <= 1


def test_permutation_single_estimates():
    res = compare(rs("a", [1.0]), rs("b", [2.0]), "permutation")
    assert res.p_value == 1.0 and res.ci95 == (-1.0, -1.0)


def test_compare_errors():
    with pytest.raises(ValueError):
        compare(rs("a", [1.0]), rs("b", [1.0, 2.0]))
    with pytest.raises(ValueError):
        compare(rs("a", [1.0, 2.0]), rs("b", [1.0, 2.0]), "anova")
    with pytest.raises(ValueError):
        compare(rs("a", [1.0, 2.0]), rs("b", [1.0, 2.0]), alpha=0)
    scope = Scope("node", ("n",))
    plain = [EnergyEstimate(j, 0, 1, "zero_order", scope) for j in (1.0, 2.0)]
    facility = [apply_pue(e, 1.2) for e in plain]
    with pytest.raises(DataError, match="same methodology"):
        compare(RunSet("a", plain), RunSet("b", facility))
    trap = [EnergyEstimate(j, 0, 1, "trapezoid", scope) for j in (1.0, 2.0)]
    with pytest.raises(DataError):
        compare(RunSet("a", plain), RunSet("b", trap))
    with pytest.raises(DataError):
        RunSet("mixed", (plain[0], trap[0]))
    with pytest.raises(ValueError):
        RunSet("empty", ())


# -- sampling adequacy ----------------------------------------------------------------------


def test_sampling_fast_interval():
    tr = make_trace(np.arange(0, 2, 0.05), [1.0] * 40)
    warnings = check_sampling(tr).warnings
    assert any("interval < 0.1 s" in w for w in warnings)


def test_sampling_short_span():
    tr = make_trace(np.arange(0, 10, 0.5), [1.0] * 20)
    warnings = check_sampling(tr, (1.0, 1.08)).warnings
    assert any("span < 0.1 s" in w for w in warnings)


def test_sampling_adequate():
    tr = make_trace(np.arange(0, 601, 1.0), [1.0] * 601)
    adequacy = check_sampling(tr, (0, 600))
    assert adequacy.warnings == () and adequacy.samples_in_window == 601
    assert adequacy.min_interval == 1.0


def test_sampling_few_samples():
    tr = make_trace(np.arange(0, 601, 60.0), [1.0] * 11)
    adequacy = check_sampling(tr, (0, 120))
    assert adequacy.samples_in_window == 3
    assert any("aliased" in w for w in adequacy.warnings)
