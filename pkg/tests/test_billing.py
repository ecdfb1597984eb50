import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from trafficvol import billing as bl, distributions as dist, synth
from trafficvol.billing import BillingWindows
from trafficvol.distributions import Family
from trafficvol.errors import InsufficientDataError, TrafficVolError
from trafficvol.ingest import VolumeSeries


def test_nearest_rank_examples():
    assert bl.empirical_p95(BillingWindows(np.arange(1, 101), 1.0)) == 95
    assert bl.empirical_p95(BillingWindows(np.arange(1, 91), 10.0)) == pytest.approx(8.6)


def test_too_few_windows():
    with pytest.raises(InsufficientDataError):
        BillingWindows(np.arange(19), 1.0)


def test_predicted_p95_examples():
    z = stats.norm.ppf(0.95)
    assert bl.predicted_p95(dist.model("lognormal", mu=0, sigma=1), 1.0) == pytest.approx(math.exp(z))
    assert bl.predicted_p95(dist.model("lognormal", mu=0, sigma=1), 1.0) == pytest.approx(5.180, abs=5e-4)
    assert bl.predicted_p95(dist.model("exponential", rate=1), 1.0) == pytest.approx(math.log(20))
    assert bl.predicted_p95(dist.model("exponential", rate=1), 1.0) == pytest.approx(2.9957, abs=5e-5)


def test_gaussian_prediction_tends_to_mean_as_sigma_vanishes():
    for sigma in (1e-3, 1e-6, 1e-9):
        assert bl.predicted_p95(dist.model("gaussian", mu=100, sigma=sigma), 10.0) == pytest.approx(
            10.0, abs=2 * sigma)


def test_nrmse_examples():
    assert bl.nrmse([1, 2, 3], [1, 2, 3]) == 0
    assert bl.nrmse([10, 10], [11, 9]) == pytest.approx(0.1)
    with pytest.raises(TrafficVolError):
        bl.nrmse([1, 2], [1])


def test_study_single_trace_and_csv():
    s = synth.generate(synth.SynthSpec("lognormal", 100, 0, timescale_t=10.0))
    study = bl.billing_study([s], 10.0)
    assert set(study.nrmse) == {Family.LOGNORMAL, Family.WEIBULL, Family.GAUSSIAN}
    rows = study.scatter_rows()
    assert rows[0] == ["trace_id", "actual_p95", "lognormal_p95", "weibull_p95", "gaussian_p95"]
    assert rows[1][0] == s.trace_id


def test_study_records_degenerate_trace():
    good = synth.generate(synth.SynthSpec("lognormal", 100, 0, timescale_t=10.0))
    flat = VolumeSeries(10.0, 0, np.full(100, 5), "flat")
    study = bl.billing_study([good, flat], 10.0)
    assert list(study.failures) == ["flat"]
    assert len(study.predictions) == 1
    assert "DegenerateFitError" in study.failures["flat"]


def test_windows_from_finer_series():
    s = VolumeSeries(0.1, 0, np.ones(3000, dtype=np.int64))
    w = BillingWindows.from_series(s, 10.0)
    assert w.window_volumes.size == 30 and w.window_volumes[0] == 100


def test_lognormal_traces_order_families():
    traces = [synth.generate(synth.SynthSpec("lognormal", 900, s, timescale_t=10.0)) for s in range(50)]
    n = bl.billing_study(traces, 10.0).nrmse
    assert n[Family.LOGNORMAL] < n[Family.WEIBULL] < n[Family.GAUSSIAN]


@given(st.lists(st.integers(1, 10**9), min_size=20, max_size=120))
def test_percentile_is_a_sample_element(vols):
    w = BillingWindows(np.array(vols), 1.0)
    assert bl.empirical_p95(w) in set(vols)


@given(st.lists(st.integers(1, 10**6), min_size=20, max_size=80),
       st.lists(st.integers(0, 1000), min_size=80, max_size=80))
def test_percentile_monotone(vols, bumps):
    a = np.array(vols)
    b = a + np.array(bumps[: a.size])
    assert bl.empirical_p95(BillingWindows(b, 1.0)) >= bl.empirical_p95(BillingWindows(a, 1.0))


@given(st.lists(st.floats(1, 1e6), min_size=1, max_size=30), st.floats(0.01, 100), st.randoms())
def test_nrmse_scale_invariant(actual, c, rnd):
    pred = [a * rnd.uniform(0.5, 1.5) for a in actual]
    assert bl.nrmse(np.array(actual) * c, np.array(pred) * c) == pytest.approx(bl.nrmse(actual, pred),
                                                                            rel=1e-9, abs=1e-12)
