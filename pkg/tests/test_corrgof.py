import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from trafficvol import corrgof, distributions as dist, ingest, synth
from trafficvol.distributions import Family
from trafficvol.errors import InsufficientDataError, TrafficVolError, UndefinedCorrelationError


def test_gamma_matches_scipy_pearson():
    x = np.random.default_rng(1).lognormal(1, 0.5, 500)
    f = dist.fit("lognormal", x)
    n = x.size
    ref = stats.lognorm(s=f.params.sigma, scale=np.exp(f.params.mu)).ppf(np.arange(1, n + 1) / (n + 1))
    want = stats.pearsonr(np.sort(x), ref).statistic
    assert corrgof.gamma(x, "lognormal").gamma == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("family", [Family.GAUSSIAN, Family.EXPONENTIAL])
def test_gamma_is_one_on_own_quantiles(family):
    # these families refit exactly onto a linear image of their quantile grid
    n = 101
    d = dist.model(family, **({"mu": 3.0, "sigma": 2.0} if family is Family.GAUSSIAN else {"rate": 0.5}))
    x = d.quantile(np.arange(1, n + 1) / (n + 1))
    assert corrgof.gamma(x, family).gamma == pytest.approx(1.0, abs=1e-9)


def test_constant_sample_is_undefined():
    with pytest.raises(UndefinedCorrelationError):
        corrgof.gamma([4.0, 4.0, 4.0], "gaussian")


def test_needs_three_samples():
    with pytest.raises(InsufficientDataError):
        corrgof.gamma([1.0, 2.0], "gaussian")


def test_strong_fit_rule():
    x = np.random.default_rng(0).lognormal(1, 0.5, 300)
    r = corrgof.gamma(x, "lognormal", timescale_t=0.1)
    assert r.strong_fit == (r.gamma > 0.95)
    assert r.to_dict() == {"family": "lognormal", "timescale_t": 0.1, "gamma": r.gamma,
                           "strong_fit": r.strong_fit}


def test_lognormal_draws_fit_strongly():
    hits = sum(corrgof.gamma(np.random.default_rng(s).lognormal(1, 0.5, 9000), "lognormal").strong_fit
               for s in range(100))
    assert hits >= 95


def test_upsilon_examples():
    assert corrgof.upsilon([0.97] * 4) == 0.0
    assert corrgof.upsilon([0.9, 0.9, 0.9, 1.0]) == pytest.approx(0.0433, abs=5e-5)
    assert corrgof.upsilon([0.9, 0.9, 0.9, 1.0]) == pytest.approx(np.std([0.9, 0.9, 0.9, 1.0]))


def test_gamma_variation_requires_all_four():
    with pytest.raises(TrafficVolError, match="5ms"):
        corrgof.gamma_variation({5.0: [1, 2, 3], 1.0: [1, 2, 3], 0.1: [1, 2, 3]}, "gaussian")


def test_gamma_variation_on_synthetic_trace():
    fine = synth.generate(synth.SynthSpec("lognormal", 180_000, 4, timescale_t=0.005))
    series = {t: ingest.rebin(fine, t).volumes for t in corrgof.STUDY_TIMESCALES}
    gv = corrgof.gamma_variation(series, "lognormal")
    assert gv.upsilon < 0.045
    assert list(gv.to_dict()["gammas"]) == ["5s", "1s", "100ms", "5ms"]


def test_timescale_labels():
    assert [corrgof.timescale_label(t) for t in (5.0, 1.0, 0.1, 0.005, 0.5, 2.0)] == [
        "5s", "1s", "100ms", "5ms", "500ms", "2s"]


positive_samples = st.lists(st.floats(0.5, 1e4), min_size=5, max_size=60).filter(
    lambda v: np.ptp(v) > 1e-3)


@given(positive_samples, st.floats(0.01, 100))
def test_lognormal_gamma_scale_invariant(xs, a):
    x = np.array(xs)
    assert corrgof.gamma(x * a, "lognormal").gamma == pytest.approx(
        corrgof.gamma(x, "lognormal").gamma, abs=1e-9)


@given(positive_samples, st.floats(0.01, 100), st.floats(-1e3, 1e3))
def test_gaussian_gamma_affine_invariant(xs, a, b):
    x = np.array(xs)
    assert corrgof.gamma(a * x + b, "gaussian").gamma == pytest.approx(
        corrgof.gamma(x, "gaussian").gamma, abs=1e-9)


@given(positive_samples, st.sampled_from(["lognormal", "weibull", "exponential", "gaussian"]),
       st.randoms(use_true_random=False))
def test_gamma_bounded_and_order_free(xs, family, rnd):
    g = corrgof.gamma(xs, family).gamma
    assert abs(g) <= 1 + 1e-12
    shuffled = list(xs)
    rnd.shuffle(shuffled)
    assert corrgof.gamma(shuffled, family).gamma == g
