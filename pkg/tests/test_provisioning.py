import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from trafficvol import distributions as dist, ingest, provisioning as pv, synth
from trafficvol.distributions import Family
from trafficvol.errors import TrafficVolError
from trafficvol.ingest import VolumeSeries
from trafficvol.provisioning import GaussianMoments, Method, MethodSpec

LN = MethodSpec(Method.MODEL_QUANTILE, Family.LOGNORMAL)
MEENT = MethodSpec(Method.MEENT)


def lognormal_trace(seed, n=9000):
    return synth.generate(synth.SynthSpec("lognormal", n, seed))


def test_meent_examples():
    assert pv.meent_capacity(GaussianMoments(0, 1, 1), math.exp(-0.5)) == pytest.approx(1.0)
    assert pv.meent_capacity(GaussianMoments(250, 0, 0.5), 0.01) == 500


@pytest.mark.parametrize("eps", [0.0, 1.0, 1.5, -0.2])
def test_meent_rejects_eps_out_of_range(eps):
    with pytest.raises(TrafficVolError):
        pv.meent_capacity(GaussianMoments(1, 1, 1), eps)


def test_negative_variance_rejected():
    with pytest.raises(TrafficVolError):
        GaussianMoments(1, -1, 1)


def test_model_capacity_examples():
    assert pv.model_capacity(dist.model("lognormal", mu=0, sigma=1), 0.5, 1) == pytest.approx(1.0)
    assert pv.model_capacity(dist.model("gaussian", mu=100, sigma=10), 0.5, 1) == pytest.approx(100)
    z95 = float(mpmath.sqrt(2) * mpmath.erfinv(mpmath.mpf("0.9")))
    want = 100 * math.exp(0.5 * z95)
    got = pv.model_capacity(dist.model("lognormal", mu=math.log(100), sigma=0.5), 0.05, 1)
    assert got == pytest.approx(want, rel=1e-12)
    assert got == pytest.approx(227.5, abs=0.2)


def test_model_capacity_is_rate():
    d = dist.model("exponential", rate=1)
    assert pv.model_capacity(d, 0.05, 0.1) == pytest.approx(10 * math.log(20))


def test_empirical_eps_examples():
    s = VolumeSeries(1.0, 0, np.arange(1, 11))
    assert pv.empirical_eps(s, 9) == 0.2
    assert pv.empirical_eps(s, 0.5) == 1.0
    assert pv.empirical_eps(s, 11) == 0.0


def test_moments_use_sample_variance():
    s = VolumeSeries(0.5, 0, np.array([1, 2, 3, 6]))
    m = GaussianMoments.from_series(s)
    assert m.mu == 3.0 and m.upsilon_t == pytest.approx(np.var([1, 2, 3, 6], ddof=1))


def test_method_spec_parsing():
    assert MethodSpec.parse("meent") == MEENT
    assert MethodSpec.parse("model:weibull") == MethodSpec(Method.MODEL_QUANTILE, Family.WEIBULL)
    assert MethodSpec.parse("lognormal") == LN
    with pytest.raises(TrafficVolError):
        MethodSpec.parse("oracle:lognormal")


def test_result_json():
    r = pv.evaluate(lognormal_trace(0, 500), 0.05, [MEENT])[0]
    assert set(r.to_dict()) == {"method", "target_eps", "capacity_bytes_per_s", "eps_hat"}
    assert (r.eps_hat * 500) == pytest.approx(round(r.eps_hat * 500))


def test_mbps_conversion():
    assert pv.to_mbps(43_100_000) == pytest.approx(344.8)


def _hits(eps, lo, hi):
    return sum(lo <= pv.evaluate(lognormal_trace(s), eps, [LN])[0].eps_hat <= hi for s in range(100))


def test_model_quantile_hits_target():
    assert _hits(0.05, 0.040, 0.060) >= 90
    assert _hits(0.5, 0.48, 0.52) >= 90


def meent_eps_oracle(mu, sigma, eps):
    """Exact exceedance of the Meent capacity when volumes are LogNormal(mu, sigma)."""
    m = math.exp(mu + sigma**2 / 2)
    v = (math.exp(sigma**2) - 1) * math.exp(2 * mu + sigma**2)
    c = m + math.sqrt(-2 * math.log(eps) * v)
    return stats.norm.sf((math.log(c) - mu) / sigma)


@pytest.mark.parametrize("eps", [0.05, 0.01])
def test_meent_exceedance_matches_lognormal_oracle(eps):
    got = np.mean([pv.evaluate(lognormal_trace(s), eps, [MEENT])[0].eps_hat for s in range(100)])
    want = meent_eps_oracle(math.log(1e6), 0.8, eps)
    assert got == pytest.approx(want, abs=0.003)


def test_meent_overshoots_only_at_small_eps():
    # the Chernoff margin is conservative at moderate eps and too thin deep in the tail
    assert meent_eps_oracle(math.log(1e6), 0.8, 0.05) < 0.05
    assert meent_eps_oracle(math.log(1e6), 0.8, 0.01) > 0.01


@given(st.floats(0.001, 0.98), st.floats(0.001, 0.01))
def test_capacity_strictly_decreasing_in_eps(eps, d):
    m = GaussianMoments(1e6, 4e10, 0.1)
    assert pv.meent_capacity(m, eps) > pv.meent_capacity(m, eps + d)
    f = dist.model("lognormal", mu=13.8, sigma=0.8)
    assert pv.model_capacity(f, eps, 0.1) > pv.model_capacity(f, eps + d, 0.1)


@given(st.lists(st.integers(0, 10**6), min_size=1, max_size=40), st.floats(0, 2e6), st.floats(0, 2e6))
def test_eps_hat_non_increasing_in_capacity(vols, a, b):
    s = VolumeSeries(1.0, 0, np.array(vols))
    lo, hi = sorted((a, b))
    assert pv.empirical_eps(s, hi) <= pv.empirical_eps(s, lo)


@given(st.floats(0.0001, 0.9999), st.floats(1, 1e9), st.floats(1e-6, 1e12))
def test_meent_above_mean_rate(eps, mu, var):
    assert pv.meent_capacity(GaussianMoments(mu, var, 0.1), eps) > mu / 0.1


def test_mean_rate_term_is_timescale_free():
    s = lognormal_trace(1, 9000)
    a = GaussianMoments.from_series(s)
    b = GaussianMoments.from_series(ingest.reaggregate(s, 2))
    assert a.mu / a.timescale_t == pytest.approx(b.mu / b.timescale_t, rel=1e-12)


def test_eps_hat_converges_to_target_under_the_model():
    d = dist.model("lognormal", mu=10, sigma=1)
    x = np.rint(dist.sample(d, 9000, 4)).astype(np.int64)
    s = VolumeSeries(0.1, 0, x)
    k = 9000 * pv.empirical_eps(s, pv.model_capacity(d, 0.1, 0.1))
    lo, hi = stats.binom.interval(0.999, 9000, 0.1)
    assert lo <= k <= hi
