import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import optimize, stats

from trafficvol import distributions as dist, fitcompare as fc, synth
from trafficvol.distributions import Family
from trafficvol.errors import DegenerateFitError, InsufficientDataError, TrafficVolError
from trafficvol.fitcompare import Verdict

from conftest import binomial_floor


def lognormal_draws(n, seed, mu=0.0, sigma=1.0):
    return np.random.default_rng(seed).lognormal(mu, sigma, n)


# --- KS ------------------------------------------------------------------


def test_ks_at_midpoint_quantiles_is_half_step():
    d = dist.model("lognormal", mu=0, sigma=1)
    n = 200
    x = d.quantile((np.arange(1, n + 1) - 0.5) / n)
    assert fc.ks_statistic(x, d) <= 0.5 / n + 1e-9


def test_ks_matches_scipy():
    x = lognormal_draws(777, 4)
    f = dist.fit("lognormal", x)
    ref = stats.kstest(x, stats.lognorm(s=f.params.sigma, scale=math.exp(f.params.mu)).cdf)
    assert fc.ks_statistic(x, f) == pytest.approx(ref.statistic, abs=1e-12)


def test_ks_power_law_uses_tail_only():
    d = dist.model("power_law", alpha=2.0, xmin=1.0)
    x = np.array([0.1, 0.2, 1.0, 2.0, 4.0])
    t = np.array([1.0, 2.0, 4.0])
    assert fc.ks_statistic(x, d) == pytest.approx(stats.kstest(t, lambda v: 1 - 1 / v).statistic)
    with pytest.raises(InsufficientDataError):
        fc.ks_statistic([0.5, 3.0], d)


def test_ks_of_own_fit_is_small():
    hits = sum(fc.ks_statistic(x := lognormal_draws(10_000, s), dist.fit("lognormal", x)) < 0.02
               for s in range(100))
    assert hits >= 95


# --- bootstrap GOF -------------------------------------------------------


def test_n_boot_floor():
    with pytest.raises(TrafficVolError):
        fc.gof_pvalue(lognormal_draws(100, 0), n_boot=50)


def test_gof_is_deterministic():
    x = lognormal_draws(500, 1)
    assert fc.gof_pvalue(x, n_boot=200, seed=3) == fc.gof_pvalue(x, n_boot=200, seed=3)


def test_accepted_iff_p_above_threshold():
    x = lognormal_draws(500, 1)
    r = fc.gof_pvalue(x, n_boot=200, seed=0)
    assert r.accepted == (r.p_value > 0.1)
    assert 0 <= r.p_value <= 1 and r.n_boot == 200


@pytest.mark.parametrize("family", [Family.LOGNORMAL, Family.GAUSSIAN, Family.EXPONENTIAL])
def test_blocked_bootstrap_matches_replicate_loop(family):
    x = dist.sample(dist.model(family, **{"lognormal": dict(mu=1, sigma=0.4),
                                          "gaussian": dict(mu=10, sigma=2),
                                          "exponential": dict(rate=2)}[family.value]), 300, 5)
    res = fc.gof_pvalue(x, family, n_boot=150, seed=11)
    fitted = dist.fit(family, x)
    obs = fc.ks_statistic(x, fitted)
    xs = np.sort(x)
    children = np.random.SeedSequence(11).spawn(150)
    loop = sum(fc._replicate_ks(fitted, xs, np.random.default_rng(c)) >= obs for c in children)
    assert res.p_value == loop / 150


def test_power_law_gof_runs():
    x = (np.random.default_rng(2).pareto(1.5, 400) + 1) * 3
    r = fc.gof_pvalue(x, "power_law", n_boot=100, seed=0)
    assert r.family is Family.POWER_LAW and 0 <= r.p_value <= 1


@pytest.mark.slow
def test_gof_accepts_data_from_the_model():
    # under the null the bootstrap p-value is ~uniform, so P(accept) is ~0.9
    d = dist.model("lognormal", mu=0, sigma=1)
    acc = sum(fc.gof_pvalue(dist.sample(d, 2000, s), n_boot=1000, seed=s).accepted
              for s in range(100))
    assert acc >= binomial_floor(100, 0.9)


def test_gof_rejects_gross_misfit():
    rej = sum(not fc.gof_pvalue(np.random.default_rng(s).exponential(1, 5000), "gaussian",
                                n_boot=100, seed=s).accepted for s in range(100))
    assert rej >= 95


# --- LLR -----------------------------------------------------------------


def vuong_oracle(ell):
    n = ell.size
    r = ell.sum() / (ell.std() * math.sqrt(n))
    return r, 2 * stats.norm.sf(abs(r))


def test_identical_models_inconclusive():
    r = fc.llr_compare(lognormal_draws(300, 0), "lognormal")
    assert r.raw_llr == 0 and r.verdict is Verdict.INCONCLUSIVE and r.p_value == 1.0


def test_vuong_statistic_matches_oracle():
    x = lognormal_draws(2000, 7, mu=1, sigma=0.5)
    r = fc.llr_compare(x, "weibull")
    ell = (stats.weibull_min(*_weibull_oracle(x)).logpdf(x)
           - stats.lognorm(s=np.log(x).std(), scale=math.exp(np.log(x).mean())).logpdf(x))
    r_o, p_o = vuong_oracle(ell)
    assert r.r_norm == pytest.approx(r_o, rel=1e-8)
    assert r.p_value == pytest.approx(p_o, rel=1e-5)
    assert r.r_norm == pytest.approx(r.raw_llr / (r.sigma_llr * math.sqrt(r.n)))


def _weibull_oracle(x):
    lx = np.log(x)

    def score(k):
        w = x**k
        return (w @ lx) / w.sum() - 1 / k - lx.mean()
    k = optimize.brentq(score, 0.05, 50, xtol=1e-14)
    return k, 0, np.mean(x**k) ** (1 / k)


def test_truncated_lognormal_refit_matches_scipy():
    x = np.sort(lognormal_draws(3000, 9, mu=2, sigma=1))
    xmin = float(np.quantile(x, 0.7))
    t = x[x >= xmin]
    ours = fc.truncated_logpdf("lognormal", t, xmin).sum()

    def nll(th):
        d = stats.lognorm(s=math.exp(th[1]), scale=math.exp(th[0]))
        return -(d.logpdf(t).sum() - t.size * d.logsf(xmin))
    best = optimize.minimize(nll, [2.0, 0.0], method="Powell", options={"xtol": 1e-10, "ftol": 1e-12})
    assert ours == pytest.approx(-best.fun, abs=1e-4)


def test_truncated_exponential_is_shifted():
    t = np.array([3.0, 4.0, 6.0])
    ll = fc.truncated_logpdf("exponential", t, 2.0)
    rate = 1 / np.mean(t - 2.0)
    np.testing.assert_allclose(ll, math.log(rate) - rate * (t - 2.0))


def test_power_law_comparison_restricted_to_tail():
    x = lognormal_draws(3000, 1)
    r = fc.llr_compare(x, "power_law")
    pl = dist.fit("power_law", x)
    assert r.xmin == pl.xmin and r.n == pl.n


def test_lognormal_beats_exponential():
    wins = sum(fc.llr_compare(lognormal_draws(9000, s, 1, 0.5), "exponential").verdict
               is Verdict.REFERENCE_BETTER for s in range(100))
    assert wins >= 95


@given(st.sampled_from([("weibull", "gaussian"), ("exponential", "weibull"), ("gaussian", "lognormal")]),
       st.integers(0, 2**32 - 1))
def test_antisymmetry(pair, seed):
    a, b = pair
    x = lognormal_draws(400, seed, 1, 0.6)
    ab = fc.llr_compare(x, a, b)
    ba = fc.llr_compare(x, b, a)
    assert ab.raw_llr == pytest.approx(-ba.raw_llr, rel=1e-12, abs=1e-9)
    assert ab.r_norm == pytest.approx(-ba.r_norm, rel=1e-12, abs=1e-12)
    assert ab.p_value == pytest.approx(ba.p_value, rel=1e-12)


def test_scale_does_not_change_verdict():
    for s in range(100):
        x = lognormal_draws(1000, s, 0, 0.8)
        assert fc.llr_compare(x, "gaussian").verdict is fc.llr_compare(x * 37.5, "gaussian").verdict


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_p_value_decreases_in_abs_r(a, b):
    base = np.array([1.0, -1.0, 1.0, -1.0])
    pa = fc._vuong(base + a, Family.WEIBULL, Family.LOGNORMAL, None)
    pb = fc._vuong(base + b, Family.WEIBULL, Family.LOGNORMAL, None)
    if abs(pa.r_norm) < abs(pb.r_norm):
        assert pa.p_value > pb.p_value


def test_verdict_rule():
    for ell, want in [(np.r_[np.full(50, 1.0), np.full(50, 0.8)], Verdict.ALTERNATIVE_BETTER),
                      (-np.r_[np.full(50, 1.0), np.full(50, 0.8)], Verdict.REFERENCE_BETTER),
                      (np.r_[np.full(50, 1.0), np.full(50, -0.99)], Verdict.INCONCLUSIVE)]:
        r = fc._vuong(ell, Family.WEIBULL, Family.LOGNORMAL, None)
        assert r.verdict is want
        assert (r.verdict is Verdict.INCONCLUSIVE) == (r.p_value > 0.1)


# --- adjudicate ----------------------------------------------------------


def test_adjudicate_shape():
    x = synth.generate(synth.SynthSpec("lognormal", 9000, 3)).volumes
    a = fc.adjudicate(x, n_boot=100, seed=1)
    d = a.to_dict()
    assert set(d) == {"gof", "comparisons"}
    assert list(d["comparisons"]) == ["exponential", "weibull", "power_law"]
    assert all(c.verdict is Verdict.REFERENCE_BETTER for c in a.comparisons.values())


def test_adjudicate_constant_trace_errors():
    with pytest.raises(DegenerateFitError):
        fc.adjudicate(np.full(100, 7.0), n_boot=100)
