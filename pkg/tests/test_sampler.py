import json
import math

import numpy as np
import pytest
from scipy import stats

import oracles
from matent.estimates import EstimatorError
from matent.matrices import MatrixTuple
from matent.moments import arcsine_moments, empirical_moments
from matent.ncpoly import NcPoly
from matent.sampler import (ChainEngine, GibbsModel, TIOptions, estimate_log_I,
                            gibbs_entropy, integrated_autocorrelation_time,
                            log_ball_volume, mcmc_chain, microstate_hit_rate)
from matent.streams import substream


def test_model_validation():
    with pytest.raises(ValueError):
        GibbsModel(1, 4, 2.0, 1j * NcPoly.generator(1, 1), 1.0)
    with pytest.raises(ValueError):
        GibbsModel(1, 4, 2.0, NcPoly.zero(1), 1.5)
    m = GibbsModel(2, 4, 2.0, NcPoly.zero(2), 0.5)
    assert m.with_beta(0.0).beta == 0.0


def test_log_ball_volume_exact_small_cases():
    # N=1: an interval
    for R in (0.5, 1.0, 3.0):
        assert log_ball_volume(1, R) == pytest.approx(math.log(2 * R), abs=1e-14)
    # N=2 closed form: vol = (4 pi / 3) R^4
    assert log_ball_volume(2, 1.0) == pytest.approx(math.log(4 * math.pi / 3), abs=1e-12)


def test_log_ball_volume_radius_scaling():
    for N in (2, 3, 5, 8):
        for R in (0.5, 2.0):
            assert log_ball_volume(N, R) == pytest.approx(
                log_ball_volume(N, 1.0) + N * N * math.log(R), abs=1e-10)


def test_log_ball_volume_matches_hit_or_miss():
    # cheap version of the volume acceptance check
    lv, se = oracles.ball_volume_mc(2, 1.0, 150000, substream(7, "bv-unit"))
    assert abs(lv - log_ball_volume(2, 1.0)) <= 3 * se


def test_iat_iid_is_one():
    rng = np.random.default_rng(0)
    xs = rng.normal(size=20000)
    assert integrated_autocorrelation_time(xs) == pytest.approx(1.0, abs=0.15)


def test_iat_ar1_matches_theory():
    rng = np.random.default_rng(1)
    rho = 0.9
    n = 200000
    xs = np.empty(n)
    xs[0] = rng.normal()
    for i in range(1, n):
        xs[i] = rho * xs[i - 1] + math.sqrt(1 - rho ** 2) * rng.normal()
    want = (1 + rho) / (1 - rho)
    got = integrated_autocorrelation_time(xs)
    assert got == pytest.approx(want, rel=0.2)


def test_chain_detailed_balance_scalar_ks():
    # at N=1 the model is a scalar density exp(-V)/Z on [-R, R]; compare the
    # chain's empirical law against quadrature with a KS test
    coeffs = [0.0, 0.8, 0.0, 0.0, 0.15]
    pot = NcPoly(1, {(1,): coeffs[1], (1, 1, 1, 1): coeffs[4]})
    model = GibbsModel(1, 1, 2.0, pot, 1.0)
    samples, diag = mcmc_chain(model, 30000, 3000, 10, rng=substream(8, "ks"))
    xs = np.array([float(t.blocks[0][0, 0].real) for t in samples])
    grid, f, dx = oracles.gibbs_density(coeffs, 2.0)
    cdf_grid = np.cumsum(f) * dx

    def cdf(v):
        return np.interp(v, grid, cdf_grid, left=0.0, right=1.0)

    # thinned draws still carry some correlation; subsample to near-iid
    iat = max(1.0, diag.iat / diag.thin if diag.thin else diag.iat)
    step = max(1, int(math.ceil(iat)))
    res = stats.kstest(xs[::step], cdf)
    assert res.pvalue > 0.001


def test_chain_acceptance_in_band_and_diagnostics():
    model = GibbsModel(1, 8, 2.0, NcPoly.zero(1), 0.0)
    samples, diag = mcmc_chain(model, 6000, 1500, 5, rng=substream(9, "diag"))
    assert 0.2 <= diag.acceptance <= 0.55
    assert diag.retained == len(samples)
    assert diag.ess > 10
    assert diag.iat >= 1.0


def test_chain_record_path(tmp_path):
    path = str(tmp_path / "chain.jsonl")
    model = GibbsModel(1, 3, 1.0, NcPoly.zero(1), 0.0)
    samples, _ = mcmc_chain(model, 500, 100, 50, rng=substream(10, "rec"),
                            record_path=path)
    lines = [json.loads(line) for line in open(path)]
    assert len(lines) == len(samples)


def test_energy_eigenvalue_path_matches_matrix_path():
    # n=1 potentials evaluate through eigenvalues; cross-check against the
    # generic trace route on the same state
    pot = NcPoly(1, {(1,): -0.3, (1, 1): 0.7, (1, 1, 1, 1): 0.1})
    model = GibbsModel(1, 6, 2.0, pot, 1.0)
    engine = ChainEngine(model, substream(11, "energy"))
    engine.run(200)
    m = engine.blocks[0]
    direct = 6.0 * float(np.trace(
        -0.3 * m + 0.7 * m @ m + 0.1 * np.linalg.matrix_power(m, 4)).real) / 6.0 * 6.0
    # E = N * (unnormalized trace of V) = N^2 * normalized trace
    want = 6.0 * float(np.trace(-0.3 * m + 0.7 * (m @ m)
                                + 0.1 * np.linalg.matrix_power(m, 4)).real)
    assert engine.energy == pytest.approx(want, rel=1e-10)


def test_estimate_log_i_exact_cases():
    model = GibbsModel(2, 4, 1.5, NcPoly.zero(2), 0.0)
    est = estimate_log_I(model)
    assert est.stderr == 0.0
    assert est.value == pytest.approx(2 * log_ball_volume(4, 1.5))


def test_estimate_log_i_linear_matches_closed_form():
    c, R = 0.9, 2.0
    model = GibbsModel(1, 1, R, c * NcPoly.generator(1, 1), 1.0)
    est = estimate_log_I(model, opts=TIOptions(nodes=25, node_steps=1200),
                         rng=substream(12, "ti-lin"))
    want = oracles.log_i_linear_exact(c, R)
    assert abs(est.value - want) <= 3 * est.stderr + est.bias_bound + 0.02


def test_estimate_log_i_below_volume_for_positive_potential():
    model = GibbsModel(1, 4, 2.0, NcPoly.from_word(1, (1, 1)), 1.0)
    est = estimate_log_I(model, opts=TIOptions(nodes=15, node_steps=400),
                         rng=substream(13, "ti-mono"))
    assert est.value < log_ball_volume(4, 2.0)


def test_gibbs_entropy_uniform_is_volume():
    model = GibbsModel(1, 5, 2.0, NcPoly.zero(1), 0.0)
    est = gibbs_entropy(model, estimate_log_I(model), [])
    assert est.value == pytest.approx(log_ball_volume(5, 2.0))
    assert est.stderr == 0.0


def test_gibbs_entropy_scalar_matches_quadrature():
    coeffs = [0.0, 0.0, 1.1]
    pot = NcPoly(1, {(1, 1): coeffs[2]})
    model = GibbsModel(1, 1, 2.0, pot, 1.0)
    rng = substream(14, "ent")
    samples, _ = mcmc_chain(model, 20000, 2000, 8, rng=rng)
    est = gibbs_entropy(model, estimate_log_I(model, opts=TIOptions(), rng=rng), samples)
    grid, f, dx = oracles.gibbs_density(coeffs, 2.0)
    want = oracles.entropy_quad(f, dx)
    assert abs(est.value - want) <= 3 * est.stderr + est.bias_bound + 0.02


def test_hit_rate_counts_and_volume():
    tau = arcsine_moments(2.0, 2)
    est = microstate_hit_rate(tau, 0.25, 2, 2, 30000, substream(15, "hit"),
                              burnin=1500, thin=4)
    assert est.trials > 0
    assert est.hits > 0
    assert est.base_log_volume == pytest.approx(log_ball_volume(2, 2.0))
    assert est.log_volume.value < est.base_log_volume


def test_hit_rate_zero_hits_returns_none():
    # an impossible target: second moment at the norm bound cap
    tau = arcsine_moments(2.0, 2)
    est = microstate_hit_rate(tau, 1e-9, 2, 2, 2000, substream(16, "miss"),
                              burnin=200, thin=4)
    assert est.hits == 0
    assert est.log_volume is None


def test_uniform_chain_m2_near_arcsine_at_moderate_size():
    model = GibbsModel(1, 16, 2.0, NcPoly.zero(1), 0.0)
    samples, _ = mcmc_chain(model, 12000, 2000, 10, rng=substream(17, "m2"))
    m2 = np.mean([empirical_moments(t, 2).value((1, 1)).real for t in samples])
    # arcsine limit is R^2/2 = 2; finite size pulls it down a little
    assert 1.6 <= m2 <= 2.1


def test_uniform_chain_histogram_is_flat():
    # V = 0 at N = 1: the stationary law is uniform on [-R, R]
    model = GibbsModel(1, 1, 1.0, NcPoly.zero(1), 0.0)
    samples, diag = mcmc_chain(model, 100000, 1000, 1, rng=substream(20, "flat"))
    xs = np.array([float(t.blocks[0][0, 0].real) for t in samples])
    step = max(1, int(math.ceil(diag.iat)))
    sub = xs[::step]
    counts, _ = np.histogram(sub, bins=20, range=(-1.0, 1.0))
    res = stats.chisquare(counts)
    assert res.pvalue > 0.001


def test_estimate_log_i_monotone_in_beta():
    # Tr V >= 0 on the ball makes beta -> log I nonincreasing
    pot = NcPoly(1, {(1, 1): 1.0})
    lo = estimate_log_I(GibbsModel(1, 2, 1.5, pot, 0.4),
                        opts=TIOptions(nodes=15, node_steps=600),
                        rng=substream(21, "lo"))
    hi = estimate_log_I(GibbsModel(1, 2, 1.5, pot, 1.0),
                        opts=TIOptions(nodes=15, node_steps=600),
                        rng=substream(21, "hi"))
    slack = 3 * math.hypot(lo.stderr, hi.stderr) + lo.bias_bound + hi.bias_bound
    assert hi.value <= lo.value + slack
    assert hi.value < lo.value  # strict at this coupling strength
