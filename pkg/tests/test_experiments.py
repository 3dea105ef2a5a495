import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from critpair.experiments import (
    PairingConfig,
    check_hypothesis,
    circular_stats,
    count_moments,
    displacement_stats,
    jackknife_var_se,
    loggauss_corr,
    loglog_slope,
    mean_field,
    mean_field_oracle,
    pairing_row,
    run_pairing,
    run_trial,
    simulate,
)
from critpair.errors import PoleEvaluationError, PreconditionError
from critpair.io import dumps
from critpair.kernels.special import G
from critpair.rng import make_rng

SMALL = PairingConfig(N_list=(32, 64), trials=120, master_seed=7)


@pytest.fixture(scope="module")
def small_batches():
    return {N: simulate(SMALL, N) for N in SMALL.N_list}


# ------------------------------------------------------------------ config

@pytest.mark.parametrize("kw", [dict(eps=0.0), dict(eps=0.5), dict(gamma=0.5), dict(gamma=0.3, eps=0.25),
                                dict(trials=0), dict(N_list=(1,)), dict(N_list=())])
def test_config_rejects(kw):
    with pytest.raises(PreconditionError):
        PairingConfig(**kw)


def test_config_regime_flag():
    assert PairingConfig(eps=0.1).borel_cantelli_regime
    assert not PairingConfig(eps=0.2).borel_cantelli_regime
    with pytest.warns(RuntimeWarning):
        check_hypothesis(PairingConfig(N_list=(16,), eps=0.2))


def test_hypothesis_ok_quietly():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        check_hypothesis(PairingConfig(N_list=(16,)))


def test_xi_zero_trivial_sigma_rejected():
    with pytest.raises(PreconditionError, match="phi"):
        check_hypothesis(PairingConfig(N_list=(16,), xi=0))


def test_radii():
    Rm, Rp = PairingConfig(eps=0.1).radii(100)
    assert Rm == pytest.approx(100 ** -1.1) and Rp == pytest.approx(100 ** -0.9)


# ------------------------------------------------------------------ trials

def test_trial_deterministic():
    a = run_trial(SMALL, 32, 5)
    b = run_trial(SMALL, 32, 5)
    assert a == b or dumps(a) == dumps(b)
    assert run_trial(SMALL, 32, 6).nearest_crit != a.nearest_crit


def test_trial_invariants(small_batches):
    for N, batch in small_batches.items():
        assert batch.invalid_count == 0
        for o in batch.outcomes:
            assert o.n_inner <= o.n_outer
            assert o.success == (o.n_outer == 1 and o.n_inner == 0)
            assert o.n_crit == N - 1
            assert o.vanish_residual <= 1e-10
            assert abs(o.nearest_crit - SMALL.xi - o.displacement) < 1e-12


def test_counts_at_matches_stored(small_batches):
    for N, batch in small_batches.items():
        Rm, Rp = SMALL.radii(N)
        assert list(batch.counts_at(Rp)) == [o.n_outer for o in batch.valid]
        assert list(batch.counts_at(Rm)) == [o.n_inner for o in batch.valid]
    with pytest.raises(PreconditionError):
        small_batches[32].counts_at(0.5)


def test_nonconstant_sigma_shared_roots():
    cfg = PairingConfig(N_list=(24,), trials=10, sigma=(2.0, -1.0), master_seed=3)
    b = simulate(cfg, 24)
    # s' sigma - s sigma' has degree N; the root of sigma is never a critical point here
    assert all(o.n_crit == 24 - o.shared_with_sigma for o in b.valid)


# ------------------------------------------------------------------ statistics

def _jackknife_loop(x):
    n = len(x)
    v = np.array([np.var(np.delete(x, i), ddof=1) for i in range(n)])
    return math.sqrt((n - 1) / n * np.sum((v - v.mean()) ** 2))


@given(st.lists(st.integers(0, 4), min_size=3, max_size=40))
def test_jackknife_closed_form(xs):
    x = np.array(xs, float)
    assert jackknife_var_se(x) == pytest.approx(_jackknife_loop(x), rel=1e-9, abs=1e-12)


def test_jackknife_short():
    assert math.isnan(jackknife_var_se([1.0, 2.0]))


def test_loglog_slope_exact_power():
    N = np.array([64, 128, 256, 512])
    p = 0.3 * (N / 64.0) ** -1.2
    b, (lo, hi) = loglog_slope(N, p, [10_000] * 4)
    assert b == pytest.approx(-1.2, abs=1e-12)
    assert lo < b < hi


def test_loglog_slope_degenerate():
    b, band = loglog_slope([64, 128], [0.0, 0.1], [100, 100])
    assert math.isnan(b) and all(math.isnan(x) for x in band)


def test_circular_stats():
    m, sd = circular_stats(np.array([0.1, -0.1, 0.1, -0.1]) + 2.0)
    assert m == pytest.approx(2.0)
    assert sd == pytest.approx(math.sqrt(-2 * math.log(math.cos(0.1))))
    m, sd = circular_stats(np.array([math.pi - 0.05, -math.pi + 0.05]))
    assert abs(abs(m) - math.pi) < 1e-12


# ------------------------------------------------------------------ reports

def test_pairing_report(small_batches):
    rep = run_pairing(SMALL, small_batches)
    for r in rep.rows:
        assert 0 <= r.p_fail <= 1
        assert r.se == pytest.approx(math.sqrt(r.p_fail * (1 - r.p_fail) / r.valid))
        assert r.fail + r.success_count == r.valid
    assert rep.theory_exponent == pytest.approx(-1.2)
    assert rep.config["master_seed"] == 7 and "workers" not in rep.config
    assert pairing_row(small_batches[32]) == rep.rows[0]


def test_pairing_eps_monotone_outer_event(small_batches):
    wide = PairingConfig(N_list=(64,), trials=120, master_seed=7, eps=0.45)
    b = simulate(wide, 64)
    narrow = np.mean([o.n_outer >= 1 for o in small_batches[64].valid])
    assert np.mean([o.n_outer >= 1 for o in b.valid]) >= narrow


def test_count_moments_report(small_batches):
    rep = count_moments(SMALL, "R_plus", small_batches, with_variance=False)
    for r in rep.rows:
        assert abs(r.mc_mean - r.formula_mean) <= 4 * r.se_mean + 1e-12
    rep = count_moments(SMALL, "R_minus", small_batches, with_variance=False)
    for r in rep.rows:
        assert abs(r.mc_mean - r.formula_mean) <= 4 * r.se_mean + 1e-12
    assert rep.rows[-1].mc_mean <= 0.2
    with pytest.raises(PreconditionError):
        count_moments(SMALL, "-0.1", small_batches, with_variance=False)


def test_displacement_report(small_batches):
    rep = displacement_stats(SMALL, small_batches)
    for r in rep.rows:
        assert r.predicted_scaled_distance == pytest.approx(3 / math.sqrt(2))
        assert r.predicted_angle == pytest.approx(-3 * math.pi / 4)
        assert abs(r.circular_mean_angle - r.predicted_angle) < 0.3
        assert 0.6 < r.median_scaled_distance / r.predicted_scaled_distance < 1.4


# ------------------------------------------------------------------ mean field

def test_mean_field_oracle_vs_mc():
    cfg = PairingConfig(N_list=(32,), trials=2000, master_seed=5)
    r = mean_field(cfg, cfg.xi + 0.3)[0]
    assert r.excluded == 0 and r.used == 2000
    assert abs(r.mean.real - r.oracle.real) <= 4 * r.se_re
    assert abs(r.mean.imag - r.oracle.imag) <= 4 * r.se_im


def test_mean_field_oracle_far_from_xi():
    # far from xi the conditioned field approaches the unconditioned N conj(z)/(1+|z|^2)
    cfg = PairingConfig(N_list=(200,))
    z = -1.0 - 1.0j
    ref = 200 * np.conj(z) / (1 + abs(z) ** 2) + 1 / (z - cfg.xi)
    assert abs(mean_field_oracle(cfg, 200, z) - ref) / abs(ref) < 0.02


def test_mean_field_fluctuation_scale():
    cfg = PairingConfig(N_list=(64, 256), trials=3000, master_seed=3)
    a, b = mean_field(cfg, cfg.xi + 0.3)
    assert 2 * 0.7 <= b.robust_sd / a.robust_sd <= 2 * 1.3


def test_mean_field_errors():
    cfg = PairingConfig(N_list=(16,), trials=3)
    with pytest.raises(PreconditionError):
        mean_field(cfg, cfg.xi)
    cfg = PairingConfig(N_list=(16,), trials=3, sigma=(-0.5, 1.0))
    with pytest.raises(PoleEvaluationError):
        mean_field(cfg, 0.5)


# ------------------------------------------------------------------ log-Gaussian correlation

@pytest.mark.parametrize("t", [0.0, 0.5, 1.0])
def test_loggauss_corr(t):
    u = [1.0, 0.0]
    v = [t, math.sqrt(1 - t * t)]
    est, se, closed = loggauss_corr(u, v, 200_000, make_rng(int(10 * t)))
    ref = G(t) if t < 1 else G(0.0) + math.pi ** 2 / 24
    assert closed == pytest.approx(ref)
    assert abs(est - closed) <= 3 * se


def test_loggauss_requires_unit_vectors():
    with pytest.raises(PreconditionError):
        loggauss_corr([1.0, 1.0], [1.0, 0.0], 10, make_rng(0))
