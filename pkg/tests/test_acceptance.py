"""Acceptance suite: one PASS/FAIL line per criterion, printed in the terminal summary.

The Monte Carlo batches (10^4 trials at N = 64, 128, 256, 512 and 2*10^4 at
N = 128) are simulated once per session and shared by criteria 1, 2, 3, 6
and 8. Expect several minutes on one core.
"""

import math

import numpy as np
import pytest

from critpair import ensembles as E
from critpair import formulas
from critpair.experiments import (
    PairingConfig,
    TrialBatch,
    count_moments,
    displacement_stats,
    jackknife_var_se,
    loggauss_corr,
    run_pairing,
    simulate,
)
from critpair.io import dumps
from critpair.kernels import G1, G2, G, kernel_derivs, kernel_eval, kernel_for, su2_kernel
from critpair.kernels.asymptotics import scaling_limit_error
from critpair.kernels.bergman import deflated
from critpair.kernels.special import EULER_GAMMA
from critpair.poly_core import FS_NORMAL, ComplexPolynomial, count_in_disk, critical_polynomial, roots
from critpair.rng import make_rng, trial_rng

pytestmark = pytest.mark.slow

XI = 1 + 1j
CFG = PairingConfig(N_list=(64, 128, 256, 512), xi=XI, eps=0.1, trials=10_000, master_seed=20240601)
VAR_N, VAR_TRIALS = 128, 20_000


@pytest.fixture(scope="session")
def batches():
    out = {}
    for N in CFG.N_list:
        n = VAR_TRIALS if N == VAR_N else CFG.trials
        out[N] = simulate(CFG, N, n)
    return out


def first(batch: TrialBatch, n: int) -> TrialBatch:
    """Prefix of a batch; identical to simulating n trials because streams are keyed by index."""
    return TrialBatch(batch.cfg, batch.N, batch.outcomes[:n])


@pytest.fixture(scope="session")
def pairing_batches(batches):
    return {N: first(b, CFG.trials) for N, b in batches.items()}


def fmt(xs, spec=".4g"):
    return "[" + ", ".join(format(x, spec) for x in xs) + "]"


def test_criterion_1_pairing_decay(pairing_batches, record_criterion):
    rep = run_pairing(CFG, pairing_batches)
    p = rep.p_fail()
    checks = {
        "p_fail strictly decreasing": all(a > b for a, b in zip(p, p[1:])),
        "p_fail(512) <= 0.05": p[-1] <= 0.05,
        "log-log slope <= -0.7": rep.slope <= -0.7,
    }
    ok = record_criterion(1, checks, f"p_fail={fmt(p)} slope={rep.slope:.3f} "
                                     f"band=({rep.slope_band[0]:.3f}, {rep.slope_band[1]:.3f}) "
                                     f"invalid={[r.invalid for r in rep.rows]}")
    assert ok


def test_criterion_2_expectation(pairing_batches, record_criterion):
    cfg = PairingConfig(N_list=(64, 128, 256), xi=XI, eps=0.1, trials=CFG.trials, master_seed=CFG.master_seed)
    plus = count_moments(cfg, "R_plus", pairing_batches, with_variance=False).rows
    minus = count_moments(cfg, "R_minus", pairing_batches, with_variance=False).rows
    z = [(r.mc_mean - r.formula_mean) / r.se_mean for r in plus]
    checks = {
        "|MC - formula| <= 3 SE at R+": all(abs(x) <= 3 for x in z),
        "MC mean at R+ in [0.8, 1.2] at N=256": 0.8 <= plus[-1].mc_mean <= 1.2,
        "MC mean at R- <= 0.2": all(r.mc_mean <= 0.2 for r in minus),
    }
    ok = record_criterion(2, checks, f"R+ MC={fmt([r.mc_mean for r in plus])} "
                                     f"formula={fmt([r.formula_mean for r in plus])} z={fmt(z, '.2f')} "
                                     f"R- MC={fmt([r.mc_mean for r in minus])}")
    assert ok


def test_criterion_3_variance(batches, record_criterion):
    b = batches[VAR_N]
    Rm, Rp = CFG.radii(VAR_N)
    x = b.counts_at(Rp).astype(float)
    mc, se = float(x.var(ddof=1)), jackknife_var_se(x)
    form = {}
    for N in (64, 128, 256):
        K = kernel_for(E.condition_at(E.make_su2(N), XI))
        form[N] = formulas.variance_count(K, XI, CFG.radii(N)[1], coord_mode=CFG.coord_mode)
    z = (mc - form[VAR_N]) / se
    checks = {
        "|MC var - formula| <= 3 SE (jackknife) at N=128": abs(z) <= 3,
        "variance_count decreasing over 64, 128, 256": form[64] > form[128] > form[256],
    }
    ok = record_criterion(3, checks, f"N=128 trials={x.size} MC var={mc:.5f} SE={se:.5f} "
                                     f"formula={form[VAR_N]:.5f} z={z:.2f} "
                                     f"formula(64,128,256)={fmt(form.values(), '.5f')}")
    assert ok


def test_criterion_4_scaling_limit(record_criterion):
    e64, d64 = scaling_limit_error(64, XI)
    e256, d256 = scaling_limit_error(256, XI)
    ratio = e256 / e64
    checks = {
        "err(256)/err(64) in [0.3, 0.8]": 0.3 <= ratio <= 0.8,
        "diagonal exact to 1e-10": max(d64, d256) <= 1e-10,
    }
    ok = record_criterion(4, checks, f"err(64)={e64:.5f} err(256)={e256:.5f} ratio={ratio:.3f} "
                                     f"diag={max(d64, d256):.1e}")
    assert ok


def _fd(f, t):
    h = 1e-3 * (1 - t)  # stencil scale follows the log singularity at t = 1
    return (-f(t + 2 * h) + 8 * f(t + h) - 8 * f(t - h) + f(t - 2 * h)) / (12 * h)


def test_criterion_5_g_function(record_criterion):
    ts = [0.05, 0.2, 0.4, 0.6, 0.8, 0.9]
    e1 = max(abs(G1(t) - _fd(G, t)) for t in ts)
    e2 = max(abs(G2(t) - _fd(G1, t)) for t in ts)
    z = []
    for k, t in enumerate((0.0, 0.5, 1.0)):
        est, se, closed = loggauss_corr([1.0, 0.0], [t, math.sqrt(1 - t * t)], 1_000_000,
                                        trial_rng(CFG.master_seed, 0, k))
        z.append((est - closed) / se)
    checks = {
        "G(0) = gamma^2/4 to 1e-12": abs(G(0.0) - EULER_GAMMA**2 / 4) <= 1e-12,
        "G' matches finite differences to 1e-8": e1 <= 1e-8,
        "G'' matches finite differences to 1e-8": e2 <= 1e-8,
        "loggauss_corr within 3 SE at 10^6 samples": all(abs(x) <= 3 for x in z),
    }
    ok = record_criterion(5, checks, f"G(0)={G(0.0):.15f} fd errors=({e1:.1e}, {e2:.1e}) "
                                     f"loggauss z(t=0, 0.5, 1)={fmt(z, '.2f')}")
    assert ok


def test_criterion_6_displacement(pairing_batches, record_criterion):
    cfg = PairingConfig(N_list=(256,), xi=XI, eps=0.1, trials=CFG.trials, master_seed=CFG.master_seed)
    r = displacement_stats(cfg, pairing_batches).rows[0]
    target, angle = 3 / math.sqrt(2), -3 * math.pi / 4
    dang = (r.circular_mean_angle - angle + math.pi) % (2 * math.pi) - math.pi
    checks = {
        "median N|c - xi| within 5% of 3/sqrt(2)": abs(r.median_scaled_distance / target - 1) <= 0.05,
        "circular mean angle within 0.1 rad of -3pi/4": abs(dang) <= 0.1,
        "fraction |c| < |xi| >= 0.9": r.fraction_toward_origin >= 0.9,
    }
    ok = record_criterion(6, checks, f"N=256 successes={r.successes} median={r.median_scaled_distance:.4f} "
                                     f"(target {target:.4f}) angle={r.circular_mean_angle:.4f} "
                                     f"(target {angle:.4f}) circular sd={r.circular_sd:.3f} "
                                     f"toward origin={r.fraction_toward_origin:.3f}")
    assert ok


def _argument_principle_agreement():
    N = 64
    ce = E.condition_at(E.make_su2(N), XI)
    one = ComplexPolynomial.constant(1.0)
    agree = checked = 0
    for i in range(100):
        q = critical_polynomial(E.sample_conditional(ce, trial_rng(CFG.master_seed, N, i)), one)
        rs = roots(q)
        for r in CFG.radii(N):
            direct = count_in_disk(rs, XI, r, FS_NORMAL)
            if direct.boundary_ambiguous:
                continue
            checked += 1
            val = formulas.argument_principle_count(q, XI, r, coord_mode=FS_NORMAL)
            agree += abs(val - round(val)) < 1e-6 and round(val) == int(direct)
    return agree, checked


def _radial_kernel_error():
    N = 32
    rad = kernel_for(E.make_radial(N, E.preset("fs"), exact=False))
    su2 = su2_kernel(N)
    rng = make_rng(3)
    z = 1.5 * np.sqrt(rng.uniform(size=40)) * np.exp(2j * np.pi * rng.uniform(size=40))
    w = 1.5 * np.sqrt(rng.uniform(size=40)) * np.exp(2j * np.pi * rng.uniform(size=40))
    a = kernel_eval(rad, z, w).to_complex() / kernel_eval(rad, 0, 0).to_complex()
    b = kernel_eval(su2, z, w).to_complex()
    # relative to the absolute-term scale (1 + |z||w|)^N of the monomial sum
    return float(np.max(np.abs(a - b) / (1 + np.abs(z) * np.abs(w)) ** N))


def _radial_zero_statistics_z():
    N, n = 20, 1000
    su2, rad = E.make_su2(N), E.make_radial(N, E.preset("fs"), exact=False)

    def nearest(e, seed):
        return np.array([np.min(np.abs(roots(E.sample(e, trial_rng(seed, N, i))).roots - XI)) for i in range(n)])

    a, b = nearest(su2, 1), nearest(rad, 2)
    return float((a.mean() - b.mean()) / math.sqrt(a.var(ddof=1) / n + b.var(ddof=1) / n))


def _derivative_fd_error():
    kinds = [su2_kernel(16), deflated(su2_kernel(16), XI), deflated(su2_kernel(16), XI, rank_one=True),
             kernel_for(E.make_radial(16, E.preset("gaussian-planar"))),
             deflated(kernel_for(E.make_radial(16, E.preset("gaussian-planar"))), 0.4j)]
    rng = make_rng(7)
    z = 1.2 * np.sqrt(rng.uniform(size=20)) * np.exp(2j * np.pi * rng.uniform(size=20))
    w = 1.2 * np.sqrt(rng.uniform(size=20)) * np.exp(2j * np.pi * rng.uniform(size=20))
    h = 1e-5

    def table(K, a, b):
        d = kernel_derivs(K, a, b)
        return np.exp(d.log_scale)[..., None, None] * d.values

    worst = 0.0
    for K in kinds:
        D = table(K, z, w)
        Dzp, Dzm, Dwp, Dwm = table(K, z + h, w), table(K, z - h, w), table(K, z, w + h), table(K, z, w - h)
        scale = np.abs(D).reshape(len(z), -1).max(axis=1)
        for a in range(3):
            for b in range(3):
                if a == b == 0:
                    continue
                fd = ((Dzp[:, a - 1, b] - Dzm[:, a - 1, b]) if a else (Dwp[:, a, b - 1] - Dwm[:, a, b - 1])) / (2 * h)
                # relative error, floored at 1e-2 of the table's largest entry
                rel = np.abs(fd - D[:, a, b]) / np.maximum(np.abs(D[:, a, b]), 1e-2 * scale)
                worst = max(worst, float(rel.max()))
    return worst


def test_criterion_7_oracle_equivalences(record_criterion):
    agree, checked = _argument_principle_agreement()
    kerr = _radial_kernel_error()
    zst = _radial_zero_statistics_z()
    derr = _derivative_fd_error()
    checks = {
        "argument principle = root counts on 100 seeded cases": agree == checked and checked >= 190,
        "radial FS kernel = su2 within 1e-8 relative": kerr <= 1e-8,
        "radial FS zero statistics = su2 within 3 SE": abs(zst) <= 3,
        "kernel derivatives = finite differences within 1e-6 relative": derr <= 1e-6,
    }
    ok = record_criterion(7, checks, f"argument principle {agree}/{checked} disks; kernel err={kerr:.1e}; "
                                     f"zero statistics z={zst:.2f}; derivative rel err={derr:.1e}")
    assert ok


def test_criterion_8_structural(batches, record_criterion):
    n_valid = sum(len(b.valid) for b in batches.values())
    crit_ok = all(o.n_crit == N - 1 for N, b in batches.items() for o in b.valid)
    worst_res = max(o.vanish_residual for b in batches.values() for o in b.valid)
    invalid = sum(b.invalid_count for b in batches.values())
    small = dict(N_list=(32, 64), xi=XI, eps=0.1, trials=300, master_seed=CFG.master_seed)
    one = dumps(run_pairing(PairingConfig(workers=1, **small)))
    two = dumps(run_pairing(PairingConfig(workers=2, **small)))
    checks = {
        "N-1 critical points in every valid trial": crit_ok,
        "conditional samples vanish at xi to 1e-10": worst_res <= 1e-10,
        "reports byte-identical for 1 and 2 workers": one == two,
    }
    ok = record_criterion(8, checks, f"valid trials={n_valid} invalid={invalid} "
                                     f"max residual={worst_res:.1e}")
    assert ok
