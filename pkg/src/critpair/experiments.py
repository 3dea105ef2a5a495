"""Seeded Monte Carlo experiments on conditioned random polynomials.

One trial samples the conditional ensemble at degree N, forms the critical
polynomial s' sigma - s sigma', solves it and records the critical points
near xi. Reports (pairing probabilities, count moments, displacement
geometry) are computed from stored trial batches, so several reports can
share one simulation.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from . import formulas
from .ensembles import (
    ReferenceSection,
    condition_at,
    conditional_residual,
    efield_condition_margin,
    make_radial,
    make_su2,
    preset,
    sample_conditional,
)
from .errors import ConvergenceError, NumericalError, PoleEvaluationError, PreconditionError
from .kernels.bergman import kernel_derivs, kernel_for
from .kernels.special import G
from .poly_core import (
    DEFAULT_TOL,
    FS_NORMAL,
    ComplexPolynomial,
    RootSet,
    count_in_disk,
    critical_polynomial,
    log_derivative,
    roots,
    to_chart,
)
from .rng import SeededRng, complex_normal, trial_rng

INVALID_LIMIT = 0.01
SHARED_TOL = 1e-6
RECORD_RADIUS = 0.25


@dataclass(frozen=True)
class PairingConfig:
    N_list: tuple = (64, 128, 256, 512)
    xi: complex = 1 + 1j
    eps: float = 0.1
    gamma: float = 0.0
    sigma: Optional[tuple] = None  # ascending coefficients; None means sigma = 1
    trials: int = 10_000
    master_seed: int = 0
    coord_mode: str = FS_NORMAL
    ensemble: str = "su2"  # "su2" or a radial preset name
    workers: int = 1
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        object.__setattr__(self, "N_list", tuple(int(n) for n in self.N_list))
        object.__setattr__(self, "xi", complex(self.xi))
        if self.sigma is not None:
            object.__setattr__(self, "sigma", tuple(complex(c) for c in self.sigma))
        if not 0 <= self.gamma < 0.5:
            raise PreconditionError("Gamma must lie in [0, 1/2)")
        if not 0 < self.eps < 0.5 - self.gamma:
            raise PreconditionError("eps must lie in (0, 1/2 - Gamma)")
        if self.trials < 1 or not self.N_list or min(self.N_list) < 2:
            raise PreconditionError("need trials >= 1 and every N >= 2")

    @property
    def borel_cantelli_regime(self) -> bool:
        """True when 2 Gamma + 3 eps < 1/2."""
        return 2 * self.gamma + 3 * self.eps < 0.5

    def radii(self, N: int):
        return formulas.pairing_radii(N, self.eps, self.gamma)


def make_ensemble(cfg: PairingConfig, N: int):
    if cfg.ensemble == "su2":
        return make_su2(N)
    return make_radial(N, preset(cfg.ensemble))


def reference_section(cfg: PairingConfig, N: int) -> ReferenceSection:
    e = make_ensemble(cfg, N)
    if cfg.sigma is None:
        return ReferenceSection.trivial(e)
    return ReferenceSection(ComplexPolynomial(np.array(cfg.sigma), N), e)


def check_hypothesis(cfg: PairingConfig):
    """Pairing at xi requires d phi_sigma(xi) != 0."""
    for N in cfg.N_list:
        if efield_condition_margin(reference_section(cfg, N), cfg.xi, cfg.gamma) <= 0:
            raise PreconditionError(
                f"d phi_sigma(xi) = 0 at xi = {cfg.xi} (N = {N}); the pairing statement requires "
                "a non-vanishing field at xi"
            )
    if not cfg.borel_cantelli_regime:
        warnings.warn("2*Gamma + 3*eps >= 1/2: outside the summable-failure regime", RuntimeWarning)


@dataclass(frozen=True)
class TrialOutcome:
    index: int
    valid: bool
    n_inner: int = 0
    n_outer: int = 0
    success: bool = False
    nearest_crit: complex = complex("nan")
    displacement: complex = complex("nan")
    n_crit: int = 0
    crit_radii: tuple = ()  # sorted chart radii of critical points below RECORD_RADIUS
    shared_with_sigma: int = 0
    boundary_ambiguous: bool = False
    vanish_residual: float = 0.0
    method: str = ""


@dataclass
class TrialBatch:
    cfg: PairingConfig
    N: int
    outcomes: list

    @property
    def valid(self) -> list:
        return [o for o in self.outcomes if o.valid]

    @property
    def invalid_count(self) -> int:
        return sum(not o.valid for o in self.outcomes)

    def counts_at(self, r: float) -> np.ndarray:
        if r >= RECORD_RADIUS:
            raise PreconditionError(f"radius {r} exceeds the recorded range {RECORD_RADIUS}")
        return np.array([sum(x < r for x in o.crit_radii) for o in self.valid], dtype=np.int64)


def _nearest(crit: np.ndarray, xi: complex):
    d = crit - xi
    ad = np.abs(d)
    # smallest distance, ties broken by smallest argument
    order = np.lexsort((np.angle(d), ad))
    k = order[0]
    return complex(crit[k]), complex(d[k])


def run_trial(cfg: PairingConfig, N: int, index: int, ce=None, rsec=None, sigma_roots=None) -> TrialOutcome:
    if ce is None:
        ce = condition_at(make_ensemble(cfg, N), cfg.xi)
    if rsec is None:
        rsec = reference_section(cfg, N)
    rng = trial_rng(cfg.master_seed, N, index)
    p = sample_conditional(ce, rng)
    q = critical_polynomial(p, rsec.sigma)
    try:
        rs = roots(q, cfg.tol)
    except ConvergenceError:
        return TrialOutcome(index, False)
    crit = rs.expanded()
    shared = 0
    if sigma_roots is not None and sigma_roots.size and crit.size:
        dist = np.min(np.abs(crit[:, None] - sigma_roots[None, :]), axis=1)
        keep = dist >= SHARED_TOL * np.maximum(1.0, np.abs(crit))
        shared = int((~keep).sum())
        crit = crit[keep]
    if crit.size == 0:
        return TrialOutcome(index, False)
    Rm, Rp = cfg.radii(N)
    kept = RootSet(crit, np.ones(crit.size, np.int64), np.zeros(crit.size))
    n_in = count_in_disk(kept, cfg.xi, Rm, cfg.coord_mode)
    n_out = count_in_disk(kept, cfg.xi, Rp, cfg.coord_mode)
    radii = np.sort(np.abs(to_chart(crit, cfg.xi, cfg.coord_mode)))
    nearest, disp = _nearest(crit, cfg.xi)
    return TrialOutcome(
        index=index,
        valid=True,
        n_inner=int(n_in),
        n_outer=int(n_out),
        success=(int(n_out) == 1 and int(n_in) == 0),
        nearest_crit=nearest,
        displacement=disp,
        n_crit=int(crit.size),
        crit_radii=tuple(float(x) for x in radii[radii < RECORD_RADIUS]),
        shared_with_sigma=shared,
        boundary_ambiguous=bool(n_in.boundary_ambiguous or n_out.boundary_ambiguous),
        vanish_residual=conditional_residual(p, cfg.xi),
        method=rs.method,
    )


def _run_chunk(args):
    cfg, N, indices = args
    ce = condition_at(make_ensemble(cfg, N), cfg.xi)
    rsec = reference_section(cfg, N)
    sroots = None
    if rsec.sigma.numerical_degree >= 1:
        sroots = roots(rsec.sigma).expanded()
    return [run_trial(cfg, N, i, ce, rsec, sroots) for i in indices]


def _chunks(n: int, workers: int):
    size = max(1, math.ceil(n / (4 * workers)))
    return [range(s, min(n, s + size)) for s in range(0, n, size)]


def simulate(cfg: PairingConfig, N: int, trials: Optional[int] = None) -> TrialBatch:
    """Run all trials at degree N; results are ordered by trial index and do
    not depend on the number of workers."""
    n = cfg.trials if trials is None else trials
    chunks = _chunks(n, cfg.workers)
    jobs = [(cfg, N, c) for c in chunks]
    if cfg.workers <= 1:
        parts = [_run_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    outcomes = [o for part in parts for o in part]
    batch = TrialBatch(cfg, N, outcomes)
    if batch.invalid_count > INVALID_LIMIT * n:
        raise NumericalError(f"{batch.invalid_count} of {n} trials failed at N = {N} (limit 1%)")
    return batch


def simulate_all(cfg: PairingConfig) -> dict:
    check_hypothesis(cfg)
    return {N: simulate(cfg, N) for N in cfg.N_list}


# ----------------------------------------------------------------- statistics

def jackknife_var_se(x: np.ndarray) -> float:
    """Delete-one jackknife standard error of the unbiased sample variance."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 3:
        return float("nan")
    s1, s2 = x.sum(), np.square(x).sum()
    v = (s2 - x * x - (s1 - x) ** 2 / (n - 1)) / (n - 2)
    return float(math.sqrt((n - 1) / n * np.sum((v - v.mean()) ** 2)))


def loglog_slope(N, p, trials):
    """Weighted least-squares slope of log p against log N with a 95% band.

    Weights are inverse delta-method variances (1-p)/(n p); zero estimates are
    left out of the fit.
    """
    N = np.asarray(N, dtype=float)
    p = np.asarray(p, dtype=float)
    n = np.asarray(trials, dtype=float)
    ok = (p > 0) & (p < 1)
    if ok.sum() < 2:
        return float("nan"), (float("nan"), float("nan"))
    x, y = np.log(N[ok]), np.log(p[ok])
    w = n[ok] * p[ok] / (1 - p[ok])
    xm = np.sum(w * x) / w.sum()
    ym = np.sum(w * y) / w.sum()
    sxx = np.sum(w * (x - xm) ** 2)
    b = np.sum(w * (x - xm) * (y - ym)) / sxx
    se = math.sqrt(1.0 / sxx)
    return float(b), (float(b - 1.96 * se), float(b + 1.96 * se))


def circular_stats(angles: np.ndarray):
    """(circular mean, circular SD = sqrt(-2 log Rbar))."""
    m = np.mean(np.exp(1j * np.asarray(angles)))
    R = abs(m)
    return float(np.angle(m)), float(math.sqrt(-2 * math.log(R))) if R > 0 else float("inf")


# ----------------------------------------------------------------- reports

@dataclass
class PairingRow:
    N: int
    trials: int
    valid: int
    invalid: int
    success_count: int
    fail: int
    p_fail: float
    se: float
    mean_outer: float
    se_mean_outer: float
    var_outer: float
    se_var_outer: float
    mean_inner: float
    boundary_ambiguous: int
    shared_with_sigma: int


@dataclass
class PairingReport:
    config: dict
    seed: int
    rows: list
    slope: float
    slope_band: tuple
    theory_exponent: float
    K_envelope: float
    borel_cantelli_regime: bool

    def p_fail(self) -> list:
        return [r.p_fail for r in self.rows]

    def to_dict(self) -> dict:
        return asdict(self)


def config_echo(cfg: PairingConfig) -> dict:
    d = asdict(cfg)
    d.pop("workers")
    return d


def pairing_row(batch: TrialBatch) -> PairingRow:
    v = batch.valid
    n = len(v)
    succ = sum(o.success for o in v)
    outer = np.array([o.n_outer for o in v], dtype=float)
    p = (n - succ) / n
    return PairingRow(
        N=batch.N,
        trials=len(batch.outcomes),
        valid=n,
        invalid=batch.invalid_count,
        success_count=succ,
        fail=n - succ,
        p_fail=p,
        se=math.sqrt(p * (1 - p) / n),
        mean_outer=float(outer.mean()),
        se_mean_outer=float(outer.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan"),
        var_outer=float(outer.var(ddof=1)) if n > 1 else float("nan"),
        se_var_outer=jackknife_var_se(outer),
        mean_inner=float(np.mean([o.n_inner for o in v])),
        boundary_ambiguous=sum(o.boundary_ambiguous for o in v),
        shared_with_sigma=sum(o.shared_with_sigma for o in v),
    )


def run_pairing(cfg: PairingConfig, batches: Optional[dict] = None) -> PairingReport:
    """Probability that exactly one critical point lies in D_{R+} and none in D_{R-}."""
    if batches is None:
        batches = simulate_all(cfg)
    else:
        check_hypothesis(cfg)
    rows = [pairing_row(batches[N]) for N in cfg.N_list]
    slope, band = loglog_slope([r.N for r in rows], [r.p_fail for r in rows], [r.valid for r in rows])
    expo = -1.5 + 2 * cfg.gamma + 3 * cfg.eps
    K = max((r.p_fail * r.N ** (-expo) for r in rows), default=float("nan"))
    return PairingReport(config_echo(cfg), cfg.master_seed, rows, slope, band, expo, K,
                         cfg.borel_cantelli_regime)


@dataclass
class MomentRow:
    N: int
    radius: float
    valid: int
    mc_mean: float
    se_mean: float
    mc_var: float
    se_var: float
    formula_mean: float
    formula_var: float


@dataclass
class MomentReport:
    config: dict
    radius_rule: str
    rows: list

    def to_dict(self) -> dict:
        return asdict(self)


def _radius(cfg: PairingConfig, N: int, radius_rule) -> float:
    Rm, Rp = cfg.radii(N)
    if radius_rule == "R_minus":
        return Rm
    if radius_rule == "R_plus":
        return Rp
    r = float(radius_rule)
    if not r > 0:
        raise PreconditionError("explicit radius must be positive")
    return r


def count_moments(cfg: PairingConfig, radius_rule="R_plus", batches: Optional[dict] = None,
                  q: formulas.QuadratureSpec = formulas.QuadratureSpec(), with_variance: bool = True
                  ) -> MomentReport:
    """Monte Carlo mean and variance of N_r next to the contour-integral formulas."""
    if batches is None:
        batches = simulate_all(cfg)
    rows = []
    for N in cfg.N_list:
        r = _radius(cfg, N, radius_rule)
        x = batches[N].counts_at(r).astype(float)
        n = x.size
        K = kernel_for(condition_at(make_ensemble(cfg, N), cfg.xi))
        fm = formulas.expected_count(K, cfg.xi, r, q, cfg.coord_mode)
        fv = formulas.variance_count(K, cfg.xi, r, q, cfg.coord_mode) if with_variance else float("nan")
        rows.append(MomentRow(N, r, n, float(x.mean()), float(x.std(ddof=1) / math.sqrt(n)),
                              float(x.var(ddof=1)), jackknife_var_se(x), fm, fv))
    return MomentReport(config_echo(cfg), str(radius_rule), rows)


@dataclass
class DisplacementRow:
    N: int
    successes: int
    median_scaled_distance: float
    circular_mean_angle: float
    circular_sd: float
    fraction_toward_origin: float
    predicted_scaled_distance: float
    predicted_angle: float


@dataclass
class DisplacementReport:
    config: dict
    rows: list

    def to_dict(self) -> dict:
        return asdict(self)


def displacement_stats(cfg: PairingConfig, batches: Optional[dict] = None) -> DisplacementReport:
    """Geometry of the paired critical point c relative to xi over successful trials.

    The first-order prediction for sigma = 1 (Fubini-Study) is
    c - xi = -(1 + |xi|^2) / (N conj(xi)).
    """
    if batches is None:
        batches = simulate_all(cfg)
    xi = cfg.xi
    rows = []
    for N in cfg.N_list:
        ok = [o for o in batches[N].valid if o.success]
        d = np.array([o.displacement for o in ok])
        c = np.array([o.nearest_crit for o in ok])
        mean_ang, sd = circular_stats(np.angle(d)) if d.size else (float("nan"), float("nan"))
        pred = -(1 + abs(xi) ** 2) / np.conj(xi) if xi != 0 else complex("nan")
        rows.append(DisplacementRow(
            N=N,
            successes=len(ok),
            median_scaled_distance=float(np.median(N * np.abs(d))) if d.size else float("nan"),
            circular_mean_angle=mean_ang,
            circular_sd=sd,
            fraction_toward_origin=float(np.mean(np.abs(c) < abs(xi))) if c.size else float("nan"),
            predicted_scaled_distance=float(abs(pred)),
            predicted_angle=float(np.angle(pred)),
        ))
    return DisplacementReport(config_echo(cfg), rows)


@dataclass
class MeanFieldResult:
    N: int
    point: complex
    mean: complex
    se_re: float
    se_im: float
    sd: float
    robust_sd: float  # IQR / 1.349 per component, averaged; the field has a log-divergent second moment
    used: int
    excluded: int
    oracle: complex


def mean_field_oracle(cfg: PairingConfig, N: int, point: complex) -> complex:
    """E[p'/p(z)] = d_z K^xi(z, w) / K^xi(z, w) at w = z, minus sigma'/sigma(z)."""
    K = kernel_for(condition_at(make_ensemble(cfg, N), cfg.xi))
    v = kernel_derivs(K, point, point).values
    out = complex(v[1, 0] / v[0, 0])
    rsec = reference_section(cfg, N)
    if rsec.sigma.numerical_degree >= 1:
        out -= complex(log_derivative(rsec.sigma, point)[0])
    return out


def mean_field(cfg: PairingConfig, point: complex, trials: Optional[int] = None) -> list:
    """Monte Carlo mean of the electric co-field sum_j 1/(point - z_j) over the
    zeros of the sample (xi included) minus the sigma divisor's field."""
    point = complex(point)
    if point == cfg.xi:
        raise PreconditionError("point must differ from xi")
    n = cfg.trials if trials is None else trials
    out = []
    for N in cfg.N_list:
        ce = condition_at(make_ensemble(cfg, N), cfg.xi)
        rsec = reference_section(cfg, N)
        sig = 0j
        if rsec.sigma.numerical_degree >= 1:
            sig = complex(log_derivative(rsec.sigma, point)[0])
            if not np.isfinite(sig):
                raise PoleEvaluationError("sigma vanishes at the evaluation point")
        vals = []
        excluded = 0
        for i in range(n):
            p = sample_conditional(ce, trial_rng(cfg.master_seed, N, i))
            ld = complex(log_derivative(p, point)[0])
            if not np.isfinite(ld) or abs(1 / ld) < 1e-8:
                excluded += 1
                continue
            vals.append(ld - sig)
        v = np.array(vals)
        m = len(v)
        iqr = [np.subtract(*np.percentile(x, [75, 25])) for x in (v.real, v.imag)]
        out.append(MeanFieldResult(
            N, point, complex(v.mean()), float(v.real.std(ddof=1) / math.sqrt(m)),
            float(v.imag.std(ddof=1) / math.sqrt(m)), float(np.sqrt(np.mean(np.abs(v - v.mean()) ** 2))),
            float(np.mean(iqr) / 1.349), m, excluded, mean_field_oracle(cfg, N, point),
        ))
    return out


def loggauss_corr(u: Sequence[complex], v: Sequence[complex], trials: int, rng: SeededRng,
                  chunk: int = 200_000):
    """Monte Carlo E[log|<a,u>| log|<a,v>|] for a standard complex Gaussian a.

    Returns (estimate, standard error, closed form G(|<u,v>|)).
    """
    u = np.asarray(u, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    if abs(np.linalg.norm(u) - 1) > 1e-12 or abs(np.linalg.norm(v) - 1) > 1e-12:
        raise PreconditionError("u and v must be unit vectors")
    s1 = s2 = 0.0
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        a = complex_normal(rng, (m, u.size))
        x = np.log(np.abs(a @ np.conj(u))) * np.log(np.abs(a @ np.conj(v)))
        s1 += x.sum()
        s2 += np.square(x).sum()
        done += m
    mean = s1 / trials
    var = (s2 - trials * mean**2) / (trials - 1)
    t = min(abs(np.vdot(u, v)), 1.0)
    closed = G(t) if t < 1 else G(0.0) + math.pi**2 / 24
    return float(mean), float(math.sqrt(var / trials)), closed
