import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from critpair.errors import ConvergenceError, InvalidReferenceSectionError, NoRootsError, PreconditionError
from critpair.poly_core import (
    EUCLIDEAN,
    FS_NORMAL,
    ComplexPolynomial,
    RootSet,
    count_in_disk,
    critical_polynomial,
    derivative,
    evaluate,
    evaluation_scale,
    from_chart,
    log_derivative,
    roots,
    to_chart,
)
from critpair.rng import complex_normal, make_rng

P = ComplexPolynomial


def _match(a, b):
    """Max distance after greedy nearest matching of two root multisets."""
    b = list(np.asarray(b, complex))
    worst = 0.0
    for x in np.asarray(a, complex):
        k = int(np.argmin([abs(x - y) for y in b]))
        worst = max(worst, abs(x - b.pop(k)))
    return worst


class TestComplexPolynomial:
    def test_formal_degree_tracks_trailing_zeros(self):
        p = P([1, 2, 0, 0], 3)
        assert p.N == 3 and p.numerical_degree == 1 and p.coeffs.size == 4

    def test_padding_to_formal_degree(self):
        assert P([1], 4).coeffs.size == 5

    def test_nonzero_beyond_formal_degree_rejected(self):
        with pytest.raises(ValueError):
            P([1, 2, 3], 1)

    def test_immutable(self):
        with pytest.raises(ValueError):
            P([1, 2]).coeffs[0] = 5

    def test_from_roots(self):
        np.testing.assert_allclose(P.from_roots([1, -1]).coeffs, [-1, 0, 1])


class TestEvaluate:
    def test_quadratic(self):
        assert evaluate(P([-1, 0, 1]), 2) == 3

    def test_cube_root_of_unity(self):
        w = np.exp(2j * np.pi / 3)
        p = P([-1, 0, 0, 1])
        assert abs(evaluate(p, w)) <= 1e-14 * evaluation_scale(p, w)

    def test_sqrt_binomial_sum(self):
        c = [math.sqrt(math.comb(8, j)) for j in range(9)]
        assert evaluate(P(c), 1.0) == pytest.approx(sum(c), rel=1e-15)
        exact = 2 + 2 * math.sqrt(8) + 2 * math.sqrt(28) + 2 * math.sqrt(56) + math.sqrt(70)
        assert evaluate(P(c), 1.0).real == pytest.approx(exact, rel=1e-15)
        assert exact == pytest.approx(41.573089, abs=1e-6)

    def test_vectorized_matches_scalar(self):
        rng = make_rng(0)
        p = P(complex_normal(rng, 30))
        z = complex_normal(rng, 17)
        np.testing.assert_allclose(evaluate(p, z), [evaluate(p, x) for x in z], rtol=1e-14)

    def test_compensated_high_degree(self):
        # (z - 1)^300 near z = 1 is tiny; compensated Horner keeps the relative error small
        rng = make_rng(1)
        c = complex_normal(rng, 400)
        p = P(c)
        z = 0.999 * np.exp(0.3j)
        mpmath.mp.dps = 40
        exact = complex(sum(mpmath.mpc(complex(x)) * mpmath.mpc(z) ** j for j, x in enumerate(c)))
        assert abs(evaluate(p, z) - exact) <= 1e-14 * evaluation_scale(p, z)

    def test_log_derivative_large_z(self):
        p = P.from_roots([0.5, -0.25j, 2.0])
        z = 1e200
        assert log_derivative(p, z)[0] == pytest.approx(3 / z, rel=1e-12)

    def test_log_derivative_at_root_is_inf(self):
        assert np.isinf(log_derivative(P([-1, 0, 1]), 1.0)[0])


class TestDerivative:
    def test_quadratic(self):
        d = derivative(P([-1, 0, 1]))
        np.testing.assert_array_equal(d.coeffs, [0, 2])
        assert d.N == 1

    def test_constant(self):
        d = derivative(P([5]))
        assert d.is_zero and d.N == 0

    def test_cube(self):
        d = derivative(P.from_roots([1, 1, 1]))
        np.testing.assert_allclose(d.coeffs, (3 * P.from_roots([1, 1])).coeffs)


class TestCriticalPolynomial:
    def test_sigma_one_gives_derivative(self):
        s = P([1, 2, 3, 4])
        np.testing.assert_array_equal(critical_polynomial(s, P.constant(1.0)).coeffs[:3], derivative(s).coeffs)

    def test_parallel_section(self):
        s = P([1, 2, 3])
        assert critical_polynomial(s, s).is_zero

    def test_z_squared_over_z(self):
        q = critical_polynomial(P([0, 0, 1]), P([0, 1]))
        np.testing.assert_allclose(q.coeffs[: 3], [0, 0, 1])
        assert q.numerical_degree == 2

    def test_zero_sigma_rejected(self):
        with pytest.raises(InvalidReferenceSectionError):
            critical_polynomial(P([1, 2]), P([0]))

    @given(st.integers(1, 40), st.integers(0, 2**31))
    def test_degree_drops_by_one(self, n, seed):
        s = P(complex_normal(make_rng(seed), n + 1))
        q = critical_polynomial(s, P.constant(1.0))
        assert q.numerical_degree == n - 1
        if n >= 2:
            assert roots(q).total == n - 1


class TestRoots:
    def test_cube_roots_of_unity(self):
        rs = roots(P([-1, 0, 0, 1]))
        want = np.exp(2j * np.pi * np.arange(3) / 3)
        assert _match(rs.expanded(), want) < 1e-12
        assert rs.converged and np.all(rs.residuals <= 1e-10)

    def test_double_root_is_merged(self):
        rs = roots(P.from_roots([2, 2, -1]))
        assert rs.total == 3 and len(rs) == 2
        m = dict(zip(np.round(rs.roots.real, 6), rs.multiplicity))
        assert m[2.0] == 2 and m[-1.0] == 1

    def test_degree_zero_rejected(self):
        with pytest.raises(NoRootsError):
            roots(P([3, 0, 0], 2))

    def test_zero_roots_stripped(self):
        rs = roots(P([0, 0, -1, 0, 1]))
        assert rs.total == 4
        assert np.sum(np.abs(rs.expanded()) < 1e-12) == 2

    @pytest.mark.parametrize("n", [100, 500, 1000])
    def test_random_high_degree_vieta(self, n):
        c = complex_normal(make_rng(n), n + 1)
        rs = roots(P(c))
        assert rs.total == n and rs.converged
        assert np.all(rs.residuals <= 1e-10)
        s = -c[n - 1] / c[n]
        assert abs(rs.expanded().sum() - s) <= 1e-8 * max(1.0, abs(s))

    def test_su2_degree_1000(self):
        n = 1000
        j = np.arange(n + 1)
        from scipy.special import gammaln

        logc = 0.5 * (gammaln(n + 1) - gammaln(j + 1) - gammaln(n - j + 1))
        c = complex_normal(make_rng(5), n + 1) * np.exp(logc - logc.max())
        rs = roots(P(c))
        assert rs.total == n and np.all(rs.residuals <= 1e-10)

    def test_convergence_error_carries_best(self):
        err = ConvergenceError("x", best=RootSet(np.zeros(1), np.ones(1, int), np.zeros(1)))
        assert err.best.total == 1

    @given(st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), min_size=1, max_size=60, unique=True),
           st.floats(0.1, 10))
    def test_round_trip_and_scale_invariance(self, pts, scale):
        z = np.array([complex(a, b) for a, b in pts])
        d = np.abs(z[:, None] - z[None, :]) + np.eye(z.size) * 10
        if z.size > 1 and d.min() < 0.3:
            return
        p = P.from_roots(z)
        rs = roots(p)
        assert rs.total == z.size
        assert _match(rs.expanded(), z) < 1e-6
        assert _match(roots(p * scale).expanded(), rs.expanded()) < 1e-6


class TestCharts:
    def test_round_trip(self):
        xi = 1 + 1j
        u = np.array([0.1, -0.05j, 0.2 + 0.1j])
        for mode in (EUCLIDEAN, FS_NORMAL):
            z, _ = from_chart(u, xi, mode)
            np.testing.assert_allclose(to_chart(z, xi, mode), u, atol=1e-15)

    def test_jacobian(self):
        xi, u, h = 1 + 1j, 0.1 + 0.05j, 1e-6
        _, dz = from_chart(u, xi, FS_NORMAL)
        zp, _ = from_chart(u + h, xi, FS_NORMAL)
        zm, _ = from_chart(u - h, xi, FS_NORMAL)
        assert abs((zp - zm) / (2 * h) - dz) < 1e-8


class TestCountInDisk:
    def rs(self, z):
        z = np.atleast_1d(np.asarray(z, complex))
        return RootSet(z, np.ones(z.size, int), np.zeros(z.size))

    def test_outside(self):
        assert count_in_disk(self.rs(0), 1, 0.5) == 0

    def test_inside(self):
        assert count_in_disk(self.rs(0), 1, 1.5) == 1

    def test_fs_vs_euclidean(self):
        xi, z = 1 + 1j, 0.97 + 0.97j
        rs = self.rs(z)
        assert count_in_disk(rs, xi, 0.05, EUCLIDEAN) == 1
        assert count_in_disk(rs, xi, 0.05, FS_NORMAL) == 1
        u_fs = abs(to_chart(z, xi, FS_NORMAL))
        assert u_fs == pytest.approx(abs(z - xi) / abs(1 + np.conj(xi) * z), rel=1e-15)

    def test_multiplicity_counted(self):
        rs = RootSet(np.array([0.0 + 0j]), np.array([3]), np.zeros(1))
        assert count_in_disk(rs, 0, 1.0) == 3

    def test_boundary_flag(self):
        c = count_in_disk(self.rs(1.0), 0, 1.0 + 1e-12)
        assert c.boundary_ambiguous

    def test_radius_must_be_positive(self):
        with pytest.raises(PreconditionError):
            count_in_disk(self.rs(0), 0, 0.0)

    @given(st.lists(st.floats(0.01, 2), min_size=2, max_size=8))
    def test_monotone_in_radius(self, radii):
        rs = self.rs(make_rng(3).normal(size=20) + 1j * make_rng(4).normal(size=20))
        counts = [count_in_disk(rs, 0.1j, r) for r in sorted(radii)]
        assert counts == sorted(counts)
