import cmath
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cocycle_critic import riemann as rm
from cocycle_critic.riemann import E1, E2, Direction, HermitianForm

from conftest import complexes, matrices, rand_matrix, rand_point, rand_su2, unit_phase

INF = math.inf
DIAG2 = rm.mat(2, 0, 0, 1)
SWAP = rm.mat(0, 1, 1, 0)


def chart_multiplier(A, z):
    """|M'(z)| (1 + |z|^2) / (1 + |M(z)|^2) from the Mobius formula."""
    a, b, c, d = A
    w = (a * z + b) / (c * z + d)
    deriv = abs(a * d - b * c) / abs(c * z + d) ** 2
    return deriv * (1 + abs(z) ** 2) / (1 + abs(w) ** 2)


class TestMobius:
    def test_identity(self):
        assert rm.mobius_apply(rm.IDENTITY, 3 + 0j) == 3

    def test_swap(self):
        assert rm.mobius_apply(SWAP, 2) == pytest.approx(0.5)

    def test_infinity_fixed_by_diagonal(self):
        assert rm.is_infinite(rm.mobius_apply(DIAG2, INF))

    def test_pole_goes_to_infinity(self):
        assert rm.is_infinite(rm.mobius_apply(SWAP, 0))

    def test_singular(self):
        with pytest.raises(rm.SingularMatrixError, match="non-invertible fiber map"):
            rm.mobius_apply(rm.mat(1, 2, 2, 4), 1)


class TestMultiplierNorm:
    def test_identity(self):
        for z in (0, 1j, -3 + 2j, INF):
            assert rm.multiplier_norm(rm.IDENTITY, z) == pytest.approx(1.0)

    def test_diag_at_zero(self):
        assert rm.multiplier_norm(DIAG2, 0) == pytest.approx(2.0)

    def test_swap_at_one(self):
        assert rm.multiplier_norm(SWAP, 1) == pytest.approx(1.0)

    def test_singular(self):
        with pytest.raises(rm.SingularMatrixError):
            rm.multiplier_norm(rm.mat(0, 0, 1, 1), 0.5)

    @given(matrices, complexes)
    def test_matches_chart_formula(self, A, z):
        a, b, c, d = A
        if abs(c * z + d) < 1e-3:
            return
        assert rm.multiplier_norm(A, z) == pytest.approx(chart_multiplier(A, z), rel=1e-10)

    @given(matrices, matrices, complexes)
    def test_chain_rule(self, A, B, z):
        lhs = rm.multiplier_norm(rm.matmul(B, A), z)
        rhs = rm.multiplier_norm(B, rm.mobius_apply(A, z)) * rm.multiplier_norm(A, z)
        assert lhs == pytest.approx(rhs, rel=1e-9)


class TestDistance:
    def test_examples(self):
        assert rm.spherical_distance(0, 0) == 0
        assert rm.spherical_distance(0, INF) == pytest.approx(math.pi)
        assert rm.spherical_distance(0, 1) == pytest.approx(math.pi / 2)

    @given(complexes, complexes)
    def test_symmetric_and_bounded(self, a, b):
        d = rm.spherical_distance(a, b)
        assert d == pytest.approx(rm.spherical_distance(b, a), abs=1e-15)
        assert 0 <= d <= math.pi + 1e-15

    @given(complexes)
    def test_antipode_at_diameter(self, z):
        assert rm.spherical_distance(z, rm.antipode(z)) == pytest.approx(math.pi)

    def test_close_points_keep_precision(self):
        # arccos loses everything below ~1e-8; the atan2 form must not
        d = rm.spherical_distance(Direction(1, 1e-12), E1)
        assert d == pytest.approx(2e-12, rel=1e-6)


class TestSinAngle:
    def test_examples(self):
        assert rm.sin_angle((1, 0), (0, 1)) == pytest.approx(1.0)
        assert rm.sin_angle((1, 0), (2, 0)) == 0.0
        s = 1 / math.sqrt(2)
        assert rm.sin_angle((1, 0), (s, s)) == pytest.approx(s)

    def test_zero_vector(self):
        with pytest.raises(ValueError):
            rm.sin_angle((0, 0), (1, 0))


class TestIsometry:
    def test_zero_maps_to_identity_up_to_phase(self):
        U = rm.isometry_to_zero(Direction.from_chart(0))
        assert rm.is_special_unitary(U)
        ph = U[0]
        assert abs(abs(ph) - 1) < 1e-12
        assert max(abs(U[0] - ph), abs(U[1]), abs(U[2]), abs(U[3] - ph.conjugate())) < 1e-12

    def test_infinity(self):
        U = rm.isometry_to_zero(INF)
        assert rm.mobius_apply(U, INF) == 0

    @given(complexes)
    def test_random(self, z):
        U = rm.isometry_to_zero(z)
        assert rm.is_special_unitary(U)
        assert abs(rm.mobius_apply(U, z)) < 1e-12


class TestDirection:
    @given(complexes, complexes.filter(lambda w: abs(w) > 1e-3), unit_phase)
    def test_phase_canonical(self, a, b, ph):
        d1 = Direction(a, b)
        d2 = Direction(a * ph, b * ph)
        assert abs(d1.v1 - d2.v1) < 1e-12 and abs(d1.v2 - d2.v2) < 1e-12
        big = d1.v1 if abs(d1.v1) >= abs(d1.v2) else d1.v2
        assert big.imag == 0 and big.real >= 0
        assert rm.norm(d1.rep) == pytest.approx(1.0, abs=1e-12)

    def test_tie_goes_to_first(self):
        d = Direction(1j, 1j)
        assert d.v1.imag == 0 and d.v1.real > 0

    @given(complexes)
    def test_chart_round_trip(self, z):
        assert Direction.from_chart(z).chart() == pytest.approx(z, abs=1e-12 * (1 + abs(z)))

    def test_infinity(self):
        assert Direction.from_chart(INF) == E1
        assert rm.is_infinite(E1.chart())
        assert E2.chart() == 0

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            Direction(0, 0)


class TestMetric:
    def test_standard_reduces(self):
        H = HermitianForm.standard()
        assert rm.multiplier_norm_in_metric(DIAG2, 0, H) == pytest.approx(2.0)

    def test_identity_is_isometry(self):
        H = HermitianForm.diag(4, 1)
        for z in (0, 1, 2j, INF):
            assert rm.multiplier_norm_in_metric(rm.IDENTITY, z, H) == pytest.approx(1.0)

    def test_alpha(self):
        assert HermitianForm.diag(4, 1).alpha() == pytest.approx(2.0)

    def test_not_positive_definite(self):
        with pytest.raises(ValueError):
            HermitianForm(1, 2, 1)
        with pytest.raises(ValueError):
            HermitianForm(-1, 0, 1)

    @given(matrices, complexes)
    def test_ratio_bound(self, A, z):
        H = HermitianForm.diag(4, 1)
        ratio = rm.multiplier_norm_in_metric(A, z, H) / rm.multiplier_norm(A, z)
        assert 0.25 * (1 - 1e-12) <= ratio <= 4 * (1 + 1e-12)

    @given(matrices, complexes)
    def test_agrees_with_conjugated_map(self, A, z):
        H = HermitianForm(3, 1 - 0.5j, 2)
        L = H.factor()
        lhs = rm.multiplier_norm_in_metric(A, z, H)
        Lv = rm.matvec(L, rm.unit_vec(z))
        rhs = rm.multiplier_norm(rm.conjugate_by(A, L), Lv)
        assert lhs == pytest.approx(rhs, rel=1e-9)

    def test_factor(self):
        H = HermitianForm(3, 1 - 0.5j, 2)
        L = H.factor()
        P = rm.matmul(rm.adjoint(L), L)
        assert P[0] == pytest.approx(3) and P[1] == pytest.approx(1 - 0.5j)
        assert P[3] == pytest.approx(2)


def test_su2_invariance(rng):
    for _ in range(200):
        A, U, V = rand_matrix(rng), rand_su2(rng), rand_su2(rng)
        z = rand_point(rng)
        lhs = rm.multiplier_norm(rm.matmul(V, rm.matmul(A, U)), rm.mobius_apply(rm.inverse(U), z))
        assert lhs == pytest.approx(rm.multiplier_norm(A, z), rel=1e-10)


def test_sine_product_identity(rng):
    for _ in range(200):
        A = rand_matrix(rng)
        u1, u2 = rm.unit_vec(rand_point(rng)), rm.unit_vec(rand_point(rng))
        lhs = rm.multiplier_norm(A, u1) * rm.multiplier_norm(A, u2)
        rhs = (rm.sin_angle(rm.matvec(A, u1), rm.matvec(A, u2)) / rm.sin_angle(u1, u2)) ** 2
        assert lhs == pytest.approx(rhs, rel=1e-8)


def test_top_singular_against_numpy(rng):
    import numpy as np
    for _ in range(100):
        A = rand_matrix(rng)
        s, v = rm.top_singular(A)
        M = np.array([[A[0], A[1]], [A[2], A[3]]])
        sv = np.linalg.svd(M, compute_uv=False)
        assert s == pytest.approx(sv[0], rel=1e-12)
        assert rm.norm(rm.matvec(A, v)) == pytest.approx(sv[0], rel=1e-12)


def test_fibonacci_directions_spread():
    dirs = rm.fibonacci_directions(256)
    assert len(dirs) == 256
    worst = max(min(rm.spherical_distance(p, q) for q in dirs if q is not p) for p in dirs)
    closest = min(min(rm.spherical_distance(p, q) for q in dirs if q is not p) for p in dirs)
    # nearest-neighbour spacing of 256 near-uniform points on the unit sphere is ~0.22
    assert worst < 0.3 and closest > 0.1


@given(st.floats(0, 1))
def test_geodesic_point(t):
    a, b = Direction(1, 0.3j), Direction(-0.2, 1)
    p = rm.geodesic_point(a, b, t)
    d = rm.spherical_distance(a, b)
    assert rm.spherical_distance(a, p) == pytest.approx(t * d, abs=1e-9)
