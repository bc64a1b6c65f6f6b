"""Poisson kernel identities at truncation, with explicit tail accounting."""

import numpy as np
import pytest

from cpfock.cpmap import KrausFamily
from cpfock.errors import MalformedInputError, PreconditionError, SubinvarianceError
from cpfock.fock import word_operator
from cpfock.linalg import op_norm
from cpfock.poisson import (
    build_kernel,
    cb_bound_check,
    intertwining_residual,
    kernel_gram,
    moment_matrix_psd,
    poisson_transform,
    subinvariance_check,
    symmetric_range_check,
)
from helpers import contractive_family, random_psd, subinvariant_pair

SCALAR_A = 0.7
SCALAR_R = 0.8


def scalar_family(a=SCALAR_A):
    return KrausFamily(np.array([[[a]]], dtype=complex))


class TestSubinvariance:
    def test_contractive_identity(self):
        rng = np.random.RandomState(0)
        phi = contractive_family(rng, 3, 2)
        assert subinvariance_check(phi, np.eye(3))

    def test_expanding_identity(self):
        phi = KrausFamily(np.array([np.sqrt(2.0) * np.eye(2)], dtype=complex))
        assert not subinvariance_check(phi, np.eye(2))

    def test_neumann_series_member(self):
        # D = sum_(k<=K) phi^k(R) lands in the cone for strictly decaying maps
        rng = np.random.RandomState(1)
        phi = contractive_family(rng, 4, 2, c=0.8)
        r = random_psd(rng, 4)
        d = r.copy()
        cur = r.copy()
        for _ in range(200):
            cur = sum(a @ cur @ a.conj().T for a in phi.ops)
            d += cur
        assert subinvariance_check(phi, d)


class TestBuildKernel:
    def test_scalar_blocks_geometric(self):
        k = build_kernel(scalar_family(), np.array([[1.0]]), SCALAR_R, 6)
        delta = np.sqrt(1 - SCALAR_R**2 * SCALAR_A**2)
        for j in range(7):
            assert k.blocks[j, 0, 0] == pytest.approx((SCALAR_R * SCALAR_A) ** j * delta, abs=1e-14)

    def test_fixed_point_r1_zero_kernel(self):
        # phi(D) = D at r = 1 gives Delta = 0, hence K = 0
        phi = KrausFamily(np.array([[[0, 1], [1, 0]]], dtype=complex))
        k = build_kernel(phi, np.eye(2), 1.0, 3)
        assert op_norm(k.matrix) < 1e-12
        assert kernel_gram(k).norm() < 1e-12

    def test_not_subinvariant_raises(self):
        phi = KrausFamily(np.array([np.sqrt(2.0) * np.eye(2)], dtype=complex))
        with pytest.raises(SubinvarianceError):
            build_kernel(phi, np.eye(2), 0.9, 3)

    def test_explicit_level_too_small(self):
        with pytest.raises(MalformedInputError):
            build_kernel(scalar_family(), np.array([[1.0]]), 0.9, 1, tail_target=1e-10)

    def test_auto_level_hits_target(self):
        k = build_kernel(scalar_family(), np.array([[1.0]]), 0.5, tail_target=1e-8)
        assert k.tail_bound <= 1e-8


class TestKernelGram:
    def test_scalar_partial_sum(self):
        lvl = 6
        k = build_kernel(scalar_family(), np.array([[1.0]]), SCALAR_R, lvl)
        # oracle: finite geometric sum of (r a)^(2j) (1 - r^2 a^2)
        q = (SCALAR_R * SCALAR_A) ** 2
        expected = (1 - q) * sum(q**j for j in range(lvl + 1))
        assert kernel_gram(k).matrix[0, 0].real == pytest.approx(expected, abs=1e-14)
        assert expected == pytest.approx(1 - q ** (lvl + 1), abs=1e-14)

    def test_gram_recovers_d_random(self):
        rng = np.random.RandomState(2)
        for _ in range(5):
            phi, d = subinvariant_pair(rng, 4, 2, c=0.9)
            k = build_kernel(phi, d, 0.9, tail_target=1e-8, max_dim=20000)
            gram = kernel_gram(k).matrix
            assert op_norm(gram - k.d_matrix) <= k.tail_bound + 1e-10 * (1 + op_norm(d))

    def test_r1_gram_targets_pure_part(self):
        # A = diag(1, 1/2): phi^inf(I) = diag(1, 0), so K*K -> diag(0, 1)
        phi = KrausFamily(np.array([np.diag([1.0, 0.5])], dtype=complex))
        k = build_kernel(phi, np.eye(2), 1.0, 25)
        gram = kernel_gram(k).matrix
        assert op_norm(gram - np.diag([0.0, 1.0])) <= k.tail_bound + 1e-9


class TestIntertwining:
    def test_scalar_exact(self):
        k = build_kernel(scalar_family(), np.array([[1.0]]), SCALAR_R, 6)
        assert intertwining_residual(k) < 1e-14

    def test_random_families(self):
        rng = np.random.RandomState(3)
        for _ in range(5):
            phi = contractive_family(rng, 3, 3, c=0.9)
            k = build_kernel(phi, np.eye(3), 0.8, 6)
            assert intertwining_residual(k) <= 1e-11 * (1 + k.norm())


class TestPoissonTransform:
    def test_identity_word_gives_d(self):
        # transform of the identity polynomial returns D up to the tail
        rng = np.random.RandomState(4)
        phi, d = subinvariant_pair(rng, 3, 2, c=0.85)
        res = poisson_transform(phi, d, {((), ()): 1.0}, 0.9)
        assert op_norm(res.kernel_value - d) <= res.bound + 1e-10 * (1 + op_norm(d))
        assert np.allclose(res.closed_value, d)

    def test_scalar_single_pair(self):
        res = poisson_transform(
            scalar_family(), np.array([[1.0]]), {((1,), (1,)): 1.0}, 1.0, 12
        )
        assert res.closed_value[0, 0].real == pytest.approx(SCALAR_A**2, abs=1e-12)

    def test_r1_closed_form_is_word_product(self):
        rng = np.random.RandomState(5)
        phi, d = subinvariant_pair(rng, 3, 2, c=0.9)
        res = poisson_transform(phi, d, {((1, 2), (2,)): 1.0}, 1.0, 5)
        direct = word_operator(phi.ops, (1, 2)) @ d @ word_operator(phi.ops, (2,)).conj().T
        assert op_norm(res.closed_value - direct) < 1e-12 * (1 + op_norm(direct))

    def test_kernel_side_within_bound(self):
        rng = np.random.RandomState(6)
        phi, d = subinvariant_pair(rng, 3, 2, c=0.9)
        pairs = {((1,), (2,)): 1.0 + 0.5j, ((2, 1), ()): -0.3}
        for r in (0.5, 0.9, 0.99):
            res = poisson_transform(phi, d, pairs, r)
            assert res.difference <= res.bound + 1e-10

    def test_r_to_one_limit(self):
        # closed-form transform converges to the r=1 value at rate O(1-r)
        rng = np.random.RandomState(7)
        phi, d = subinvariant_pair(rng, 3, 2, c=0.9)
        pairs = {((1, 2), (2,)): 1.0}
        lim = poisson_transform(phi, d, pairs, 1.0, 4).closed_value
        gaps = []
        for r in (0.9, 0.99, 0.999):
            val = poisson_transform(phi, d, pairs, r, 4).closed_value
            gaps.append(op_norm(val - lim))
        assert gaps[0] >= gaps[1] >= gaps[2]
        scale = max(op_norm(lim), 1e-12)
        assert gaps[2] <= 10 * 0.001 * scale

    def test_word_too_long(self):
        with pytest.raises(MalformedInputError):
            poisson_transform(
                scalar_family(), np.array([[1.0]]), {((1, 1, 1), ()): 1.0}, 0.9, 2
            )


class TestCbBound:
    def test_identity_polynomial(self):
        rng = np.random.RandomState(8)
        phi, d = subinvariant_pair(rng, 3, 2)
        rep = cb_bound_check(phi, d, {((), ()): 1.0}, 5)
        assert rep.lhs == pytest.approx(op_norm(d), rel=1e-10)
        assert not rep.violation

    def test_scalar_pair(self):
        rep = cb_bound_check(scalar_family(), np.array([[1.0]]), {((1,), (1,)): 1.0}, 6)
        assert rep.lhs == pytest.approx(SCALAR_A**2, abs=1e-12)
        assert rep.creation_norm_bound == pytest.approx(1.0, abs=1e-10)
        assert not rep.violation

    def test_random_degree_two(self):
        rng = np.random.RandomState(9)
        for _ in range(5):
            phi, d = subinvariant_pair(rng, 3, 2, c=0.9)
            pairs = {
                ((1,), ()): complex(rng.randn(), rng.randn()),
                ((2, 1), (2,)): complex(rng.randn(), rng.randn()),
            }
            rep = cb_bound_check(phi, d, pairs, 6)
            assert not rep.violation
            if rep.converged:
                assert rep.margin >= -1e-9


class TestMomentMatrix:
    def test_k0_is_psd_d(self):
        rng = np.random.RandomState(10)
        phi, d = subinvariant_pair(rng, 3, 2)
        assert moment_matrix_psd(phi, d, 0)

    def test_gram_structure_k2(self):
        rng = np.random.RandomState(11)
        phi, d = subinvariant_pair(rng, 2, 2)
        assert moment_matrix_psd(phi, d, 2)

    def test_random_k3(self):
        rng = np.random.RandomState(12)
        for _ in range(5):
            phi, d = subinvariant_pair(rng, 3, 2, c=0.9)
            assert moment_matrix_psd(phi, d, 3)


class TestSymmetricRange:
    def test_single_generator_zero(self):
        k = build_kernel(scalar_family(), np.array([[1.0]]), 0.8, 5)
        assert symmetric_range_check(k) < 1e-12

    def test_commuting_diagonal(self):
        phi = KrausFamily(
            np.stack([np.diag([0.5, 0.3]).astype(complex), np.diag([0.2, 0.6]).astype(complex)])
        )
        k = build_kernel(phi, np.eye(2), 0.8, 5)
        assert symmetric_range_check(k) <= 1e-12

    def test_noncommuting_guard(self):
        rng = np.random.RandomState(13)
        phi = contractive_family(rng, 3, 2)
        k = build_kernel(phi, np.eye(3), 0.8, 4)
        with pytest.raises(PreconditionError):
            symmetric_range_check(k)
