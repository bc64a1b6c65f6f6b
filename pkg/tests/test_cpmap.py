"""CP-map core: application, adjoint, powers, superoperator, classification."""

import numpy as np
import pytest

from cpfock.cpmap import (
    KrausFamily,
    Superoperator,
    apply,
    apply_adjoint,
    classify,
    direct_sum,
    map_norm_power,
    power_apply,
    spectral_radius,
    unvec,
    vec,
)
from cpfock.errors import DimensionMismatchError, MalformedInputError
from cpfock.linalg import is_psd, op_norm
from helpers import (
    apply_oracle,
    contractive_family,
    haar_unitary,
    random_family,
    random_hermitian,
    unital_family,
)

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


class TestKrausFamily:
    def test_validation(self):
        with pytest.raises(MalformedInputError):
            KrausFamily(np.zeros((0, 2, 2)))
        with pytest.raises(MalformedInputError):
            KrausFamily(np.zeros((1, 2, 3)))
        with pytest.raises(DimensionMismatchError):
            KrausFamily.from_matrices([np.eye(2), np.eye(3)])

    def test_dims(self):
        fam = KrausFamily.from_matrices([np.eye(3), np.eye(3)])
        assert (fam.n, fam.dim) == (2, 3)


class TestApply:
    def test_pauli_conjugation(self):
        phi = KrausFamily.from_matrices([PAULI_X])
        out = apply(phi, np.diag([1.0, 2.0]))
        assert np.allclose(out.matrix, np.diag([2.0, 1.0]))

    def test_scalar_family(self):
        phi = KrausFamily.from_matrices([0.5 * np.eye(2)])
        assert np.allclose(apply(phi, np.eye(2)).matrix, 0.25 * np.eye(2))

    def test_matches_superoperator_oracle(self):
        rng = np.random.RandomState(0)
        phi = random_family(rng, 3, 2)
        x = random_hermitian(rng, 3)
        expected = apply_oracle(phi, x)
        assert op_norm(apply(phi, x).matrix - expected) < 1e-12 * (1 + op_norm(x))

    def test_dim_mismatch(self):
        phi = KrausFamily.from_matrices([np.eye(2)])
        with pytest.raises(DimensionMismatchError):
            apply(phi, np.eye(3))


class TestApplyAdjoint:
    def test_unitary(self):
        rng = np.random.RandomState(1)
        u = haar_unitary(rng, 3)
        phi = KrausFamily.from_matrices([u])
        x = random_hermitian(rng, 3)
        assert np.allclose(apply_adjoint(phi, x).matrix, u.conj().T @ x @ u)

    def test_diagonal(self):
        phi = KrausFamily.from_matrices([np.diag([1.0, 0.5])])
        assert np.allclose(apply_adjoint(phi, np.eye(2)).matrix, np.diag([1.0, 0.25]))

    def test_trace_duality(self):
        rng = np.random.RandomState(2)
        phi = random_family(rng, 4, 3)
        for _ in range(10):
            x, y = random_hermitian(rng, 4), random_hermitian(rng, 4)
            lhs = np.trace(apply(phi, x).matrix @ y)
            rhs = np.trace(x @ apply_adjoint(phi, y).matrix)
            assert abs(lhs - rhs) < 1e-12 * (1 + abs(lhs))


class TestPowerApply:
    def test_zero_is_identity(self):
        rng = np.random.RandomState(3)
        phi = random_family(rng, 3, 2)
        x = random_hermitian(rng, 3)
        assert np.allclose(power_apply(phi, x, 0).matrix, x)

    def test_diagonal_power(self):
        phi = KrausFamily.from_matrices([np.diag([1.0, 0.5])])
        out = power_apply(phi, np.eye(2), 3)
        assert np.allclose(out.matrix, np.diag([1.0, 0.25**3]))

    def test_matches_superoperator_power(self):
        rng = np.random.RandomState(4)
        phi = contractive_family(rng, 3, 2)
        x = random_hermitian(rng, 3)
        expected = apply_oracle(phi, x, k=5)
        assert op_norm(power_apply(phi, x, 5).matrix - expected) < 1e-11 * (1 + op_norm(x))


class TestMapNorm:
    def test_scalar(self):
        phi = KrausFamily.from_matrices([0.5 * np.eye(2)])
        assert map_norm_power(phi, 2) == pytest.approx(1.0 / 16.0)

    def test_unital(self):
        rng = np.random.RandomState(5)
        phi = unital_family(rng, 3, 2)
        for k in (1, 3, 7):
            assert map_norm_power(phi, k) == pytest.approx(1.0, abs=1e-10)

    def test_submultiplicative(self):
        rng = np.random.RandomState(6)
        phi = contractive_family(rng, 4, 2)
        n1 = map_norm_power(phi, 1)
        for k in (2, 3, 5):
            assert map_norm_power(phi, k) <= n1**k + 1e-12

    def test_norm_attained_at_identity(self):
        # documented assumption: ||phi^k|| = ||phi^k(I)|| for positive maps;
        # probe the sup definition on random Hermitian contractions
        rng = np.random.RandomState(7)
        phi = contractive_family(rng, 4, 3)
        bound = map_norm_power(phi, 1)
        for _ in range(50):
            x = random_hermitian(rng, 4)
            x /= max(op_norm(x), 1e-12)
            assert op_norm(apply(phi, x).matrix) <= bound + 1e-10


class TestSpectralRadius:
    def test_scalar(self):
        phi = KrausFamily.from_matrices([0.7 * np.eye(3)])
        assert spectral_radius(phi) == pytest.approx(0.49, abs=1e-12)

    def test_pauli(self):
        phi = KrausFamily.from_matrices([PAULI_X])
        assert spectral_radius(phi) == pytest.approx(1.0, abs=1e-12)

    def test_power_iteration_crosscheck(self):
        # ||phi^k(I)||^(1/k) upper-bounds r for every k and carries an
        # O(log C / k) bias from the Perron constant; the two-point ratio
        # (||phi^(2k)(I)|| / ||phi^k(I)||)^(1/k) cancels C and meets 1e-3.
        rng = np.random.RandomState(8)
        for _ in range(5):
            phi = contractive_family(rng, 4, 2, c=0.9)
            r_eig = spectral_radius(phi)
            k = 200
            n_k = map_norm_power(phi, k)
            n_2k = map_norm_power(phi, 2 * k)
            assert r_eig <= n_k ** (1.0 / k) + 1e-10
            r_ratio = (n_2k / n_k) ** (1.0 / k)
            assert abs(r_eig - r_ratio) <= 1e-3 * max(r_eig, 1e-6)

    def test_scaling_quadratic(self):
        rng = np.random.RandomState(9)
        phi = random_family(rng, 3, 2)
        c = 0.37
        assert spectral_radius(phi.scaled(c)) == pytest.approx(
            c * c * spectral_radius(phi), rel=1e-10
        )


class TestSuperoperator:
    def test_acts_on_basis(self):
        rng = np.random.RandomState(10)
        phi = random_family(rng, 3, 2)
        superop = Superoperator.from_family(phi)
        d = 3
        for i in range(d):
            for j in range(d):
                e = np.zeros((d, d), dtype=complex)
                e[i, j] = 1.0
                direct = sum(a @ e @ a.conj().T for a in phi.ops)
                assert op_norm(superop.apply(e) - direct) < 1e-12

    def test_vec_unvec_roundtrip(self):
        rng = np.random.RandomState(11)
        x = rng.randn(4, 4) + 1j * rng.randn(4, 4)
        assert np.allclose(unvec(vec(x), 4), x)


class TestClassify:
    def test_unitary(self):
        rng = np.random.RandomState(12)
        phi = KrausFamily.from_matrices([haar_unitary(rng, 3)])
        cls = classify(phi)
        assert cls.spectral_radius == pytest.approx(1.0, abs=1e-9)
        assert cls.is_unital and cls.is_contractive and cls.is_power_bounded
        assert not cls.is_pure

    def test_scalar_half(self):
        phi = KrausFamily.from_matrices([0.5 * np.eye(2)])
        cls = classify(phi)
        assert cls.spectral_radius == pytest.approx(0.25, abs=1e-12)
        assert cls.is_contractive and cls.is_pure and cls.is_power_bounded
        assert not cls.is_unital

    def test_jordan_block_not_power_bounded(self):
        phi = KrausFamily.from_matrices([np.array([[1.0, 1.0], [0.0, 1.0]])])
        cls = classify(phi)
        assert cls.spectral_radius == pytest.approx(1.0, abs=1e-4)
        assert not cls.is_power_bounded
        assert not cls.peripheral_semisimple


class TestProperties:
    def test_complete_positivity_level_one(self):
        # PSD in, PSD out: 200 random trials across dimensions up to 64
        rng = np.random.RandomState(13)
        for _ in range(200):
            d = int(rng.choice([2, 3, 5, 8, 16, 64], p=[0.3, 0.25, 0.2, 0.15, 0.07, 0.03]))
            phi = random_family(rng, d, int(rng.randint(1, 4)))
            m = rng.randn(d, d) + 1j * rng.randn(d, d)
            x = m @ m.conj().T
            assert is_psd(apply(phi, x))

    def test_monotone_contractive_iterates(self):
        rng = np.random.RandomState(14)
        phi = contractive_family(rng, 4, 2)
        prev = np.eye(4, dtype=complex)
        for _ in range(10):
            nxt = apply(phi, prev).matrix
            assert is_psd(prev - nxt)
            prev = nxt

    def test_direct_sum_blocks(self):
        rng = np.random.RandomState(15)
        f1, f2 = random_family(rng, 2, 2), random_family(rng, 3, 1)
        ds = direct_sum(f1, f2)
        x1, x2 = random_hermitian(rng, 2), random_hermitian(rng, 3)
        x = np.zeros((5, 5), dtype=complex)
        x[:2, :2], x[2:, 2:] = x1, x2
        out = apply(ds, x).matrix
        assert np.allclose(out[:2, :2], apply(f1, x1).matrix)
        assert np.allclose(out[2:, 2:], apply(f2, x2).matrix)
        assert np.allclose(out[:2, 2:], 0.0)
