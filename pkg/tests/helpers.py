"""Shared construction helpers and independent oracles for the test suite.

The oracles here (vectorized superoperator via np.kron, explicit partial
sums, long power iterations) intentionally avoid the library's hot kernels,
so agreement between them and the package is a genuine dual-route check.
"""

import numpy as np

from cpfock.cpmap import KrausFamily


def haar_unitary(rng, d):
    z = rng.randn(d, d) + 1j * rng.randn(d, d)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_family(rng, d, n):
    return KrausFamily(rng.randn(n, d, d) + 1j * rng.randn(n, d, d))


def contractive_family(rng, d, n, c=0.95):
    """Random Kraus family scaled so that lambda_max(sum A A*) = c."""
    ops = rng.randn(n, d, d) + 1j * rng.randn(n, d, d)
    s = sum(a @ a.conj().T for a in ops)
    return KrausFamily(ops * np.sqrt(c / np.linalg.eigvalsh(s)[-1]))


def strict_family(rng, d, n, r_target=0.8):
    """Random family rescaled to spectral radius exactly r_target."""
    fam = random_family(rng, d, n)
    r = np.max(np.abs(np.linalg.eigvals(super_matrix(fam))))
    return KrausFamily(fam.ops * np.sqrt(r_target / r))


def unital_family(rng, d, n):
    """sum A_i A_i^* = I via scaled Haar unitaries."""
    return KrausFamily(np.stack([haar_unitary(rng, d) for _ in range(n)]) / np.sqrt(n))


def random_psd(rng, d, scale=1.0):
    m = rng.randn(d, d) + 1j * rng.randn(d, d)
    return scale * (m @ m.conj().T) / d


def random_hermitian(rng, d):
    m = rng.randn(d, d) + 1j * rng.randn(d, d)
    return 0.5 * (m + m.conj().T)


def subinvariant_pair(rng, d, n, c=0.85, ridge=0.1):
    """(phi, D) with D = sum_k phi^k(R) for a ridged random PSD R, so that
    D - phi(D) = R - phi^K(R) >= 0 holds with margin."""
    phi = contractive_family(rng, d, n, c=c)
    r = random_psd(rng, d) + ridge * np.eye(d)
    acc = r.copy()
    cur = r.copy()
    for _ in range(400):
        cur = sum(a @ cur @ a.conj().T for a in phi.ops)
        acc += cur
        if np.linalg.norm(cur) < 1e-14:
            break
    return phi, 0.5 * (acc + acc.conj().T)


def super_matrix(fam: KrausFamily) -> np.ndarray:
    """Independent d^2 x d^2 vectorization oracle: vec(A X A*) = (conj(A) (x) A) vec X."""
    d = fam.dim
    m = np.zeros((d * d, d * d), dtype=np.complex128)
    for a in fam.ops:
        m += np.kron(a.conj(), a)
    return m


def vec_f(x):
    return np.asarray(x).reshape(-1, order="F")


def unvec_f(v, d):
    return np.asarray(v).reshape(d, d, order="F")


def apply_oracle(fam: KrausFamily, x, k=1):
    """phi^k(X) through the vectorization oracle."""
    m = np.linalg.matrix_power(super_matrix(fam), k)
    return unvec_f(m @ vec_f(x), fam.dim)


def block_diag(*mats):
    mats = [np.asarray(m, dtype=np.complex128) for m in mats]
    dim = sum(m.shape[0] for m in mats)
    out = np.zeros((dim, dim), dtype=np.complex128)
    i = 0
    for m in mats:
        out[i : i + m.shape[0], i : i + m.shape[0]] = m
        i += m.shape[0]
    return out


def gap_family(rng, d_unitary, d_contraction, c=0.9):
    """Unitary (+) c-contraction block family: transient spectral gap >= 1 - c."""
    u = haar_unitary(rng, d_unitary)
    v = c * haar_unitary(rng, d_contraction)
    return KrausFamily(np.stack([block_diag(u, v)]))


def free_truncation(level, n=2):
    """Kraus family of the truncated creation operators (the free module)."""
    from cpfock.fock import build_fock

    fock, cre = build_fock(n, level)
    return KrausFamily(np.stack([c.toarray().astype(np.complex128) for c in cre.ops])), fock
