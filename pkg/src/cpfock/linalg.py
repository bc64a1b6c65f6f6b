"""Dense complex matrix substrate with tolerance-disciplined predicates.

Every positivity / rank / kernel decision in the toolkit routes through this
module so that one tolerance convention (``atol + rtol * scale``) governs all
certificates.  Eigen- and singular-value work is delegated to LAPACK via
numpy/scipy; a general spectral projector (ordered Schur + Sylvester) is
provided for the superoperator machinery.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import MalformedInputError, NotInvertibleError, NotPSDError

__all__ = [
    "Tolerance",
    "DEFAULT_TOL",
    "HermitianOperator",
    "as_matrix",
    "mat",
    "is_psd",
    "psd_sqrt",
    "kernel_basis",
    "op_norm",
    "trace",
    "rank",
    "pinv",
    "inverse_psd",
    "spectral_projector",
]

HERMITIAN_DEFECT_RATIO = 1e-8
# below this absolute defect a matrix is indistinguishable from Hermitian
# rounding noise regardless of its (possibly tiny) norm
HERMITIAN_DEFECT_FLOOR = 1e-12


@dataclass(frozen=True)
class Tolerance:
    """Absolute/relative tolerance pair.

    The effective threshold for a comparison at scale ``s`` is
    ``atol + rtol * s``.
    """

    atol: float = 1e-10
    rtol: float = 1e-10

    def __post_init__(self):
        if self.atol < 0 or self.rtol < 0:
            raise MalformedInputError("tolerances must be nonnegative")

    def threshold(self, scale: float = 1.0) -> float:
        return self.atol + self.rtol * scale


DEFAULT_TOL = Tolerance()


def as_matrix(x, *, square: bool = False) -> np.ndarray:
    """Coerce to a finite complex 2-d array (copying only if needed)."""
    if isinstance(x, HermitianOperator):
        return x.matrix
    m = np.asarray(x, dtype=np.complex128)
    if m.ndim != 2:
        raise MalformedInputError(f"expected a matrix, got ndim={m.ndim}")
    if square and m.shape[0] != m.shape[1]:
        raise MalformedInputError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise MalformedInputError("matrix has non-finite entries")
    return m


# short internal alias
mat = as_matrix


class HermitianOperator:
    """A square complex matrix certified Hermitian at construction.

    The stored matrix is the Hermitian part (M + M*)/2; the spectral norm of
    the discarded anti-Hermitian part is recorded as ``symmetry_defect``.
    A defect above ``1e-8 * ||M||`` is rejected: all operators of interest
    here are selfadjoint, and silent asymmetry corrupts eigen-based logic.
    """

    __slots__ = ("matrix", "symmetry_defect", "_eig")

    def __init__(self, m, *, _trusted: bool = False):
        m = as_matrix(m, square=True)
        if _trusted:
            sym, defect = m, 0.0
        else:
            sym = 0.5 * (m + m.conj().T)
            defect = op_norm(m - m.conj().T)
            scale = op_norm(m)
            if defect > HERMITIAN_DEFECT_RATIO * scale and defect > HERMITIAN_DEFECT_FLOOR:
                raise MalformedInputError(
                    f"matrix is not Hermitian: defect {defect:.3e} exceeds "
                    f"{HERMITIAN_DEFECT_RATIO:.0e} * norm ({scale:.3e})"
                )
        object.__setattr__(self, "matrix", sym)
        object.__setattr__(self, "symmetry_defect", float(defect))
        object.__setattr__(self, "_eig", None)

    def __setattr__(self, name, value):
        raise AttributeError("HermitianOperator is immutable")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigh(self):
        """Cached eigendecomposition (ascending eigenvalues)."""
        if self._eig is None:
            object.__setattr__(self, "_eig", np.linalg.eigh(self.matrix))
        return self._eig

    def eigenvalues(self) -> np.ndarray:
        return self.eigh()[0]

    def norm(self) -> float:
        w = self.eigenvalues()
        return float(max(abs(w[0]), abs(w[-1]))) if w.size else 0.0

    def __array__(self, dtype=None, copy=None):
        a = self.matrix
        if dtype is not None:
            a = a.astype(dtype)
        return a

    def __repr__(self):
        return f"HermitianOperator(dim={self.dim}, defect={self.symmetry_defect:.2e})"


def _herm(m) -> HermitianOperator:
    """Wrap an already-symmetric result without re-certification."""
    m = np.asarray(m, dtype=np.complex128)
    return HermitianOperator(0.5 * (m + m.conj().T), _trusted=True)


def op_norm(m) -> float:
    """Spectral norm (largest singular value)."""
    m = mat(m) if not isinstance(m, np.ndarray) else m
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def trace(m) -> complex:
    return complex(np.trace(mat(m)))


def is_psd(h, tol: Tolerance = DEFAULT_TOL) -> bool:
    """min eigenvalue >= -(atol + rtol * ||H||), Hermitian input."""
    h = h if isinstance(h, HermitianOperator) else HermitianOperator(mat(h))
    w = h.eigenvalues()
    if w.size == 0:
        return True
    scale = max(abs(w[0]), abs(w[-1]))
    return bool(w[0] >= -tol.threshold(scale))


def psd_sqrt(h, tol: Tolerance = DEFAULT_TOL) -> HermitianOperator:
    """PSD square root; eigenvalues in [-threshold, 0] are clamped to 0."""
    h = h if isinstance(h, HermitianOperator) else HermitianOperator(mat(h))
    w, v = h.eigh()
    scale = max(abs(w[0]), abs(w[-1])) if w.size else 0.0
    thr = tol.threshold(scale)
    if w.size and w[0] < -thr:
        raise NotPSDError(f"matrix is not PSD: min eigenvalue {w[0]:.3e} < -{thr:.3e}")
    w = np.clip(w, 0.0, None)
    return _herm((v * np.sqrt(w)) @ v.conj().T)


def kernel_basis(m, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis (columns) of the numerical null space of m."""
    m = mat(m)
    if m.size == 0:
        return np.eye(m.shape[1], dtype=np.complex128)
    _, s, vh = np.linalg.svd(m)
    smax = s[0] if s.size else 0.0
    thr = tol.threshold(smax)
    nkeep = int(np.sum(s > thr))
    return vh[nkeep:].conj().T


def rank(m, tol: Tolerance = DEFAULT_TOL) -> int:
    """Numerical rank: singular values above atol + rtol * sigma_max."""
    m = mat(m)
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    smax = s[0] if s.size else 0.0
    return int(np.sum(s > tol.threshold(smax)))


def pinv(m, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse with the kernel_basis singular cutoff."""
    m = mat(m)
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    smax = s[0] if s.size else 0.0
    thr = tol.threshold(smax)
    inv = np.where(s > thr, 1.0 / np.where(s > thr, s, 1.0), 0.0)
    return (vh.conj().T * inv) @ u.conj().T


def inverse_psd(h, tol: Tolerance = DEFAULT_TOL) -> HermitianOperator:
    """Inverse of a positive definite operator; fails if numerically singular."""
    h = h if isinstance(h, HermitianOperator) else HermitianOperator(mat(h))
    w, v = h.eigh()
    scale = max(abs(w[0]), abs(w[-1])) if w.size else 0.0
    thr = tol.threshold(scale)
    if w.size == 0 or w[0] <= thr:
        raise NotInvertibleError(
            f"operator is not (positive) invertible: min eigenvalue "
            f"{w[0] if w.size else 0.0:.3e} <= threshold {thr:.3e}"
        )
    return _herm((v / w) @ v.conj().T)


def spectral_projector(m, select) -> np.ndarray:
    """Oblique spectral projector onto the invariant subspace of ``m``
    spanned by eigenvalues with ``select(lam)`` true.

    Uses an ordered complex Schur form; the selected and unselected spectra
    must be disjoint (the caller picks ``select`` with a safety margin).
    """
    m = mat(m, square=True)
    d = m.shape[0]
    t, z, sdim = scipy.linalg.schur(m, output="complex", sort=select)
    if sdim == 0:
        return np.zeros((d, d), dtype=np.complex128)
    if sdim == d:
        return np.eye(d, dtype=np.complex128)
    t11 = t[:sdim, :sdim]
    t12 = t[:sdim, sdim:]
    t22 = t[sdim:, sdim:]
    y = scipy.linalg.solve_sylvester(t11, -t22, t12)
    p = np.zeros((d, d), dtype=np.complex128)
    p[:sdim, :sdim] = np.eye(sdim)
    p[:sdim, sdim:] = y
    return z @ p @ z.conj().T
