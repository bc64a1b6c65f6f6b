"""Completely positive maps given by finite Kraus families.

A family {A_1, ..., A_n} of d x d matrices defines phi(X) = sum A_i X A_i^*
and its adjoint phi*(X) = sum A_i^* X A_i.  This module owns application,
powers, the vectorized d^2 x d^2 superoperator (the brute-force oracle for
fixed points, spectral radius and Cesaro limits), map norms, spectral radius,
and the purity / power-boundedness classification.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DimensionMismatchError, MalformedInputError
from .linalg import (
    DEFAULT_TOL,
    HermitianOperator,
    Tolerance,
    as_matrix,
    op_norm,
    spectral_projector,
)

__all__ = [
    "KrausFamily",
    "Superoperator",
    "MapClassification",
    "vec",
    "unvec",
    "apply",
    "apply_adjoint",
    "power_apply",
    "map_norm_power",
    "spectral_radius",
    "classify",
    "direct_sum",
    "iterate_to_limit",
]

# Peripheral eigenvalues of a defective cluster split like eps^(1/m); this
# band must dominate that split for the rank test to see Jordan structure.
PERIPHERAL_BAND = 1e-5


@dataclass(frozen=True)
class KrausFamily:
    """Ordered family of n complex d x d Kraus operators.

    The single source of truth for a CP map; immutable after construction.
    """

    ops: np.ndarray  # shape (n, d, d), complex128, C-contiguous

    def __post_init__(self):
        a = np.array(self.ops, dtype=np.complex128, order="C", copy=True)
        if a.ndim != 3 or a.shape[1] != a.shape[2]:
            raise MalformedInputError(f"kraus stack must be (n, d, d), got {a.shape}")
        if a.shape[0] < 1 or a.shape[1] < 1:
            raise MalformedInputError("need n >= 1 operators of dimension d >= 1")
        if not np.all(np.isfinite(a)):
            raise MalformedInputError("kraus operators have non-finite entries")
        a.setflags(write=False)  # families are shared freely across threads
        object.__setattr__(self, "ops", a)

    @classmethod
    def from_matrices(cls, matrices) -> "KrausFamily":
        mats = [as_matrix(m, square=True) for m in matrices]
        dims = {m.shape[0] for m in mats}
        if len(dims) != 1:
            raise DimensionMismatchError(f"kraus operators of mixed dimensions {dims}")
        return cls(np.stack(mats))

    @property
    def n(self) -> int:
        return self.ops.shape[0]

    @property
    def dim(self) -> int:
        return self.ops.shape[1]

    def scaled(self, c: float) -> "KrausFamily":
        """Family with every operator multiplied by c (map scales by c^2)."""
        return KrausFamily(self.ops * c)

    def conjugated(self, r: np.ndarray) -> "KrausFamily":
        """Family {r^-1 A_i r}; see similarity.conjugate_map for the checked API."""
        rinv = np.linalg.inv(as_matrix(r, square=True))
        return KrausFamily(np.stack([rinv @ a @ r for a in self.ops]))

    def max_op_norm(self) -> float:
        return max(op_norm(a) for a in self.ops)


def _check_dims(phi: KrausFamily, x: np.ndarray):
    if x.shape != (phi.dim, phi.dim):
        raise DimensionMismatchError(
            f"operand shape {x.shape} does not match map dimension {phi.dim}"
        )


def apply(phi: KrausFamily, x) -> HermitianOperator:
    """phi(X) = sum A_i X A_i^* for Hermitian X."""
    xm = as_matrix(x, square=True)
    _check_dims(phi, xm)
    return HermitianOperator(kernels.apply_map(phi.ops, xm))


def apply_adjoint(phi: KrausFamily, x) -> HermitianOperator:
    """phi*(X) = sum A_i^* X A_i; trace-dual to apply."""
    xm = as_matrix(x, square=True)
    _check_dims(phi, xm)
    return HermitianOperator(kernels.apply_adjoint(phi.ops, xm))


def power_apply(phi: KrausFamily, x, k: int) -> HermitianOperator:
    """phi^k(X); phi^0(X) = X."""
    if k < 0:
        raise MalformedInputError("power must be >= 0")
    xm = as_matrix(x, square=True)
    _check_dims(phi, xm)
    return HermitianOperator(kernels.power_apply(phi.ops, xm, k))


def map_norm_power(phi: KrausFamily, k: int) -> float:
    """||phi^k|| computed as ||phi^k(I)||.

    For positive maps the norm is attained at the identity, so this equals
    the true map norm; unit tests probe the sup definition by sampling
    Hermitian contractions.
    """
    if k < 1:
        raise MalformedInputError("power must be >= 1")
    eye = np.eye(phi.dim, dtype=np.complex128)
    return op_norm(kernels.power_apply(phi.ops, eye, k))


def vec(x: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(x).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int) -> np.ndarray:
    return np.asarray(v).reshape(d, d, order="F")


@dataclass(frozen=True)
class Superoperator:
    """d^2 x d^2 matrix acting on column-stacked operands.

    unvec(matrix @ vec(X)) = phi(X); used as an independent oracle and for
    all spectrum-based logic.
    """

    dim: int
    matrix: np.ndarray
    _eigvals: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_family(cls, phi: KrausFamily) -> "Superoperator":
        d = phi.dim
        m = np.zeros((d * d, d * d), dtype=np.complex128)
        for a in phi.ops:
            m += np.kron(a.conj(), a)
        return cls(dim=d, matrix=m)

    def apply(self, x) -> np.ndarray:
        xm = as_matrix(x, square=True)
        return unvec(self.matrix @ vec(xm), self.dim)

    def eigenvalues(self) -> np.ndarray:
        if "w" not in self._eigvals:
            self._eigvals["w"] = np.linalg.eigvals(self.matrix)
        return self._eigvals["w"]

    def spectral_radius(self) -> float:
        w = self.eigenvalues()
        return float(np.max(np.abs(w))) if w.size else 0.0

    def projector(self, select) -> np.ndarray:
        return spectral_projector(self.matrix, select)


def spectral_radius(phi: KrausFamily) -> float:
    """r(phi) = lim ||phi^k||^(1/k), from the superoperator spectrum."""
    return Superoperator.from_family(phi).spectral_radius()


@dataclass(frozen=True)
class MapClassification:
    spectral_radius: float
    is_unital: bool
    is_contractive: bool
    is_pure: bool
    is_power_bounded: bool
    peripheral_semisimple: bool
    details: dict = field(default_factory=dict)


def _peripheral_semisimple(superop: Superoperator, band: float) -> tuple[bool, dict]:
    """Check that every eigenvalue within `band` of the unit circle has equal
    algebraic and geometric multiplicity (rank test on Phi - lambda I)."""
    w = superop.eigenvalues()
    peripheral = w[np.abs(np.abs(w) - 1.0) <= band]
    if peripheral.size == 0:
        return True, {"peripheral_clusters": []}
    # cluster by proximity
    order = np.argsort(np.angle(peripheral))
    sorted_w = peripheral[order]
    clusters: list[list[complex]] = [[sorted_w[0]]]
    for lam in sorted_w[1:]:
        if abs(lam - clusters[-1][-1]) <= band:
            clusters[-1].append(lam)
        else:
            clusters.append([lam])
    # wrap-around merge (angle sort splits clusters straddling -pi)
    if len(clusters) > 1 and abs(clusters[0][0] - clusters[-1][-1]) <= band:
        clusters[0] = clusters.pop() + clusters[0]
    scale = op_norm(superop.matrix)
    info = []
    ok = True
    d2 = superop.matrix.shape[0]
    for cl in clusters:
        lam = np.mean(cl)
        alg = len(cl)
        s = np.linalg.svd(superop.matrix - lam * np.eye(d2), compute_uv=False)
        geom = int(np.sum(s <= band * (1.0 + scale)))
        info.append({"lambda": complex(lam), "algebraic": alg, "geometric": geom})
        if geom < alg:
            ok = False
    return ok, {"peripheral_clusters": info}


def classify(phi: KrausFamily, tol: Tolerance = DEFAULT_TOL) -> MapClassification:
    """Spectral radius plus unital / contractive / pure / power-bounded flags.

    Power-boundedness uses the exact finite-dimensional criterion: r < 1, or
    r = 1 with a semisimple peripheral spectrum of the superoperator.  Purity
    (phi^k(I) -> 0) is verified by the monotone limit when phi is contractive
    and is equivalent to r < 1 for Kraus (hence CP) maps otherwise.
    """
    d = phi.dim
    eye = np.eye(d, dtype=np.complex128)
    superop = Superoperator.from_family(phi)
    r = superop.spectral_radius()
    phi_i = kernels.apply_map(phi.ops, eye)
    scale = max(1.0, op_norm(phi_i))
    unital = op_norm(phi_i - eye) <= tol.threshold(scale)
    w_contr = np.linalg.eigvalsh(0.5 * ((eye - phi_i) + (eye - phi_i).conj().T))
    contractive = bool(w_contr[0] >= -tol.threshold(scale))

    if contractive:
        limit, _, _, converged = iterate_to_limit(phi, eye, tol=tol)
        pure = converged and op_norm(limit) <= tol.threshold(1.0)
    else:
        pure = r < 1.0 - 1e-9

    if r > 1.0 + PERIPHERAL_BAND:
        power_bounded, semisimple, details = False, False, {"reason": "r > 1"}
    elif r < 1.0 - PERIPHERAL_BAND:
        power_bounded, semisimple, details = True, True, {"reason": "r < 1"}
    else:
        semisimple, details = _peripheral_semisimple(superop, PERIPHERAL_BAND)
        power_bounded = semisimple
    return MapClassification(
        spectral_radius=r,
        is_unital=bool(unital),
        is_contractive=contractive,
        is_pure=bool(pure),
        is_power_bounded=power_bounded,
        peripheral_semisimple=semisimple,
        details=details,
    )


def direct_sum(phi: KrausFamily, psi: KrausFamily) -> KrausFamily:
    """Kraus family of the block-diagonal map (phi (+) psi)(X (+) Y).

    Families of unequal length are zero-padded so operators pair up.
    """
    n = max(phi.n, psi.n)
    d1, d2 = phi.dim, psi.dim
    out = np.zeros((n, d1 + d2, d1 + d2), dtype=np.complex128)
    out[: phi.n, :d1, :d1] = phi.ops
    out[: psi.n, d1:, d1:] = psi.ops
    return KrausFamily(out)


def iterate_to_limit(
    phi: KrausFamily,
    x: np.ndarray,
    tol: Tolerance = DEFAULT_TOL,
    max_iter: int = 10000,
    confirmations: int = 3,
):
    """Iterate phi on x until the step norm stays below threshold.

    Returns (limit, iterations, residuals, converged).  The stopping rule is
    ||phi^k(x) - phi^(k+1)(x)|| <= atol + rtol * ||x|| for `confirmations`
    consecutive steps (monotone PSD sequences can plateau falsely once).
    Residuals use the Frobenius norm, an upper bound on the spectral norm,
    so the certificate is conservative.
    """
    xm = as_matrix(x, square=True)
    scale = op_norm(xm)
    thr = tol.threshold(scale)
    blowup = 1e12 * (1.0 + scale)
    cur = xm
    residuals: list[float] = []
    streak = 0
    for k in range(1, max_iter + 1):
        nxt = kernels.apply_map(phi.ops, cur)
        res = float(np.linalg.norm(nxt - cur))
        residuals.append(res)
        cur = nxt
        if not np.isfinite(res) or res > blowup:
            return cur, k, residuals, False  # diverging orbit: stop early
        streak = streak + 1 if res <= thr else 0
        if streak >= confirmations:
            return cur, k, residuals, True
    return cur, max_iter, residuals, False
