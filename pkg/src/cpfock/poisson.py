"""Poisson kernels and Poisson transforms on truncated Fock spaces.

For a Kraus map phi, a subinvariant PSD operator D (D >= 0, phi(D) <= D) and
a radius 0 < r <= 1, the kernel K maps the carrier space into
(truncated Fock) (x) carrier, with word-alpha block r^|alpha| Delta_r A_alpha^*
where Delta_r = (D - r^2 phi(D))^(1/2).  Its Gram recovers D (up to an explicit
truncation tail), it intertwines r A_i^* with S_i^* (x) I, and sandwiching
word-pair polynomials in the creation operators reproduces the closed form
r^(|a|+|b|) A_a D A_b^*.  Every result carries its truncation-error bound.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels as _k
from .cpmap import KrausFamily, iterate_to_limit
from .errors import (
    ConvergenceError,
    MalformedInputError,
    PreconditionError,
    SubinvarianceError,
)
from .fock import (
    DEFAULT_DIM_CAP,
    TruncatedFock,
    build_fock,
    fock_dimension,
    symmetric_projector,
    word_operator,
)
from .linalg import DEFAULT_TOL, HermitianOperator, Tolerance, as_matrix, is_psd, op_norm, psd_sqrt

__all__ = [
    "PoissonKernel",
    "subinvariance_check",
    "build_kernel",
    "kernel_gram",
    "intertwining_residual",
    "poisson_transform",
    "PoissonTransformResult",
    "cb_bound_check",
    "CbBoundReport",
    "moment_matrix_psd",
    "symmetric_range_check",
]

DEFAULT_TAIL_TARGET = 1e-8
MAX_AUTO_LEVEL = 5000


def subinvariance_check(phi: KrausFamily, d_op, tol: Tolerance = DEFAULT_TOL) -> bool:
    """Membership of D in the cone {X >= 0 : phi(X) <= X}, at tolerance."""
    dm = as_matrix(d_op, square=True)
    if dm.shape[0] != phi.dim:
        raise MalformedInputError("D dimension does not match the map")
    h = HermitianOperator(dm)
    if not is_psd(h, tol):
        return False
    defect = h.matrix - _k.apply_map(phi.ops, h.matrix)
    return is_psd(HermitianOperator(0.5 * (defect + defect.conj().T), _trusted=True), tol)


@dataclass(frozen=True)
class PoissonKernel:
    """Matrix of K_(phi,D,r) on a truncation, with tail-error metadata.

    `blocks[i]` is the d x d block of the word with index i; `matrix` is the
    same data as a (fockdim*d) x d matrix.  `tail_bound` dominates the norm
    of the dropped part of the Gram sum.
    """

    family: KrausFamily
    d_matrix: np.ndarray
    r: float
    level: int
    fock: TruncatedFock
    blocks: np.ndarray  # (fockdim, d, d)
    delta: np.ndarray  # Delta_r
    tail_bound: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.family.dim

    @property
    def matrix(self) -> np.ndarray:
        return self.blocks.reshape(self.fock.dim * self.dim, self.dim)

    def norm(self) -> float:
        if "norm" not in self._cache:
            g = kernel_gram(self).matrix
            w = np.linalg.eigvalsh(g)
            self._cache["norm"] = float(np.sqrt(max(float(w[-1]), 0.0))) if w.size else 0.0
        return self._cache["norm"]


def _tail_bound(phi: KrausFamily, dm: np.ndarray, r: float, level: int,
                phi_inf: np.ndarray | None) -> float:
    """Norm of the Gram sum beyond `level`: ||r^(2(L+1)) phi^(L+1)(D)|| for
    r < 1, and ||phi^(L+1)(D) - phi^inf(D)|| at r = 1."""
    tail_op = _k.power_apply(phi.ops, dm, level + 1)
    if r < 1.0:
        return float(r ** (2 * (level + 1)) * op_norm(tail_op))
    return float(op_norm(tail_op - phi_inf))


def build_kernel(
    phi: KrausFamily,
    d_op,
    r: float,
    level: int | None = None,
    *,
    tol: Tolerance = DEFAULT_TOL,
    tail_target: float | None = None,
    max_dim: int = DEFAULT_DIM_CAP,
) -> PoissonKernel:
    """Assemble the Poisson kernel for (phi, D, r) at a truncation level.

    With ``level=None`` the smallest level meeting ``tail_target`` (default
    1e-8) is chosen, capped by the Fock dimension cap; the achieved
    ``tail_bound`` is recorded either way.  Raises if D is not subinvariant,
    or if an explicit level cannot meet an explicit ``tail_target``.
    """
    dm = as_matrix(d_op, square=True)
    if not subinvariance_check(phi, dm, tol):
        raise SubinvarianceError("D is not a subinvariant PSD operator for this map")
    if not 0.0 < r <= 1.0:
        raise MalformedInputError(f"radius must be in (0, 1], got {r}")
    dm = 0.5 * (dm + dm.conj().T)

    phi_inf = None
    if r == 1.0:
        phi_inf, _, residuals, converged = iterate_to_limit(phi, dm, tol=tol)
        if not converged:
            raise ConvergenceError(
                "phi^k(D) did not converge within budget (needed for the r=1 tail bound)",
                residuals,
            )

    target = DEFAULT_TAIL_TARGET if tail_target is None else tail_target
    explicit_level = level is not None
    if level is None:
        level = 0
        while True:
            bound = _tail_bound(phi, dm, r, level, phi_inf)
            if bound <= target:
                break
            if (
                fock_dimension(phi.n, level + 1) > max_dim
                or level >= MAX_AUTO_LEVEL
            ):
                break  # cap reached: keep the largest feasible level
            level += 1
    tail = _tail_bound(phi, dm, r, level, phi_inf)
    if explicit_level and tail_target is not None and tail > tail_target:
        raise MalformedInputError(
            f"level {level} too small for the requested tail bound "
            f"(achieved {tail:.3e} > target {tail_target:.3e})"
        )

    fock, _ = build_fock(phi.n, level, max_dim=max_dim)
    d = phi.dim
    delta_sq = dm - r * r * _k.apply_map(phi.ops, dm)
    delta = psd_sqrt(HermitianOperator(0.5 * (delta_sq + delta_sq.conj().T), _trusted=True), tol).matrix

    blocks = np.empty((fock.dim, d, d), dtype=np.complex128)
    blocks[0] = delta
    adags = [a.conj().T for a in phi.ops]
    for idx in range(1, fock.dim):
        w = fock.words[idx]
        rest = fock.index[w[1:]]
        blocks[idx] = r * (blocks[rest] @ adags[w[0] - 1])
    return PoissonKernel(
        family=phi,
        d_matrix=dm,
        r=float(r),
        level=level,
        fock=fock,
        blocks=blocks,
        delta=delta,
        tail_bound=tail,
    )


def kernel_gram(kernel: PoissonKernel) -> HermitianOperator:
    """K*K: equals D up to tail_bound for r < 1, and D - phi^inf(D) at r = 1."""
    g = np.einsum("aij,aik->jk", kernel.blocks.conj(), kernel.blocks)
    return HermitianOperator(0.5 * (g + g.conj().T), _trusted=True)


def intertwining_residual(kernel: PoissonKernel) -> float:
    """max_i || K (r A_i^*) - (S_i^* (x) I) K || over the truncation-exact rows.

    The identity holds exactly below the top level (the truncated S_i^* is
    faithful there); the top level is excluded as truncation-inexact.
    """
    fock = kernel.fock
    if fock.level == 0:
        return 0.0
    cut = fock.dim_upto(fock.level - 1)
    low = kernel.blocks[:cut]
    resid = 0.0
    for i in range(1, kernel.family.n + 1):
        shifted_idx = np.fromiter(
            (fock.index[(i,) + fock.words[b]] for b in range(cut)),
            dtype=np.int64,
            count=cut,
        )
        lhs = low @ (kernel.r * kernel.family.ops[i - 1].conj().T)
        rhs = kernel.blocks[shifted_idx]
        resid = max(resid, op_norm((lhs - rhs).reshape(cut * kernel.dim, kernel.dim)))
    return float(resid)


def _pair_kernel_value(kernel: PoissonKernel, alpha, beta) -> tuple[np.ndarray, int]:
    """K*(S_a S_b^* (x) I)K on the truncation, plus the depth M of the
    delta-sum actually accumulated (tail starts at M+1)."""
    fock = kernel.fock
    m = fock.level - max(len(alpha), len(beta))
    if m < 0:
        raise MalformedInputError(
            f"word pair ({alpha}, {beta}) too long for level {fock.level}"
        )
    ndelta = fock.dim_upto(m)
    ai = np.fromiter(
        (fock.index[tuple(alpha) + fock.words[t]] for t in range(ndelta)),
        dtype=np.int64,
        count=ndelta,
    )
    bi = np.fromiter(
        (fock.index[tuple(beta) + fock.words[t]] for t in range(ndelta)),
        dtype=np.int64,
        count=ndelta,
    )
    val = np.einsum("aij,aik->jk", kernel.blocks[ai].conj(), kernel.blocks[bi])
    return val, m


@dataclass(frozen=True)
class PoissonTransformResult:
    kernel_value: np.ndarray
    closed_value: np.ndarray
    difference: float
    bound: float
    r: float
    level: int
    fixed_part_norm: float  # ||phi^inf(D)||-sized obstruction at r = 1, else 0


def poisson_transform(
    phi: KrausFamily,
    d_op,
    pairs,
    r: float,
    level: int | None = None,
    *,
    tol: Tolerance = DEFAULT_TOL,
    max_dim: int = DEFAULT_DIM_CAP,
    kernel: PoissonKernel | None = None,
) -> PoissonTransformResult:
    """Evaluate sum c_(a,b) S_a S_b^* under the Poisson transform, both ways.

    (a) kernel side: K*(f (x) I)K on the truncation; (b) closed form:
    sum c r^(|a|+|b|) A_a D A_b^* (the r -> 1 limit value at r = 1).  The
    reported bound dominates their difference; at r = 1 it includes the
    fixed part phi^inf(D), which is exactly the gap between the r = 1
    kernel sandwich and the limit closed form.
    """
    pairs = {(tuple(a), tuple(b)): complex(c) for (a, b), c in pairs.items()}
    maxlen = max((max(len(a), len(b)) for a, b in pairs), default=0)
    if kernel is None:
        kernel = build_kernel(phi, d_op, r, level, tol=tol, max_dim=max_dim)
        if kernel.level < maxlen and level is None:
            # auto-level chose too shallow a truncation for these words
            kernel = build_kernel(phi, d_op, r, maxlen, tol=tol, max_dim=max_dim)
    dm = kernel.d_matrix
    d = phi.dim

    kernel_value = np.zeros((d, d), dtype=np.complex128)
    closed_value = np.zeros((d, d), dtype=np.complex128)
    bound = 0.0
    tail_norm_cache: dict[int, float] = {}
    for (alpha, beta), c in pairs.items():
        val, m = _pair_kernel_value(kernel, alpha, beta)
        kernel_value += c * val
        a_op = word_operator(phi.ops, alpha)
        b_op = word_operator(phi.ops, beta)
        closed_value += c * (r ** (len(alpha) + len(beta))) * (a_op @ dm @ b_op.conj().T)
        if m not in tail_norm_cache:
            tail_op = _k.power_apply(phi.ops, dm, m + 1)
            tail_norm_cache[m] = (r ** (2 * (m + 1))) * op_norm(tail_op)
        bound += (
            abs(c)
            * (r ** (len(alpha) + len(beta)))
            * op_norm(a_op)
            * op_norm(b_op)
            * tail_norm_cache[m]
        )
    fixed_norm = 0.0
    if r == 1.0:
        lim, _, _, converged = iterate_to_limit(phi, dm, tol=tol)
        fixed_norm = op_norm(lim) if converged else float("nan")
    return PoissonTransformResult(
        kernel_value=kernel_value,
        closed_value=closed_value,
        difference=float(op_norm(kernel_value - closed_value)),
        bound=float(bound),
        r=float(r),
        level=kernel.level,
        fixed_part_norm=float(fixed_norm),
    )


@dataclass(frozen=True)
class CbBoundReport:
    lhs: float
    d_norm: float
    creation_norm_bound: float
    converged: bool
    margin: float
    violation: bool
    values: tuple[float, ...]


def cb_bound_check(
    phi: KrausFamily,
    d_op,
    pairs,
    level_max: int = 8,
    tol: Tolerance = DEFAULT_TOL,
    *,
    max_dim: int = DEFAULT_DIM_CAP,
) -> CbBoundReport:
    """Check ||q^D(A)|| <= ||D|| * ||q(S)|| for a word-pair polynomial q.

    The left side is exact; ||q(S)|| is lower-bounded by exact compressions
    ||q(S) P_(<=k)|| at increasing k.  A violation is flagged only when the
    lower bound has converged (otherwise the margin is merely reported).
    """
    from .fock import word_pair_operator  # local: avoids a sparse import on hot paths

    dm = as_matrix(d_op, square=True)
    if not subinvariance_check(phi, dm, tol):
        raise SubinvarianceError("cb bound requires a subinvariant D")
    pairs = {(tuple(a), tuple(b)): complex(c) for (a, b), c in pairs.items()}
    deg_alpha = max((len(a) for a, _ in pairs), default=0)
    if deg_alpha > level_max:
        raise MalformedInputError("polynomial degree exceeds the level budget")

    lhs_mat = np.zeros((phi.dim, phi.dim), dtype=np.complex128)
    for (alpha, beta), c in pairs.items():
        lhs_mat += c * (
            word_operator(phi.ops, alpha) @ dm @ word_operator(phi.ops, beta).conj().T
        )
    lhs = op_norm(lhs_mat)

    fock, creation = build_fock(phi.n, level_max, max_dim=max_dim)
    q = word_pair_operator(creation, pairs)
    from .fock import _column_block_norm

    values = []
    converged = False
    for k in range(0, level_max - deg_alpha + 1):
        values.append(_column_block_norm(q, fock.dim_upto(k)))
        if len(values) >= 2 and abs(values[-1] - values[-2]) < tol.threshold(values[-1]) * 100:
            converged = True
            break
    d_norm = op_norm(dm)
    bound = d_norm * values[-1]
    margin = bound - lhs
    violation = bool(converged and margin < -tol.threshold(max(1.0, lhs)))
    return CbBoundReport(
        lhs=float(lhs),
        d_norm=float(d_norm),
        creation_norm_bound=float(values[-1]),
        converged=converged,
        margin=float(margin),
        violation=violation,
        values=tuple(values),
    )


def moment_matrix_psd(
    phi: KrausFamily, d_op, k: int, tol: Tolerance = DEFAULT_TOL
) -> bool:
    """PSD check of the moment block matrix [A_a D A_b^*] over words of
    length <= k (it factors as a Gram matrix, so this should never fail
    for subinvariant D)."""
    dm = as_matrix(d_op, square=True)
    if not subinvariance_check(phi, dm, tol):
        raise SubinvarianceError("moment matrix requires a subinvariant D")
    import itertools

    words = [()]
    for j in range(1, k + 1):
        words.extend(itertools.product(range(1, phi.n + 1), repeat=j))
    d = phi.dim
    nw = len(words)
    big = np.empty((nw * d, nw * d), dtype=np.complex128)
    wops = [word_operator(phi.ops, w) for w in words]
    for a in range(nw):
        for b in range(nw):
            big[a * d : (a + 1) * d, b * d : (b + 1) * d] = wops[a] @ dm @ wops[b].conj().T
    return is_psd(HermitianOperator(0.5 * (big + big.conj().T), _trusted=True), tol)


def symmetric_range_check(kernel: PoissonKernel, tol: Tolerance = DEFAULT_TOL) -> float:
    """||(I - P_sym) (x) I applied to K||; small iff the kernel takes values
    in (symmetric Fock) (x) carrier, which commuting Kraus operators force.

    Raises PreconditionError (with the worst commutator norm) when the
    family does not commute.
    """
    ops = kernel.family.ops
    scale = max(1.0, kernel.family.max_op_norm() ** 2)
    worst = 0.0
    for i in range(len(ops)):
        for j in range(i + 1, len(ops)):
            worst = max(worst, op_norm(ops[i] @ ops[j] - ops[j] @ ops[i]))
    if worst > tol.threshold(scale):
        raise PreconditionError(
            f"kraus operators do not commute (max commutator norm {worst:.3e})"
        )
    psym = symmetric_projector(kernel.fock)
    flat = kernel.blocks.reshape(kernel.fock.dim, kernel.dim * kernel.dim)
    out = flat - psym @ flat
    return float(op_norm(out.reshape(kernel.fock.dim * kernel.dim, kernel.dim)))
