"""Ergodic structure of a CP map: limits, decompositions, invariant subspaces.

Selfadjoint solutions of phi(X) <= X split uniquely as X = B + C with
phi(B) = B (the fixed part, the strong limit of phi^k(X)) and C pure
(phi^k(C) -> 0); Cesaro means converge to B.  For contractive maps the limit
phi^inf(I) drives a Wold-type splitting of the carrier space, and kernels of
subinvariant solutions produce certified common invariant subspaces of the
Kraus operators.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels as _k
from .cpmap import KrausFamily, Superoperator, iterate_to_limit, vec, unvec
from .errors import (
    ConvergenceError,
    ExtractionError,
    MalformedInputError,
    PreconditionError,
    SubinvarianceError,
)
from .linalg import (
    DEFAULT_TOL,
    HermitianOperator,
    Tolerance,
    as_matrix,
    is_psd,
    kernel_basis,
    op_norm,
    pinv,
    psd_sqrt,
)

__all__ = [
    "CanonicalDecomposition",
    "WoldDecomposition",
    "SolutionClass",
    "phi_infinity",
    "canonical_decomposition",
    "cesaro_mean",
    "cesaro_limit",
    "wold_decomposition",
    "classify_solution",
    "fixed_point_space",
    "extract_row_contraction",
    "pure_solution_kernel_check",
    "PureKernelReport",
    "invariant_subspaces_from_solution",
    "InvariantSubspace",
    "projection_invariance_test",
    "ProjectionInvariance",
]

SPECTRAL_BAND = 1e-6
INVARIANCE_TOL = 1e-8


def _is_subinvariant_direction(phi: KrausFamily, a: np.ndarray, tol: Tolerance) -> bool:
    """phi(A) <= A for selfadjoint A (A itself need not be PSD)."""
    defect = a - _k.apply_map(phi.ops, a)
    return is_psd(HermitianOperator(0.5 * (defect + defect.conj().T), _trusted=True), tol)


def _phi_infinity_info(
    phi: KrausFamily,
    a: np.ndarray,
    tol: Tolerance,
    max_iter: int,
):
    """(limit, iterations, residuals, mode): monotone iteration under
    subinvariance, superoperator spectral projection otherwise."""
    if _is_subinvariant_direction(phi, a, tol):
        limit, iters, residuals, converged = iterate_to_limit(phi, a, tol=tol, max_iter=max_iter)
        if not converged:
            raise ConvergenceError(
                f"phi^k(A) did not plateau within {max_iter} iterations", residuals
            )
        return limit, iters, residuals, "monotone"
    superop = Superoperator.from_family(phi)
    from .cpmap import classify

    cls = classify(phi, tol)
    if not cls.is_power_bounded:
        raise PreconditionError(
            "phi^inf is defined only for subinvariant inputs or power-bounded maps"
        )
    proj = superop.projector(lambda lam: abs(lam - 1.0) <= SPECTRAL_BAND)
    limit = unvec(proj @ vec(a), phi.dim)
    return 0.5 * (limit + limit.conj().T), 0, [], "spectral"


def phi_infinity(
    phi: KrausFamily,
    a,
    max_iter: int = 10000,
    tol: Tolerance = DEFAULT_TOL,
) -> HermitianOperator:
    """Strong limit of phi^k(A); monotone under phi(A) <= A, otherwise the
    spectral-projection value for power-bounded maps (labeled internally)."""
    am = as_matrix(a, square=True)
    limit, _, _, _ = _phi_infinity_info(phi, am, tol, max_iter)
    return HermitianOperator(0.5 * (limit + limit.conj().T), _trusted=True)


@dataclass(frozen=True)
class CanonicalDecomposition:
    """A = fixed_part + pure_part with phi(fixed) = fixed and pure -> 0."""

    fixed_part: HermitianOperator
    pure_part: HermitianOperator
    iterations: int
    residuals: tuple[float, ...]
    mode: str = "monotone"


def canonical_decomposition(
    phi: KrausFamily,
    a,
    tol: Tolerance = DEFAULT_TOL,
    max_iter: int = 10000,
) -> CanonicalDecomposition:
    """Unique splitting of a selfadjoint solution of phi(X) <= X."""
    am = as_matrix(a, square=True)
    am = 0.5 * (am + am.conj().T)
    if not _is_subinvariant_direction(phi, am, tol):
        raise SubinvarianceError("canonical decomposition requires phi(A) <= A")
    b, iters, residuals, mode = _phi_infinity_info(phi, am, tol, max_iter)
    b = 0.5 * (b + b.conj().T)
    return CanonicalDecomposition(
        fixed_part=HermitianOperator(b, _trusted=True),
        pure_part=HermitianOperator(am - b, _trusted=True),
        iterations=iters,
        residuals=tuple(residuals),
        mode=mode,
    )


def cesaro_mean(phi: KrausFamily, a, k: int) -> HermitianOperator:
    """(phi^0(A) + ... + phi^(k-1)(A)) / k."""
    if k < 1:
        raise MalformedInputError("Cesaro mean needs k >= 1")
    am = as_matrix(a, square=True)
    return HermitianOperator(_k.cesaro_mean(phi.ops, am, k))


def cesaro_limit(
    phi: KrausFamily,
    a,
    tol: float = 1e-2,
    max_k: int = 20000,
) -> HermitianOperator:
    """Limit of the Cesaro means, certified against the canonical fixed part."""
    am = as_matrix(a, square=True)
    dec = canonical_decomposition(phi, am)
    b = dec.fixed_part.matrix
    k = 64
    trace = []
    while k <= max_k:
        gap = op_norm(_k.cesaro_mean(phi.ops, am, k) - b)
        trace.append((k, gap))
        if gap <= tol * (1.0 + op_norm(am)):
            return dec.fixed_part
        k *= 2
    raise ConvergenceError(
        f"Cesaro means did not reach the fixed part within k={max_k}",
        [g for _, g in trace],
    )


@dataclass(frozen=True)
class WoldDecomposition:
    """H = M (+) ker(I - phi^inf(I)) (+) ker phi^inf(I)."""

    basis_m: np.ndarray
    basis_unit: np.ndarray
    basis_null: np.ndarray
    phi_infinity_i: HermitianOperator
    invariance_residuals: dict = field(default_factory=dict)
    reducing: bool = False


def wold_decomposition(
    phi: KrausFamily,
    tol: Tolerance = DEFAULT_TOL,
    split_tol: float = 1e-6,
) -> WoldDecomposition:
    """Split the carrier space along the spectrum of phi^inf(I).

    Requires phi(I) <= I.  Eigenvectors with eigenvalue within split_tol of
    1 span the unit part, within split_tol of 0 the null part, the rest M.
    The unit and null parts are certified invariant under each A_i^*; when
    phi^inf(I) is a projection (M = 0) they are certified reducing.
    """
    d = phi.dim
    eye = np.eye(d, dtype=np.complex128)
    phi_i = _k.apply_map(phi.ops, eye)
    if not is_psd(HermitianOperator(eye - phi_i), tol):
        raise PreconditionError("wold decomposition requires a contractive map (phi(I) <= I)")
    limit, _, _, _ = _phi_infinity_info(phi, eye, tol, 10000)
    lop = HermitianOperator(0.5 * (limit + limit.conj().T), _trusted=True)
    w, v = lop.eigh()
    unit_cols = v[:, w >= 1.0 - split_tol]
    null_cols = v[:, w <= split_tol]
    mid_cols = v[:, (w > split_tol) & (w < 1.0 - split_tol)]

    residuals = {}
    for name, cols in (("unit", unit_cols), ("null", null_cols)):
        residuals[name] = _adjoint_invariance_residual(phi, cols)
    reducing = False
    if mid_cols.shape[1] == 0:
        fwd_unit = _forward_invariance_residual(phi, unit_cols)
        fwd_null = _forward_invariance_residual(phi, null_cols)
        residuals["unit_forward"] = fwd_unit
        residuals["null_forward"] = fwd_null
        scale = 1.0 + phi.max_op_norm()
        reducing = max(residuals.values()) <= INVARIANCE_TOL * scale
    return WoldDecomposition(
        basis_m=mid_cols,
        basis_unit=unit_cols,
        basis_null=null_cols,
        phi_infinity_i=lop,
        invariance_residuals=residuals,
        reducing=reducing,
    )


def _adjoint_invariance_residual(phi: KrausFamily, cols: np.ndarray) -> float:
    """max_i ||(I - P) A_i^* P|| for P the projector onto span(cols)."""
    if cols.size == 0:
        return 0.0
    d = phi.dim
    p = cols @ cols.conj().T
    q = np.eye(d) - p
    return max(op_norm(q @ a.conj().T @ p) for a in phi.ops)


def _forward_invariance_residual(phi: KrausFamily, cols: np.ndarray) -> float:
    if cols.size == 0:
        return 0.0
    d = phi.dim
    p = cols @ cols.conj().T
    q = np.eye(d) - p
    return max(op_norm(q @ a @ p) for a in phi.ops)


@dataclass(frozen=True)
class SolutionClass:
    kind: str  # fixed | subinvariant-strict | pure | not-a-solution
    witnesses: KrausFamily | None = None
    diagnostics: dict = field(default_factory=dict)


def classify_solution(
    phi: KrausFamily,
    x,
    tol: Tolerance = DEFAULT_TOL,
    max_iter: int = 10000,
) -> SolutionClass:
    """Membership of X in the fixed-point space / cone / pure cone."""
    xm = as_matrix(x, square=True)
    xm = 0.5 * (xm + xm.conj().T)
    scale = 1.0 + op_norm(xm)
    fixed_res = op_norm(_k.apply_map(phi.ops, xm) - xm)
    if fixed_res <= tol.threshold(scale):
        return SolutionClass(kind="fixed", diagnostics={"fixed_residual": fixed_res})
    psd = is_psd(HermitianOperator(xm, _trusted=True), tol)
    if psd and _is_subinvariant_direction(phi, xm, tol):
        limit, iters, residuals, converged = iterate_to_limit(
            phi, xm, tol=tol, max_iter=max_iter
        )
        if converged and op_norm(limit) <= tol.threshold(scale):
            return SolutionClass(
                kind="pure",
                diagnostics={"iterations": iters, "limit_norm": op_norm(limit)},
            )
        return SolutionClass(
            kind="subinvariant-strict",
            diagnostics={"limit_norm": op_norm(limit), "iterations": iters},
        )
    return SolutionClass(kind="not-a-solution", diagnostics={"fixed_residual": fixed_res})


def fixed_point_space(
    phi: KrausFamily,
    tol: Tolerance = Tolerance(1e-8, 1e-8),
) -> list[HermitianOperator]:
    """Real-linear basis of the Hermitian fixed points {X = X*: phi(X) = X}.

    Computed from the eigenvalue-1 null space of the superoperator; the fixed
    space is *-closed, so Hermitian and anti-Hermitian parts of a complex
    basis span it over the reals.  Basis elements are trace-orthonormalized
    and each is verified by direct application of the map.
    """
    d = phi.dim
    superop = Superoperator.from_family(phi)
    null = kernel_basis(superop.matrix - np.eye(d * d), tol)
    candidates = []
    for j in range(null.shape[1]):
        xj = unvec(null[:, j], d)
        candidates.append(xj + xj.conj().T)
        candidates.append(1j * (xj - xj.conj().T))
    basis: list[np.ndarray] = []
    for cand in candidates:
        for b in basis:
            cand = cand - np.real(np.trace(b.conj().T @ cand)) * b
        nrm = float(np.linalg.norm(cand))
        if nrm > 1e-8:
            basis.append(cand / nrm)
    out = []
    for b in basis:
        if op_norm(_k.apply_map(phi.ops, b) - b) <= 1e-7 * (1.0 + op_norm(b)):
            out.append(HermitianOperator(0.5 * (b + b.conj().T), _trusted=True))
    return out


def extract_row_contraction(
    phi: KrausFamily,
    c_op,
    mode: str = "inequality",
    tol: Tolerance = DEFAULT_TOL,
) -> KrausFamily:
    """Operators B_i with A_i C^(1/2) = C^(1/2) B_i and sum B_i B_i^* <= I.

    On range(C^(1/2)) the B_i are forced; on the kernel the free part is the
    canonical deterministic choice: zero for modes "inequality"/"pure", and
    (identity-on-kernel, 0, ..., 0) for mode "equality" so the row sum is
    exactly I.  Mode "pure" additionally certifies the C0 property
    (sum over |a|=k of B_a B_a^* -> 0).
    """
    if mode not in ("inequality", "equality", "pure"):
        raise MalformedInputError(f"unknown mode {mode!r}")
    cm = as_matrix(c_op, square=True)
    cm = 0.5 * (cm + cm.conj().T)
    if not is_psd(HermitianOperator(cm, _trusted=True), tol):
        raise PreconditionError("row-contraction extraction requires C >= 0")
    if not _is_subinvariant_direction(phi, cm, tol):
        raise PreconditionError("row-contraction extraction requires phi(C) <= C")
    cls = classify_solution(phi, cm, tol)
    zero = op_norm(cm) <= tol.atol
    if mode == "equality" and cls.kind != "fixed":
        raise PreconditionError("mode 'equality' requires phi(C) = C")
    if mode == "pure" and cls.kind != "pure" and not zero:
        raise PreconditionError("mode 'pure' requires a pure solution")

    s = psd_sqrt(HermitianOperator(cm, _trusted=True), tol).matrix
    s_pinv = pinv(s, tol)
    p_range = s @ s_pinv
    p_kernel = np.eye(phi.dim) - 0.5 * (p_range + p_range.conj().T)

    bs = np.empty_like(phi.ops)
    for i, a in enumerate(phi.ops):
        bs[i] = s_pinv @ a @ s
    if mode == "equality":
        bs[0] = bs[0] + p_kernel

    scale = 1.0 + phi.max_op_norm() * op_norm(s)
    residual = max(op_norm(a @ s - s @ b) for a, b in zip(phi.ops, bs))
    if residual > max(1e-8 * scale, tol.threshold(scale)):
        raise ExtractionError(
            f"intertwining residual {residual:.3e} above tolerance", residual
        )
    row = sum(b @ b.conj().T for b in bs)
    eye = np.eye(phi.dim)
    if mode == "equality":
        if op_norm(row - eye) > 1e-8 * (1.0 + op_norm(row)):
            raise ExtractionError("row sum is not the identity in equality mode",
                                  op_norm(row - eye))
    elif not is_psd(HermitianOperator(eye - 0.5 * (row + row.conj().T), _trusted=True), tol):
        raise ExtractionError("extracted family is not a row contraction",
                              op_norm(row))
    family = KrausFamily(bs)
    if mode == "pure":
        limit, _, _, converged = iterate_to_limit(family, eye, tol=tol)
        if not (converged and op_norm(limit) <= tol.threshold(1.0)):
            raise ExtractionError(
                "extracted family is not C0 (sum over |a|=k of B_a B_a^* does not vanish)",
                op_norm(limit),
            )
    return family


@dataclass(frozen=True)
class PureKernelReport:
    gram_residual: float
    tail_bound: float
    intertwining: float
    kernel_level: int
    passed: bool


def pure_solution_kernel_check(
    phi: KrausFamily,
    c_op,
    level: int | None = None,
    tol: Tolerance = DEFAULT_TOL,
) -> PureKernelReport:
    """Certify a pure solution through its r=1 Poisson kernel: C = K*K up to
    the truncation tail and K A_i^* = (S_i^* (x) I) K."""
    from . import poisson

    cm = as_matrix(c_op, square=True)
    cls = classify_solution(phi, cm, tol)
    if cls.kind not in ("pure",) and op_norm(cm) > tol.atol:
        raise PreconditionError(f"kernel check requires a pure solution, got {cls.kind}")
    kernel = poisson.build_kernel(phi, cm, 1.0, level, tol=tol)
    gram = poisson.kernel_gram(kernel).matrix
    gram_res = op_norm(gram - kernel.d_matrix)
    inter = poisson.intertwining_residual(kernel)
    slack = 1e-10 * (1.0 + op_norm(cm))
    passed = gram_res <= kernel.tail_bound + slack and inter <= 1e-11 * (1.0 + kernel.norm())
    return PureKernelReport(
        gram_residual=float(gram_res),
        tail_bound=float(kernel.tail_bound),
        intertwining=float(inter),
        kernel_level=kernel.level,
        passed=bool(passed),
    )


@dataclass(frozen=True)
class InvariantSubspace:
    basis: np.ndarray  # orthonormal columns, invariant under each A_i^*
    complement_basis: np.ndarray  # invariant under each A_i
    tag: str
    residual: float
    certified: bool


def invariant_subspaces_from_solution(
    phi: KrausFamily,
    x,
    tol: Tolerance = DEFAULT_TOL,
) -> list[InvariantSubspace]:
    """Common invariant subspaces harvested from a subinvariant solution.

    Emits the nontrivial kernels of X and of its canonical fixed/pure parts;
    each subspace is invariant under every A_i^* (equivalently its orthogonal
    complement is invariant under every A_i) and carries the certified
    residual max_i ||(I-P) A_i P|| for P onto the complement.
    """
    xm = as_matrix(x, square=True)
    xm = 0.5 * (xm + xm.conj().T)
    if not is_psd(HermitianOperator(xm, _trusted=True), tol):
        raise PreconditionError("invariant-subspace extraction requires X >= 0")
    if not _is_subinvariant_direction(phi, xm, tol):
        raise PreconditionError("invariant-subspace extraction requires phi(X) <= X")
    dec = canonical_decomposition(phi, xm, tol)
    sources = (
        (xm, "kernel-of-solution"),
        (dec.fixed_part.matrix, "kernel-of-fixed-part"),
        (dec.pure_part.matrix, "kernel-of-pure-part"),
    )
    scale = 1.0 + phi.max_op_norm()
    x_scale = 1.0 + op_norm(xm)
    # kernel cuts anchored at the certification scale; a part that is zero at
    # the scale of X has the whole space as kernel (trivial, skipped)
    kernel_tol = Tolerance(atol=max(tol.atol, INVARIANCE_TOL * x_scale), rtol=1e-8)
    out = []
    d = phi.dim
    for m, tag in sources:
        if op_norm(m) <= INVARIANCE_TOL * x_scale:
            continue
        basis = kernel_basis(m, kernel_tol)
        k = basis.shape[1]
        if k == 0 or k == d:
            continue
        comp = kernel_basis(basis.conj().T, tol)
        residual = _adjoint_invariance_residual(phi, basis)
        out.append(
            InvariantSubspace(
                basis=basis,
                complement_basis=comp,
                tag=tag,
                residual=float(residual),
                certified=bool(residual <= INVARIANCE_TOL * scale),
            )
        )
    return out


@dataclass(frozen=True)
class ProjectionInvariance:
    kind: str  # invariant | reducing | neither
    subinvariance_residual: float
    fixed_residual: float
    direct_forward_residual: float
    direct_adjoint_residual: float


def projection_invariance_test(
    phi: KrausFamily,
    p,
    tol: Tolerance = DEFAULT_TOL,
) -> ProjectionInvariance:
    """For unital phi: the range of P is invariant under each A_i iff
    phi(P) <= P, and reducing iff phi(P) = P; cross-validated against the
    direct subspace residuals."""
    pm = as_matrix(p, square=True)
    d = phi.dim
    eye = np.eye(d, dtype=np.complex128)
    phi_i = _k.apply_map(phi.ops, eye)
    if op_norm(phi_i - eye) > tol.threshold(1.0) * 100:
        raise PreconditionError("projection test requires a unital map (phi(I) = I)")
    herm = HermitianOperator(pm)
    if op_norm(herm.matrix @ herm.matrix - herm.matrix) > tol.threshold(1.0) * 100:
        raise MalformedInputError("P is not an orthogonal projection")
    pm = herm.matrix
    phi_p = _k.apply_map(phi.ops, pm)
    fixed_res = op_norm(phi_p - pm)
    defect = pm - phi_p
    sub_ok = is_psd(HermitianOperator(0.5 * (defect + defect.conj().T), _trusted=True), tol)
    w, v = np.linalg.eigh(pm)
    cols = v[:, w > 0.5]
    fwd = _forward_invariance_residual(phi, cols)
    adj = _adjoint_invariance_residual(phi, cols)
    scale = 1.0 + phi.max_op_norm()
    if fixed_res <= tol.threshold(scale) * 100:
        kind = "reducing"
    elif sub_ok:
        kind = "invariant"
    else:
        kind = "neither"
    w_def = np.linalg.eigvalsh(0.5 * (defect + defect.conj().T))
    sub_res = float(max(0.0, -w_def[0])) if w_def.size else 0.0
    return ProjectionInvariance(
        kind=kind,
        subinvariance_residual=sub_res,
        fixed_residual=float(fixed_res),
        direct_forward_residual=float(fwd),
        direct_adjoint_residual=float(adj),
    )
