"""Similarity classification of CP maps.

phi is similar to lambda when phi = psi_R o lambda o psi_R^{-1} for an
invertible R (psi_R(X) = R X R^*).  Each target class (unital, strictly
contractive, pure contractive, contractive) is decided through invertible
positive solutions of phi(X) = X or phi(X) <= X, with machine-checkable
obstructions attached to every negative verdict and an explicit
"undetermined" escape hatch at the r = 1 boundary.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels as _k
from .cpmap import (
    KrausFamily,
    Superoperator,
    classify,
    iterate_to_limit,
    spectral_radius,
    unvec,
    vec,
)
from .errors import (
    ConvergenceError,
    MalformedInputError,
    NotInvertibleError,
    PreconditionError,
)
from .linalg import (
    DEFAULT_TOL,
    HermitianOperator,
    Tolerance,
    as_matrix,
    inverse_psd,
    is_psd,
    kernel_basis,
    op_norm,
    psd_sqrt,
)

__all__ = [
    "SimilarityCertificate",
    "conjugate_map",
    "find_unital_similarity",
    "solve_stein",
    "find_strict_contraction_similarity",
    "find_pure_contractive_similarity",
    "find_contractive_similarity",
    "spectral_radius_infimum",
    "injective_fixed_point",
    "InjectiveFixedPoint",
    "power_similarity_lift",
    "neumann_bound_check",
    "NeumannReport",
]

# All section-5 dichotomies are sharp at r = 1; explicit margins keep the
# verdicts from flapping.
STRICT_MARGIN = 1e-8
INVERTIBLE_MARGIN = 1e-8
SPECTRAL_BAND = 1e-6


@dataclass(frozen=True)
class SimilarityCertificate:
    target: str  # unital | contractive | strict-contraction | pure-contractive
    verdict: str  # yes | no | undetermined
    witness_q: HermitianOperator | None = None
    bounds: tuple[float, float] | None = None
    residual: float = 0.0
    obstruction: dict | None = None
    diagnostics: dict = field(default_factory=dict)


def conjugate_map(phi: KrausFamily, r_op, tol: Tolerance = DEFAULT_TOL) -> KrausFamily:
    """Kraus family of lambda = psi_R^{-1} o phi o psi_R, i.e. {R^{-1} A_i R}."""
    rm = as_matrix(r_op, square=True)
    smin = np.linalg.svd(rm, compute_uv=False)[-1]
    if smin <= tol.threshold(op_norm(rm)):
        raise NotInvertibleError(f"conjugator is numerically singular (sigma_min={smin:.3e})")
    rinv = np.linalg.inv(rm)
    return KrausFamily(np.stack([rinv @ a @ rm for a in phi.ops]))


def _polish_fixed_point(phi: KrausFamily, q: np.ndarray, rounds: int = 60) -> np.ndarray:
    """Damp non-fixed components of a fixed-point candidate.

    Averaging Q <- (Q + phi(Q))/2 multiplies each superoperator eigencomponent
    by (1 + lambda)/2, which has modulus < 1 for every eigenvalue except 1.
    """
    best = q
    best_res = op_norm(_k.apply_map(phi.ops, q) - q)
    cur = q
    for _ in range(rounds):
        cur = 0.5 * (cur + _k.apply_map(phi.ops, cur))
        res = op_norm(_k.apply_map(phi.ops, cur) - cur)
        if res < best_res:
            best, best_res = cur, res
        elif res > 10 * best_res:
            break
    return 0.5 * (best + best.conj().T)


def _cesaro_fixed_candidate(phi: KrausFamily, superop: Superoperator) -> np.ndarray:
    """Spectral-projection value of the Cesaro limit of sigma_k(I)."""
    proj = superop.projector(lambda lam: abs(lam - 1.0) <= SPECTRAL_BAND)
    z = unvec(proj @ vec(np.eye(phi.dim, dtype=np.complex128)), phi.dim)
    return _polish_fixed_point(phi, 0.5 * (z + z.conj().T))


def _min_eig_trace(phi: KrausFamily, ks=(64, 256, 1024)) -> list[tuple[int, float]]:
    eye = np.eye(phi.dim, dtype=np.complex128)
    out = []
    for k in ks:
        m = _k.cesaro_mean(phi.ops, eye, k)
        out.append((k, float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])))
    return out


def find_unital_similarity(phi: KrausFamily, tol: Tolerance = DEFAULT_TOL) -> SimilarityCertificate:
    """Similarity to a unital positive map: decided by the Cesaro means of I.

    yes with witness Q (invertible positive, phi(Q) = Q, aI <= Q <= bI) when
    the means are uniformly bounded above and below; no with a certified
    obstruction (r > 1, Jordan defect at the unit circle, or a vanishing
    min-eigenvalue trace of the means); undetermined otherwise.
    """
    superop = Superoperator.from_family(phi)
    r = superop.spectral_radius()
    diagnostics: dict = {"spectral_radius": r}
    if r > 1.0 + SPECTRAL_BAND:
        return SimilarityCertificate(
            target="unital",
            verdict="no",
            obstruction={"kind": "spectral-radius", "r": r},
            diagnostics=diagnostics,
        )
    cls = classify(phi, tol)
    diagnostics["power_bounded"] = cls.is_power_bounded
    if not cls.is_power_bounded:
        return SimilarityCertificate(
            target="unital",
            verdict="no",
            obstruction={"kind": "jordan-defect", "details": cls.details},
            diagnostics=diagnostics,
        )
    q = _cesaro_fixed_candidate(phi, superop)
    w = np.linalg.eigvalsh(q)
    a, b = float(w[0]), float(w[-1])
    residual = op_norm(_k.apply_map(phi.ops, q) - q)
    diagnostics["cesaro_min_eig"] = a
    diagnostics["cesaro_max_eig"] = b
    if a <= INVERTIBLE_MARGIN * (1.0 + b):
        return SimilarityCertificate(
            target="unital",
            verdict="no",
            witness_q=None,
            residual=float(residual),
            obstruction={
                "kind": "vanishing-min-eigenvalue",
                "min_eig_trace": _min_eig_trace(phi),
            },
            diagnostics=diagnostics,
        )
    if residual > 1e-7 * max(1.0, b):
        return SimilarityCertificate(
            target="unital",
            verdict="undetermined",
            witness_q=HermitianOperator(q, _trusted=True),
            bounds=(a, b),
            residual=float(residual),
            diagnostics=diagnostics,
        )
    return SimilarityCertificate(
        target="unital",
        verdict="yes",
        witness_q=HermitianOperator(q, _trusted=True),
        bounds=(a, b),
        residual=float(residual),
        diagnostics=diagnostics,
    )


def solve_stein(
    phi: KrausFamily,
    r_op,
    tol: Tolerance = DEFAULT_TOL,
    max_terms: int = 50000,
) -> HermitianOperator:
    """Unique solution of X - phi(X) = R for r(phi) < 1, by the Neumann series
    sum phi^k(R) with a geometric tail bound."""
    rm = as_matrix(r_op, square=True)
    rm = 0.5 * (rm + rm.conj().T)
    if not is_psd(HermitianOperator(rm, _trusted=True), tol):
        raise PreconditionError("solve_stein requires R >= 0")
    r_phi = spectral_radius(phi)
    if r_phi >= 1.0 - STRICT_MARGIN:
        raise PreconditionError(
            f"Stein series needs r(phi) < 1 (got r={r_phi:.6g})"
        )
    acc = rm.copy()
    cur = rm.copy()
    prev = op_norm(rm)
    if prev == 0.0:
        return HermitianOperator(acc, _trusted=True)
    for _ in range(max_terms):
        cur = _k.apply_map(phi.ops, cur)
        acc += cur
        n = op_norm(cur)
        q = min(n / prev if prev > 0 else 0.0, 0.999999)
        prev = max(n, 1e-300)
        tail = n * q / (1.0 - q) if q < 1.0 else np.inf
        if tail <= 0.1 * tol.threshold(op_norm(acc)):
            break
    else:
        raise ConvergenceError("Stein series did not meet its tail target", [prev])
    acc = 0.5 * (acc + acc.conj().T)
    return HermitianOperator(acc, _trusted=True)


def _perron_candidate(phi: KrausFamily, superop: Superoperator) -> np.ndarray | None:
    """PSD-normalized eigenvector of the superoperator at its spectral radius."""
    w, v = np.linalg.eig(superop.matrix)
    r = np.max(np.abs(w))
    idx = int(np.argmin(np.abs(w - r)))  # Perron eigenvalue sits at +r
    x = unvec(v[:, idx], phi.dim)
    x = 0.5 * (x + x.conj().T)
    t = np.trace(x).real
    if abs(t) < 1e-12:
        return None
    x = x / t
    wx = np.linalg.eigvalsh(x)
    if wx[0] < -1e-8 * max(1.0, wx[-1]):
        return None
    return x


def find_strict_contraction_similarity(
    phi: KrausFamily, tol: Tolerance = DEFAULT_TOL
) -> SimilarityCertificate:
    """Similarity to a map of norm < 1: equivalent to r(phi) < 1.

    The yes witness Q solves Q - phi(Q) = I, so Q - phi(Q) is positive and
    invertible by construction.
    """
    superop = Superoperator.from_family(phi)
    r = superop.spectral_radius()
    diagnostics = {"spectral_radius": r}
    if r < 1.0 - STRICT_MARGIN:
        q = solve_stein(phi, np.eye(phi.dim), tol)
        w = q.eigenvalues()
        residual = op_norm(q.matrix - _k.apply_map(phi.ops, q.matrix) - np.eye(phi.dim))
        return SimilarityCertificate(
            target="strict-contraction",
            verdict="yes",
            witness_q=q,
            bounds=(float(w[0]), float(w[-1])),
            residual=float(residual),
            diagnostics=diagnostics,
        )
    obstruction = {"kind": "spectral-radius-at-least-one", "r": r}
    perron = _perron_candidate(phi, superop)
    if perron is not None:
        obstruction["perron_witness_min_eig"] = float(np.linalg.eigvalsh(perron)[0])
    return SimilarityCertificate(
        target="strict-contraction",
        verdict="no",
        obstruction=obstruction,
        diagnostics=diagnostics,
    )


def find_pure_contractive_similarity(
    phi: KrausFamily, tol: Tolerance = DEFAULT_TOL
) -> SimilarityCertificate:
    """Similarity to a pure contractive CP map.

    In finite dimensions an invertible pure solution forces ||phi^k|| -> 0,
    hence r(phi) < 1, so this coincides with strict-contraction similarity;
    the collapse is recorded in the diagnostics and the pure decay of the
    witness is verified directly.
    """
    cert = find_strict_contraction_similarity(phi, tol)
    diagnostics = dict(cert.diagnostics)
    diagnostics["finite_dimensional_collapse"] = (
        "invertible pure solution <=> r(phi) < 1 in finite dimensions"
    )
    if cert.verdict == "yes":
        d = cert.witness_q.matrix
        limit, iters, residuals, converged = iterate_to_limit(phi, d, tol=tol)
        diagnostics["decay_iterations"] = iters
        diagnostics["decay_limit_norm"] = float(op_norm(limit))
        if not (converged and op_norm(limit) <= tol.threshold(op_norm(d))):
            return SimilarityCertificate(
                target="pure-contractive",
                verdict="undetermined",
                witness_q=cert.witness_q,
                bounds=cert.bounds,
                residual=cert.residual,
                diagnostics=diagnostics,
            )
    obstruction = cert.obstruction
    if cert.verdict == "no" and obstruction is not None:
        obstruction = dict(obstruction)
        obstruction["kind"] = "no-invertible-pure-solution"
        if obstruction.get("r", np.inf) <= 1.0 + SPECTRAL_BAND:
            lim, _, _, conv = iterate_to_limit(phi, np.eye(phi.dim), tol=tol, max_iter=2000)
            if conv:
                obstruction["phi_infinity_norm"] = float(op_norm(lim))
    return SimilarityCertificate(
        target="pure-contractive",
        verdict=cert.verdict,
        witness_q=cert.witness_q,
        bounds=cert.bounds,
        residual=cert.residual,
        obstruction=obstruction,
        diagnostics=diagnostics,
    )


def _cb_bound_samples(phi: KrausFamily, a: float, b: float) -> list[dict]:
    """||p(A)|| <= sqrt(b/a) ||p(S)|| on a fixed set of analytic polynomials."""
    from .fock import analytic_poly_norm, word_operator

    polys: list[dict] = [{(i,): 1.0} for i in range(1, phi.n + 1)]
    polys.append({(i,): 1.0 for i in range(1, phi.n + 1)})
    polys.append({(): 0.5, (1, 1): 1.0})
    out = []
    factor = float(np.sqrt(b / a))
    for coeffs in polys:
        lhs_mat = sum(c * word_operator(phi.ops, w) for w, c in coeffs.items())
        lhs = op_norm(lhs_mat)
        est = analytic_poly_norm(coeffs, phi.n, level_max=8, max_dim=10000)
        rhs = factor * est.value
        out.append(
            {
                "poly": {"".join(map(str, w)) or "1": c for w, c in coeffs.items()},
                "lhs": float(lhs),
                "rhs": float(rhs),
                "creation_norm_converged": est.converged,
                "holds": bool(lhs <= rhs + 1e-8 * (1 + rhs)) if est.converged else None,
            }
        )
    return out


def find_contractive_similarity(
    phi: KrausFamily, tol: Tolerance = DEFAULT_TOL
) -> SimilarityCertificate:
    """Similarity to a contractive CP map: an invertible positive R with
    phi(R) <= R.

    Three-stage decision: r > 1 is an obstruction; r < 1 goes through the
    Stein witness; at r = 1 the Cesaro / Perron candidates are tried and a
    singular-only outcome is reported as undetermined.  A yes certificate
    also reports the completely-bounded consequence
    ||p(A)|| <= sqrt(b/a) ||p(S)|| on sample polynomials.
    """
    superop = Superoperator.from_family(phi)
    r = superop.spectral_radius()
    diagnostics: dict = {"spectral_radius": r}
    if r > 1.0 + SPECTRAL_BAND:
        return SimilarityCertificate(
            target="contractive",
            verdict="no",
            obstruction={"kind": "spectral-radius", "r": r},
            diagnostics=diagnostics,
        )
    if r < 1.0 - STRICT_MARGIN:
        q = solve_stein(phi, np.eye(phi.dim), tol)
        w = q.eigenvalues()
        a, b = float(w[0]), float(w[-1])
        defect = q.matrix - _k.apply_map(phi.ops, q.matrix)
        residual = float(max(0.0, -np.linalg.eigvalsh(0.5 * (defect + defect.conj().T))[0]))
        diagnostics["cb_bound_samples"] = _cb_bound_samples(phi, a, b)
        return SimilarityCertificate(
            target="contractive",
            verdict="yes",
            witness_q=q,
            bounds=(a, b),
            residual=residual,
            diagnostics=diagnostics,
        )
    cls = classify(phi, tol)
    if not cls.is_power_bounded:
        return SimilarityCertificate(
            target="contractive",
            verdict="no",
            obstruction={"kind": "jordan-defect", "details": cls.details},
            diagnostics=diagnostics,
        )
    candidates = []
    z = _cesaro_fixed_candidate(phi, superop)
    candidates.append(("cesaro-fixed-point", z))
    perron = _perron_candidate(phi, superop)
    if perron is not None:
        candidates.append(("perron-eigenvector", perron))
    best = None
    for route, cand in sorted(candidates, key=lambda rc: rc[0]):
        w = np.linalg.eigvalsh(cand)
        a, b = float(w[0]), float(w[-1])
        defect = cand - _k.apply_map(phi.ops, cand)
        wd = np.linalg.eigvalsh(0.5 * (defect + defect.conj().T))
        sub_ok = wd[0] >= -tol.threshold(max(1.0, b)) * 100
        diagnostics.setdefault("candidates", []).append(
            {"route": route, "min_eig": a, "max_eig": b, "subinvariance_defect": float(wd[0])}
        )
        if a > INVERTIBLE_MARGIN * (1.0 + b) and sub_ok:
            resid = float(max(0.0, -wd[0]))
            if best is None or resid < best[3]:
                best = (route, cand, (a, b), resid)
    if best is not None:
        route, cand, bounds, resid = best
        diagnostics["route"] = route
        diagnostics["cb_bound_samples"] = _cb_bound_samples(phi, bounds[0], bounds[1])
        return SimilarityCertificate(
            target="contractive",
            verdict="yes",
            witness_q=HermitianOperator(cand, _trusted=True),
            bounds=bounds,
            residual=resid,
            diagnostics=diagnostics,
        )
    return SimilarityCertificate(
        target="contractive",
        verdict="undetermined",
        obstruction=None,
        diagnostics=diagnostics,
    )


def spectral_radius_infimum(
    phi: KrausFamily, eps: float, tol: Tolerance = DEFAULT_TOL
) -> tuple[float, np.ndarray]:
    """Conjugation achieving ||psi_R o phi o psi_R^{-1}|| <= r(phi) + eps.

    Scales the map below radius 1, solves the Stein equation for Q_eps, and
    conjugates by R_eps = Q_eps^{-1/2}; then the conjugated map applied to I
    equals (r+eps)(I - Q_eps^{-1}) <= (r+eps) I.
    """
    if eps <= 0:
        raise MalformedInputError("eps must be positive")
    r = spectral_radius(phi)
    scaled = phi.scaled(1.0 / np.sqrt(r + eps))
    q = solve_stein(scaled, np.eye(phi.dim), tol)
    q_inv_sqrt = psd_sqrt(inverse_psd(q, tol), tol).matrix
    r_eps = q_inv_sqrt
    r_inv = np.linalg.inv(r_eps)
    conj = KrausFamily(np.stack([r_eps @ a @ r_inv for a in phi.ops]))
    achieved = op_norm(_k.apply_map(conj.ops, np.eye(phi.dim, dtype=np.complex128)))
    return float(achieved), r_eps


@dataclass(frozen=True)
class InjectiveFixedPoint:
    z: HermitianOperator
    injective: bool
    kernel: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def injective_fixed_point(
    phi: KrausFamily, tol: Tolerance = DEFAULT_TOL
) -> InjectiveFixedPoint:
    """Cesaro accumulation point Z of sigma_k(I), with phi(Z) = Z and
    ker Z = {h : <phi^k(I)h, h> -> 0}; injective iff that set is {0}.

    Requires a power-bounded map.  In finite dimensions an injective Z is
    invertible, so injectivity here implies find_unital_similarity succeeds.
    """
    cls = classify(phi, tol)
    if not cls.is_power_bounded:
        raise PreconditionError("injective_fixed_point requires a power-bounded map")
    superop = Superoperator.from_family(phi)
    z = _cesaro_fixed_candidate(phi, superop)
    kern = kernel_basis(z, Tolerance(1e-8, 1e-8))
    residual = op_norm(_k.apply_map(phi.ops, z) - z)
    diag: dict = {"fixed_residual": float(residual)}
    checks = []
    for j in range(kern.shape[1]):
        h = kern[:, j]
        vals = []
        for k in (512, 2048):
            m = _k.cesaro_mean(phi.ops, np.eye(phi.dim, dtype=np.complex128), k)
            vals.append(float(np.real(np.vdot(h, m @ h))))
        checks.append(vals)
    diag["kernel_cesaro_quadratic_forms"] = checks
    return InjectiveFixedPoint(
        z=HermitianOperator(z, _trusted=True),
        injective=kern.shape[1] == 0,
        kernel=kern,
        diagnostics=diag,
    )


def power_similarity_lift(
    phi: KrausFamily, m: int, q_m, tol: Tolerance = DEFAULT_TOL
) -> HermitianOperator:
    """Lift a contractivity witness for phi^m to one for phi:
    P = Q + phi(Q) + ... + phi^(m-1)(Q), which satisfies
    P - phi(P) = Q - phi^m(Q)."""
    if m < 1:
        raise MalformedInputError("power must be >= 1")
    qm = as_matrix(q_m, square=True)
    qm = 0.5 * (qm + qm.conj().T)
    wq = np.linalg.eigvalsh(qm)
    if wq[0] <= INVERTIBLE_MARGIN * (1.0 + wq[-1]):
        raise PreconditionError("Q_m must be invertible positive")
    qm_m = _k.power_apply(phi.ops, qm, m)
    defect_m = qm - qm_m
    if not is_psd(HermitianOperator(0.5 * (defect_m + defect_m.conj().T), _trusted=True), tol):
        raise PreconditionError("Q_m is not subinvariant for phi^m")
    p = _k.neumann_sum(phi.ops, qm, m)
    p = 0.5 * (p + p.conj().T)
    wp = np.linalg.eigvalsh(p)
    defect_p = p - _k.apply_map(phi.ops, p)
    ident = op_norm(defect_p - defect_m)
    if wp[0] <= INVERTIBLE_MARGIN * (1.0 + wp[-1]):
        raise PreconditionError("lifted witness lost invertibility")
    if not is_psd(HermitianOperator(0.5 * (defect_p + defect_p.conj().T), _trusted=True), tol):
        raise PreconditionError("lifted witness is not subinvariant")
    if ident > 1e-9 * (1.0 + op_norm(qm)):
        raise ConvergenceError("telescoping identity P - phi(P) = Q - phi^m(Q) failed", [ident])
    return HermitianOperator(p, _trusted=True)


@dataclass(frozen=True)
class NeumannReport:
    converged: bool
    q: HermitianOperator | None
    bounds: tuple[float, float] | None
    identity_residual: float
    terms: int


def neumann_bound_check(
    phi: KrausFamily,
    p_op,
    tol: Tolerance = DEFAULT_TOL,
    max_terms: int = 20000,
) -> NeumannReport:
    """Sum Q = sum_k phi^k(P) when the partial sums are Cauchy, report the
    two-sided bounds aI <= Q <= bI and verify Q - phi(Q) = P."""
    pm = as_matrix(p_op, square=True)
    pm = 0.5 * (pm + pm.conj().T)
    if not is_psd(HermitianOperator(pm, _trusted=True), tol):
        raise PreconditionError("neumann_bound_check requires P >= 0")
    acc = pm.copy()
    cur = pm.copy()
    terms = 1
    converged = False
    for _ in range(max_terms):
        cur = _k.apply_map(phi.ops, cur)
        acc += cur
        terms += 1
        if op_norm(cur) <= 0.01 * tol.threshold(op_norm(acc)):
            converged = True
            break
    if not converged:
        return NeumannReport(
            converged=False, q=None, bounds=None,
            identity_residual=float("nan"), terms=terms,
        )
    acc = 0.5 * (acc + acc.conj().T)
    w = np.linalg.eigvalsh(acc)
    residual = op_norm(acc - _k.apply_map(phi.ops, acc) - pm)
    return NeumannReport(
        converged=True,
        q=HermitianOperator(acc, _trusted=True),
        bounds=(float(w[0]), float(w[-1])),
        identity_residual=float(residual),
        terms=terms,
    )
