"""Command-line interface and interchange file format.

The only module with side effects.  Problems are JSON files carrying a Kraus
family (complex entries as [re, im] pairs), an optional D, and optional
tolerance / truncation parameters.  Reports come out as human text or as
machine-readable JSON with stable field ordering, so fixed inputs and flags
reproduce byte-identical output (timestamps live under "meta", excluded by
--no-meta).

Exit codes: 0 success, 1 error, 2 a "no" verdict under --require,
3 an "undetermined" verdict under --strict.
"""

import argparse
import hashlib
import json
import sys
import time

import numpy as np

from . import ergodic, invariants, poisson, similarity
from .cpmap import KrausFamily, classify
from .errors import CPFockError, MalformedInputError
from .linalg import DEFAULT_TOL, HermitianOperator, Tolerance, op_norm

__all__ = ["parse_problem", "run", "main"]

COMMANDS = (
    "classify",
    "decompose",
    "wold",
    "fixed-points",
    "poisson",
    "similarity",
    "curvature",
    "euler",
    "check-all",
)


# ------------------------------------------------------------------ parsing


def _parse_complex(pair, where):
    if (
        not isinstance(pair, (list, tuple))
        or len(pair) != 2
        or not all(isinstance(v, (int, float)) for v in pair)
    ):
        raise MalformedInputError(f"{where}: complex entries must be [re, im] pairs")
    z = complex(pair[0], pair[1])
    if not (np.isfinite(z.real) and np.isfinite(z.imag)):
        raise MalformedInputError(f"{where}: non-finite entry")
    return z


def _parse_matrix(rows, dim, where):
    if not isinstance(rows, list) or len(rows) != dim:
        raise MalformedInputError(f"{where}: expected {dim} rows")
    out = np.empty((dim, dim), dtype=np.complex128)
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != dim:
            raise MalformedInputError(f"{where}: row {i} must have {dim} entries")
        for j, pair in enumerate(row):
            out[i, j] = _parse_complex(pair, f"{where}[{i}][{j}]")
    return out


def parse_problem(path):
    """Load a problem file: returns (KrausFamily, D, options dict).

    D defaults to the identity when absent.  A non-Hermitian D (defect above
    threshold) and any n=infinity marker are rejected at parse time.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MalformedInputError(f"{path}: malformed JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise MalformedInputError(f"{path}: top level must be an object")
    if str(raw.get("n", "")).lower() in ("inf", "infinity"):
        raise MalformedInputError(
            f"{path}: n=infinity Kraus families are not representable; supply a finite family"
        )
    dim = raw.get("dim")
    if not isinstance(dim, int) or dim < 1:
        raise MalformedInputError(f"{path}: 'dim' must be a positive integer")
    kraus_raw = raw.get("kraus")
    if not isinstance(kraus_raw, list) or not kraus_raw:
        raise MalformedInputError(f"{path}: 'kraus' must be a nonempty list of matrices")
    mats = [_parse_matrix(m, dim, f"kraus[{i}]") for i, m in enumerate(kraus_raw)]
    family = KrausFamily(np.stack(mats))
    if "D" in raw and raw["D"] is not None:
        d_mat = _parse_matrix(raw["D"], dim, "D")
        d_op = HermitianOperator(d_mat).matrix  # rejects non-Hermitian D
    else:
        d_op = np.eye(dim, dtype=np.complex128)
    options = {}
    if "tolerance" in raw and raw["tolerance"] is not None:
        t = raw["tolerance"]
        options["tolerance"] = Tolerance(
            atol=float(t.get("atol", DEFAULT_TOL.atol)),
            rtol=float(t.get("rtol", DEFAULT_TOL.rtol)),
        )
    if "level" in raw and raw["level"] is not None:
        options["level"] = int(raw["level"])
    if "radius" in raw and raw["radius"] is not None:
        options["radius"] = float(raw["radius"])
    return family, d_op, options


def _canonical_problem(phi: KrausFamily, d_op) -> dict:
    return {
        "dim": phi.dim,
        "kraus": [_mat_json(a) for a in phi.ops],
        "D": _mat_json(d_op),
    }


def _digest(phi: KrausFamily, d_op) -> str:
    payload = json.dumps(_canonical_problem(phi, d_op), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


# -------------------------------------------------------------- serializing


def _num(x):
    x = float(x)
    return x


def _pair(z):
    z = complex(z)
    return [_num(z.real), _num(z.imag)]


def _mat_json(m):
    m = np.asarray(m, dtype=np.complex128)
    return [[_pair(z) for z in row] for row in m]


def _cert_json(cert: similarity.SimilarityCertificate) -> dict:
    out = {
        "target": cert.target,
        "verdict": cert.verdict,
        "bounds": [_num(b) for b in cert.bounds] if cert.bounds else None,
        "residual": _num(cert.residual),
        "witness_q": _mat_json(cert.witness_q.matrix) if cert.witness_q is not None else None,
        "obstruction": _plain(cert.obstruction),
        "diagnostics": _plain(cert.diagnostics),
    }
    return out


def _plain(obj):
    """Recursively convert numpy scalars/arrays into JSON-safe values."""
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, float):
        return _num(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return _num(obj) if isinstance(obj, np.floating) else int(obj)
    if isinstance(obj, complex):
        return _pair(obj)
    if isinstance(obj, np.ndarray):
        if obj.ndim == 2:
            return _mat_json(obj)
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return str(obj)


# ----------------------------------------------------------------- commands


def _cmd_classify(phi, d_op, opts, args):
    cls = classify(phi, opts["tol"])
    return {
        "spectral_radius": _num(cls.spectral_radius),
        "is_unital": cls.is_unital,
        "is_contractive": cls.is_contractive,
        "is_pure": cls.is_pure,
        "is_power_bounded": cls.is_power_bounded,
        "peripheral_semisimple": cls.peripheral_semisimple,
        "details": _plain(cls.details),
    }


def _cmd_decompose(phi, d_op, opts, args):
    dec = ergodic.canonical_decomposition(phi, d_op, opts["tol"], max_iter=args.max_iter)
    return {
        "fixed_part": _mat_json(dec.fixed_part.matrix),
        "pure_part": _mat_json(dec.pure_part.matrix),
        "iterations": dec.iterations,
        "mode": dec.mode,
        "final_residual": _num(dec.residuals[-1]) if dec.residuals else 0.0,
    }


def _cmd_wold(phi, d_op, opts, args):
    w = ergodic.wold_decomposition(phi, opts["tol"])
    return {
        "dims": {
            "m": int(w.basis_m.shape[1]),
            "unit": int(w.basis_unit.shape[1]),
            "null": int(w.basis_null.shape[1]),
        },
        "basis_m": _mat_json(w.basis_m) if w.basis_m.size else [],
        "basis_unit": _mat_json(w.basis_unit) if w.basis_unit.size else [],
        "basis_null": _mat_json(w.basis_null) if w.basis_null.size else [],
        "phi_infinity_i": _mat_json(w.phi_infinity_i.matrix),
        "invariance_residuals": _plain(w.invariance_residuals),
        "reducing": w.reducing,
    }


def _cmd_fixed_points(phi, d_op, opts, args):
    basis = ergodic.fixed_point_space(phi)
    return {
        "dimension": len(basis),
        "basis": [_mat_json(b.matrix) for b in basis],
    }


def _cmd_poisson(phi, d_op, opts, args):
    r = opts["radius"]
    kernel = poisson.build_kernel(phi, d_op, r, opts["level"], tol=opts["tol"])
    gram = poisson.kernel_gram(kernel).matrix
    if r < 1.0:
        gram_target = kernel.d_matrix
        target_name = "D"
    else:
        limit = ergodic.phi_infinity(phi, kernel.d_matrix, tol=opts["tol"]).matrix
        gram_target = kernel.d_matrix - limit
        target_name = "D - phi_infinity(D)"
    return {
        "radius": _num(r),
        "level": kernel.level,
        "fock_dim": kernel.fock.dim,
        "tail_bound": _num(kernel.tail_bound),
        "gram_residual": _num(op_norm(gram - gram_target)),
        "gram_target": target_name,
        "intertwining_residual": _num(poisson.intertwining_residual(kernel)),
        "kernel_norm": _num(kernel.norm()),
    }


def _cmd_similarity(phi, d_op, opts, args):
    target = args.target
    fns = {
        "unital": similarity.find_unital_similarity,
        "contractive": similarity.find_contractive_similarity,
        "strict": similarity.find_strict_contraction_similarity,
        "pure": similarity.find_pure_contractive_similarity,
    }
    cert = fns[target](phi, opts["tol"])
    return _cert_json(cert)


def _cmd_curvature(phi, d_op, opts, args):
    if args.alpha is not None:
        rep = invariants.alpha_curvature(
            phi, d_op, args.alpha, k_max=args.k_max, check_tol=opts["tol"]
        )
    else:
        rep = invariants.star_curvature(phi, d_op, k_max=args.k_max, check_tol=opts["tol"])
    return {
        "star_curvature": _num(rep.value) if np.isfinite(rep.value) else "inf",
        "alpha": _num(rep.alpha),
        "branch": rep.branch,
        "converged": rep.converged,
        "stop_reason": rep.stop_reason,
        "k_stop": rep.k_stop,
        "defect_trace": _num(rep.defect_trace),
        "defect_rank": rep.defect_rank,
        "sequence": [[k, _num(v)] for k, v in rep.sequence],
    }


def _cmd_euler(phi, d_op, opts, args):
    rep = invariants.euler_characteristic(phi, d_op, k_max=args.k_max, check_tol=opts["tol"])
    return {
        "chi": _num(rep.chi),
        "converged": rep.converged,
        "stop_reason": rep.stop_reason,
        "rank_sequence": [[k, r] for k, r in rep.rank_sequence],
        "ratio_sequence": [[k, _num(v)] for k, v in rep.ratio_sequence],
        "note": rep.note,
    }


def _cmd_check_all(phi, d_op, opts, args):
    out = {}
    sections = [
        ("classify", _cmd_classify),
        ("decompose", _cmd_decompose),
        ("wold", _cmd_wold),
        ("fixed-points", _cmd_fixed_points),
        ("poisson", _cmd_poisson),
        ("curvature", _cmd_curvature),
        ("euler", _cmd_euler),
    ]
    for name, fn in sections:
        try:
            out[name] = fn(phi, d_op, opts, args)
        except CPFockError as exc:
            out[name] = {"error": f"{type(exc).__name__}: {exc}"}
    sim = {}
    for target in ("unital", "contractive", "strict", "pure"):
        ns = argparse.Namespace(**vars(args))
        ns.target = target
        try:
            sim[target] = _cmd_similarity(phi, d_op, opts, ns)
        except CPFockError as exc:
            sim[target] = {"error": f"{type(exc).__name__}: {exc}"}
    out["similarity"] = sim
    return out


_DISPATCH = {
    "classify": _cmd_classify,
    "decompose": _cmd_decompose,
    "wold": _cmd_wold,
    "fixed-points": _cmd_fixed_points,
    "poisson": _cmd_poisson,
    "similarity": _cmd_similarity,
    "curvature": _cmd_curvature,
    "euler": _cmd_euler,
    "check-all": _cmd_check_all,
}


# ------------------------------------------------------------------- runner


def _verdicts(results) -> list:
    found = []
    if isinstance(results, dict):
        if "verdict" in results:
            found.append(results["verdict"])
        for v in results.values():
            found.extend(_verdicts(v))
    return found


def run(command: str, args) -> tuple[dict, int]:
    """Execute one subcommand; returns (report, exit_code)."""
    t0 = time.perf_counter()
    try:
        phi, d_file, file_opts = parse_problem(args.input)
    except (OSError, CPFockError) as exc:
        return {"command": command, "error": f"{type(exc).__name__}: {exc}"}, 1
    tol = file_opts.get("tolerance", DEFAULT_TOL)
    if args.tol_atol is not None or args.tol_rtol is not None:
        tol = Tolerance(
            atol=args.tol_atol if args.tol_atol is not None else tol.atol,
            rtol=args.tol_rtol if args.tol_rtol is not None else tol.rtol,
        )
    opts = {
        "tol": tol,
        "level": args.level if args.level is not None else file_opts.get("level"),
        "radius": args.radius if args.radius is not None else file_opts.get("radius", 0.9),
    }
    report = {
        "command": command,
        "input": {"path": args.input, "digest": _digest(phi, d_file), "dim": phi.dim, "n": phi.n},
        "parameters": {
            "atol": _num(tol.atol),
            "rtol": _num(tol.rtol),
            "level": opts["level"],
            "radius": _num(opts["radius"]),
            "seed": args.seed,
            "max_iter": args.max_iter,
        },
    }
    try:
        results = _DISPATCH[command](phi, d_file, opts, args)
        report["results"] = results
        code = 0
        verdicts = _verdicts(results)
        if args.require and "no" in verdicts:
            code = 2
        elif args.strict and "undetermined" in verdicts:
            code = 3
    except CPFockError as exc:
        report["error"] = f"{type(exc).__name__}: {exc}"
        code = 1
    if not args.no_meta:
        report["meta"] = {"wall_time_s": round(time.perf_counter() - t0, 6)}
    return report, code


def _render_text(report: dict, fh):
    def emit(prefix, obj):
        if isinstance(obj, dict):
            for k, v in obj.items():
                if isinstance(v, (dict, list)) and v and not _is_matrix(v):
                    print(f"{prefix}{k}:", file=fh)
                    emit(prefix + "  ", v)
                else:
                    print(f"{prefix}{k}: {_short(v)}", file=fh)
        elif isinstance(obj, list):
            for v in obj:
                print(f"{prefix}- {_short(v)}", file=fh)

    emit("", report)


def _is_matrix(v):
    return (
        isinstance(v, list)
        and v
        and isinstance(v[0], list)
        and v[0]
        and isinstance(v[0][0], list)
    )


def _short(v):
    if _is_matrix(v):
        return f"<matrix {len(v)}x{len(v[0])}>"
    if isinstance(v, list) and len(v) > 12:
        return f"<list of {len(v)}>"
    return v


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cpfock",
        description="Analyze completely positive maps given by Kraus families.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--input", required=True, help="problem JSON file")
        p.add_argument("--tol-atol", type=float, default=None)
        p.add_argument("--tol-rtol", type=float, default=None)
        p.add_argument("--max-iter", type=int, default=10000)
        p.add_argument("--level", type=int, default=None)
        p.add_argument("--radius", type=float, default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--k-max", type=int, default=120)
        p.add_argument("--require", action="store_true",
                       help="exit 2 when any verdict is 'no'")
        p.add_argument("--strict", action="store_true",
                       help="exit 3 when any verdict is 'undetermined'")
        p.add_argument("--format", choices=("text", "json"), default="json")
        p.add_argument("--no-meta", action="store_true",
                       help="omit wall-time metadata (for byte-identical reports)")
        if name == "similarity":
            p.add_argument("--target", choices=("unital", "contractive", "strict", "pure"),
                           required=True)
        if name in ("curvature", "euler", "check-all"):
            p.add_argument("--alpha", type=float, default=None)
        if name == "check-all":
            p.add_argument("--target", default="unital", help=argparse.SUPPRESS)
    args = parser.parse_args(argv)
    report, code = run(args.command, args)
    if args.format == "json":
        json.dump(report, sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        _render_text(report, sys.stdout)
    if "error" in report:
        print(report["error"], file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
