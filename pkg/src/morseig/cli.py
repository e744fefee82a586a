"""Command line entry point ``morseig``.

Exit codes: 0 pass, 2 inequality violated, 3 inconclusive.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from .classify import TAU_DEF, TAU_HESS_REL, ClassifyOptions, classify_point
from .families import random_family, resolve_family
from .pipeline import ScanOptions, conseq_check, contour_csv, minmax_separation, scan, scan_all, van_hove_table
from .polyalg import Field, IntPoly, emit_table
from .spectral import DEFAULT_CLUSTER_TOL, cluster_at, eig_sorted, hf_slopes, secant_slopes
from .stratum import project_to_stratum, trace_stratum

EXIT_PASS, EXIT_VIOLATED, EXIT_INCONCLUSIVE = 0, 2, 3
CONCLUSIVE = ("Regular", "SmoothCritical", "NonDegenerateCritical")


def _floats(text: str) -> np.ndarray:
    return np.array([float(t) for t in text.replace(" ", "").split(",") if t], dtype=float)


def _poly(text: str) -> IntPoly:
    text = text.strip()
    if "t" in text:
        return IntPoly.parse(text)
    return IntPoly(tuple(int(t) for t in text.split(",") if t.strip()))


def _write(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _classify_options(args) -> ClassifyOptions:
    return ClassifyOptions(cluster_tol=args.tol_cluster, tau_def=args.tol_def, tau_hess_rel=args.tol_hess,
                           seed=args.seed)


def _scan_options(args) -> ScanOptions:
    pm = _poly(args.manifold_poincare) if args.manifold_poincare else None
    return ScanOptions(classify=_classify_options(args), manifold_poincare=pm)


def _rows_to_text(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=2, sort_keys=True)
    keys = list(rows[0]) if rows else []
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return buf.getvalue()
    lines = ["| " + " | ".join(keys) + " |", "|" + "---|" * len(keys)]
    lines += ["| " + " | ".join(str(r[k]) for k in keys) + " |" for r in rows]
    return "\n".join(lines) + "\n"


# -- subcommands ---------------------------------------------------------------------------


def cmd_table(args) -> int:
    fmt = args.format
    if fmt == "json":
        from .polyalg import contribution_table

        rows = contribution_table(args.nu, args.field)
        text = json.dumps({str(nu + 1): [str(p) for p in row] for nu, row in enumerate(rows)}, indent=2)
    else:
        text = emit_table(args.nu, args.field, fmt)
    _write(text, args.out)
    return EXIT_PASS


def cmd_classify(args) -> int:
    fam = resolve_family(args.family)
    x = _floats(args.x) if args.x else np.zeros(fam.d)
    cls = classify_point(fam, x, args.k, _classify_options(args))
    d = cls.to_dict()
    if args.format == "json":
        text = json.dumps(d, indent=2, sort_keys=True)
    else:
        flat = {k: (json.dumps(v) if isinstance(v, (list, dict)) else v) for k, v in d.items()}
        text = _rows_to_text([flat], args.format)
    _write(text, args.out)
    return EXIT_PASS if cls.verdict in CONCLUSIVE else EXIT_INCONCLUSIVE


def _report_rows(report) -> list[dict]:
    rows = []
    for r in report.reports:
        c = r.classification
        rows.append({
            "location": " ".join(f"{v:.10f}" for v in r.location),
            "value": f"{r.value:.12g}",
            "verdict": c.verdict,
            "nu": c.nu,
            "i": c.rel_index,
            "mu": "" if c.mu is None else c.mu,
            "contribution": str(c.morse_term),
        })
    return rows


def cmd_scan(args) -> int:
    fam = resolve_family(args.family)
    report = scan(fam, args.k, args.grid, _scan_options(args))
    if args.format == "json":
        d = report.to_dict()
        cq = conseq_check(report)
        d["conseq"] = {"pass": cq.passed, "left": None if cq.left is None else cq.left.to_list(),
                       "notice": cq.notice}
        text = json.dumps(d, indent=2, sort_keys=True)
    else:
        text = _rows_to_text(_report_rows(report), args.format)
        if args.format == "md":
            text += f"\np_morse = {report.p_morse}; P_M = {report.p_manifold}; {report.division}"
            text += "; inconclusive\n" if report.inconclusive else "\n"
    _write(text, args.out)
    if args.contour:
        with open(args.contour, "w", encoding="utf-8") as fh:
            fh.write(contour_csv(fam, args.k, args.grid))
    return report.exit_code


def cmd_vanhove(args) -> int:
    fam = resolve_family(args.family)
    reports = scan_all(fam, args.grid, _scan_options(args))
    pm = _poly(args.manifold_poincare) if args.manifold_poincare else None
    checks = van_hove_table(reports, fam.d, pm)
    rows = []
    for k, r in reports.items():
        rows.append({"check": f"lambda_{k}", "value": str(r.p_morse), "pass": r.division.satisfied})
    rows += [{"check": b.name, "value": b.lhs, "pass": b.passed} for b in checks]
    seps = minmax_separation(reports)
    rows += [{"check": f"max/min lambda_{s.lower} < lambda_{s.upper}",
              "value": f"{s.max_lower:.6g}<{s.max_upper:.6g}; {s.min_lower:.6g}<{s.min_upper:.6g}",
              "pass": s.passed} for s in seps]
    _write(_rows_to_text(rows, args.format), args.out)
    if not all(r["pass"] for r in rows):
        return EXIT_VIOLATED
    return EXIT_INCONCLUSIVE if any(r.inconclusive for r in reports.values()) else EXIT_PASS


def cmd_hf_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    rows = []
    for t in range(args.trials):
        if args.family:
            fam = resolve_family(args.family)
        else:
            fam = random_family(args.seed * 100003 + t, int(rng.integers(1, 4)), int(rng.integers(1, 7)),
                                Field.REAL if t % 2 == 0 else Field.COMPLEX)
        x = rng.uniform(0, 2 * np.pi, fam.d)
        v = rng.standard_normal(fam.d)
        k = min(args.k, fam.n) if args.family else int(rng.integers(1, fam.n + 1))
        c = cluster_at(eig_sorted(fam.evaluate(x)), k, args.tol_cluster)
        a = hf_slopes(fam, x, v, c)
        b = secant_slopes(fam, x, v, c)
        err = float(np.max(np.abs(a - b)) / max(float(np.max(np.abs(a))), 1e-12))
        rows.append({"trial": t, "family": fam.name, "k": k, "nu": c.nu, "rel_error": f"{err:.3e}",
                     "pass": err <= args.tol_hf})
    _write(_rows_to_text(rows, args.format), args.out)
    return EXIT_PASS if all(r["pass"] for r in rows) else EXIT_VIOLATED


def cmd_trace(args) -> int:
    fam = resolve_family(args.family)
    x0 = _floats(args.x) if args.x else np.zeros(fam.d)
    p = project_to_stratum(fam, x0, args.k, 2)
    tr = trace_stratum(fam, p, args.k, args.step, args.max_steps)
    if args.format == "csv":
        text = tr.to_csv()
    else:
        info = {"closed": tr.closed, "length": tr.length, "points": len(tr.points), "flagged": tr.flagged,
                "message": tr.message}
        text = json.dumps(info, indent=2, sort_keys=True) if args.format == "json" else _rows_to_text([info], "md")
    _write(text, args.out)
    return EXIT_PASS if tr.closed and not tr.flagged else EXIT_INCONCLUSIVE


# -- parser -----------------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, formats=("json", "csv", "md"), default="json") -> None:
    p.add_argument("--family", default=None, help="builtin family name or path to a JSON family spec")
    p.add_argument("--k", type=int, default=1, help="branch index (1 = lowest eigenvalue)")
    p.add_argument("--grid", type=int, default=32, help="grid points per torus dimension")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol-def", type=float, default=TAU_DEF, help="definiteness margin")
    p.add_argument("--tol-hess", type=float, default=TAU_HESS_REL, help="relative Hessian threshold")
    p.add_argument("--tol-cluster", type=float, default=DEFAULT_CLUSTER_TOL, help="eigenvalue clustering tolerance")
    p.add_argument("--tol-hf", type=float, default=1e-5, help="relative slope tolerance for hf-check")
    p.add_argument("--manifold-poincare", default=None,
                   help="Poincare polynomial of the parameter manifold, e.g. '1,2,1' or '1+2t+t^2'")
    p.add_argument("--format", choices=formats, default=default)
    p.add_argument("--out", default=None, help="write output here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="morseig", description="Morse theory for ordered eigenvalues")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("table", help="table of nonsmooth contributions")
    p.add_argument("--nu", type=int, default=8, help="largest multiplicity")
    p.add_argument("--field", choices=["real", "complex"], default="real")
    p.add_argument("--format", choices=["md", "csv", "json"], default="md")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("classify", help="classify one parameter point")
    _common(p)
    p.add_argument("--x", default=None, help="comma separated coordinates (default: origin)")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("scan", help="find and classify all critical points on a torus")
    _common(p)
    p.add_argument("--contour", default=None, help="also write x1,x2,lambda_k rows to this CSV path")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("vanhove", help="smooth critical point bounds across all branches")
    _common(p, default="md")
    p.set_defaults(func=cmd_vanhove)

    p = sub.add_parser("hf-check", help="compare first-order slopes with extrapolated secants")
    _common(p, default="md")
    p.add_argument("--trials", type=int, default=20)
    p.set_defaults(func=cmd_hf_check)

    p = sub.add_parser("trace", help="trace a one-dimensional stratum")
    _common(p, default="csv")
    p.add_argument("--x", default=None, help="start point near the stratum")
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--max-steps", type=int, default=10000)
    p.set_defaults(func=cmd_trace)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    needs_family = args.command in ("classify", "scan", "vanhove", "trace")
    if needs_family and not args.family:
        parser.error(f"{args.command} requires --family")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"morseig: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
