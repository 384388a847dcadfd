"""Command-line entry point: ``unireg {constants,solve,verify} PROBLEM``.

Exit status: 0 all checks pass, 1 parse or validation error, 2 check
failure, 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any

import numpy as np

from .constants import regularity_report
from .errors import MethodArityError, ParseError, ValidationError
from .lift import (
    lifted_constants,
    lifted_constants_direct,
    lifted_constants_two_set_form,
    lifted_equivalence_check,
    value_range_violations,
)
from .primal import GRID_RESOLUTION, primal_report
from .problem import ProblemFile, load_problem
from .solvers import (
    InsufficientData,
    SolverConfig,
    Trace,
    alternating_projections,
    averaged_projections,
    averaged_via_lift,
    cyclic_projections,
    estimate_rate,
    rate_vs_theory,
)

EXIT_OK, EXIT_INVALID, EXIT_CHECK, EXIT_NONCONVERGENCE = 0, 1, 2, 3
DEFLATION_TOL = 1e-12
LIFT_AGREEMENT_TOL = 1e-6
METHODS = ("cyclic", "alternating", "averaged", "averaged-lift")

log = logging.getLogger("unireg")


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def _emit(doc: dict, path: str | None) -> None:
    text = json.dumps(_jsonable(doc), indent=2)
    print(text)
    if path:
        Path(path).write_text(text + "\n")


def _context(pf: ProblemFile, seed: int):
    sets = pf.build_sets()
    xbar = np.asarray(pf.reference_point, dtype=float)
    return sets, xbar, {"seed": seed}


def _constants_doc(pf: ProblemFile, seed: int) -> dict:
    sets, xbar, kw = _context(pf, seed)
    rep = regularity_report(sets, xbar, **kw)
    lc = lifted_constants(sets, xbar, **kw)
    m = len(sets)
    return {
        "m": m,
        "dimension": pf.dimension,
        **rep.as_dict(),
        "identity_residuals": rep.identity_residuals(),
        "lifted": lc.as_dict(),
        "lifted_value_range_violations": value_range_violations(lc, m),
    }


def cmd_constants(pf: ProblemFile, args) -> int:
    doc = _constants_doc(pf, args.seed)
    bad = {k: v for k, v in doc["identity_residuals"].items() if v > args.tolerance}
    doc["checks_passed"] = not bad and not doc["lifted_value_range_violations"]
    _emit(doc, args.output)
    return EXIT_OK if doc["checks_passed"] else EXIT_CHECK


def _trace_csv(trace: Trace) -> str:
    buf = io.StringIO()
    n = trace.iterates[0].size
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "displacement", "distance_to_limit"] + [f"x{j + 1}" for j in range(n)])
    for k, x in enumerate(trace.iterates):
        disp = format(trace.displacements[k - 1], ".17g") if k > 0 else ""
        dist = format(trace.distances_to_limit[k], ".17g") if trace.converged else ""
        w.writerow([k, disp, dist] + [format(v, ".17g") for v in x])
    return buf.getvalue()


def _rate_doc(trace: Trace) -> dict:
    if not trace.converged:
        return {"available": False, "reason": "not converged"}
    try:
        est = estimate_rate(trace)
    except InsufficientData as exc:
        return {"available": False, "reason": str(exc)}
    return {"available": True, **est.__dict__}


def cmd_solve(pf: ProblemFile, args) -> int:
    sets, xbar, _ = _context(pf, args.seed)
    if not pf.start_points:
        raise ValidationError("start_points is empty; solve needs at least one start point")
    if not 0 <= args.start_index < len(pf.start_points):
        raise ValidationError(f"--start-index {args.start_index} out of range 0..{len(pf.start_points) - 1}")
    s = pf.solver
    cfg = SolverConfig(np.asarray(pf.start_points[args.start_index], dtype=float), s.max_iterations,
                       s.stop_displacement, s.reference_solution, args.seed)
    doc: dict[str, Any] = {"method": args.method, "m": len(sets), "start_index": args.start_index}
    status = EXIT_OK
    if args.method == "averaged-lift":
        run = averaged_via_lift(sets, cfg)
        trace = run.deflated
        direct = averaged_projections(sets, cfg)
        agree = len(direct) == len(trace) and max(
            float(np.linalg.norm(a - b)) for a, b in zip(direct.iterates, trace.iterates)) <= DEFLATION_TOL
        doc["deflation_residual"] = run.deflation_residual
        doc["deflation_ok"] = run.deflation_residual <= DEFLATION_TOL
        doc["matches_direct_averaged"] = agree
        if not (doc["deflation_ok"] and agree):
            status = EXIT_CHECK
    elif args.method == "averaged":
        trace = averaged_projections(sets, cfg)
    elif args.method == "alternating":
        trace = alternating_projections(sets, cfg)
    else:
        trace = cyclic_projections(sets, cfg)
    doc.update({
        "iterations": len(trace) - 1,
        "converged": trace.converged,
        "finite_convergence": trace.finite_convergence,
        "limit": trace.limit,
        "nonexpansive_ok": trace.nonexpansive_ok,
        "violations": trace.violations,
        "rate": _rate_doc(trace),
    })
    if args.method in ("cyclic", "alternating") and trace.converged:
        doc["theory"] = rate_vs_theory(sets, xbar, trace).as_dict()
    text = _trace_csv(trace)
    if args.output:
        Path(args.output).write_text(text)
        doc["csv"] = args.output
    _emit(doc, None)
    if not trace.converged:
        return EXIT_NONCONVERGENCE
    return status


def _check(name: str, passed: bool, **detail) -> dict:
    return {"name": name, "passed": bool(passed), **detail}


def cmd_verify(pf: ProblemFile, args) -> int:
    sets, xbar, kw = _context(pf, args.seed)
    tol = args.tolerance
    m = len(sets)
    rep = regularity_report(sets, xbar, **kw)
    checks = []
    for name, r in rep.identity_residuals().items():
        checks.append(_check(f"identity:{name}", r <= tol, residual=r))
    checks.append(_check("classification", (rep.eta_hat > 1e-9) == (rep.classification.value == "UniformlyRegular"),
                         eta_hat=rep.eta_hat, classification=rep.classification))
    lc = lifted_constants(sets, xbar, **kw)
    checks.append(_check("lifted:pythagorean", abs(lc.eta ** 2 + lc.nu ** 2 - 1) <= tol,
                         residual=abs(lc.eta ** 2 + lc.nu ** 2 - 1)))
    checks.append(_check("lifted:affine", abs(1 + lc.c - 2 * lc.nu ** 2) <= tol,
                         residual=abs(1 + lc.c - 2 * lc.nu ** 2)))
    viol = value_range_violations(lc, m)
    checks.append(_check("lifted:value_range", not viol, violations=viol))
    direct = lifted_constants_direct(sets, xbar, **kw)
    checks.append(_check("lifted:direct_agreement", abs(direct.c - lc.c) <= LIFT_AGREEMENT_TOL,
                         closed_form=lc.c, direct=direct.c))
    if m == 2:
        alt = lifted_constants_two_set_form(sets, xbar, **kw)
        checks.append(_check("lifted:two_set_form", abs(alt.c - lc.c) <= LIFT_AGREEMENT_TOL,
                             closed_form=lc.c, two_set_form=alt.c))
        checks.append(_check("lifted:c_prime_ge_nu_hat", lc.c >= rep.nu_hat - tol, c_prime=lc.c,
                             nu_hat=rep.nu_hat, gap=lc.c - rep.nu_hat))
    checks.append(_check("lifted:equivalence", lifted_equivalence_check(sets, xbar, **kw)))
    polyhedral = all(getattr(s, "rows", lambda: None)() is not None for s in sets)
    if pf.dimension <= 3 and polyhedral:
        pr = primal_report(sets, xbar, GRID_RESOLUTION, seed=args.seed)
        band = 3 * pr.grid_resolution
        checks.append(_check("primal:theta_vs_eta", abs(pr.theta_hat - rep.eta_hat) <= band,
                             theta_hat=pr.theta_hat, eta_hat=rep.eta_hat, band=band))
        checks.append(_check("primal:theta_vs_vartheta", pr.agree(), theta_hat=pr.theta_hat,
                             vartheta_hat=pr.vartheta_hat, band=band))
    ok = all(c["passed"] for c in checks)
    _emit({"passed": ok, "classification": rep.classification, "checks": checks}, args.output)
    return EXIT_OK if ok else EXIT_CHECK


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the parse-error status rather than argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _common(defaults: bool) -> argparse.ArgumentParser:
    # Shared options, accepted before or after the subcommand.
    d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=d(0), help="seed for sampled cones and grids")
    p.add_argument("--tolerance", type=float, default=d(1e-9), help="tolerance for identity checks")
    p.add_argument("--output", default=d(None),
                   help="write the report (constants, verify) or the CSV trace (solve) to this path")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return p


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="unireg", description="Regularity constants and projection methods.",
                parents=[_common(True)])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    shared = [_common(False)]
    sc = sub.add_parser("constants", parents=shared, help="dual and lifted regularity constants")
    sc.add_argument("problem")
    ss = sub.add_parser("solve", parents=shared, help="run a projection method")
    ss.add_argument("problem")
    ss.add_argument("--method", choices=METHODS, default="cyclic")
    ss.add_argument("--start-index", type=int, default=0)
    sv = sub.add_parser("verify", parents=shared, help="identity, lift and primal-dual checks")
    sv.add_argument("problem")
    return p


COMMANDS = {"constants": cmd_constants, "solve": cmd_solve, "verify": cmd_verify}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        pf = load_problem(args.problem)
        return COMMANDS[args.command](pf, args)
    except (ParseError, ValidationError, MethodArityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
