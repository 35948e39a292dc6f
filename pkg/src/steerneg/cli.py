"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 solver failure, 3 invalid input.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import hierarchy, io, steering
from .sdp import OPTIMAL, export_sdpa, realify, solve
from .steering import Scenario, SolverError

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_INPUT = 0, 1, 2, 3

BUNDLED = ("xy.json", "xyz.json", "zero.json", "bohm.json", "product.json", "werner06.json")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(v) -> float | None:
    """Six significant digits for printed output; ``None`` for NaN."""
    if v is None or not math.isfinite(v):
        return None
    return float(f"{v:.6g}")


def resolve_input(name: str) -> Path:
    """A path on disk, or the name of a bundled file."""
    p = Path(name)
    if p.exists():
        return p
    if name in BUNDLED:
        return Path(str(resources.files("steerneg") / "data" / name))
    raise io.InputError(f"{name}: no such file (bundled files: {', '.join(BUNDLED)})")


def parse_scenario(text: str) -> Scenario:
    try:
        d_b, m_a, n_a = (int(t) for t in text.split(","))
        return Scenario(m_a, n_a, d_b)
    except ValueError:
        raise UsageError(f"--scenario expects dB,mA,nA with positive integers, got {text!r}") from None


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# --- commands ------------------------------------------------------------------

def _guarded(fn, *args, **kw):
    try:
        return fn(*args, **kw), OPTIMAL
    except SolverError as exc:
        return None, exc.solution.status if exc.solution else "numerical-failure"


def cmd_bounds(args) -> int:
    F = io.load_functional(resolve_input(args.file))
    lhs_sdp, s1 = _guarded(steering.lhs_max_sdp, F, tolerance=args.tol)
    lhs_eig = steering.lhs_max_eigen(F)
    quantum, s2 = _guarded(steering.quantum_max, F, tolerance=args.tol)
    ppt = hierarchy.ppt_upper_bound(F, args.level, tolerance=args.tol)
    report = {
        "lhs_sdp": {"value": fmt(lhs_sdp), "status": s1},
        "lhs_eigen": {"value": fmt(lhs_eig), "status": OPTIMAL},
        "quantum": {"value": fmt(quantum), "status": s2},
        "ppt": {"value": fmt(ppt.value), "status": ppt.status, "level": args.level},
    }
    print(json.dumps(report, indent=2))
    return EXIT_OK if all(r["status"] == OPTIMAL for r in report.values()) else EXIT_SOLVER


def cmd_curve(args) -> int:
    F = io.load_functional(resolve_input(args.file))
    vmin = args.vmin if args.vmin is not None else steering.lhs_max_eigen(F)
    if args.vmax is not None:
        vmax = args.vmax
    else:
        vmax, status = _guarded(steering.quantum_max, F, tolerance=args.tol)
        if vmax is None:
            print(f"quantum maximum failed ({status}); pass --vmax", file=sys.stderr)
            return EXIT_SOLVER
    if vmin > vmax:
        raise UsageError(f"--vmin {vmin} exceeds --vmax {vmax}")
    rows = []
    for v, res in hierarchy.negativity_curve(F, np.linspace(vmin, vmax, args.grid), args.level,
                                             tolerance=args.tol):
        rows.append((v, args.level, res.value, res.status))
        print(f"v={fmt(v)} bound={fmt(res.value)} status={res.status}", file=sys.stderr)
    _emit(io.curve_to_csv(rows), args.out)
    # infeasible points above the quantum maximum are an expected outcome, not a failure
    failed = [r for r in rows if r[3] not in (OPTIMAL, "infeasible")]
    return EXIT_SOLVER if failed else EXIT_OK


def cmd_assemblage(args) -> int:
    A = io.load_assemblage(resolve_input(args.file))
    problems = steering.validate_assemblage(A)
    if problems:
        for v in problems:
            print(f"invalid assemblage: {v.rule} violated by {v.magnitude:.3g} ({v.detail})", file=sys.stderr)
        return EXIT_INPUT
    try:
        has_lhs, _ = steering.has_lhs_model(A, tolerance=args.tol)
        lhs_status = OPTIMAL
    except SolverError as exc:
        has_lhs, lhs_status = None, exc.solution.status if exc.solution else "numerical-failure"
    bound = hierarchy.negativity_lower_bound(A, args.level, tolerance=args.tol)
    print(json.dumps({
        "has_lhs": has_lhs,
        "has_lhs_status": lhs_status,
        "negativity_lower_bound": fmt(bound.value),
        "status": bound.status,
        "level": args.level,
    }, indent=2))
    return EXIT_OK if lhs_status == OPTIMAL and bound.ok else EXIT_SOLVER


def search_records(scenario: Scenario, trials: int, level: int, seed: int, tol: float):
    """Seeded random-functional search; yields one record per trial in order."""
    for i in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        F = steering.random_functional(scenario, rng)
        lhs = steering.lhs_max_eigen(F)
        ppt = hierarchy.ppt_upper_bound(F, level, tolerance=tol)
        gap = ppt.value - lhs if ppt.ok else None
        yield {
            "trialIndex": i,
            "seed": seed,
            "scenario": {"d_B": scenario.d_b, "m_A": scenario.m_a, "n_A": scenario.n_a},
            "lhsBound": lhs,
            "pptBound": ppt.value if ppt.ok else None,
            "gap": gap,
            "level": level,
            "status": ppt.status,
            "candidate": bool(ppt.ok and gap > 10 * tol),
        }


def cmd_search(args) -> int:
    scenario = parse_scenario(args.scenario)
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    counts = {"candidates": 0, "non_candidates": 0, "failures": 0}
    out = open(args.out, "w") if args.out else None
    try:
        for rec in search_records(scenario, args.trials, args.level, args.seed, args.tol):
            line = json.dumps(rec)
            if out:
                out.write(line + "\n")
            else:
                print(line)
            if rec["status"] != OPTIMAL:
                counts["failures"] += 1
            elif rec["candidate"]:
                counts["candidates"] += 1
            else:
                counts["non_candidates"] += 1
    finally:
        if out:
            out.close()
    summary = {"trials": args.trials, **counts}
    print(json.dumps({"summary": summary}), file=sys.stderr if not out else sys.stdout)
    return EXIT_SOLVER if counts["failures"] else EXIT_OK


def build_export_problem(args):
    path = resolve_input(args.file)
    kind = args.problem
    if kind == "eq8" and args.v is None:
        raise UsageError("--v is required for --problem eq8")
    if kind != "eq8" and args.v is not None:
        raise UsageError("--v only applies to --problem eq8")
    if kind == "eq7":
        return hierarchy.build_negativity_from_assemblage(io.load_assemblage(path), args.level).problem
    F = io.load_functional(path)
    if kind == "qmax":
        return steering.quantum_max_problem(F)
    if kind == "lhs":
        return steering.lhs_max_problem(F)
    if kind == "eq8":
        return hierarchy.build_negativity_from_violation(F, args.v, args.level).problem
    return hierarchy.build_ppt_bound(F, args.level).problem


def cmd_export(args) -> int:
    p = realify(build_export_problem(args))
    _emit(export_sdpa(p), args.out)
    # SDPA files always maximise F0 . Y; say how to get back to the original optimum
    sign = 1 if p.sense == "maximize" else -1
    print(f"note: {args.problem} optimum = {sign:+d} * (SDPA maximum) + {p.objective_offset!r}",
          file=sys.stderr)
    return EXIT_OK


def cmd_structure(args) -> int:
    st = hierarchy.build_structure(parse_scenario(args.scenario), args.level)
    _emit(st.to_json() + "\n", args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    """Solve an SDPA file with the built-in solver (for cross-checking exports)."""
    from .sdp import read_sdpa, sdpa_to_problem

    sol = solve(sdpa_to_problem(read_sdpa(args.file)), tolerance=args.tol)
    # the value of the file's own maximisation, before any sign or offset of the exporter
    print(json.dumps({"sdpa_objective": fmt(sol.objective_value), "status": sol.status}))
    return EXIT_OK if sol.ok else EXIT_SOLVER


# --- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="steerneg", description="Negativity bounds and PPT tests from EPR-steering data.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, level=True):
        if level:
            p.add_argument("--level", type=int, default=1, help="hierarchy level l >= 1 (default 1)")
        p.add_argument("--tol", type=float, default=1e-8, help="solver tolerance (default 1e-8)")

    p = sub.add_parser("bounds", help="LHS, quantum and PPT bounds of a functional")
    p.add_argument("file", help="functional JSON (or a bundled name such as xy.json)")
    common(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("curve", help="negativity lower bound as a function of the violation")
    p.add_argument("file")
    p.add_argument("--vmin", type=float, help="first grid value (default: LHS bound)")
    p.add_argument("--vmax", type=float, help="last grid value (default: quantum maximum)")
    p.add_argument("--grid", type=int, default=21, help="number of grid points (default 21)")
    p.add_argument("--out", help="CSV output path (default stdout)")
    common(p)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("assemblage", help="LHS test and negativity bound of an assemblage")
    p.add_argument("file")
    common(p)
    p.set_defaults(func=cmd_assemblage)

    p = sub.add_parser("search", help="seeded random search for PPT steering")
    p.add_argument("--scenario", default="2,2,2", help="dB,mA,nA (default 2,2,2)")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="JSON-lines record file (default stdout)")
    common(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("export", help="write a realified problem in SDPA sparse format")
    p.add_argument("file")
    p.add_argument("--problem", required=True, choices=["qmax", "lhs", "eq7", "eq8", "eq9"],
                   help="qmax: quantum maximum; lhs: LHS maximum; eq7: negativity bound from an assemblage; "
                        "eq8: negativity bound from a violation --v; eq9: PPT upper bound")
    p.add_argument("--v", type=float, help="functional value (eq8 only)")
    p.add_argument("--out", help="output path (default stdout)")
    common(p)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("structure", help="dump moment-matrix classes and zero pattern as JSON")
    p.add_argument("--scenario", default="2,2,2", help="dB,mA,nA")
    p.add_argument("--out")
    p.add_argument("--level", type=int, default=1)
    p.set_defaults(func=cmd_structure)

    p = sub.add_parser("solve", help="solve an SDPA sparse file")
    p.add_argument("file")
    common(p, level=False)
    p.set_defaults(func=cmd_solve)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = getattr(args, "level", 1)
    if level < 1:
        parser.error("--level must be at least 1")
    if getattr(args, "grid", 2) < 2:
        parser.error("--grid must be at least 2")
    if getattr(args, "seed", 0) < 0 or getattr(args, "seed", 0) >= 2 ** 64:
        parser.error("--seed must be a 64-bit unsigned integer")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"steerneg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (io.InputError, steering.StrategyCapError, hierarchy.StructureCapError) as exc:
        print(f"steerneg: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"steerneg: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as exc:
        print(f"steerneg: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
