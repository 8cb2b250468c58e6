"""Command line: ``solve``, ``check``, ``verify`` and ``gen``.

Exit codes: 0 success, 1 verification mismatch, 2 parse or validation
error, 3 cap or budget exceeded (including unverified results), 4 internal
invariant breach.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Any, Sequence

from . import configcore as cc
from . import fileformat as ff
from . import oracle
from . import sumdecomp as sd
from .cographic import (
    beta,
    docset_masks,
    find_rooted_K2t_model,
    max_docset_weight,
    tension_configuration,
)
from .errors import CapExceeded, InvariantBreach, ValidationError
from .generate import generate
from .pipeline import OPTIMAL, SolveResult, solve_file

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_INVALID = 2
EXIT_CAP = 3
EXIT_BREACH = 4


def _emit(report: dict[str, Any], as_json: bool, out) -> None:
    if as_json:
        out.write(json.dumps(report, sort_keys=True, indent=1, default=str) + "\n")
        return
    for key, value in report.items():
        if isinstance(value, (dict, list)) and key in ("trace", "verification", "properties"):
            out.write(f"{key}:\n")
            out.write(json.dumps(value, sort_keys=True, indent=2, default=str) + "\n")
        elif isinstance(value, (list, tuple)):
            out.write(f"{key}: {' '.join(map(str, value))}\n")
        else:
            out.write(f"{key}: {value}\n")


def _load(args) -> tuple[ff.InstanceFile, Any]:
    f = ff.load(args.path)
    td = None
    if getattr(args, "td", None):
        if f.graph is None:
            raise ValidationError("--td needs an instance with a graph")
        with open(args.td, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"tree decomposition is not valid JSON: {exc}") from None
        td = ff.parse_td(data.get("tree_decomposition", data), f.graph)
    return f, td


def _solve_report(f: ff.InstanceFile, res: SolveResult, trace: bool) -> dict[str, Any]:
    report: dict[str, Any] = {"kind": f.kind, "status": res.status}
    if res.status == OPTIMAL:
        inst = f.instance
        x = res.x
        assert x is not None
        if f.kind == "ip_general":
            ok = all(sum(a * b for a, b in zip(r, x)) <= c for r, c in zip(inst.M, inst.b))
            val = sum(a * b for a, b in zip(inst.p, x))
        else:
            ok = inst.is_feasible(x)
            val = inst.value(x)
        if not ok or val != res.value:
            raise InvariantBreach("reported solution does not re-check at emit time")
        report["value"] = res.value
        report["solution"] = list(x)
    if trace:
        report["trace"] = res.trace
    return report


def cmd_solve(args, out) -> int:
    f, td = _load(args)
    res = solve_file(f, td)
    report = _solve_report(f, res, args.trace)
    code = EXIT_OK
    if args.verify:
        rep = oracle.verify_pipeline(f, res, oracle.BruteBudget(lattice=args.budget))
        report["verification"] = rep.to_dict()
        if rep.status == oracle.UNVERIFIED:
            report["status"] = "unverified"
            code = EXIT_CAP
        elif rep.status == oracle.FAIL:
            code = EXIT_MISMATCH
    _emit(report, args.json, out)
    return code


def cmd_verify(args, out) -> int:
    args.verify = True
    return cmd_solve(args, out)


def _try(fn, *a):
    try:
        return fn(*a)
    except CapExceeded as exc:
        return f"skipped ({exc})"


def _connectivity(A: cc.Configuration):
    if A.n < 2:
        return "n/a"
    if not cc.is_connected(A):
        return 1
    if A.n >= 4 and sd.find_separation(A, 2) is not None:
        return 2
    return ">= 3"


def cmd_check(args, out) -> int:
    f = ff.load(args.path)
    inst = f.instance
    props: dict[str, Any] = {"kind": f.kind, "k": f.k, "delta": f.delta}
    if f.kind == "ip_general":
        tu = inst.tu_part()
        props["TU part (configcore)"] = "yes" if _try(cc.is_totally_unimodular, tu) is True else "no"
        props["max |subdeterminant| (oracle)"] = _try(oracle.max_abs_subdeterminant, [list(r) for r in inst.M])
        props["weight rows"] = list(inst.w_rows)
        props["extra columns"] = list(inst.extra_cols)
    elif f.kind in ("ip_equality", "mcicp"):
        A = inst.configuration()
        props["TU (configcore)"] = "yes" if _try(cc.is_totally_unimodular, A) is True else "no"
        props["max circuit weight (configcore)"] = _try(cc.max_circuit_weight, A, inst.W)
        props["connectivity (sumdecomp)"] = _try(_connectivity, A)
        if f.graph is not None:
            props["tension space of graph (cographic)"] = "yes"
            props["cographic configuration rank (cographic)"] = tension_configuration(f.graph).rank
    else:
        G = f.graph
        assert G is not None
        props["vertices"] = G.n
        props["edges"] = G.m
        props["2-connected"] = "yes" if G.is_biconnected() else "no"
        props["simple"] = "yes" if G.is_simple() else "no"
        props["3-connected up to subdivision"] = "yes" if G.is_subdivided_3_connected() else "no"
        props["docsets (cographic)"] = len(docset_masks(G))
        props["beta per weight row (cographic)"] = [beta(G, row) for row in inst.W]
        props["max docset weight (cographic)"] = max_docset_weight(G, inst.W)
        t = 4 * inst.k * inst.delta + 1
        if G.is_biconnected():
            found = _try(find_rooted_K2t_model, G, inst.roots, t)
            verdict = found if isinstance(found, str) else ("found" if found is not None else "none")
        else:
            verdict = "not applicable (graph is not 2-connected)"
        props[f"rooted K2,{t} model (cographic)"] = verdict
        if f.td is not None:
            props["tree decomposition bags"] = len(f.td.bags)
            props["tree decomposition ell"] = f.td.ell
    _emit({"properties": props} if args.json else props, args.json, out)
    return EXIT_OK


def cmd_gen(args, out) -> int:
    size: dict[str, Any] = {}
    if args.k is not None:
        size["k"] = args.k
    if args.delta is not None:
        size["delta"] = args.delta
    if args.kind == "mcipp":
        if args.vertices is not None:
            size["n"] = args.vertices
        size["td"] = args.td_style
    elif args.vertices is not None:
        size["n"] = args.vertices
    f = generate(args.kind, args.seed, **size)
    out.write(ff.dumps(f))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nearlytu", description="Exact solver for nearly totally unimodular IPs.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, solving: bool) -> None:
        p.add_argument("path", help="instance file (JSON)")
        p.add_argument("--json", action="store_true", help="machine-readable report")
        if solving:
            p.add_argument("--trace", action="store_true", help="include the per-stage trace")
            p.add_argument("--td", help="external tree decomposition (JSON)")
            p.add_argument("--budget", type=int, default=oracle.LATTICE_BUDGET, help="oracle lattice cap")

    p = sub.add_parser("solve", help="solve an instance")
    common(p, True)
    p.add_argument("--verify", action="store_true", help="check the result against the brute-force oracle")
    p.set_defaults(run=cmd_solve)
    p = sub.add_parser("verify", help="solve and compare with the brute-force oracle")
    common(p, True)
    p.set_defaults(run=cmd_verify)
    p = sub.add_parser("check", help="report structural properties")
    common(p, False)
    p.set_defaults(run=cmd_check)
    p = sub.add_parser("gen", help="emit a random valid instance")
    p.add_argument("--kind", required=True, choices=ff.KINDS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--vertices", type=int, help="vertices (mcipp) or columns (equality kinds) or variables")
    p.add_argument("--k", type=int, choices=(0, 1, 2))
    p.add_argument("--delta", type=int, choices=(1, 2))
    p.add_argument("--td-style", default="none", choices=("none", "trivial", "heuristic", "separator"))
    p.set_defaults(run=cmd_gen)
    return parser


def main(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    if getattr(args, "budget", 1) < 1:
        err.write("error: --budget must be positive\n")
        return EXIT_INVALID
    try:
        return args.run(args, out)
    except InvariantBreach as exc:
        err.write(f"invariant breach: {exc}\n")
        return EXIT_BREACH
    except CapExceeded as exc:
        err.write(f"cap exceeded: {exc}\n")
        return EXIT_CAP
    except ValidationError as exc:
        err.write(f"invalid input: {exc}\n")
        return EXIT_INVALID
