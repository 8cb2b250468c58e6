"""End-to-end solve drivers for each instance kind.

Every driver returns a :class:`SolveResult` whose solution has been
re-checked against the original instance before it is handed back.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Sequence

from . import ratcore as rc
from . import sumdecomp as sd
from .cographic import DirectedGraph, McippInstance, cographic_to_mcipp, edge_instance, potentials, tension
from .errors import InfeasibleError, check
from .mcippdp import McippDpStats, SpecialTreeDecomposition, dp_solve
from .proximity import (
    EqualityInstance,
    GeneralIpInstance,
    InequalityInstance,
    eliminate_columns,
    f_bound,
    reduce_to_circuit_search,
    to_equality_form,
)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass
class SolveResult:
    status: str
    value: int | None = None
    x: tuple[int, ...] | None = None
    trace: dict[str, Any] = field(default_factory=dict)


def _lp_point(out: rc.LpOutcome) -> list[Fraction]:
    assert out.x is not None
    return list(out.x)


# ---------------------------------------------------------------- equality form


def solve_equality(inst: EqualityInstance, graph: DirectedGraph | None = None,
                   td: SpecialTreeDecomposition | None = None, superprofiles=None) -> SolveResult:
    """LP, anchor, translate, then the circulation DP (or the potential DP when a graph is given)."""
    trace: dict[str, Any] = {"n": inst.n, "k": inst.k, "delta": inst.delta}
    lp = inst.lp()
    trace["lp"] = lp.status.value
    if lp.status is rc.LpStatus.INFEASIBLE:
        return SolveResult(INFEASIBLE, trace=trace)
    if lp.status is rc.LpStatus.UNBOUNDED:
        # bounds are finite here, so this cannot happen
        raise AssertionError("equality instance with finite bounds reported unbounded")
    x_star = _lp_point(lp)
    trace["lp_value"] = str(lp.value)
    trace["lp_point"] = [str(v) for v in x_star]
    if inst.k == 0:
        check(all(v.denominator == 1 for v in x_star), "TU relaxation returned a fractional vertex")
        x = tuple(int(v) for v in x_star)
        trace["anchor"] = list(x)
        return SolveResult(OPTIMAL, int(lp.value), x, trace)
    anchored = reduce_to_circuit_search(inst, x_star)
    z = anchored.anchor
    trace["anchor"] = list(z)
    trace["anchor_distance"] = str(max((abs(a - b) for a, b in zip(x_star, z)), default=0))
    trace["t_max"] = anchored.t_max
    shifted = anchored.shifted
    if graph is not None:
        mc = cographic_to_mcipp(shifted, graph)
        res = _solve_anchored_mcipp(mc, td, superprofiles, trace)
        if res is None:
            return SolveResult(INFEASIBLE, trace=trace)
        _, y = res
        x_shift = tension(graph, y)
    else:
        stats = sd.DpStats()
        sub_trace: dict[str, Any] = {}
        res = sd.solve_circulation(shifted, stats, sub_trace)
        trace["circulation"] = sub_trace
        if res is None:
            return SolveResult(INFEASIBLE, trace=trace)
        _, x_shift = res
    x = anchored.lift(x_shift)
    check(inst.is_feasible(x), "lifted solution is infeasible")
    return SolveResult(OPTIMAL, int(inst.value(x)), x, trace)


# ---------------------------------------------------------------- inequality and general forms


def solve_inequality(inst: InequalityInstance) -> SolveResult:
    trace: dict[str, Any] = {}
    lp = inst.lp()
    trace["lp"] = lp.status.value
    if lp.status is rc.LpStatus.INFEASIBLE:
        return SolveResult(INFEASIBLE, trace=trace)
    if lp.status is rc.LpStatus.UNBOUNDED:
        zero = solve_inequality(replace(inst, p=(0,) * inst.n))
        trace["unbounded_check"] = zero.status
        return SolveResult(UNBOUNDED if zero.status == OPTIMAL else INFEASIBLE, trace=trace)
    try:
        eq = to_equality_form(inst, lp.x)
    except InfeasibleError:
        return SolveResult(INFEASIBLE, trace=trace)
    res = solve_equality(eq)
    trace["equality"] = res.trace
    if res.status != OPTIMAL:
        return SolveResult(res.status, trace=trace)
    assert res.x is not None
    x = res.x[: inst.n]
    return SolveResult(OPTIMAL, sum(a * b for a, b in zip(inst.p, x)), x, trace)


def solve_general(inst: GeneralIpInstance) -> SolveResult:
    """Guess the extra columns inside the box around the LP optimum; solve each remainder."""
    trace: dict[str, Any] = {"n": inst.n, "k": inst.k, "extra_columns": list(inst.extra_cols)}
    lp = inst.lp()
    trace["lp"] = lp.status.value
    if lp.status is rc.LpStatus.INFEASIBLE:
        return SolveResult(INFEASIBLE, trace=trace)
    if lp.status is rc.LpStatus.UNBOUNDED:
        zero = solve_general(replace(inst, p=(0,) * inst.n))
        trace["unbounded_check"] = zero.status
        return SolveResult(UNBOUNDED if zero.status == OPTIMAL else INFEASIBLE, trace=trace)
    subs = eliminate_columns(inst, _lp_point(lp))
    trace["guesses"] = len(subs)
    best: tuple[int, tuple[int, ...]] | None = None
    solved = 0
    for sub in subs:
        if sub.equality is None:
            continue
        res = solve_equality(sub.equality)
        solved += 1
        if res.status != OPTIMAL:
            continue
        assert res.x is not None
        x = [0] * inst.n
        for j, v in sub.fixed.items():
            x[j] = v
        for j, v in zip(sub.columns, res.x):
            x[j] = v
        val = sum(a * b for a, b in zip(inst.p, x))
        cand = (val, tuple(x))
        if best is None or val > best[0] or (val == best[0] and cand[1] < best[1]):
            best = cand
    trace["guesses_solved"] = solved
    if best is None:
        return SolveResult(INFEASIBLE, trace=trace)
    val, x = best
    check(all(sum(a * b for a, b in zip(row, x)) <= rhs for row, rhs in zip(inst.M, inst.b)),
          "general solution violates a row")
    return SolveResult(OPTIMAL, val, x, trace)


# ---------------------------------------------------------------- potential problems


def _solve_anchored_mcipp(inst: McippInstance, td, superprofiles, trace) -> tuple[int, tuple[int, ...]] | None:
    stats = McippDpStats()
    res = dp_solve(inst, td, superprofiles, stats)
    trace["mcipp_dp"] = vars(stats)
    trace["f"] = f_bound(inst.k, inst.delta)
    return res


def anchor_mcipp(inst: McippInstance, trace: dict[str, Any] | None = None
                 ) -> tuple[McippInstance, tuple[int, ...]] | None:
    """Translate a potential problem so that some optimum is a sum of at most ``f`` docset indicators.

    Returns the translated instance and the offset potential, or None when
    the relaxation is empty.
    """
    edge = edge_instance(inst)
    lp = edge.lp()
    if lp.status is rc.LpStatus.INFEASIBLE:
        return None
    x_star = _lp_point(lp)
    if trace is not None:
        trace["lp_point"] = [str(v) for v in x_star]
    if inst.k == 0:
        z = tuple(int(v) for v in x_star)
    else:
        z = reduce_to_circuit_search(edge, x_star).anchor
    y_z = potentials(inst.graph, z)
    shifted = McippInstance.build(
        inst.graph, inst.p, inst.W,
        [d - sum(w * y for w, y in zip(row, y_z)) for d, row in zip(inst.d, inst.W)],
        [lo - a for lo, a in zip(inst.lower, z)], [hi - a for hi, a in zip(inst.upper, z)], inst.delta)
    return shifted, tuple(int(v) for v in y_z)


def solve_mcipp(inst: McippInstance, td: SpecialTreeDecomposition | None = None,
                superprofiles=None) -> SolveResult:
    trace: dict[str, Any] = {"vertices": inst.graph.n, "edges": inst.graph.m, "k": inst.k, "delta": inst.delta}
    anchored = anchor_mcipp(inst, trace)
    if anchored is None:
        trace["lp"] = "infeasible"
        return SolveResult(INFEASIBLE, trace=trace)
    shifted, y_z = anchored
    trace["anchor_potential"] = list(y_z)
    res = _solve_anchored_mcipp(shifted, td, superprofiles, trace)
    if res is None:
        return SolveResult(INFEASIBLE, trace=trace)
    _, y_shift = res
    y = tuple(a + b for a, b in zip(y_shift, y_z))
    check(inst.is_feasible(y), "potential solution is infeasible")
    return SolveResult(OPTIMAL, inst.value(y), y, trace)


def solve_file(f, td: SpecialTreeDecomposition | None = None) -> SolveResult:
    """Dispatch on the kind of a parsed instance file; ``td`` overrides the file's decomposition."""
    td = td if td is not None else f.td
    if f.kind == "ip_general":
        return solve_general(f.instance)
    if f.kind in ("ip_equality", "mcicp"):
        return solve_equality(f.instance, f.graph, td, f.superprofiles)
    return solve_mcipp(f.instance, td, f.superprofiles)
