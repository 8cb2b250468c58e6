"""Brute-force ground truth.

Nothing here calls into the solver modules: lattice scans use numpy over a
mixed-radix grid, determinants use Laplace expansion, connectivity uses
plain breadth-first search over Python sets, and shortest paths are
Bellman-Ford.  Budgets raise :class:`CapExceeded`; nothing is truncated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import CapExceeded, InfiniteBoundError, ValidationError

LATTICE_BUDGET = 10**7
SUBSET_BUDGET = 1 << 20
SUBMATRIX_BUDGET = 10**6
_CHUNK = 1 << 16


@dataclass(frozen=True)
class BruteBudget:
    lattice: int = LATTICE_BUDGET
    subsets: int = SUBSET_BUDGET
    submatrices: int = SUBMATRIX_BUDGET

    def __post_init__(self) -> None:
        if min(self.lattice, self.subsets, self.submatrices) < 1:
            raise ValidationError("budgets must be positive")


@dataclass(frozen=True)
class BruteResult:
    value: int
    x: tuple[int, ...]
    optima: tuple[tuple[int, ...], ...] = ()


# ---------------------------------------------------------------- lattice scan


def _scan(p, eq_rows, eq_rhs, le_rows, le_rhs, lower, upper, budget: BruteBudget, collect: bool):
    n = len(p)
    lower = [int(v) for v in lower]
    upper = [int(v) for v in upper]
    if any(lo > hi for lo, hi in zip(lower, upper)):
        return None
    radix = [hi - lo + 1 for lo, hi in zip(lower, upper)]
    total = math.prod(radix)
    if total > budget.lattice:
        raise CapExceeded("oracle lattice points", total, budget.lattice)
    # coordinate 0 is the most significant digit, so index order is lex order
    stride = np.ones(n, dtype=np.int64)
    for j in range(n - 2, -1, -1):
        stride[j] = stride[j + 1] * radix[j + 1]
    lo = np.array(lower, dtype=np.int64)
    rad = np.array(radix, dtype=np.int64)
    P = np.array(p, dtype=np.int64)
    E = np.array(eq_rows, dtype=np.int64).reshape(len(eq_rows), n)
    e = np.array(eq_rhs, dtype=np.int64)
    L = np.array(le_rows, dtype=np.int64).reshape(len(le_rows), n)
    l = np.array(le_rhs, dtype=np.int64)
    best = None
    best_x = None
    optima: list[tuple[int, ...]] = []
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        X = lo + (idx[:, None] // stride) % rad
        ok = np.ones(len(idx), dtype=bool)
        if len(E):
            ok &= np.all(X @ E.T == e, axis=1)
        if len(L):
            ok &= np.all(X @ L.T <= l, axis=1)
        if not ok.any():
            continue
        Xf = X[ok]
        vals = Xf @ P
        m = int(vals.max())
        if best is None or m > best:
            best = m
            best_x = tuple(int(v) for v in Xf[int(np.argmax(vals == m))])
            optima = []
        if collect and m == best:
            optima.extend(tuple(int(v) for v in row) for row in Xf[vals == m])
    if best is None:
        return None
    return BruteResult(best, best_x, tuple(optima))


def brute_ip(p, A, b, W, d, lower, upper, budget: BruteBudget | None = None,
             collect: bool = False) -> BruteResult | None:
    """Exact optimum of ``max p x, Ax = b, Wx = d, lower <= x <= upper`` by full enumeration.

    The returned point is the lexicographically smallest optimum; with
    ``collect`` every optimum is listed.  None means infeasible.
    """
    budget = budget or BruteBudget()
    _require_finite(lower, upper)
    return _scan(p, list(A) + list(W), list(b) + list(d), [], [], lower, upper, budget, collect)


def brute_ineq(p, M, b, lower, upper, budget: BruteBudget | None = None,
               collect: bool = False) -> BruteResult | None:
    """Exact optimum of ``max p x, Mx <= b`` inside the box."""
    budget = budget or BruteBudget()
    _require_finite(lower, upper)
    return _scan(p, [], [], M, b, lower, upper, budget, collect)


def _require_finite(lower, upper) -> None:
    for v in list(lower) + list(upper):
        if not isinstance(v, (int, np.integer)) and not (isinstance(v, Fraction) and v.denominator == 1):
            raise InfiniteBoundError("oracle needs finite integer bounds")


def box_from_rows(M, b) -> tuple[list[int | None], list[int | None]]:
    """Bounds implied by rows with a single nonzero ``+-1`` entry."""
    n = len(M[0]) if M else 0
    lo: list[int | None] = [None] * n
    hi: list[int | None] = [None] * n
    for row, rhs in zip(M, b):
        nz = [j for j, v in enumerate(row) if v]
        if len(nz) != 1 or abs(row[nz[0]]) != 1:
            continue
        j = nz[0]
        if row[j] == 1:
            hi[j] = rhs if hi[j] is None else min(hi[j], rhs)
        else:
            lo[j] = -rhs if lo[j] is None else max(lo[j], -rhs)
    return lo, hi


# ---------------------------------------------------------------- determinants and circuits


def max_abs_subdeterminant(M: Sequence[Sequence[int]], size_cap: int = 10,
                           budget: BruteBudget | None = None) -> int:
    """Largest ``|det|`` over all square submatrices, by memoised Laplace expansion."""
    budget = budget or BruteBudget()
    rows = [list(map(int, r)) for r in M]
    m = len(rows)
    n = len(rows[0]) if rows else 0
    size = min(m, n)
    if size > size_cap:
        raise CapExceeded("subdeterminant scan size", size, size_cap)
    count = sum(math.comb(m, s) * math.comb(n, s) for s in range(1, size + 1))
    if count > budget.submatrices:
        raise CapExceeded("oracle submatrices", count, budget.submatrices)
    memo: dict[tuple[tuple[int, ...], tuple[int, ...]], int] = {}

    def det(R: tuple[int, ...], C: tuple[int, ...]) -> int:
        if len(R) == 1:
            return rows[R[0]][C[0]]
        key = (R, C)
        if key in memo:
            return memo[key]
        r, rest = R[0], R[1:]
        total = 0
        for j, c in enumerate(C):
            a = rows[r][c]
            if a:
                total += (-1) ** j * a * det(rest, C[:j] + C[j + 1:])
        memo[key] = total
        return total

    best = 0
    for s in range(1, size + 1):
        for R in combinations(range(m), s):
            for C in combinations(range(n), s):
                best = max(best, abs(det(R, C)))
    return best


def _kernel(rows: list[list[Fraction]], n: int) -> list[list[Fraction]]:
    rows = [list(r) for r in rows]
    pivots = []
    r = 0
    for c in range(n):
        pr = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if pr is None:
            continue
        rows[r], rows[pr] = rows[pr], rows[r]
        piv = rows[r][c]
        rows[r] = [v / piv for v in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for fc in free:
        v = [Fraction(0)] * n
        v[fc] = Fraction(1)
        for i, pc in enumerate(pivots):
            v[pc] = -rows[i][fc]
        basis.append(v)
    return basis


def brute_circuits(A: Sequence[Sequence[int]], n: int | None = None,
                   budget: BruteBudget | None = None) -> set[tuple[int, ...]]:
    """Every circuit (both signs) by scanning column subsets in increasing size."""
    budget = budget or BruteBudget()
    n = len(A[0]) if A and n is None else (n or 0)
    if 2**n > budget.subsets:
        raise CapExceeded("oracle column subsets", 2**n, budget.subsets)
    out: set[tuple[int, ...]] = set()
    supports: list[frozenset[int]] = []
    for s in range(1, n + 1):
        for S in combinations(range(n), s):
            Sset = frozenset(S)
            if any(T < Sset for T in supports):
                continue
            ker = _kernel([[Fraction(row[j]) for j in S] for row in A], s)
            if len(ker) != 1 or any(v == 0 for v in ker[0]):
                continue
            v = ker[0]
            den = math.lcm(*(x.denominator for x in v))
            ints = [int(x * den) for x in v]
            g = math.gcd(*ints)
            c = [0] * n
            for j, x in zip(S, ints):
                c[j] = x // g
            supports.append(Sset)
            out.add(tuple(c))
            out.add(tuple(-x for x in c))
    return out


def max_circuit_weight(A, W, n: int | None = None, budget: BruteBudget | None = None) -> int:
    circ = brute_circuits(A, n, budget)
    return max((abs(sum(a * b for a, b in zip(row, c))) for c in circ for row in W), default=0)


# ---------------------------------------------------------------- graphs


def _components(vertices: set[int], adj: dict[int, set[int]]) -> int:
    seen: set[int] = set()
    count = 0
    for s in sorted(vertices):
        if s in seen:
            continue
        count += 1
        stack = [s]
        seen.add(s)
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if w in vertices and w not in seen:
                    seen.add(w)
                    stack.append(w)
    return count


def _adjacency(n: int, edges: Iterable[tuple[int, int]]) -> dict[int, set[int]]:
    adj: dict[int, set[int]] = {v: set() for v in range(n)}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    return adj


def induced_connected(n: int, edges, S: Iterable[int]) -> bool:
    S = set(S)
    return bool(S) and _components(S, _adjacency(n, edges)) == 1


def brute_docsets(n: int, edges, budget: BruteBudget | None = None) -> list[frozenset[int]]:
    """Nonempty proper vertex sets with both sides inducing connected subgraphs."""
    budget = budget or BruteBudget()
    if 2**n > budget.subsets:
        raise CapExceeded("oracle vertex subsets", 2**n, budget.subsets)
    adj = _adjacency(n, edges)
    V = set(range(n))
    out = []
    for s in range(1, n):
        for S in combinations(range(n), s):
            Sset = set(S)
            if _components(Sset, adj) == 1 and _components(V - Sset, adj) == 1:
                out.append(frozenset(S))
    return out


def cut_indicator(edges, S: Iterable[int]) -> tuple[int, ...]:
    """Tension of the indicator potential of ``S``: ``[a in S] - [b in S]`` on edge ``(a, b)``."""
    S = set(S)
    return tuple(int(a in S) - int(b in S) for a, b in edges)


def brute_beta(n: int, edges, a: Sequence[int]) -> int:
    return max((sum(a[v] for v in S) for S in brute_docsets(n, edges)), default=0)


def check_rooted_model(n: int, edges, roots: Iterable[int], hubs, centrals) -> list[str]:
    """Issues with a claimed rooted K2,t model; empty means valid."""
    adj = _adjacency(n, edges)
    roots = set(roots)
    sets = [set(h) for h in hubs] + [set(c) for c in centrals]
    issues = []
    if len(hubs) != 2:
        issues.append("a K2,t model needs two hubs")
    for i, X in enumerate(sets):
        if not X or _components(X, adj) != 1:
            issues.append(f"branch set {i} is not connected")
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            if sets[i] & sets[j]:
                issues.append(f"branch sets {i} and {j} overlap")
    for i, C in enumerate(centrals):
        if not set(C) & roots:
            issues.append(f"central set {i} holds no root")
        for h, H in enumerate(hubs):
            if not any(w in set(H) for u in C for w in adj[u]):
                issues.append(f"central set {i} does not touch hub {h}")
    return issues


def _bellman_ford(n: int, arcs: list[tuple[int, int, int]], src: int) -> list[int | None] | None:
    dist: list[int | None] = [None] * n
    dist[src] = 0
    for _ in range(n):
        changed = False
        for u, v, w in arcs:
            if dist[u] is not None and (dist[v] is None or dist[u] + w < dist[v]):
                dist[v] = dist[u] + w
                changed = True
        if not changed:
            return dist
    return None


def brute_mcipp(n: int, edges, p, W, d, lower, upper, budget: BruteBudget | None = None,
                collect: bool = False) -> BruteResult | None:
    """Potential problem with vertex 0 pinned at zero; profits and weight rows must sum to zero."""
    if sum(p) != 0 or any(sum(r) for r in W):
        raise ValidationError("oracle needs zero-sum profits and weights to pin a vertex")
    # y(a) <= y(b) + hi  and  y(b) <= y(a) - lo
    arcs = [(b, a, hi) for (a, b), hi in zip(edges, upper)] + [(a, b, -lo) for (a, b), lo in zip(edges, lower)]
    fwd = _bellman_ford(n, arcs, 0)
    if fwd is None:
        return None
    back = _bellman_ford(n, [(v, u, w) for u, v, w in arcs], 0)
    if back is None or any(x is None for x in fwd) or any(x is None for x in back):
        raise ValidationError("oracle needs a connected graph")
    lo = [-back[v] for v in range(n)]
    hi = [fwd[v] for v in range(n)]
    rows, rhs = [], []
    for (a, b), l, u in zip(edges, lower, upper):
        r = [0] * n
        r[a] += 1
        r[b] -= 1
        rows.append(r)
        rhs.append(u)
        rows.append([-x for x in r])
        rhs.append(-l)
    return _scan(p, list(W), list(d), rows, rhs, lo, hi, budget or BruteBudget(), collect)


def brute_docset_sum(n: int, edges, y: Sequence[int], budget: int) -> list[frozenset[int]] | None:
    """Peel ``y >= 0`` into at most ``budget`` docset indicators, largest sets first, with backtracking."""
    docs = sorted(brute_docsets(n, edges), key=lambda S: (-len(S), sorted(S)))

    def rec(cur: list[int], left: int, start: int) -> list[frozenset[int]] | None:
        if not any(cur):
            return []
        if left == 0 or max(cur) > left:
            return None
        for i in range(start, len(docs)):
            S = docs[i]
            if any(cur[v] == 0 for v in S):
                continue
            if max(cur) == left and any(cur[v] == left and v not in S for v in range(n)):
                continue
            got = rec([c - (v in S) for v, c in enumerate(cur)], left - 1, i)
            if got is not None:
                return [S] + got
        return None

    if any(v < 0 for v in y):
        return None
    return rec(list(y), budget, 0)


# ---------------------------------------------------------------- pipeline verification

PASS = "pass"
FAIL = "fail"
UNVERIFIED = "unverified"


@dataclass
class VerificationReport:
    status: str
    oracle_status: str | None = None
    oracle_value: int | None = None
    pipeline_status: str | None = None
    pipeline_value: int | None = None
    witness: list[int] | None = None
    checks: list[dict[str, Any]] = field(default_factory=list)
    reason: str | None = None

    def add(self, name: str, ok: bool, detail: str = "") -> None:
        self.checks.append({"check": name, "ok": bool(ok), "detail": detail})

    def to_dict(self) -> dict[str, Any]:
        return {"status": self.status, "oracle_status": self.oracle_status, "oracle_value": self.oracle_value,
                "pipeline_status": self.pipeline_status, "pipeline_value": self.pipeline_value,
                "witness": self.witness, "checks": self.checks, "reason": self.reason}


def _find(trace: Any, key: str) -> list[Any]:
    out = []
    if isinstance(trace, dict):
        for k, v in trace.items():
            if k == key:
                out.append(v)
            out.extend(_find(v, key))
    elif isinstance(trace, list):
        for v in trace:
            out.extend(_find(v, key))
    return out


def _f_bound(k: int, delta: int) -> int:
    return 0 if k == 0 else k * (2 * k * delta + 1) ** k


def verify_pipeline(file, result, budget: BruteBudget | None = None) -> VerificationReport:
    """Re-solve ``file`` by enumeration and compare with the pipeline ``result``.

    ``file`` is an :class:`~nearlytu.fileformat.InstanceFile` and ``result`` a
    :class:`~nearlytu.pipeline.SolveResult`; only plain fields are read.
    """
    budget = budget or BruteBudget()
    rep = VerificationReport(PASS, pipeline_status=result.status, pipeline_value=result.value)
    inst = file.instance
    kind = file.kind
    k = inst.k
    try:
        if kind == "ip_general":
            M = [list(r) for r in inst.M]
            lo, hi = box_from_rows(M, list(inst.b))
            if any(v is None for v in lo + hi):
                rep.status = UNVERIFIED
                rep.reason = "no finite box for enumeration"
                return rep
            truth = brute_ineq(inst.p, M, inst.b, lo, hi, budget, collect=False)
            feasible = lambda x: all(sum(a * b for a, b in zip(r, x)) <= c for r, c in zip(M, inst.b))  # noqa: E731
            value = lambda x: sum(a * b for a, b in zip(inst.p, x))  # noqa: E731
            if M and len(M[0]) and min(len(M), len(M[0])) <= 10:
                sub = max_abs_subdeterminant(M, budget=budget)
                rep.add("subdeterminants", sub <= inst.delta, f"max |det| = {sub}, delta = {inst.delta}")
        elif kind in ("ip_equality", "mcicp"):
            truth = brute_ip(inst.p, inst.A, inst.b, inst.W, inst.d, inst.lower, inst.upper, budget, collect=True)
            feasible = inst.is_feasible
            value = lambda x: sum(a * b for a, b in zip(inst.p, x))  # noqa: E731
            cw = max_circuit_weight(inst.A, inst.W, inst.n, budget)
            rep.add("circuit weights", cw <= inst.delta, f"max circuit weight = {cw}, delta = {inst.delta}")
        else:
            G = inst.graph
            edges = list(G.edges)
            truth = brute_mcipp(G.n, edges, inst.p, inst.W, inst.d, inst.lower, inst.upper, budget, collect=True)
            feasible = inst.is_feasible
            value = inst.value
            docs = brute_docsets(G.n, edges, budget)
            cw = max((abs(sum(row[v] for v in S)) for S in docs for row in inst.W), default=0)
            rep.add("docset weights", cw <= inst.delta, f"max docset weight = {cw}, delta = {inst.delta}")
    except CapExceeded as exc:
        rep.status = UNVERIFIED
        rep.reason = str(exc)
        return rep
    rep.oracle_status = "optimal" if truth is not None else "infeasible"
    rep.oracle_value = truth.value if truth is not None else None
    if truth is None:
        if result.status != "infeasible":
            rep.add("status", False, f"oracle finds no feasible point, pipeline says {result.status}")
            if result.x is not None:
                rep.witness = list(result.x)
        else:
            rep.add("status", True, "both infeasible")
    elif result.status != "optimal":
        rep.add("status", False, f"pipeline says {result.status} but a feasible point exists")
        rep.witness = list(truth.x)
    else:
        ok_x = result.x is not None and feasible(result.x)
        rep.add("solution feasible", ok_x)
        if ok_x:
            rep.add("value consistent", value(result.x) == result.value)
        rep.add("optimal value", result.value == truth.value, f"oracle {truth.value}, pipeline {result.value}")
        if result.value != truth.value or not ok_x:
            rep.witness = list(truth.x)
        _invariant_checks(rep, file, result, truth, k)
    if not all(c["ok"] for c in rep.checks):
        rep.status = FAIL
    return rep


def _invariant_checks(rep: VerificationReport, file, result, truth: BruteResult, k: int) -> None:
    inst = file.instance
    for dist in _find(result.trace, "anchor_distance"):
        dv = Fraction(dist)
        rep.add("anchor distance", k == 0 or dv < k, f"|x* - z| = {dv}, k = {k}")
    fb = _f_bound(k, inst.delta)
    radius = 1 + k + fb
    points = _find(result.trace, "lp_point")
    if file.kind in ("ip_equality", "mcicp") and points and truth.optima:
        xs = [Fraction(v) for v in points[0]]
        near = min(max((abs(a - b) for a, b in zip(xs, z)), default=0) for z in truth.optima)
        rep.add("proximity", near <= radius, f"nearest optimum at distance {near}, bound {radius}")
    if file.kind == "mcipp" and truth.optima:
        G = inst.graph
        edges = list(G.edges)
        if points:
            xs = [Fraction(v) for v in points[0]]
            near = min(max((abs(a - (y[u] - y[w])) for a, (u, w) in zip(xs, edges)), default=0)
                       for y in truth.optima)
            rep.add("proximity", near <= radius, f"nearest optimal tension at distance {near}, bound {radius}")
        # the pattern claim concerns the anchored translate, so subtract the anchor potential
        shift = (_find(result.trace, "anchor_potential") or [[0] * G.n])[0]
        found = None
        for y in truth.optima[:64]:
            y = [a - b for a, b in zip(y, shift)]
            m = min(y)
            if brute_docset_sum(G.n, edges, [v - m for v in y], fb) is not None:
                found = y
                break
        rep.add("docset pattern", found is not None,
                f"an optimum is a sum of at most {fb} docset indicators" if found else "no optimum decomposes")
