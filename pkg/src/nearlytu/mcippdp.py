"""Tree-decomposition dynamic program for the constrained integer potential problem.

The solver relies on the anchored guarantee: some optimal potential is a sum
of at most ``f`` docset indicators, so every guessed potential lies in
``[0, f]`` and the pattern on the roots of a bag is a sum of at most ``f``
members of that bag's docset superprofile.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from . import ratcore as rc
from .cographic import DirectedGraph, McippInstance, docset_masks, mask_to_set
from .errors import CapExceeded, InfiniteBoundError, ValidationError, check
from .proximity import f_bound

GUESS_CAP = 200_000

Pattern = tuple[int, ...]


@dataclass(frozen=True)
class SpecialTreeDecomposition:
    """Bags over a rooted tree given by parent pointers; ``ell`` bounds adhesions and child counts."""

    bags: tuple[frozenset[int], ...]
    parent: tuple[int | None, ...]
    ell: int

    def __post_init__(self) -> None:
        if len(self.bags) != len(self.parent) or not self.bags:
            raise ValidationError("one parent entry per bag is required")
        if sum(1 for p in self.parent if p is None) != 1:
            raise ValidationError("exactly one root node is required")

    @classmethod
    def build(cls, bags, parent, ell) -> "SpecialTreeDecomposition":
        return cls(tuple(frozenset(b) for b in bags), tuple(parent), int(ell))

    @property
    def root(self) -> int:
        return self.parent.index(None)

    def children(self, t: int) -> list[int]:
        return [c for c, p in enumerate(self.parent) if p == t]

    def adhesion(self, t: int) -> frozenset[int]:
        p = self.parent[t]
        return frozenset() if p is None else self.bags[t] & self.bags[p]

    def postorder(self) -> list[int]:
        order = [self.root]
        for t in order:
            order.extend(self.children(t))
        return order[::-1]

    def subtree_vertices(self, t: int) -> frozenset[int]:
        out = set(self.bags[t])
        for c in self.children(t):
            out |= self.subtree_vertices(c)
        return frozenset(out)


def trivial_td(G: DirectedGraph) -> SpecialTreeDecomposition:
    return SpecialTreeDecomposition((frozenset(range(G.n)),), (None,), 1)


def validate_special_td(G: DirectedGraph, td: SpecialTreeDecomposition) -> tuple[bool, list[str]]:
    """All tree-decomposition axioms plus the adhesion and child-count bounds."""
    issues = []
    nodes = range(len(td.bags))
    # the parent pointers must form a tree reaching the root
    for t in nodes:
        seen, u = set(), t
        while u is not None:
            if u in seen:
                issues.append(f"node {t} lies on a parent cycle")
                break
            if not 0 <= u < len(td.bags):
                issues.append(f"node {t} has an invalid ancestor {u}")
                break
            seen.add(u)
            u = td.parent[u]
    if issues:
        return False, issues
    covered = set().union(*td.bags)
    for v in range(G.n):
        if v not in covered:
            issues.append(f"vertex {v} lies in no bag")
    if covered - set(range(G.n)):
        issues.append("a bag contains an unknown vertex")
    for j, (a, b) in enumerate(G.edges):
        if not any(a in B and b in B for B in td.bags):
            issues.append(f"edge {j} ({a}, {b}) lies in no bag")
    for v in range(G.n):
        holders = {t for t in nodes if v in td.bags[t]}
        if holders:
            tops = [t for t in holders if td.parent[t] not in holders]
            if len(tops) != 1:
                issues.append(f"bags containing vertex {v} do not form a subtree")
    for t in nodes:
        if td.parent[t] is not None and len(td.adhesion(t)) > td.ell:
            issues.append(f"adhesion of node {t} has size {len(td.adhesion(t))} > {td.ell}")
        if len(td.children(t)) > td.ell:
            issues.append(f"node {t} has {len(td.children(t))} children > {td.ell}")
    return not issues, issues


# ---------------------------------------------------------------- superprofiles


def brute_superprofile(G: DirectedGraph, roots: Sequence[int]) -> frozenset[frozenset[int]]:
    """The exact profile ``{R' & S}`` over nontrivial docsets ``S``, plus the empty set."""
    R = sum(1 << r for r in set(roots))
    out = {frozenset()}
    for S in docset_masks(G):
        out.add(mask_to_set(S & R))
    return frozenset(out)


def default_superprofiles(G: DirectedGraph, td: SpecialTreeDecomposition, roots: Sequence[int]):
    R = set(roots)
    return tuple(brute_superprofile(G, sorted(R & td.bags[t])) for t in range(len(td.bags)))


def root_patterns(members: Sequence[frozenset[int]], roots: Sequence[int], f: int,
                  cap: int = GUESS_CAP) -> list[Pattern]:
    """Values on ``roots`` of all sums of at most ``f`` members, each entry at most ``f``."""
    index = {r: i for i, r in enumerate(roots)}
    vecs = sorted({tuple(1 if r in S else 0 for r in roots) for S in members if S <= set(index)})
    vecs = [v for v in vecs if any(v)]
    level = {(0,) * len(roots)}
    seen = set(level)
    for _ in range(f):
        nxt = set()
        for a in level:
            for v in vecs:
                b = tuple(x + y for x, y in zip(a, v))
                if max(b, default=0) <= f and b not in seen:
                    nxt.add(b)
        seen |= nxt
        if len(seen) > cap:
            raise CapExceeded("root pattern guesses", len(seen), cap)
        level = nxt
        if not level:
            break
    return sorted(seen)


def shift_normalize(y: Sequence[int]) -> tuple[int, ...]:
    if not y:
        return ()
    m = min(y)
    return tuple(v - m for v in y)


# ---------------------------------------------------------------- local problems


def difference_bounds(G: DirectedGraph, lower: Sequence[int], upper: Sequence[int],
                      vertices: Sequence[int] | None = None) -> list[list[int | None]] | None:
    """``D[v][w]`` upper-bounds ``y(w) - y(v)`` over the edges inside ``vertices``; None on a negative cycle."""
    vs = set(range(G.n)) if vertices is None else set(vertices)
    n = G.n
    D: list[list[int | None]] = [[None] * n for _ in range(n)]
    for v in vs:
        D[v][v] = 0
    for (a, b), lo, hi in zip(G.edges, lower, upper):
        if a in vs and b in vs:
            # y(a) - y(b) <= hi  and  y(b) - y(a) <= -lo
            D[b][a] = hi if D[b][a] is None else min(D[b][a], hi)
            D[a][b] = -lo if D[a][b] is None else min(D[a][b], -lo)
    order = sorted(vs)
    for m in order:
        for i in order:
            if D[i][m] is None:
                continue
            for j in order:
                if D[m][j] is None:
                    continue
                c = D[i][m] + D[m][j]
                if D[i][j] is None or c < D[i][j]:
                    D[i][j] = c
    if any(D[v][v] < 0 for v in order):
        return None
    return D


@dataclass(frozen=True)
class LocalInstance:
    """Potentials on ``bag`` with the values on ``fixed`` prescribed; profits are zero on the adhesion."""

    graph: DirectedGraph
    bag: tuple[int, ...]
    p: dict[int, int]
    lower: tuple[int, ...]
    upper: tuple[int, ...]
    fixed: dict[int, int]


def solve_ldcp(local: LocalInstance) -> tuple[int, dict[int, int]] | None:
    """Exact optimum of a local completion problem by LP; the system is TU so the vertex is integral."""
    G = local.graph
    bag = set(local.bag)
    edges = [(j, a, b) for j, (a, b) in enumerate(G.edges) if a in bag and b in bag]
    fixed = dict(local.fixed)
    free = [v for v in local.bag if v not in fixed]
    for j, a, b in edges:
        if a in fixed and b in fixed and not local.lower[j] <= fixed[a] - fixed[b] <= local.upper[j]:
            return None
    if not free:
        y = {v: fixed[v] for v in local.bag}
        return sum(local.p.get(v, 0) * y[v] for v in local.bag), y
    D = difference_bounds(G, local.lower, local.upper, local.bag)
    if D is None:
        return None
    # components of free vertices without a fixed neighbour are only defined up to a shift
    anchors = dict(fixed)
    for v in free:
        if not any(D[f][v] is not None for f in anchors):
            anchors[v] = 0
            fixed[v] = 0
    free = [v for v in local.bag if v not in fixed]
    if not free:
        y = {v: fixed[v] for v in local.bag}
        if any(not local.lower[j] <= y[a] - y[b] <= local.upper[j] for j, a, b in edges):
            return None
        return sum(local.p.get(v, 0) * y[v] for v in local.bag), y
    lo, hi = {}, {}
    for v in free:
        ups = [fixed[f] + D[f][v] for f in fixed if D[f][v] is not None]
        downs = [fixed[f] - D[v][f] for f in fixed if D[v][f] is not None]
        if not ups or not downs:
            raise InfiniteBoundError(f"free vertex {v} has no finite potential range")
        lo[v], hi[v] = max(downs), min(ups)
        if lo[v] > hi[v]:
            return None
    var = {v: i for i, v in enumerate(free)}
    cols = len(free)
    rows, rhs = [], []
    lower = [lo[v] for v in free]
    upper = [hi[v] for v in free]
    for j, a, b in edges:
        if a in var and b in var:
            row = [0] * cols
            row[var[a]] += 1
            row[var[b]] -= 1
            row.append(-1)
            rows.append(row)
            rhs.append(0)
            lower.append(local.lower[j])
            upper.append(local.upper[j])
            cols += 1
        elif a in var:
            i = var[a]
            lower[i] = max(lower[i], fixed[b] + local.lower[j])
            upper[i] = min(upper[i], fixed[b] + local.upper[j])
        elif b in var:
            i = var[b]
            lower[i] = max(lower[i], fixed[a] - local.upper[j])
            upper[i] = min(upper[i], fixed[a] - local.lower[j])
    if any(a > b for a, b in zip(lower, upper)):
        return None
    rows = [r + [0] * (cols - len(r)) for r in rows]
    obj = [local.p.get(v, 0) for v in free] + [0] * (cols - len(free))
    out = rc.lp_solve(obj, rows, rhs, lower, upper)
    if out.status is rc.LpStatus.INFEASIBLE:
        return None
    check(out.optimal, "bounded local problem reported unbounded")
    check(all(x.denominator == 1 for x in out.x), "local LP vertex is not integral")
    y = dict(fixed)
    for v in free:
        y[v] = int(out.x[var[v]])
    value = sum(local.p.get(v, 0) * y[v] for v in local.bag)
    check(value == out.value + sum(local.p.get(v, 0) * x for v, x in fixed.items()), "local LP value mismatch")
    return value, y


# ---------------------------------------------------------------- the DP


@dataclass
class McippDpStats:
    nodes: int = 0
    guesses: int = 0
    ldcp_solved: int = 0
    ldcp_cached: int = 0
    table_entries: int = 0
    compliance_checks: int = 0


Table = dict[tuple[Pattern, tuple[int, ...]], tuple[int, dict[int, int]]]


def dp_solve(inst: McippInstance, td: SpecialTreeDecomposition | None = None,
             superprofiles: Sequence[frozenset[frozenset[int]]] | None = None,
             stats: McippDpStats | None = None, f: int | None = None) -> tuple[int, tuple[int, ...]] | None:
    """Optimum and potentials of an anchored potential problem; None when infeasible."""
    G = inst.graph
    if td is None:
        td = trivial_td(G)
    ok, issues = validate_special_td(G, td)
    if not ok:
        raise ValidationError("invalid tree decomposition: " + "; ".join(issues))
    roots = inst.roots
    if superprofiles is None:
        superprofiles = default_superprofiles(G, td, roots)
    if len(superprofiles) != len(td.bags):
        raise ValidationError("one superprofile per bag is required")
    f = f_bound(inst.k, inst.delta) if f is None else f
    stats = stats if stats is not None else McippDpStats()
    box = G.n * inst.delta * f
    D = difference_bounds(G, inst.lower, inst.upper)
    if D is None:
        return None
    tables: dict[int, Table] = {}
    for t in td.postorder():
        tables[t] = _node_table(inst, td, t, superprofiles[t], roots, f, box, D, tables, stats)
    entry = tables[td.root].get(((), tuple(inst.d)))
    if entry is None:
        return None
    value, y = entry
    sol = tuple(y[v] for v in range(G.n))
    check(inst.is_feasible(sol), "DP returned an infeasible potential")
    check(inst.value(sol) == value, "DP value mismatch")
    return value, sol


def _node_table(inst: McippInstance, td: SpecialTreeDecomposition, t: int,
                profile: frozenset[frozenset[int]], roots: Sequence[int], f: int, box: int,
                D, tables: Mapping[int, Table], stats: McippDpStats) -> Table:
    G = inst.graph
    k = inst.k
    stats.nodes += 1
    bag = td.bags[t]
    adh = sorted(td.adhesion(t))
    kids = td.children(t)
    kid_adh = [sorted(td.adhesion(c)) for c in kids]
    R_t = sorted(set(roots) & bag)
    if any(not S <= set(R_t) for S in profile):
        raise ValidationError(f"superprofile of node {t} contains a set outside the bag's roots")
    Y = sorted(set(adh).union(*map(set, kid_adh), R_t))
    others = [v for v in Y if v not in set(R_t)]
    patterns = root_patterns(sorted(profile, key=lambda S: sorted(S)), R_t, f)
    p_loc = {v: (0 if v in set(adh) else inst.p[v]) for v in bag}
    local_weight_vertices = [v for v in R_t if v not in set(adh)]
    # child tables grouped by their adhesion guess
    kid_groups = []
    for c in kids:
        groups: dict[Pattern, list[tuple[tuple[int, ...], int, dict[int, int]]]] = {}
        for (up, dc), (val, yc) in sorted(tables[c].items()):
            groups.setdefault(up, []).append((dc, val, yc))
        kid_groups.append(groups)
    cache: dict[tuple[int, ...], tuple[int, dict[int, int]] | None] = {}
    shift_profit = sum(p_loc.values())
    out: Table = {}
    n_guess = 0
    for pat in patterns:
        base = dict(zip(R_t, pat))
        if not _consistent(base, D):
            continue
        for phi in _completions(base, others, f, D):
            n_guess += 1
            if n_guess > GUESS_CAP:
                raise CapExceeded(f"guesses at node {t}", n_guess, GUESS_CAP)
            stats.guesses += 1
            local = _local(inst, bag, p_loc, phi, cache, shift_profit, stats)
            if local is None:
                continue
            lval, ly = local
            acc: dict[tuple[int, ...], tuple[int, dict[int, int]]] = {
                tuple(sum(inst.W[i][v] * phi[v] for v in local_weight_vertices) for i in range(k)): (lval, ly)}
            for groups, ka in zip(kid_groups, kid_adh):
                key = tuple(phi[v] for v in ka)
                nxt: dict[tuple[int, ...], tuple[int, dict[int, int]]] = {}
                for dacc, (vacc, yacc) in acc.items():
                    for dc, vc, yc in groups.get(key, ()):
                        dn = tuple(a + b for a, b in zip(dacc, dc))
                        if any(abs(x) > box for x in dn):
                            continue
                        _offer(nxt, dn, vacc + vc, {**yacc, **yc})
                acc = nxt
                if not acc:
                    break
            up = tuple(phi[v] for v in adh)
            for dt, (val, yt) in acc.items():
                if any(abs(x) > box for x in dt):
                    continue
                _offer(out, (up, dt), val, yt)
    sub = td.subtree_vertices(t)
    inner = sorted(sub - set(adh))
    sub_edges = [(j, a, b) for j, (a, b) in enumerate(G.edges) if a in sub and b in sub
                 and any(a in td.bags[u] and b in td.bags[u] for u in _subtree_nodes(td, t))]
    for (up, dt), (val, yt) in out.items():
        stats.compliance_checks += 1
        check(set(yt) == set(sub), "rooted solution covers the wrong vertices")
        check(all(yt[v] == x for v, x in zip(adh, up)), "rooted solution ignores the adhesion guess")
        check(sum(inst.p[v] * yt[v] for v in inner) == val, "rooted solution profit mismatch")
        check(tuple(sum(inst.W[i][v] * yt[v] for v in inner) for i in range(k)) == dt,
              "rooted solution weight mismatch")
        check(all(inst.lower[j] <= yt[a] - yt[b] <= inst.upper[j] for j, a, b in sub_edges),
              "rooted solution violates an edge bound")
    stats.table_entries += len(out)
    return out


def _subtree_nodes(td: SpecialTreeDecomposition, t: int) -> list[int]:
    out = [t]
    for u in out:
        out.extend(td.children(u))
    return out


def _completions(base: dict[int, int], others: Sequence[int], f: int, D):
    """Extensions of ``base`` to ``others`` inside ``[0, f]`` that respect the difference bounds."""
    if not others:
        yield dict(base)
        return
    v, rest = others[0], others[1:]
    lo, hi = 0, f
    for w, b in base.items():
        if D[w][v] is not None:
            hi = min(hi, b + D[w][v])
        if D[v][w] is not None:
            lo = max(lo, b - D[v][w])
    for x in range(lo, hi + 1):
        base[v] = x
        yield from _completions(base, rest, f, D)
    base.pop(v, None)


def _consistent(phi: Mapping[int, int], D) -> bool:
    """Pairwise difference bounds implied by the whole graph."""
    items = list(phi.items())
    for v, a in items:
        for w, b in items:
            if D[v][w] is None:
                # no path in the constraint graph: unconstrained direction
                continue
            if b - a > D[v][w]:
                return False
    return True


def _local(inst: McippInstance, bag, p_loc, phi, cache, shift_profit, stats):
    """LDCP with memoisation over shifts of the guess."""
    m = min(phi.values()) if phi else 0
    key = tuple(sorted((v, x - m) for v, x in phi.items()))
    if key in cache:
        stats.ldcp_cached += 1
        hit = cache[key]
    else:
        stats.ldcp_solved += 1
        local = LocalInstance(inst.graph, tuple(sorted(bag)), p_loc, inst.lower, inst.upper,
                              {v: x - m for v, x in phi.items()})
        hit = solve_ldcp(local)
        cache[key] = hit
    if hit is None:
        return None
    val, y = hit
    if not phi:
        return val, dict(y)
    return val + m * shift_profit, {v: x + m for v, x in y.items()}


def _offer(table: dict, key, value, sol) -> None:
    cur = table.get(key)
    if cur is None or value > cur[0] or (value == cur[0] and _lex(sol) < _lex(cur[1])):
        table[key] = (value, sol)


def _lex(y: Mapping[int, int]) -> tuple[int, ...]:
    return tuple(y[v] for v in sorted(y))
