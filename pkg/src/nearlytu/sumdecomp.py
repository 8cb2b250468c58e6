"""1-sum and 2-sum decompositions of configurations and the dynamic programs over them.

Instances here are circulation problems: ``Ax = 0``, ``Wx = d``, bounds on
``x``.  A decomposition tree stores one configuration per node; the virtual
vector shared by two adjacent nodes is an actual vector of the ambient space,
so every node configuration is concrete and can be enumerated directly.

Sign convention for a virtual label ``L`` between node ``t`` and its child
``c``: a circulation of the whole configuration splits into a circulation of
the subtree of ``c`` with coefficient ``phi`` on ``L`` and a circulation of
the remaining part with coefficient ``-phi`` on ``L``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from typing import Iterable, Iterator, Mapping, Sequence

from . import configcore as cc
from . import ratcore as rc
from .errors import CapExceeded, InvariantBreach, ValidationError, check
from .proximity import EqualityInstance, f_bound

SEPARATION_CAP = 18

Key = tuple[int, ...]


# ---------------------------------------------------------------- separations


@dataclass(frozen=True)
class Separation:
    side1: frozenset[int]
    side2: frozenset[int]
    order: int


def _ranker(A: cc.Configuration):
    cache: dict[int, int] = {}

    def rank(mask: int) -> int:
        if mask not in cache:
            cache[mask] = A.rank_of(j for j in range(A.n) if mask >> j & 1)
        return cache[mask]

    return rank


def separation_order(A: cc.Configuration, side1: Iterable[int]) -> int:
    """``rank(A1) + rank(A2) - rank(A) + 1`` for the label set ``side1``."""
    s1 = {A.index(l) for l in side1}
    r1 = A.rank_of(sorted(s1))
    r2 = A.rank_of(j for j in range(A.n) if j not in s1)
    return r1 + r2 - A.rank + 1


def find_separation(A: cc.Configuration, q: int, cap: int = SEPARATION_CAP) -> Separation | None:
    """Exhaustive search for a separation of order at most ``q``, lowest order first.

    Both sides of an order-``s`` separation have at least ``s`` columns.
    Among separations of equal order the one with the smallest side wins,
    ties broken by the side's index mask.
    """
    if q not in (1, 2):
        raise ValidationError("only 1- and 2-separations are searched")
    n = A.n
    if n > cap:
        raise CapExceeded("separation search columns", n, cap)
    if n < 2:
        return None
    rank = _ranker(A)
    full = (1 << n) - 1
    total = A.rank
    for order in range(1, q + 1):
        best = None
        for mask in range(1, 1 << (n - 1)):
            other = full ^ mask
            size = bin(mask).count("1")
            if size < order or n - size < order:
                continue
            if rank(mask) + rank(other) - total + 1 != order:
                continue
            small = min(size, n - size)
            key = (small, mask if size <= n - size else other)
            if best is None or key < best[0]:
                best = (key, mask)
        if best is not None:
            mask = best[1]
            side1 = frozenset(A.labels[j] for j in range(n) if mask >> j & 1)
            return Separation(side1, frozenset(A.labels) - side1, order)
    return None


def represent(columns: Mapping[int, Sequence[Fraction]], labels: Sequence[int],
              target: Sequence[Fraction]) -> dict[int, Fraction]:
    """Coefficients writing ``target`` over a greedy basis of ``labels`` (in the given order)."""
    basis: list[int] = []
    for l in labels:
        if rc.rank([columns[b] for b in basis + [l]]) == len(basis) + 1:
            basis.append(l)
    if not basis:
        check(not any(target), "target is not in the span")
        return {}
    rows = [[columns[b][i] for b in basis] + [target[i]] for i in range(len(target))]
    R, pivots = rc.rref(rows)
    check(len(basis) not in pivots, "target is not in the span")
    coef = {b: Fraction(0) for b in basis}
    for row, pc in zip(R, pivots):
        coef[basis[pc]] = row[-1]
    return {b: v for b, v in coef.items() if v}


def split_two_sum(A: cc.Configuration, sep: Separation, label: int) -> tuple[cc.Configuration, cc.Configuration, rc.Vector]:
    """Pieces ``side1 + v`` and ``side2 + v`` where ``v`` spans the column-space intersection.

    ``v`` is scaled so that writing it over a basis of ``side1`` gives a
    primitive integer vector; for regular configurations the resulting
    pieces are regular again.
    """
    check(sep.order == 2, "split_two_sum needs an order-2 separation")
    X = [l for l in A.labels if l in sep.side1]
    Y = [l for l in A.labels if l in sep.side2]
    cols = {l: A.column(l) for l in A.labels}
    stacked = [[cols[l][i] for l in X] + [-cols[l][i] for l in Y] for i in range(A.m)]
    w = None
    for vec in rc.kernel_basis(stacked, len(X) + len(Y)):
        cand = tuple(sum((vec[j] * cols[l][i] for j, l in enumerate(X)), Fraction(0)) for i in range(A.m))
        if any(cand):
            w = cand
            break
    check(w is not None, "order-2 separation without a shared direction")
    alpha = represent(cols, X, w)
    keys = sorted(alpha)
    prim = rc.primitive([alpha[k] for k in keys] + [Fraction(-1)])
    scale = -prim[-1]
    check(scale > 0, "bad scaling of the virtual vector")
    vbar = tuple(scale * x for x in w)
    P1 = A.select(X).concat(cc.Configuration((label,), (vbar,), A.m))
    P2 = A.select(Y).concat(cc.Configuration((label,), (vbar,), A.m))
    return P1, P2, vbar


@dataclass
class DecompositionTree:
    """Pieces glued along virtual labels; ``edges[L]`` names the two pieces holding ``L``."""

    pieces: dict[int, cc.Configuration]
    virtual: dict[int, rc.Vector]
    edges: dict[int, tuple[int, int]]
    real_labels: tuple[int, ...]

    def node_of(self, label: int) -> int:
        return next(t for t, P in sorted(self.pieces.items()) if label in P.labels)

    def neighbours(self, t: int) -> list[tuple[int, int]]:
        out = []
        for L, (a, b) in sorted(self.edges.items()):
            if a == t:
                out.append((b, L))
            elif b == t:
                out.append((a, L))
        return out


def build_decomposition_tree(A: cc.Configuration, first_label: int | None = None,
                             cap: int = SEPARATION_CAP) -> DecompositionTree:
    """Split along 2-separations until every piece has none left."""
    if A.n < 3:
        raise ValidationError("a decomposition tree needs at least 3 columns")
    if not cc.is_connected(A):
        raise ValidationError("decomposition trees are built for 2-connected configurations")
    next_label = first_label if first_label is not None else max(A.labels) + 1
    pieces = {0: A}
    virtual: dict[int, rc.Vector] = {}
    edges: dict[int, tuple[int, int]] = {}
    work = [0]
    while work:
        t = work.pop()
        sep = find_separation(pieces[t], 2, cap)
        if sep is None:
            continue
        check(sep.order == 2, "a piece of a 2-connected configuration has a 1-separation")
        P1, P2, vbar = split_two_sum(pieces[t], sep, next_label)
        new = max(pieces) + 1
        pieces[t] = P1
        pieces[new] = P2
        for L, (a, b) in list(edges.items()):
            if L in P2.labels:
                edges[L] = (new if a == t else a, new if b == t else b)
        virtual[next_label] = vbar
        edges[next_label] = (t, new)
        next_label += 1
        work.extend([t, new])
    return DecompositionTree(pieces, virtual, edges, A.labels)


def tree_kernel_basis(tree: DecompositionTree) -> list[rc.Vector]:
    """Kernel of the recomposed configuration, over the real labels in order.

    Every piece contributes its own equations with private coefficients on
    virtual labels: ``+phi`` in one piece, ``-phi`` in the other.  Virtual
    coefficients are then projected out.
    """
    real = list(tree.real_labels)
    virt = sorted(tree.virtual)
    var = {l: i for i, l in enumerate(real)}
    for i, L in enumerate(virt):
        var[L] = len(real) + i
    rows = []
    for t, P in sorted(tree.pieces.items()):
        for i in range(P.m):
            row = [Fraction(0)] * len(var)
            for l, col in zip(P.labels, P.columns):
                sign = 1
                if l in tree.virtual and tree.edges[l][0] == t:
                    sign = -1
                row[var[l]] += sign * col[i]
            rows.append(row)
    ker = rc.kernel_basis(rows, len(var)) if rows else rc.kernel_basis([], len(var))
    proj = [v[: len(real)] for v in ker]
    if not proj:
        return []
    R, _ = rc.rref(proj)
    return [tuple(r) for r in R]


def same_kernel(A: cc.Configuration, basis: Sequence[Sequence[Fraction]]) -> bool:
    own = rc.kernel_basis(A.matrix(), A.n) if A.m else rc.kernel_basis([], A.n)
    if len(own) != len(basis):
        return False
    if not own:
        return True
    return rc.rank(list(own) + list(basis)) == len(own)


# ---------------------------------------------------------------- rooted trees


@dataclass
class RootedTree:
    tree: DecompositionTree
    root_node: int
    up_label: dict[int, int]
    parent: dict[int, int | None]
    children: dict[int, list[tuple[int, int]]]
    postorder: list[int]
    subtree_real: dict[int, frozenset[int]]


def root_tree(tree: DecompositionTree, root_label: int) -> RootedTree:
    root = tree.node_of(root_label)
    parent: dict[int, int | None] = {root: None}
    up = {root: root_label}
    children: dict[int, list[tuple[int, int]]] = {t: [] for t in tree.pieces}
    order = [root]
    for t in order:
        for nb, L in tree.neighbours(t):
            if nb not in parent:
                parent[nb] = t
                up[nb] = L
                children[t].append((nb, L))
                order.append(nb)
    post = list(reversed(order))
    real = set(tree.real_labels)
    sub: dict[int, frozenset[int]] = {}
    for t in post:
        own = {l for l in tree.pieces[t].labels if l in real and l != root_label}
        for c, _ in children[t]:
            own |= sub[c]
        sub[t] = frozenset(own)
    return RootedTree(tree, root, up, parent, children, post, sub)


# ---------------------------------------------------------------- instances


@dataclass(frozen=True)
class RootedMcicpInstance:
    """Circulation instance whose root label has its flow fixed to ``phi``."""

    config: cc.Configuration
    p: dict[int, int]
    W: dict[int, tuple[int, ...]]
    d: tuple[int, ...]
    lower: dict[int, int]
    upper: dict[int, int]
    root: int
    phi: int
    delta: int

    def __post_init__(self) -> None:
        if self.lower[self.root] != self.phi or self.upper[self.root] != self.phi:
            raise ValidationError("root bounds must equal the prescribed flow")

    @property
    def k(self) -> int:
        return len(self.d)

    def weight(self, x: Mapping[int, int]) -> tuple[int, ...]:
        return tuple(sum(self.W[l][i] * v for l, v in x.items()) for i in range(self.k))

    def is_feasible(self, x: Mapping[int, int]) -> bool:
        if set(x) != set(self.config.labels):
            return False
        if any(not self.lower[l] <= x[l] <= self.upper[l] for l in x):
            return False
        for i in range(self.config.m):
            if sum(col[i] * x[l] for l, col in zip(self.config.labels, self.config.columns)):
                return False
        return self.weight(x) == self.d


def to_rooted(inst: EqualityInstance, root_label: int | None = None) -> RootedMcicpInstance:
    """Duplicate the first column as a root with prescribed flow 0 and weight 0."""
    if any(inst.b):
        raise ValidationError("circulation instances need b = 0")
    A = inst.configuration()
    root = inst.n if root_label is None else root_label
    config = A.concat(cc.Configuration((root,), (A.columns[0],), A.m)) if A.n else A
    k = inst.k
    p = {j: inst.p[j] for j in range(inst.n)}
    W = {j: tuple(inst.W[i][j] for i in range(k)) for j in range(inst.n)}
    lower = {j: inst.lower[j] for j in range(inst.n)}
    upper = {j: inst.upper[j] for j in range(inst.n)}
    p[root], W[root], lower[root], upper[root] = 0, (0,) * k, 0, 0
    return RootedMcicpInstance(config, p, W, inst.d, lower, upper, root, 0, inst.delta)


# ---------------------------------------------------------------- enumeration


def enumerate_circulations(A: cc.Configuration, ranges: Sequence[tuple[int, int]]) -> Iterator[tuple[int, ...]]:
    """All integer ``x`` with ``Ax = 0`` and ``ranges[j][0] <= x_j <= ranges[j][1]``.

    Wide columns go into the basis; the remaining columns are enumerated
    depth first, and a branch is cut as soon as some basic column is forced
    out of its range.
    """
    n = A.n
    if any(lo > hi for lo, hi in ranges):
        return
    order = sorted(range(n), key=lambda j: (-(ranges[j][1] - ranges[j][0]), j))
    basis: list[int] = []
    for j in order:
        if A.rank_of(basis + [j]) == len(basis) + 1:
            basis.append(j)
    rows = cc.standard_rows(A, basis) if basis else ()
    nonbasic = sorted((j for j in range(n) if j not in set(basis)),
                      key=lambda j: (ranges[j][1] - ranges[j][0], j))
    integral = all(v.denominator == 1 for r in rows for v in r)
    coef = [[-(r[j]) for j in nonbasic] for r in rows]
    if integral:
        coef = [[int(v) for v in r] for r in coef]
    nb = len(nonbasic)
    # suffix bounds of the contribution of nonbasics pos.. to each basic
    suf_lo = [[0] * (nb + 1) for _ in basis]
    suf_hi = [[0] * (nb + 1) for _ in basis]
    for i in range(len(basis)):
        for pos in range(nb - 1, -1, -1):
            lo, hi = ranges[nonbasic[pos]]
            a = coef[i][pos]
            suf_lo[i][pos] = suf_lo[i][pos + 1] + min(a * lo, a * hi)
            suf_hi[i][pos] = suf_hi[i][pos + 1] + max(a * lo, a * hi)
    x = [0] * n
    partial = [0] * len(basis)

    def ok(pos: int) -> bool:
        for i, b in enumerate(basis):
            lo, hi = ranges[b]
            if partial[i] + suf_lo[i][pos] > hi or partial[i] + suf_hi[i][pos] < lo:
                return False
        return True

    def rec(pos: int) -> Iterator[tuple[int, ...]]:
        if pos == nb:
            for i, b in enumerate(basis):
                v = partial[i]
                if integral:
                    x[b] = v
                else:
                    if v.denominator != 1:
                        return
                    x[b] = int(v)
            yield tuple(x)
            return
        j = nonbasic[pos]
        lo, hi = ranges[j]
        for v in range(lo, hi + 1):
            x[j] = v
            for i in range(len(basis)):
                partial[i] += coef[i][pos] * v
            if ok(pos + 1):
                yield from rec(pos + 1)
            for i in range(len(basis)):
                partial[i] -= coef[i][pos] * v

    if ok(0):
        yield from rec(0)


def solve_rooted_direct(inst: RootedMcicpInstance, ranges: Mapping[int, tuple[int, int]] | None = None):
    """Best circulation by enumeration; returns ``(value, solution)`` or None."""
    A = inst.config
    rng = []
    for l in A.labels:
        lo, hi = inst.lower[l], inst.upper[l]
        if ranges is not None and l in ranges:
            lo, hi = max(lo, ranges[l][0]), min(hi, ranges[l][1])
        rng.append((lo, hi))
    best = None
    for x in enumerate_circulations(A, rng):
        sol = dict(zip(A.labels, x))
        if inst.weight(sol) != inst.d:
            continue
        val = sum(inst.p[l] * v for l, v in sol.items())
        cand = (val, _neg_lex(sol))
        if best is None or cand > best[0]:
            best = (cand, sol)
    if best is None:
        return None
    return best[0][0], best[1]


def _neg_lex(sol: Mapping[int, int]) -> tuple[int, ...]:
    """Sort key making lexicographically smaller solutions compare larger."""
    return tuple(-sol[l] for l in sorted(sol))


# ---------------------------------------------------------------- 1-sum


def solve_1sum(tables: Sequence[Mapping[Key, tuple[int, dict[int, int]]]], d: Sequence[int],
               box: int) -> tuple[int, dict[int, int]] | None:
    """Combine per-component tables ``d_j -> (value, solution)`` so that the weights add up to ``d``.

    Partial sums are kept inside ``[-box, box]^k``.
    """
    k = len(d)
    acc: dict[Key, tuple[int, dict[int, int]]] = {(0,) * k: (0, {})}
    for table in tables:
        nxt: dict[Key, tuple[int, dict[int, int]]] = {}
        for dacc, (vacc, sacc) in acc.items():
            for dj, (vj, sj) in table.items():
                dn = tuple(a + b for a, b in zip(dacc, dj))
                if any(abs(v) > box for v in dn):
                    continue
                sol = {**sacc, **sj}
                _offer(nxt, dn, vacc + vj, sol)
        acc = nxt
    return acc.get(tuple(d))


def _offer(table: dict, key, value, sol) -> None:
    cur = table.get(key)
    if cur is None or (value, _neg_lex(sol)) > (cur[0], _neg_lex(cur[1])):
        table[key] = (value, sol)


# ---------------------------------------------------------------- weights of virtual vectors


def upper_weight(config: cc.Configuration, W: Mapping[int, Sequence[int]], far_labels: Sequence[int],
                 vbar: Sequence[Fraction], k: int) -> tuple[int, ...]:
    """Weight of the far-side part of a crossing circuit: ``W alpha`` where ``vbar = sum alpha_v v``."""
    cols = {l: config.column(l) for l in far_labels}
    alpha = represent(cols, list(far_labels), vbar)
    out = []
    for i in range(k):
        val = sum((W[l][i] * a for l, a in alpha.items()), Fraction(0))
        check(val.denominator == 1, "non-integral virtual weight")
        out.append(int(val))
    return tuple(out)


# ---------------------------------------------------------------- gadgets


@dataclass(frozen=True)
class Gadget:
    """Root plus parallel copies; ``copies[i] = (sign, profit, (lo, hi))``."""

    config: cc.Configuration
    root: int
    copies: tuple[tuple[int, int, Fraction, tuple[int, int]], ...]

    def value(self, phi: int) -> Fraction | None:
        """Best profit with root flow ``phi``; copies of ``v`` carry ``-1`` and of ``-v`` carry ``+1``."""
        pos = sorted((p for lab, s, p, (lo, hi) in self.copies if s < 0 and hi > 0), reverse=True)
        neg = sorted((p for lab, s, p, (lo, hi) in self.copies if s > 0 and hi > 0), reverse=True)
        best = None
        for a in range(len(pos) + 1):
            b = a + phi
            if not 0 <= b <= len(neg):
                continue
            val = sum(pos[:a], Fraction(0)) + sum(neg[:b], Fraction(0))
            if best is None or val > best:
                best = val
        return best


def build_gadget(vbar: Sequence[Fraction], f: Mapping[int, Fraction | int], size: int,
                 root_label: int = 0) -> Gadget:
    """Parallel-copy configuration whose rooted value function equals ``f`` on ``[-size, size]``.

    ``f`` maps flows to values; missing flows mean minus infinity.  Copies
    whose profit would involve a missing value get bounds ``[0, 0]``.
    """
    if f.get(0) != 0:
        raise ValidationError("gadget needs f(0) = 0")
    dom = sorted(f)
    if dom != list(range(dom[0], dom[-1] + 1)):
        raise ValidationError("gadget needs f defined on an interval")
    for a, b, c in zip(dom, dom[1:], dom[2:]):
        if f[b] - f[a] < f[c] - f[b]:
            raise ValidationError("gadget needs f concave")
    vec = rc.to_vector(vbar)
    labels = [root_label]
    cols = [vec]
    copies = []
    for i in range(1, size + 1):
        lab_neg = root_label + 2 * i - 1
        lab_pos = root_label + 2 * i
        # copy of -v used once raises the root flow by one
        ok = i in f and (i - 1) in f
        copies.append((lab_neg, 1, Fraction(f[i] - f[i - 1]) if ok else Fraction(0), (0, 1 if ok else 0)))
        ok = -i in f and -(i - 1) in f
        copies.append((lab_pos, -1, Fraction(f[-i] - f[-i + 1]) if ok else Fraction(0), (0, 1 if ok else 0)))
    for lab, s, _, _ in copies:
        labels.append(lab)
        cols.append(tuple(-x for x in vec) if s > 0 else vec)
    return Gadget(cc.Configuration(tuple(labels), tuple(cols), len(vec)), root_label, tuple(copies))


def verify_gadget(g: Gadget, f: Mapping[int, Fraction | int], size: int) -> None:
    for phi in range(-size, size + 1):
        want = f.get(phi)
        got = g.value(phi)
        check(want == got, f"gadget value {got} differs from f({phi}) = {want}")


# ---------------------------------------------------------------- 2-sum DP


@dataclass
class DpStats:
    nodes: int = 0
    tame: int = 0
    wild: int = 0
    gadgets_checked: int = 0
    gadgets_skipped: int = 0
    table_entries: int = 0
    local_points: int = 0


@dataclass
class _Context:
    inst: RootedMcicpInstance
    rtree: RootedTree
    f: int
    box: int
    ranges: dict[int, tuple[int, int]]
    flow_ranges: dict[int, tuple[int, int]]
    stats: DpStats = field(default_factory=DpStats)


def _labels_vector_sum(config_cols: Mapping[int, rc.Vector], x: Mapping[int, int], m: int) -> list[Fraction]:
    out = [Fraction(0)] * m
    for l, v in x.items():
        if v:
            col = config_cols[l]
            for i in range(m):
                out[i] += v * col[i]
    return out


def classify_children(inst: RootedMcicpInstance, rtree: RootedTree, t: int) -> dict[int, bool]:
    """Child node -> True when tame, via the circuit-based test on the subtree configuration."""
    out = {}
    for c, L in rtree.children[t]:
        sub = sorted(rtree.subtree_real[c])
        far = [l for l in inst.config.labels if l not in rtree.subtree_real[c]]
        vbar = rtree.tree.virtual[L]
        A_c = inst.config.select(sub).concat(cc.Configuration((L,), (vbar,), inst.config.m))
        W_up = upper_weight(inst.config, inst.W, far, vbar, inst.k)
        Wm = [[inst.W[l][i] for l in sub] + [W_up[i]] for i in range(inst.k)]
        out[c] = cc.is_tame(A_c, Wm, L)
    return out


def _is_tame_fast(ctx: _Context, c: int, L: int, lower_w: Sequence[int]) -> bool:
    """Tame iff the weights with the lower weight on the root vanish on every circulation."""
    inst = ctx.inst
    sub = sorted(ctx.rtree.subtree_real[c])
    cols = [ctx.rtree.tree.virtual[L]] + [inst.config.column(l) for l in sub]
    M = [[col[i] for col in cols] for i in range(inst.config.m)]
    ker = rc.kernel_basis(M, len(cols)) if M else rc.kernel_basis([], len(cols))
    for i in range(inst.k):
        w = [lower_w[i]] + [inst.W[l][i] for l in sub]
        if any(rc.dot(w, v) for v in ker):
            return False
    return True


def solve_2sum_dp(inst: RootedMcicpInstance, tree: DecompositionTree | None = None,
                  f: int | None = None, ranges: Mapping[int, tuple[int, int]] | None = None,
                  stats: DpStats | None = None) -> tuple[int, dict[int, int]] | None:
    """Optimum of a rooted instance by the tree DP; None when infeasible."""
    table = rooted_table(inst, tree, f, ranges, stats)
    return table.get((tuple(inst.d), inst.phi))


def rooted_table(inst: RootedMcicpInstance, tree: DecompositionTree | None = None,
                 f: int | None = None, ranges: Mapping[int, tuple[int, int]] | None = None,
                 stats: DpStats | None = None) -> dict[tuple[Key, int], tuple[int, dict[int, int]]]:
    """Root table ``(d, phi) -> (value, solution)`` restricted to the root's own bounds."""
    if f is None:
        f = f_bound(inst.k, inst.delta)
    A = inst.config
    if tree is None:
        if A.n >= 3 and cc.is_connected(A):
            tree = build_decomposition_tree(A)
        else:
            tree = DecompositionTree({0: A}, {}, {}, A.labels)
    rtree = root_tree(tree, inst.root)
    rng = {}
    for l in A.labels:
        lo, hi = max(inst.lower[l], -f), min(inst.upper[l], f)
        if ranges is not None and l in ranges:
            lo, hi = max(lo, ranges[l][0]), min(hi, ranges[l][1])
        rng[l] = (lo, hi)
    ctx = _Context(inst, rtree, f, inst.delta * f, rng, {}, stats if stats is not None else DpStats())
    if any(lo > hi for lo, hi in rng.values()):
        return {}
    _flow_ranges(ctx)
    return _node_table(ctx, rtree.root_node, inst.W[inst.root], (inst.phi, inst.phi))


def _flow_ranges(ctx: _Context) -> None:
    """Sound range for the flow through every virtual label, from LP bounds."""
    inst, rtree = ctx.inst, ctx.rtree
    A = inst.config
    labels = list(A.labels)
    lo = [ctx.ranges[l][0] for l in labels]
    hi = [ctx.ranges[l][1] for l in labels]
    M = A.matrix()
    for t in rtree.postorder:
        if t == rtree.root_node:
            continue
        L = rtree.up_label[t]
        vbar = rtree.tree.virtual[L]
        piv = next(i for i, v in enumerate(vbar) if v)
        obj = [Fraction(0)] * len(labels)
        for j, l in enumerate(labels):
            if l in rtree.subtree_real[t]:
                obj[j] = -A.columns[j][piv] / vbar[piv]
        top = rc.lp_solve(obj, M, [0] * len(M), lo, hi)
        bot = rc.lp_solve([-v for v in obj], M, [0] * len(M), lo, hi)
        if not top.optimal or not bot.optimal:
            ctx.flow_ranges[L] = (1, 0)
            continue
        a = max(-ctx.f, math.ceil(-bot.value))
        b = min(ctx.f, math.floor(top.value))
        ctx.flow_ranges[L] = (a, b)


def _node_table(ctx: _Context, t: int, root_w: Sequence[int], root_range: tuple[int, int]):
    inst, rtree = ctx.inst, ctx.rtree
    k, f, box = inst.k, ctx.f, ctx.box
    ctx.stats.nodes += 1
    P = rtree.tree.pieces[t]
    up = rtree.up_label[t]
    real_all = set(inst.config.labels)
    wild: list[tuple[int, int, dict, tuple[int, ...]]] = []
    tame: dict[int, tuple[dict[int, tuple[Fraction, dict[int, int]]], tuple[int, ...]]] = {}
    lower_w: dict[int, tuple[int, ...]] = {}
    for c, L in rtree.children[t]:
        vbar = rtree.tree.virtual[L]
        sub = sorted(rtree.subtree_real[c])
        far = [l for l in inst.config.labels if l not in rtree.subtree_real[c]]
        lw = upper_weight(inst.config, inst.W, sub, vbar, k)
        lower_w[L] = lw
        if _is_tame_fast(ctx, c, L, lw):
            ctx.stats.tame += 1
            child = _node_table(ctx, c, lw, ctx.flow_ranges[L])
            fvals: dict[int, tuple[Fraction, dict[int, int]]] = {}
            for (dc, phi), (val, sol) in child.items():
                if any(dc):
                    raise InvariantBreach("tame child has a finite entry with nonzero target")
                fvals[phi] = (val, sol)
            _check_gadget(ctx, vbar, {phi: v for phi, (v, _) in fvals.items()})
            tame[L] = (fvals, lw)
        else:
            ctx.stats.wild += 1
            uw = upper_weight(inst.config, inst.W, far, vbar, k)
            child = _node_table(ctx, c, uw, ctx.flow_ranges[L])
            by_phi: dict[int, list[tuple[Key, int, dict[int, int]]]] = {}
            for (dc, phi), (val, sol) in child.items():
                by_phi.setdefault(phi, []).append((dc, val, sol))
            delta_w = tuple(a - b for a, b in zip(uw, lw))
            wild.append((c, L, by_phi, delta_w))
    # local enumeration ranges
    rng = []
    for l in P.labels:
        if l == up:
            rng.append(root_range)
        elif l in tame:
            dom = sorted(tame[l][0])
            rng.append((-dom[-1], -dom[0]) if dom else (1, 0))
        elif any(l == L for _, L, _, _ in wild):
            by_phi = next(bp for _, L, bp, _ in wild if L == l)
            if not by_phi:
                rng.append((1, 0))
            else:
                rng.append((-max(by_phi), -min(by_phi)))
        else:
            check(l in real_all, "unknown label in piece")
            rng.append(ctx.ranges[l])
    wild_labels = [L for _, L, _, _ in wild]
    local: dict[tuple[int, Key], dict[Key, tuple[int, dict[int, int]]]] = {}
    for x in enumerate_circulations(P, rng):
        ctx.stats.local_points += 1
        pt = dict(zip(P.labels, x))
        phi_t = pt[up]
        phis = tuple(-pt[L] for L in wild_labels)
        if any(phi not in bp for phi, (_, _, bp, _) in zip(phis, wild)):
            continue
        if sum(abs(v) for v in phis) > 2 * k * inst.delta * f:
            continue
        d0 = [root_w[i] * phi_t for i in range(k)]
        value = Fraction(0)
        sol: dict[int, int] = {}
        feasible = True
        for l, v in pt.items():
            if l == up:
                continue
            if l in tame:
                fvals, lw = tame[l]
                if -v not in fvals:
                    feasible = False
                    break
                val, csol = fvals[-v]
                value += val
                sol.update(csol)
                for i in range(k):
                    d0[i] += lw[i] * v
            elif l in lower_w:
                for i in range(k):
                    d0[i] += lower_w[l][i] * v
            else:
                value += inst.p[l] * v
                sol[l] = v
                for i in range(k):
                    d0[i] += inst.W[l][i] * v
        if not feasible or any(abs(v) > box for v in d0):
            continue
        bucket = local.setdefault((phi_t, phis), {})
        _offer(bucket, tuple(d0), value, sol)
    out: dict[tuple[Key, int], tuple[int, dict[int, int]]] = {}
    for (phi_t, phis), entries in sorted(local.items()):
        acc: dict[tuple[Key, int], tuple[Fraction, dict[int, int]]] = {}
        for d0, (val, sol) in entries.items():
            acc[(d0, 0)] = (val, sol)
        for (c, L, by_phi, delta_w), phi in zip(wild, phis):
            nxt: dict[tuple[Key, int], tuple[Fraction, dict[int, int]]] = {}
            for (dacc, cnt), (vacc, sacc) in acc.items():
                for dc, vc, sc in by_phi[phi]:
                    cnt2 = cnt + (1 if phi == 0 and any(dc) else 0)
                    if cnt2 > f:
                        continue
                    dn = tuple(dacc[i] + dc[i] - delta_w[i] * phi for i in range(k))
                    _offer(nxt, (dn, cnt2), vacc + vc, {**sacc, **sc})
            acc = nxt
        for (dt, _), (val, sol) in acc.items():
            if any(abs(v) > box for v in dt):
                continue
            _offer(out, (dt, phi_t), val, sol)
    for (dt, phi_t), (val, sol) in out.items():
        _assert_compliant(ctx, t, root_w, dt, phi_t, val, sol)
    ctx.stats.table_entries += len(out)
    return out


def _assert_compliant(ctx: _Context, t: int, root_w, dt, phi_t, val, sol) -> None:
    inst, rtree = ctx.inst, ctx.rtree
    check(set(sol) == set(rtree.subtree_real[t]), "table witness covers the wrong columns")
    check(sum(inst.p[l] * v for l, v in sol.items()) == val, "table witness value mismatch")
    wt = tuple(root_w[i] * phi_t + sum(inst.W[l][i] * v for l, v in sol.items()) for i in range(inst.k))
    check(wt == tuple(dt), "table witness weight mismatch")
    up = rtree.up_label[t]
    vec = rtree.tree.virtual[up] if up in rtree.tree.virtual else inst.config.column(up)
    cols = {l: inst.config.column(l) for l in sol}
    total = _labels_vector_sum(cols, sol, inst.config.m)
    check(all(total[i] + phi_t * vec[i] == 0 for i in range(inst.config.m)), "table witness is not a circulation")
    check(all(inst.lower[l] <= v <= inst.upper[l] for l, v in sol.items()), "table witness violates bounds")


def _check_gadget(ctx: _Context, vbar, fvals: dict[int, Fraction]) -> None:
    """Build and verify the explicit gadget when the value function allows one."""
    if not fvals or fvals.get(0) != 0:
        ctx.stats.gadgets_skipped += 1
        return
    dom = sorted(fvals)
    if dom != list(range(dom[0], dom[-1] + 1)):
        ctx.stats.gadgets_skipped += 1
        return
    if any(fvals[b] - fvals[a] < fvals[c] - fvals[b] for a, b, c in zip(dom, dom[1:], dom[2:])):
        ctx.stats.gadgets_skipped += 1
        return
    g = build_gadget(vbar, fvals, ctx.f)
    verify_gadget(g, fvals, ctx.f)
    ctx.stats.gadgets_checked += 1


# ---------------------------------------------------------------- full circulation solve


def column_ranges(inst: EqualityInstance, f: int) -> dict[int, tuple[int, int]] | None:
    """LP bounds of every column over the relaxation, intersected with ``[-f, f]``; None if empty."""
    out = {}
    for j in range(inst.n):
        obj = [0] * inst.n
        obj[j] = 1
        top = inst.lp(obj)
        if top.status is rc.LpStatus.INFEASIBLE:
            return None
        obj[j] = -1
        bot = inst.lp(obj)
        lo = max(-f, math.ceil(-bot.value), inst.lower[j])
        hi = min(f, math.floor(top.value), inst.upper[j])
        if lo > hi:
            return None
        out[j] = (lo, hi)
    return out


def solve_circulation(inst: EqualityInstance, stats: DpStats | None = None,
                      trace: dict | None = None) -> tuple[int, tuple[int, ...]] | None:
    """Optimum of an anchored circulation instance via 1-sum and 2-sum DPs.

    Relies on the anchored guarantee: some optimum is a conformal sum of at
    most ``f`` circuits starting from the origin.
    """
    if any(inst.b):
        raise ValidationError("solve_circulation needs b = 0")
    k = inst.k
    f = f_bound(k, inst.delta)
    box = inst.delta * f
    if any(abs(v) > box for v in inst.d):
        return None
    ranges = column_ranges(inst, f)
    if ranges is None:
        return None
    A = inst.configuration()
    comps = cc.components(A)
    stats = stats if stats is not None else DpStats()
    tables = []
    shapes = []
    for comp in comps:
        sub = EqualityInstance.build(
            [inst.p[j] for j in comp], [[row[j] for j in comp] for row in inst.A], [0] * len(inst.A),
            [[row[j] for j in comp] for row in inst.W], [0] * k,
            [inst.lower[j] for j in comp], [inst.upper[j] for j in comp], inst.delta)
        rooted = to_rooted(sub)
        sub_ranges = {pos: ranges[j] for pos, j in enumerate(comp)}
        A_r = rooted.config
        if A_r.n >= 3 and cc.is_connected(A_r):
            tree = build_decomposition_tree(A_r)
        else:
            tree = DecompositionTree({0: A_r}, {}, {}, A_r.labels)
        shapes.append(len(tree.pieces))
        table = rooted_table(rooted, tree, f, sub_ranges, stats)
        comp_table = {}
        for (dc, phi), (val, sol) in table.items():
            if phi == 0:
                comp_table[dc] = (val, {comp[pos]: v for pos, v in sol.items() if pos != rooted.root})
        tables.append(comp_table)
    if trace is not None:
        trace["components"] = len(comps)
        trace["tree_nodes"] = shapes
        trace["dp"] = vars(stats)
    res = solve_1sum(tables, inst.d, box)
    if res is None:
        return None
    val, sol = res
    x = tuple(sol.get(j, 0) for j in range(inst.n))
    check(inst.is_feasible(x), "circulation DP returned an infeasible point")
    check(inst.value(x) == val, "circulation DP value mismatch")
    return int(val), x
