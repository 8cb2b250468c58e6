"""Directed graphs, docsets, rooted K_{2,t}-models, and the potential reformulation.

A cographic circulation problem on the tensions ``x = M^T y`` of a directed
graph becomes a problem on integer vertex potentials ``y``; circuits of the
tension space are exactly the signed cuts of docsets.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Hashable, Iterator, Mapping, Sequence

import networkx as nx

from . import configcore as cc
from . import ratcore as rc
from .errors import CapExceeded, DimensionError, ValidationError, check
from .proximity import EqualityInstance

DOCSET_CAP = 22
MODEL_CAP = 10


@dataclass(frozen=True)
class DirectedGraph:
    """Vertices ``0..n-1`` (with display labels) and directed edges; parallel edges allowed, loops not."""

    n: int
    edges: tuple[tuple[int, int], ...]
    labels: tuple[Hashable, ...] = ()

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValidationError("a graph needs at least one vertex")
        for a, b in self.edges:
            if not (0 <= a < self.n and 0 <= b < self.n):
                raise ValidationError(f"edge ({a}, {b}) has an unknown endpoint")
            if a == b:
                raise ValidationError("loops are not allowed")
        if self.labels and len(self.labels) != self.n:
            raise DimensionError("one label per vertex is required")

    @classmethod
    def from_edges(cls, vertices: Sequence[Hashable], edges: Sequence[tuple[Hashable, Hashable]]) -> "DirectedGraph":
        index = {v: i for i, v in enumerate(vertices)}
        if len(index) != len(vertices):
            raise ValidationError("vertex labels must be unique")
        try:
            es = tuple((index[a], index[b]) for a, b in edges)
        except KeyError as exc:
            raise ValidationError(f"edge endpoint {exc} is not a vertex") from None
        return cls(len(vertices), es, tuple(vertices))

    @property
    def m(self) -> int:
        return len(self.edges)

    def label(self, v: int) -> Hashable:
        return self.labels[v] if self.labels else v

    @cached_property
    def undirected(self) -> nx.Graph:
        H = nx.Graph()
        H.add_nodes_from(range(self.n))
        H.add_edges_from(self.edges)
        return H

    @cached_property
    def adjacency(self) -> tuple[int, ...]:
        adj = [0] * self.n
        for a, b in self.edges:
            adj[a] |= 1 << b
            adj[b] |= 1 << a
        return tuple(adj)

    def is_connected(self) -> bool:
        return nx.is_connected(self.undirected)

    def is_biconnected(self) -> bool:
        return self.n >= 3 and nx.is_biconnected(self.undirected)

    def is_subdivided_3_connected(self) -> bool:
        """3-connected once every degree-2 vertex is suppressed into a single edge."""
        H = nx.MultiGraph(list(self.edges))
        H.add_nodes_from(range(self.n))
        changed = True
        while changed:
            changed = False
            for v in list(H.nodes):
                nbrs = [w for _, w in H.edges(v)]
                if len(nbrs) == 2 and v not in nbrs and nbrs[0] != nbrs[1]:
                    H.remove_node(v)
                    H.add_edge(*nbrs)
                    changed = True
        simple = nx.Graph(H)
        if simple.number_of_nodes() < 4 or simple.number_of_edges() != H.number_of_edges():
            return False
        return nx.node_connectivity(simple) >= 3

    def is_simple(self) -> bool:
        seen = set()
        for a, b in self.edges:
            key = (min(a, b), max(a, b))
            if key in seen:
                return False
            seen.add(key)
        return True


# ---------------------------------------------------------------- configurations


def incidence_matrix(G: DirectedGraph, drop: int | None = None) -> list[list[int]]:
    """Rows are vertices (optionally without ``drop``), columns are edges; edge ``(v, w)`` is ``e_v - e_w``."""
    rows = []
    for v in range(G.n):
        if v == drop:
            continue
        rows.append([1 if a == v else -1 if b == v else 0 for a, b in G.edges])
    return rows


def incidence_configuration(G: DirectedGraph) -> cc.Configuration:
    return cc.Configuration.from_matrix(incidence_matrix(G), labels=tuple(range(G.m)), m=G.n)


def cut_vector(G: DirectedGraph, S: int) -> tuple[int, ...]:
    """``M^T chi^S``: +1 on edges leaving ``S``, -1 on edges entering it."""
    out = []
    for a, b in G.edges:
        ia, ib = S >> a & 1, S >> b & 1
        out.append(ia - ib)
    return tuple(out)


def spanning_tree(G: DirectedGraph, root: int = 0) -> tuple[list[int], dict[int, tuple[int, int]]]:
    """BFS order from ``root`` and, per non-root vertex, ``(edge index, parent)``."""
    order = [root]
    parent: dict[int, tuple[int, int]] = {}
    seen = {root}
    incident: list[list[tuple[int, int]]] = [[] for _ in range(G.n)]
    for j, (a, b) in enumerate(G.edges):
        incident[a].append((j, b))
        incident[b].append((j, a))
    for v in order:
        for j, w in incident[v]:
            if w not in seen:
                seen.add(w)
                parent[w] = (j, v)
                order.append(w)
    if len(order) != G.n:
        raise ValidationError("graph is not connected")
    return order, parent


def cycle_matrix(G: DirectedGraph) -> list[list[int]]:
    """One signed fundamental cycle per non-tree edge; its kernel is the tension space."""
    _, parent = spanning_tree(G, 0)
    tree = {j for j, _ in parent.values()}
    depth = {0: 0}
    for v in spanning_tree(G, 0)[0][1:]:
        depth[v] = depth[parent[v][1]] + 1
    rows = []
    for j, (a, b) in enumerate(G.edges):
        if j in tree:
            continue
        row = [0] * G.m
        row[j] = 1
        # walk b -> a through the tree: the cycle continues from b back to a
        u, v = b, a
        up_u, up_v = [], []
        while u != v:
            if depth[u] >= depth[v]:
                e, pu = parent[u]
                up_u.append((e, u, pu))
                u = pu
            else:
                e, pv = parent[v]
                up_v.append((e, v, pv))
                v = pv
        for e, x, y in up_u:
            row[e] += 1 if G.edges[e] == (x, y) else -1
        for e, x, y in up_v:
            row[e] += 1 if G.edges[e] == (y, x) else -1
        rows.append(row)
    return rows


def tension_configuration(G: DirectedGraph) -> cc.Configuration:
    """Cographic configuration: the dual of the reduced incidence configuration."""
    v0 = 0
    inc = cc.Configuration.from_matrix(incidence_matrix(G, drop=v0), labels=tuple(range(G.m)), m=G.n - 1)
    return cc.dual(inc)


# ---------------------------------------------------------------- docsets


def _connected(adj: Sequence[int], mask: int) -> bool:
    if not mask:
        return True
    start = mask & -mask
    seen = start
    frontier = start
    while frontier:
        low = frontier & -frontier
        frontier ^= low
        nb = adj[low.bit_length() - 1] & mask & ~seen
        seen |= nb
        frontier |= nb
    return seen == mask


def is_docset(G: DirectedGraph, S: int) -> bool:
    full = (1 << G.n) - 1
    return _connected(G.adjacency, S) and _connected(G.adjacency, full ^ S)


def docset_masks(G: DirectedGraph, include_trivial: bool = False) -> list[int]:
    """Docsets as bitmasks ordered by size, then by sorted vertex tuple."""
    if G.n > DOCSET_CAP:
        raise CapExceeded("docset enumeration vertices", G.n, DOCSET_CAP)
    full = (1 << G.n) - 1
    adj = G.adjacency
    out = []
    for size in range(G.n + 1):
        if not include_trivial and size in (0, G.n):
            continue
        for comb in combinations(range(G.n), size):
            S = sum(1 << v for v in comb)
            if _connected(adj, S) and _connected(adj, full ^ S):
                out.append(S)
    return out


def mask_to_set(S: int) -> frozenset[int]:
    return frozenset(v for v in range(S.bit_length()) if S >> v & 1)


def docsets(G: DirectedGraph, include_trivial: bool = False) -> list[frozenset[int]]:
    return [mask_to_set(S) for S in docset_masks(G, include_trivial)]


def docset_circuits(G: DirectedGraph, v0: int = 0) -> set[tuple[int, ...]]:
    """``{+-M^T chi^S : S nontrivial docset avoiding v0}``."""
    out = set()
    for S in docset_masks(G):
        if S >> v0 & 1:
            continue
        c = cut_vector(G, S)
        out.add(c)
        out.add(tuple(-x for x in c))
    return out


def beta(G: DirectedGraph, a: Sequence[int]) -> int:
    """Maximum of ``a(S)`` over docsets ``S``; zero when there is no nontrivial docset."""
    if len(a) != G.n:
        raise DimensionError("one weight per vertex is required")
    if sum(a) != 0:
        raise ValidationError("beta needs zero-sum weights")
    if not G.is_connected():
        raise ValidationError("beta needs a connected graph")
    best = 0
    for S in docset_masks(G):
        best = max(best, sum(a[v] for v in range(G.n) if S >> v & 1))
    return best


def extend_docset(G: DirectedGraph, X: int, Y: int) -> int | None:
    """Some ``v`` in ``Y - X`` with ``X + v`` a docset, or None."""
    rest = Y & ~X
    for v in range(G.n):
        if rest >> v & 1 and is_docset(G, X | 1 << v):
            return v
    return None


# ---------------------------------------------------------------- rooted models


@dataclass(frozen=True)
class RootedModel:
    """Hub branch sets and ``t`` central branch sets, with one witness edge per hub-central pair."""

    hubs: tuple[frozenset[int], frozenset[int]]
    centrals: tuple[frozenset[int], ...]
    witnesses: tuple[tuple[tuple[int, int], tuple[int, int]], ...]

    @property
    def t(self) -> int:
        return len(self.centrals)


def _connected_masks(G: DirectedGraph) -> list[int]:
    adj = G.adjacency
    return [S for S in range(1, 1 << G.n) if _connected(adj, S)]


def _neighbourhood(adj: Sequence[int], S: int) -> int:
    out = 0
    for v in range(len(adj)):
        if S >> v & 1:
            out |= adj[v]
    return out & ~S


def find_rooted_K2t_model(G: DirectedGraph, roots: Sequence[int], t: int,
                          cap: int = MODEL_CAP) -> RootedModel | None:
    """Exhaustive search for a rooted K_{2,t}-model; the first found in a fixed order."""
    if G.n > cap:
        raise CapExceeded("rooted model search vertices", G.n, cap)
    if t < 1:
        raise ValidationError("t must be positive")
    R = 0
    for r in roots:
        R |= 1 << r
    if bin(R).count("1") < t or G.n < t + 2:
        return None
    adj = G.adjacency
    conn = _connected_masks(G)
    nbh = {S: _neighbourhood(adj, S) for S in conn}
    full = (1 << G.n) - 1
    for h1 in conn:
        low1 = h1 & -h1
        n1 = nbh[h1]
        if bin(n1).count("1") < t:
            continue
        for h2 in conn:
            if h2 & h1 or (h2 & -h2) < low1:
                continue
            n2 = nbh[h2]
            avail = full & ~h1 & ~h2
            if bin(avail & R).count("1") < t or bin(n2 & avail).count("1") < t or bin(n1 & avail).count("1") < t:
                continue
            cands = [C for C in conn if not C & ~avail and C & R and C & n1 and C & n2]
            cands = [C for C in cands if not any(D != C and D & C == D for D in cands)]
            pick = _pack(cands, t)
            if pick is not None:
                return _model(G, h1, h2, pick)
    return None


def _pack(cands: list[int], t: int) -> list[int] | None:
    """``t`` pairwise disjoint sets from ``cands``, chosen in increasing candidate order."""
    cands = sorted(cands)

    def rec(start: int, used: int, chosen: list[int]) -> list[int] | None:
        if len(chosen) == t:
            return list(chosen)
        if len(cands) - start < t - len(chosen):
            return None
        for i in range(start, len(cands)):
            C = cands[i]
            if C & used:
                continue
            chosen.append(C)
            got = rec(i + 1, used | C, chosen)
            if got is not None:
                return got
            chosen.pop()
        return None

    return rec(0, 0, [])


def _model(G: DirectedGraph, h1: int, h2: int, centrals: list[int]) -> RootedModel:
    def witness(A: int, B: int) -> tuple[int, int]:
        for a, b in G.edges:
            if A >> a & 1 and B >> b & 1:
                return (a, b)
            if A >> b & 1 and B >> a & 1:
                return (b, a)
        raise AssertionError("no witness edge")

    wit = tuple((witness(h1, C), witness(h2, C)) for C in centrals)
    return RootedModel((mask_to_set(h1), mask_to_set(h2)), tuple(mask_to_set(C) for C in centrals), wit)


def verify_model(G: DirectedGraph, roots: Sequence[int], model: RootedModel) -> bool:
    sets = [*model.hubs, *model.centrals]
    seen: set[int] = set()
    for S in sets:
        if not S or S & seen:
            return False
        seen |= S
        if not _connected(G.adjacency, sum(1 << v for v in S)):
            return False
    R = set(roots)
    if any(not (C & R) for C in model.centrals):
        return False
    edges = set(G.edges) | {(b, a) for a, b in G.edges}
    for C, (w1, w2) in zip(model.centrals, model.witnesses):
        for hub, (a, b) in zip(model.hubs, (w1, w2)):
            if (a, b) not in edges or a not in hub or b not in C:
                return False
    return True


def roots_of(W: Sequence[Sequence[int]], n: int) -> list[int]:
    return [v for v in range(n) if any(row[v] for row in W)]


def max_docset_weight(G: DirectedGraph, W: Sequence[Sequence[int]]) -> int:
    best = 0
    for S in docset_masks(G):
        for row in W:
            best = max(best, abs(sum(row[v] for v in range(G.n) if S >> v & 1)))
    return best


def verify_no_rooted_model_bound(G: DirectedGraph, W: Sequence[Sequence[int]], k: int, delta: int) -> bool:
    """True iff no rooted K_{2,4k delta+1}-model exists with roots the support of ``W``."""
    if not G.is_biconnected():
        raise ValidationError("the model bound needs a 2-connected graph")
    if max_docset_weight(G, W) > delta:
        raise ValidationError("some docset has weight above delta")
    t = 4 * k * delta + 1
    return find_rooted_K2t_model(G, roots_of(W, G.n), t) is None


# ---------------------------------------------------------------- potential problems


@dataclass(frozen=True)
class McippInstance:
    """``max p y`` s.t. ``lower(e) <= y(v) - y(w) <= upper(e)`` for ``e = (v, w)``, ``W y = d``."""

    graph: DirectedGraph
    p: tuple[int, ...]
    W: tuple[tuple[int, ...], ...]
    d: tuple[int, ...]
    lower: tuple[int, ...]
    upper: tuple[int, ...]
    delta: int

    def __post_init__(self) -> None:
        G = self.graph
        if len(self.p) != G.n or any(len(r) != G.n for r in self.W) or len(self.d) != len(self.W):
            raise DimensionError("vertex data does not match the graph")
        if len(self.lower) != G.m or len(self.upper) != G.m:
            raise DimensionError("edge bounds do not match the graph")
        if any(a > b for a, b in zip(self.lower, self.upper)):
            raise ValidationError("lower bound above upper bound")
        if self.delta < 1:
            raise ValidationError("delta must be positive")

    @classmethod
    def build(cls, graph, p, W, d, lower, upper, delta) -> "McippInstance":
        return cls(graph, tuple(int(v) for v in p), tuple(tuple(int(v) for v in r) for r in W),
                   tuple(int(v) for v in d), tuple(int(v) for v in lower), tuple(int(v) for v in upper), int(delta))

    @property
    def k(self) -> int:
        return len(self.W)

    @property
    def roots(self) -> list[int]:
        return roots_of(self.W, self.graph.n)

    def validate(self) -> None:
        if not self.graph.is_connected():
            raise ValidationError("graph must be connected")
        if sum(self.p) != 0:
            raise ValidationError("vertex profits must sum to zero")
        if any(sum(r) for r in self.W):
            raise ValidationError("every weight row must sum to zero")
        wt = max_docset_weight(self.graph, self.W)
        if wt > self.delta:
            raise ValidationError(f"a docset has weight {wt} above delta {self.delta}")

    def value(self, y: Sequence[int]) -> int:
        return sum(a * b for a, b in zip(self.p, y))

    def weight(self, y: Sequence[int]) -> tuple[int, ...]:
        return tuple(sum(a * b for a, b in zip(row, y)) for row in self.W)

    def is_feasible(self, y: Sequence[int]) -> bool:
        if len(y) != self.graph.n:
            return False
        for (a, b), lo, hi in zip(self.graph.edges, self.lower, self.upper):
            if not lo <= y[a] - y[b] <= hi:
                return False
        return self.weight(y) == self.d


def vertex_weights(G: DirectedGraph, w: Sequence[object]) -> tuple:
    """``(M w)(v)``: weight on edges leaving ``v`` minus weight on edges entering ``v``."""
    out = [0] * G.n
    for (a, b), x in zip(G.edges, w):
        out[a] += x
        out[b] -= x
    return tuple(out)


def edge_weights(G: DirectedGraph, a: Sequence[int]) -> tuple[int, ...]:
    """Edge vector ``w`` on a spanning tree with ``vertex_weights(G, w) == a``."""
    if sum(a) != 0:
        raise ValidationError("vertex weights must sum to zero")
    order, parent = spanning_tree(G, 0)
    w = [0] * G.m
    residual = list(a)
    for v in reversed(order[1:]):
        j, u = parent[v]
        if G.edges[j][0] == v:
            w[j] = residual[v]
            residual[u] += residual[v]
        else:
            w[j] = -residual[v]
            residual[u] += residual[v]
        residual[v] = 0
    check(tuple(vertex_weights(G, w)) == tuple(a), "edge weight reconstruction failed")
    return tuple(w)


def tension(G: DirectedGraph, y: Sequence[int]) -> tuple[int, ...]:
    return tuple(y[a] - y[b] for a, b in G.edges)


def potentials(G: DirectedGraph, x: Sequence[object]) -> tuple:
    """Potentials with ``y(v0) = 0`` whose tension is ``x``; ``x`` must be a tension."""
    order, parent = spanning_tree(G, 0)
    y: list = [0] * G.n
    for v in order[1:]:
        j, u = parent[v]
        y[v] = y[u] + x[j] if G.edges[j][0] == v else y[u] - x[j]
    check(tension(G, y) == tuple(x), "vector is not a tension of the graph")
    return tuple(y)


def mcipp_solution_to_mcicp(y: Sequence[int], G: DirectedGraph) -> tuple[int, ...]:
    return tension(G, y)


def edge_instance(inst: McippInstance) -> EqualityInstance:
    """The tension-space circulation problem equivalent to a potential problem."""
    G = inst.graph
    A = cycle_matrix(G)
    pe = edge_weights(G, inst.p)
    We = [edge_weights(G, row) for row in inst.W]
    return EqualityInstance.build(pe, A, [0] * len(A), We, inst.d, inst.lower, inst.upper, inst.delta)


def is_tension_space(A: cc.Configuration, G: DirectedGraph) -> bool:
    """True when the kernel of ``A`` is the row space of the incidence matrix of ``G``."""
    if A.n != G.m:
        return False
    M = incidence_matrix(G, drop=0)
    ker = rc.kernel_basis(A.matrix(), A.n) if A.m else rc.kernel_basis([], A.n)
    r = rc.rank(M) if M else 0
    if len(ker) != r:
        return False
    return not M or rc.rank(list(ker) + [rc.to_vector(row) for row in M]) == r


def cographic_to_mcipp(inst: EqualityInstance, G: DirectedGraph) -> McippInstance:
    """Rewrite a circulation instance on the tension space of ``G`` in potentials."""
    if any(inst.b):
        raise ValidationError("the change of variables needs b = 0")
    if not is_tension_space(inst.configuration(), G):
        raise ValidationError("the configuration is not the tension space of the supplied graph")
    p = vertex_weights(G, inst.p)
    W = tuple(vertex_weights(G, row) for row in inst.W)
    return McippInstance.build(G, p, W, inst.d, inst.lower, inst.upper, inst.delta)


def docset_sum(G: DirectedGraph, y: Sequence[int], budget: int) -> list[int] | None:
    """Write ``y`` as a sum of at most ``budget`` nontrivial docset indicators.

    Greedy peeling with backtracking over the docsets contained in the
    current top level sets; returns the docset masks or None.
    """
    if any(v < 0 for v in y):
        return None
    if not any(y):
        return []
    masks = docset_masks(G)
    n = G.n

    def rec(cur: tuple[int, ...], left: int, start: int) -> list[int] | None:
        if not any(cur):
            return []
        if left == 0 or max(cur) > left:
            return None
        support = sum(1 << v for v in range(n) if cur[v])
        top = max(cur)
        must = sum(1 << v for v in range(n) if cur[v] == left) if top == left else 0
        for i in range(start, len(masks)):
            S = masks[i]
            if S & ~support or must & ~S:
                continue
            nxt = tuple(c - (S >> v & 1) for v, c in enumerate(cur))
            got = rec(nxt, left - 1, i)
            if got is not None:
                return [S] + got
        return None

    return rec(tuple(y), budget, 0)
