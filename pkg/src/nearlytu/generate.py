"""Seeded random instances that satisfy their declared invariants.

Every generator takes a ``random.Random`` and is deterministic for a fixed
seed.  Invariants are enforced by rejection: TU parts come from incidence,
tension and interval constructions, and weight rows are redrawn until the
relevant circuit weights stay within ``delta``.
"""

from __future__ import annotations

import random
from itertools import combinations

import networkx as nx
from networkx.algorithms.approximation import treewidth_min_fill_in

from . import configcore as cc
from . import oracle
from .cographic import (
    DirectedGraph,
    McippInstance,
    cycle_matrix,
    incidence_matrix,
    max_docset_weight,
    roots_of,
    tension,
    vertex_weights,
)
from .errors import CapExceeded
from .fileformat import InstanceFile
from .mcippdp import SpecialTreeDecomposition, trivial_td
from .proximity import EqualityInstance, GeneralIpInstance, f_bound

REJECTION_CAP = 500
# root counts keep the pattern guesses of the potential DP at desk scale
ROOT_CAP = {0: 8, 3: 6, 5: 5, 50: 3, 162: 2}


def _zero_sum(rng: random.Random, support: list[int], n: int, span: int) -> list[int]:
    row = [0] * n
    for v in support[:-1]:
        row[v] = rng.randint(-span, span)
    if support:
        row[support[-1]] = -sum(row)
    return row


def random_biconnected_graph(rng: random.Random, n: int, extra: int | None = None) -> DirectedGraph:
    """A Hamiltonian cycle plus random chords, each edge randomly oriented."""
    n = max(n, 3)
    order = list(range(n))
    rng.shuffle(order)
    und = {(min(order[i], order[(i + 1) % n]), max(order[i], order[(i + 1) % n])) for i in range(n)}
    chords = [(a, b) for a, b in combinations(range(n), 2) if (a, b) not in und]
    extra = rng.randint(0, min(len(chords), n - 1)) if extra is None else min(extra, len(chords))
    und |= set(rng.sample(chords, extra))
    edges = [(a, b) if rng.random() < 0.5 else (b, a) for a, b in sorted(und)]
    return DirectedGraph(n, tuple(edges))


def random_connected_graph(rng: random.Random, n: int, m: int) -> DirectedGraph:
    """A random spanning tree plus random further edges, without loops or parallel edges."""
    und = set()
    for v in range(1, n):
        u = rng.randrange(v)
        und.add((u, v))
    rest = [(a, b) for a, b in combinations(range(n), 2) if (a, b) not in und]
    und |= set(rng.sample(rest, max(0, min(len(rest), m - len(und)))))
    edges = [(a, b) if rng.random() < 0.5 else (b, a) for a, b in sorted(und)]
    return DirectedGraph(n, tuple(edges))


# ---------------------------------------------------------------- tree decompositions


def heuristic_td(G: DirectedGraph) -> SpecialTreeDecomposition:
    """Min-fill-in decomposition rooted at its lexicographically first bag."""
    _, T = treewidth_min_fill_in(G.undirected)
    nodes = sorted(T.nodes(), key=sorted)
    idx = {b: i for i, b in enumerate(nodes)}
    parent: list[int | None] = [None] * len(nodes)
    seen = {nodes[0]}
    order = [nodes[0]]
    for b in order:
        for c in sorted(T.neighbors(b), key=sorted):
            if c not in seen:
                seen.add(c)
                parent[idx[c]] = idx[b]
                order.append(c)
    return _with_ell([frozenset(b) for b in nodes], parent)


def separator_td(G: DirectedGraph, max_size: int = 3) -> SpecialTreeDecomposition | None:
    """Two bags split along the first small vertex separator, or None."""
    H = G.undirected
    for s in range(1, max_size + 1):
        for S in combinations(range(G.n), s):
            rest = H.subgraph([v for v in range(G.n) if v not in S])
            comps = sorted((sorted(c) for c in nx.connected_components(rest)))
            if len(comps) < 2:
                continue
            C = set(comps[0])
            return _with_ell([frozenset(range(G.n)) - C, frozenset(C | set(S))], [None, 0])
    return None


def _with_ell(bags, parent) -> SpecialTreeDecomposition:
    td = SpecialTreeDecomposition.build(bags, parent, 1)
    ell = max([len(td.adhesion(t)) for t in range(len(bags))] + [len(td.children(t)) for t in range(len(bags))] + [1])
    return SpecialTreeDecomposition.build(bags, parent, ell)


def random_tu_matrix(rng: random.Random, vertices: int = 5, edges: int = 7) -> list[list[int]]:
    """A TU matrix: a reduced incidence matrix or ``[I | -D]`` for a network matrix ``D``."""
    if rng.random() < 0.5:
        G = random_connected_graph(rng, rng.randint(2, vertices), rng.randint(2, edges))
        return [list(r) for r in incidence_matrix(G, drop=0)]
    G = random_connected_graph(rng, rng.randint(3, vertices), rng.randint(3, edges))
    D, _, _ = cc.standardize(cc.Configuration.from_matrix(incidence_matrix(G, drop=0)))
    r = len(D)
    return [[int(i == j) for j in range(r)] + [-int(v) for v in D[i]] for i in range(r)]


# ---------------------------------------------------------------- potential problems


def gen_mcipp(rng: random.Random, n: int | None = None, k: int | None = None, delta: int | None = None,
              td: str = "none", infeasible_rate: float = 0.1) -> InstanceFile:
    """Potential problem on a 2-connected graph with a planted feasible potential."""
    n = n if n is not None else rng.randint(3, 8)
    k = k if k is not None else rng.choice((1, 1, 2))
    delta = delta if delta is not None else rng.choice((1, 2))
    for _ in range(REJECTION_CAP):
        G = random_biconnected_graph(rng, n)
        cap = ROOT_CAP.get(f_bound(k, delta), 2)
        roots = sorted(rng.sample(range(G.n), min(G.n, rng.randint(2, max(2, cap)))))
        W = [_zero_sum(rng, rng.sample(roots, rng.randint(2, len(roots))), G.n, 1) for _ in range(k)]
        if any(not any(r) for r in W) or max_docset_weight(G, W) > delta:
            continue
        if len({v for r in W for v, x in enumerate(r) if x}) > cap:
            continue
        p = _zero_sum(rng, list(range(G.n)), G.n, 2)
        y0 = [rng.randint(0, 2) for _ in range(G.n)]
        x0 = tension(G, y0)
        lower = [x - rng.choice((0, 0, 1)) for x in x0]
        upper = [x + rng.choice((0, 1, 1)) for x in x0]
        d = [sum(a * b for a, b in zip(r, y0)) for r in W]
        if rng.random() < infeasible_rate:
            d[0] += rng.choice((-3, 3))
        inst = McippInstance.build(G, p, W, d, lower, upper, delta)
        dec = {"none": None, "trivial": trivial_td(G), "heuristic": heuristic_td(G),
               "separator": separator_td(G) or heuristic_td(G)}[td]
        return InstanceFile("mcipp", inst, G, dec)
    raise CapExceeded("mcipp rejection sampling", REJECTION_CAP, REJECTION_CAP)


# ---------------------------------------------------------------- equality forms


def _random_weights(rng: random.Random, conf: cc.Configuration, n: int, k: int, delta: int,
                    graph: DirectedGraph | None, tries: int = 50):
    cap = ROOT_CAP.get(f_bound(k, delta), 2)
    for _ in range(tries):
        W = []
        for _ in range(k):
            row = [0] * n
            for j in rng.sample(range(n), rng.randint(1, min(3, n))):
                row[j] = rng.choice((-1, 1))
            W.append(row)
        if graph is not None and len(roots_of([vertex_weights(graph, r) for r in W], graph.n)) > cap:
            continue
        if cc.max_circuit_weight(conf, W) <= delta:
            return W
    return None


def _planted_point(rng: random.Random, conf: cc.Configuration, n: int, b_zero: bool) -> list[int]:
    if not b_zero:
        return [rng.randint(-1, 2) for _ in range(n)]
    x = [0] * n
    circ = list(cc.circuits(conf))
    for _ in range(rng.randint(0, 3)):
        if not circ:
            break
        c = rng.choice(circ)
        x = [a + int(b) for a, b in zip(x, c)]
    return x


def gen_equality(rng: random.Random, kind: str = "mcicp", n: int | None = None, k: int | None = None,
                 delta: int | None = None, infeasible_rate: float = 0.1) -> InstanceFile:
    """``mcicp`` uses incidence or tension constraints with ``b = 0``; ``ip_equality`` plants a nonzero ``b``."""
    k = k if k is not None else rng.choice((1, 1, 2))
    delta = delta if delta is not None else rng.choice((1, 2))
    for _ in range(REJECTION_CAP):
        graph = None
        style = rng.choice(("incidence", "tension"))
        nv = rng.randint(3, 5)
        m = n if n is not None else rng.randint(nv, min(10, nv * (nv - 1) // 2))
        G = random_connected_graph(rng, nv, m)
        if style == "incidence":
            A = incidence_matrix(G, drop=0)
        else:
            A = cycle_matrix(G)
            graph = G if kind == "mcicp" else None
        n_cols = G.m
        if not A:
            A = [[0] * n_cols]
        conf = cc.Configuration.from_matrix(A, m=len(A))
        W = _random_weights(rng, conf, n_cols, k, delta, graph)
        if W is not None:
            break
    else:
        raise CapExceeded("weight row rejection sampling", REJECTION_CAP, REJECTION_CAP)
    x0 = _planted_point(rng, conf, n_cols, kind == "mcicp")
    b = [sum(a * x for a, x in zip(r, x0)) for r in A]
    p = [rng.randint(-2, 2) for _ in range(n_cols)]
    lower = [x - rng.choice((0, 1, 1)) for x in x0]
    upper = [x + rng.choice((0, 1, 1)) for x in x0]
    d = [sum(a * x for a, x in zip(r, x0)) for r in W]
    if rng.random() < infeasible_rate:
        d[0] += rng.choice((-4, 4))
    inst = EqualityInstance.build(p, A, b, W, d, lower, upper, delta)
    return InstanceFile(kind, inst, graph)


# ---------------------------------------------------------------- general form


def _interval_rows(rng: random.Random, n: int, m: int) -> list[list[int]]:
    rows = []
    for _ in range(m):
        a = rng.randrange(n)
        b = rng.randrange(a, n)
        sign = rng.choice((1, -1))
        rows.append([sign if a <= j <= b else 0 for j in range(n)])
    return rows


def gen_general(rng: random.Random, n: int | None = None, k: int = 1, delta: int | None = None,
                extra_cols: int | None = None) -> InstanceFile:
    """``max p x, Mx <= b`` with interval rows, box rows, ``k`` weight rows and extra columns.

    The whole of ``M`` is rejected unless its largest subdeterminant is at most ``delta``.
    """
    n = n if n is not None else rng.randint(2, 5)
    delta = delta if delta is not None else 2
    extra = extra_cols if extra_cols is not None else rng.randint(0, 1)
    for _ in range(REJECTION_CAP):
        rows = _interval_rows(rng, n, rng.randint(1, 4))
        cols = sorted(rng.sample(range(n), extra))
        for r in rows:
            for j in cols:
                r[j] = rng.choice((-1, 0, 1, 2))
        W = [[rng.choice((-1, 0, 1)) for _ in range(n)] for _ in range(k)]
        if any(not any(r) for r in W):
            continue
        core = rows + W
        if oracle.max_abs_subdeterminant(core) > delta:
            continue
        lo = [rng.randint(-2, 0) for _ in range(n)]
        hi = [rng.randint(0, 2) for _ in range(n)]
        x0 = [rng.randint(a, b) for a, b in zip(lo, hi)]
        M = rows + W
        b = [sum(a * x for a, x in zip(r, x0)) + rng.randint(0, 1) for r in M]
        for j in range(n):
            unit = [0] * n
            unit[j] = 1
            M.append(unit)
            b.append(hi[j])
            M.append([-v for v in unit])
            b.append(-lo[j])
        p = [rng.randint(-3, 3) for _ in range(n)]
        w_rows = tuple(range(len(rows), len(rows) + k))
        inst = GeneralIpInstance(tuple(map(tuple, M)), tuple(b), tuple(p), w_rows, tuple(cols), delta)
        inst.validate()
        return InstanceFile("ip_general", inst)
    raise CapExceeded("general instance rejection sampling", REJECTION_CAP, REJECTION_CAP)


def generate(kind: str, seed: int, **size) -> InstanceFile:
    rng = random.Random(f"{kind}:{seed}")
    if kind == "mcipp":
        return gen_mcipp(rng, **size)
    if kind in ("mcicp", "ip_equality"):
        return gen_equality(rng, kind, **size)
    if kind == "ip_general":
        return gen_general(rng, **size)
    raise ValueError(f"unknown kind {kind!r}")
