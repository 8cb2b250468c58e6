import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nearlytu import configcore as cc
from nearlytu import oracle
from nearlytu import ratcore as rc
from nearlytu import sumdecomp as sd
from nearlytu.cographic import DirectedGraph, incidence_matrix
from nearlytu.errors import ValidationError
from nearlytu.generate import random_biconnected_graph
from nearlytu.proximity import EqualityInstance


def incidence_config(n, edges):
    return cc.Configuration.from_matrix(incidence_matrix(DirectedGraph(n, tuple(edges)), drop=0))


K4 = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
# a 4-cycle is two triangles glued along a deleted chord
TWO_TRIANGLES = [(0, 1), (1, 3), (3, 2), (2, 0)]
# triangles 0-1-2 and 1-3-2 sharing the real edge 1-2
SHARED_EDGE = [(0, 1), (1, 2), (2, 0), (1, 3), (3, 2)]


# ---------------------------------------------------------------- separations


def test_block_diagonal_has_1_separation():
    A = cc.Configuration.from_matrix([[1, 1, 0, 0], [0, 0, 1, 1]])
    sep = sd.find_separation(A, 1)
    assert sep is not None and sep.order == 1
    assert {sep.side1, sep.side2} == {frozenset({0, 1}), frozenset({2, 3})}


def test_k4_is_3_connected():
    A = incidence_config(4, K4)
    assert sd.find_separation(A, 1) is None
    assert sd.find_separation(A, 2) is None


def test_repeated_column_gives_2_separation():
    A = cc.Configuration.from_matrix([[1, 1, 0, 1], [0, 0, 1, 1]])
    sep = sd.find_separation(A, 2)
    assert sep is not None and sep.order == 2
    assert sd.separation_order(A, sep.side1) == 2


def test_separation_order_formula():
    A = incidence_config(4, TWO_TRIANGLES)
    assert sd.separation_order(A, {0, 1}) == A.rank_of([0, 1]) + A.rank_of([2, 3]) - A.rank + 1 == 2


# ---------------------------------------------------------------- decomposition trees


def test_3_connected_gives_single_node():
    tree = sd.build_decomposition_tree(incidence_config(4, K4))
    assert len(tree.pieces) == 1 and not tree.virtual


def test_two_triangles_give_two_nodes():
    A = incidence_config(4, TWO_TRIANGLES)
    tree = sd.build_decomposition_tree(A)
    assert len(tree.pieces) == 2
    assert len(tree.virtual) == 1
    assert all(P.n == 3 for P in tree.pieces.values())
    assert sd.same_kernel(A, sd.tree_kernel_basis(tree))


def test_shared_real_edge_adds_a_parallel_piece():
    A = incidence_config(4, SHARED_EDGE)
    tree = sd.build_decomposition_tree(A)
    assert len(tree.pieces) == 3
    hub = [t for t in tree.pieces if len(tree.neighbours(t)) == 2]
    assert len(hub) == 1 and 1 in tree.pieces[hub[0]].labels
    assert sd.same_kernel(A, sd.tree_kernel_basis(tree))


def test_chain_of_three_pieces():
    A = incidence_config(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)])
    tree = sd.build_decomposition_tree(A)
    assert len(tree.pieces) == 3
    degrees = sorted(len(tree.neighbours(t)) for t in tree.pieces)
    assert degrees == [1, 1, 2]
    assert sd.same_kernel(A, sd.tree_kernel_basis(tree))


def test_tree_rejects_disconnected():
    A = cc.Configuration.from_matrix([[1, 1, 0, 0], [0, 0, 1, 1]])
    with pytest.raises(ValidationError):
        sd.build_decomposition_tree(A)


@given(st.integers(0, 10**6))
@settings(max_examples=30)
def test_recomposition_keeps_kernel(seed):
    rng = random.Random(seed)
    G = random_biconnected_graph(rng, rng.randint(3, 6))
    A = cc.Configuration.from_matrix(incidence_matrix(G, drop=0))
    tree = sd.build_decomposition_tree(A)
    assert sd.same_kernel(A, sd.tree_kernel_basis(tree))
    for P in tree.pieces.values():
        assert P.n >= 3
        assert cc.is_regular(P)
        assert sd.find_separation(P, 2) is None


def _solve_multiplier(cols, x, vbar):
    """The scalar ``a`` with ``sum x_l col_l = a * vbar``, or None."""
    total = [sum((x[l] * cols[l][i] for l in x), Fraction(0)) for i in range(len(vbar))]
    piv = next(i for i, v in enumerate(vbar) if v)
    a = total[piv] / vbar[piv]
    return a if all(t == a * v for t, v in zip(total, vbar)) else None


@given(st.integers(0, 10**6))
@settings(max_examples=30)
def test_circuits_split_across_2_sums(seed):
    rng = random.Random(seed)
    G = random_biconnected_graph(rng, rng.randint(4, 6))
    A = cc.Configuration.from_matrix(incidence_matrix(G, drop=0))
    sep = sd.find_separation(A, 2)
    if sep is None or sep.order != 2:
        return
    P1, P2, vbar = sd.split_two_sum(A, sep, 100)
    cols = {l: A.column(l) for l in A.labels}
    for c in cc.circuits(A):
        x1 = {l: c[A.index(l)] for l in sep.side1}
        x2 = {l: c[A.index(l)] for l in sep.side2}
        phi = _solve_multiplier(cols, x1, vbar)
        assert phi is not None and phi.denominator == 1
        assert _solve_multiplier(cols, x2, vbar) == -phi


# ---------------------------------------------------------------- 1-sum


def test_1sum_single_component():
    table = {(0,): (0, {0: 0}), (1,): (5, {0: 1}), (2,): (3, {0: 2})}
    assert sd.solve_1sum([table], (1,), 4) == (5, {0: 1})


def test_1sum_two_components_matches_oracle():
    # two separate antiparallel pairs, weights count the flow of the first edge in each pair
    A = [[1, 1, 0, 0], [0, 0, 1, 1]]
    W = [[1, 0, 1, 0]]
    p = [2, -1, 3, -2]
    inst = EqualityInstance.build(p, A, [0, 0], W, [1], [-2] * 4, [2] * 4, 1)
    got = sd.solve_circulation(inst)
    want = oracle.brute_ip(p, A, [0, 0], W, [1], [-2] * 4, [2] * 4)
    assert got is not None and want is not None
    assert got[0] == want.value


def test_1sum_infeasible_target():
    table = {(0,): (0, {0: 0}), (1,): (1, {0: 1})}
    assert sd.solve_1sum([table, table], (3,), 5) is None
    assert sd.solve_1sum([table, table], (2,), 1) is None


# ---------------------------------------------------------------- weights and classification


def test_upper_weight_zero_weights():
    A = incidence_config(4, TWO_TRIANGLES)
    sep = sd.find_separation(A, 2)
    _, _, vbar = sd.split_two_sum(A, sep, 10)
    W = {l: (0,) for l in A.labels}
    assert sd.upper_weight(A, W, sorted(sep.side2), vbar, 1) == (0,)


def test_upper_weight_one_side():
    A = incidence_config(4, TWO_TRIANGLES)
    sep = sd.find_separation(A, 2)
    _, _, vbar = sd.split_two_sum(A, sep, 10)
    far = sorted(sep.side2)
    W = {l: ((1,) if l == far[0] else (0,)) for l in A.labels}
    got = sd.upper_weight(A, W, far, vbar, 1)
    # the far part of a crossing circuit is the path replacing vbar; evaluate it directly
    cols = {l: A.column(l) for l in far}
    alpha = sd.represent(cols, far, vbar)
    assert got == (int(alpha.get(far[0], 0)),)
    assert abs(got[0]) == 1


def test_classify_single_column_piece():
    A = cc.Configuration.from_matrix([[1, 1, 1]])
    assert not cc.is_tame(A, [[0, 1, 2]], 0)
    assert cc.is_tame(A, [[0, 0, 0]], 0)
    assert cc.is_tame(A, [[5, 3, 3]], 0)


def test_classify_children_zero_weights():
    A = incidence_config(4, TWO_TRIANGLES)
    root = A.n
    config = A.concat(cc.Configuration((root,), (A.columns[0],), A.m))
    labels = config.labels
    inst = sd.RootedMcicpInstance(config, {l: 0 for l in labels}, {l: (0,) for l in labels}, (0,),
                                  {l: (0 if l == root else -1) for l in labels},
                                  {l: (0 if l == root else 1) for l in labels}, root, 0, 1)
    tree = sd.build_decomposition_tree(config)
    rt = sd.root_tree(tree, root)
    for t in rt.postorder:
        assert all(sd.classify_children(inst, rt, t).values())


# ---------------------------------------------------------------- gadgets


VBAR = (Fraction(1), Fraction(-1))


def _gadget_direct(g, f, size):
    """Solve the gadget as a circulation instance, independent of ``Gadget.value``."""
    labels = g.config.labels
    p = {g.root: 0}
    lower, upper = {}, {}
    for lab, _, profit, (lo, hi) in g.copies:
        p[lab], lower[lab], upper[lab] = profit, lo, hi
    out = {}
    for phi in range(-size, size + 1):
        lower[g.root] = upper[g.root] = phi
        inst = sd.RootedMcicpInstance(g.config, p, {l: () for l in labels}, (), dict(lower), dict(upper),
                                      g.root, phi, 1)
        res = sd.solve_rooted_direct(inst)
        out[phi] = None if res is None else res[0]
    return out


def test_gadget_only_zero():
    g = sd.build_gadget(VBAR, {0: 0}, 3)
    assert all(hi == 0 for _, _, _, (_, hi) in g.copies)
    assert _gadget_direct(g, {0: 0}, 3) == {phi: (0 if phi == 0 else None) for phi in range(-3, 4)}
    sd.verify_gadget(g, {0: 0}, 3)


def test_gadget_minus_abs():
    f = {phi: -abs(phi) for phi in range(-3, 4)}
    g = sd.build_gadget(VBAR, f, 3)
    assert {profit for _, _, profit, _ in g.copies} == {-1}
    assert _gadget_direct(g, f, 3) == f


@pytest.mark.parametrize("c", [-2, 0, 3])
def test_gadget_linear(c):
    f = {phi: c * phi for phi in range(-2, 3)}
    g = sd.build_gadget(VBAR, f, 2)
    assert {profit for _, s, profit, _ in g.copies if s > 0} == {c}
    assert {profit for _, s, profit, _ in g.copies if s < 0} == {-c}
    assert _gadget_direct(g, f, 2) == f


def test_gadget_rejects_bad_functions():
    with pytest.raises(ValidationError):
        sd.build_gadget(VBAR, {0: 1}, 1)
    with pytest.raises(ValidationError):
        sd.build_gadget(VBAR, {-1: -5, 0: 0, 1: 5, 2: 20}, 2)
    with pytest.raises(ValidationError):
        sd.build_gadget(VBAR, {-1: 0, 0: 0, 2: 0}, 2)


@given(st.integers(0, 10**6))
@settings(max_examples=25)
def test_gadget_matches_subtree_solve(seed):
    rng = random.Random(seed)
    G = random_biconnected_graph(rng, rng.randint(3, 5))
    A = cc.Configuration.from_matrix(incidence_matrix(G, drop=0))
    root = A.n
    config = A.concat(cc.Configuration((root,), (A.columns[0],), A.m))
    labels = config.labels
    p = {l: (0 if l == root else rng.randint(-3, 3)) for l in labels}
    lower = {l: rng.randint(-2, 0) for l in labels}
    upper = {l: rng.randint(0, 2) for l in labels}
    size = 3
    f = {}
    for phi in range(-size, size + 1):
        lower[root] = upper[root] = phi
        inst = sd.RootedMcicpInstance(config, p, {l: () for l in labels}, (), dict(lower), dict(upper), root, phi, 1)
        res = sd.solve_rooted_direct(inst)
        if res is not None:
            f[phi] = res[0]
    # value functions of circulation problems are concave with f(0) = 0 when 0 is feasible and optimal
    if f.get(0) != 0:
        return
    g = sd.build_gadget(A.columns[0], f, size, root_label=1000)
    assert _gadget_direct(g, f, size) == {phi: f.get(phi) for phi in range(-size, size + 1)}


# ---------------------------------------------------------------- DP vs oracle


def _rooted(A, p, W, lower, upper, root_flow=0, delta=1):
    inst = EqualityInstance.build(p, A, [0] * len(A), W, [0] * len(W), lower, upper, delta)
    return sd.to_rooted(inst)


def test_single_node_tree_equals_direct():
    A = incidence_matrix(DirectedGraph(4, tuple(K4)), drop=0)
    rooted = _rooted(A, [1, -1, 2, 0, 1, -2], [[0] * 6], [-1] * 6, [1] * 6)
    tree = sd.DecompositionTree({0: rooted.config}, {}, {}, rooted.config.labels)
    got = sd.solve_2sum_dp(rooted, tree, f=3)
    want = sd.solve_rooted_direct(rooted, {l: (-3, 3) for l in rooted.config.labels})
    assert got[0] == want[0]
    assert got[1] == {l: v for l, v in want[1].items() if l != rooted.root}


def test_two_triangles_match_oracle():
    A = incidence_matrix(DirectedGraph(4, tuple(SHARED_EDGE)), drop=0)
    p, W, lower, upper = [2, -1, 1, 1, 1], [[1, 0, 0, 1, 0]], [-1] * 5, [2] * 5
    for d in (-1, 0, 1, 2):
        inst = EqualityInstance.build(p, A, [0] * 3, W, [d], lower, upper, 1)
        got = sd.solve_circulation(inst)
        want = oracle.brute_ip(p, A, [0] * 3, W, [d], lower, upper)
        assert (got is None) == (want is None)
        if want is not None:
            assert got[0] == want.value
            assert inst.is_feasible(got[1])


def test_dp_recovers_flow_two_across_the_virtual_vector():
    # outer cycle 0-1-3-2-0 must carry 2 units; the shared edge 1-2 is weighted and forced to 0
    edges = [(0, 1), (1, 2), (2, 0), (1, 3), (3, 2)]
    A = incidence_matrix(DirectedGraph(4, tuple(edges)), drop=0)
    p = [1, -1, 1, 1, 1]
    W = [[0, 1, 0, 0, 0]]
    lower, upper = [0, -2, 0, 0, 0], [2, 2, 2, 2, 2]
    inst = EqualityInstance.build(p, A, [0] * 3, W, [0], lower, upper, 1)
    stats = sd.DpStats()
    got = sd.solve_circulation(inst, stats)
    want = oracle.brute_ip(p, A, [0] * 3, W, [0], lower, upper, collect=True)
    assert got is not None and got[0] == want.value == 8
    assert got[1] == (2, 0, 2, 2, 2)
    assert list(want.optima) == [(2, 0, 2, 2, 2)]
    assert stats.nodes >= 2


def _random_circulation(rng):
    while True:
        G = random_biconnected_graph(rng, rng.randint(3, 6))
        if G.m > 9:
            continue
        A = incidence_matrix(G, drop=0)
        n = G.m
        k = rng.choice((1, 2))
        W = [[rng.choice((0, 0, 1, -1)) for _ in range(n)] for _ in range(k)]
        delta = cc.max_circuit_weight(cc.Configuration.from_matrix(A), W)
        if delta not in (1, 2) or (k == 2 and delta == 2):
            continue
        lower = [rng.choice((-1, 0, 0)) for _ in range(n)]
        upper = [rng.choice((0, 1, 1, 2)) for _ in range(n)]
        p = [rng.randint(-3, 3) for _ in range(n)]
        d = [rng.randint(-2, 2) for _ in range(k)]
        return EqualityInstance.build(p, A, [0] * len(A), W, d, lower, upper, delta)


def test_dp_matches_oracle_on_random_instances():
    rng = random.Random(7)
    wild = 0
    for _ in range(100):
        inst = _random_circulation(rng)
        stats = sd.DpStats()
        got = sd.solve_circulation(inst, stats)
        want = oracle.brute_ip(inst.p, inst.A, inst.b, inst.W, inst.d, inst.lower, inst.upper)
        assert (got is None) == (want is None)
        if want is not None:
            assert got[0] == want.value
        wild += stats.wild
    assert wild > 0


def test_1sum_matches_oracle_on_random_instances():
    rng = random.Random(11)
    for _ in range(100):
        parts = [_random_circulation(rng) for _ in range(2)]
        n1, n2 = parts[0].n, parts[1].n
        k = min(parts[0].k, parts[1].k)
        A = [list(r) + [0] * n2 for r in parts[0].A] + [[0] * n1 + list(r) for r in parts[1].A]
        W = [list(parts[0].W[i]) + list(parts[1].W[i]) for i in range(k)]
        delta = cc.max_circuit_weight(cc.Configuration.from_matrix(A), W)
        if delta == 0:
            continue
        d = [rng.randint(-2, 2) for _ in range(k)]
        lower = list(parts[0].lower) + list(parts[1].lower)
        upper = list(parts[0].upper) + list(parts[1].upper)
        p = list(parts[0].p) + list(parts[1].p)
        inst = EqualityInstance.build(p, A, [0] * len(A), W, d, lower, upper, delta)
        trace = {}
        got = sd.solve_circulation(inst, trace=trace)
        if got is not None:
            assert trace["components"] >= 2
        want = oracle.brute_ip(p, A, [0] * len(A), W, d, lower, upper)
        assert (got is None) == (want is None)
        if want is not None:
            assert got[0] == want.value


def test_wild_children_crossed_by_few_circuits():
    rng = random.Random(3)
    checked = 0
    for _ in range(60):
        inst = _random_circulation(rng)
        rooted = sd.to_rooted(inst)
        if not cc.is_connected(rooted.config):
            continue
        tree = sd.build_decomposition_tree(rooted.config)
        rt = sd.root_tree(tree, rooted.root)
        for t in rt.postorder:
            kinds = sd.classify_children(rooted, rt, t)
            wild = {L for c, L in rt.children[t] if not kinds[c]}
            if not wild:
                continue
            P = tree.pieces[t]
            for c in cc.circuits(P):
                crossed = sum(1 for l, v in zip(P.labels, c) if v and l in wild)
                assert crossed <= 2 * inst.k * inst.delta
                checked += 1
    assert checked > 0


def test_solve_circulation_needs_zero_rhs():
    inst = EqualityInstance.build([1, 1], [[1, -1]], [1], [[1, 0]], [0], [0, 0], [1, 1], 1)
    with pytest.raises(ValidationError):
        sd.solve_circulation(inst)


def test_enumerate_circulations_against_lattice():
    A = incidence_config(3, [(0, 1), (1, 2), (2, 0)])
    got = sorted(sd.enumerate_circulations(A, [(-2, 2)] * 3))
    M = A.matrix()
    want = sorted(x for x in ((a, b, c) for a in range(-2, 3) for b in range(-2, 3) for c in range(-2, 3))
                  if all(sum(r[j] * x[j] for j in range(3)) == 0 for r in M))
    assert got == want
    assert rc.rank(M) == 2
