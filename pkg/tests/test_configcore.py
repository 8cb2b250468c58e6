import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nearlytu import configcore as cc
from nearlytu import oracle
from nearlytu.cographic import incidence_matrix
from nearlytu.errors import CapExceeded, ValidationError
from nearlytu.generate import random_connected_graph, random_tu_matrix


def conf(rows, m=None):
    return cc.Configuration.from_matrix(rows, m=len(rows) if m is None else m)


def as_set(circs):
    return {tuple(int(v) for v in c) for c in circs}


TRIANGLE = [[1, 0, -1], [-1, 1, 0], [0, -1, 1]]


def test_configuration_labels_survive_edits():
    A = cc.Configuration.from_matrix([[1, 2, 3]], labels=[10, 20, 30], m=1)
    B = A.delete([20])
    assert B.labels == (10, 30) and B.column(30) == (3,)
    C = B.concat(cc.Configuration.from_matrix([[4]], labels=[40], m=1))
    assert C.labels == (10, 30, 40)
    with pytest.raises(ValidationError):
        A.concat(A)


def test_circuit_examples():
    assert as_set(cc.circuits(conf([[1, 1, 1]]))) == {
        (1, -1, 0), (-1, 1, 0), (1, 0, -1), (-1, 0, 1), (0, 1, -1), (0, -1, 1)}
    assert cc.circuits(conf([[1, 0], [0, 1]])) == ()
    assert as_set(cc.circuits(conf(TRIANGLE))) == {(1, 1, 1), (-1, -1, -1)}


def test_circuit_cap():
    with pytest.raises(CapExceeded):
        cc.circuits(conf([[1] * 5]), support_cap=4)


def test_tu_examples():
    rng = random.Random(3)
    for _ in range(10):
        G = random_connected_graph(rng, rng.randint(2, 5), rng.randint(1, 8))
        assert cc.is_totally_unimodular(incidence_matrix(G))
    assert not cc.is_totally_unimodular([[1, 1], [1, 2]])
    assert not cc.is_totally_unimodular([[1, 1], [-1, 1]])
    assert cc.find_non_tu_submatrix([[1, 1], [-1, 1]]) == ((0, 1), (0, 1))
    with pytest.raises(CapExceeded):
        cc.is_totally_unimodular([[1] * 9 for _ in range(9)])


def test_delta_modular_examples():
    A = conf([[1, 1]])
    assert cc.is_totally_delta_modular_stacked(A, [1, 2], 2)
    assert not cc.is_totally_delta_modular_stacked(A, [1, 2], 1)
    for delta in (1, 2, 3):
        assert cc.is_totally_delta_modular_stacked(A, [0, 0], delta)
    I2 = conf([[1, 0], [0, 1]])
    assert cc.is_totally_delta_modular_stacked(I2, [1, -1], 1)
    assert not cc.is_totally_delta_modular_stacked(I2, [2, 0], 1)


def test_max_circuit_weight_examples():
    A = conf([[1, 1, 1]])
    assert cc.max_circuit_weight(A, [[1, 0, 0]]) == 1
    assert cc.max_circuit_weight(A, [[3, 0, 0]]) == 3
    assert cc.max_circuit_weight(conf([[1, 0], [0, 1]]), [[5, 5]]) == 0


def test_conformal_examples():
    A = conf([[1, 1, 1]])
    terms = cc.conformal_decompose(A, [0, 0, 0], [2, -1, -1])
    assert sorted((tuple(int(v) for v in c), lam) for c, lam in terms) == [((1, -1, 0), 1), ((1, 0, -1), 1)]
    assert cc.conformal_decompose(A, [1, 0, -1], [1, 0, -1]) == []
    (only,) = cc.conformal_decompose(A, [0, 0, 0], [3, 0, -3])
    assert tuple(only[0]) == (1, 0, -1) and only[1] == 3


def test_standardize_examples():
    A = conf([[2, 1, 0], [3, 0, 1]])
    D, perm, basis = cc.standardize(A)
    assert perm == [0, 1, 2] and basis == [1, 2] and D == ((2,), (3,))
    # [I | 0]: the identity block moves behind the rest
    D, perm, basis = cc.standardize(conf([[1, 0, 0], [0, 1, 0]]))
    assert perm == [2, 0, 1] and basis == [0, 1] and D == ((0,), (0,))
    # rank-deficient: a repeated row disappears and the kernel is preserved
    C = conf([[1, 1, 0], [2, 2, 0], [0, 1, 1]])
    D, perm, basis = cc.standardize(C)
    assert len(D) == 2
    std = [list(D[i]) + [int(i == j) for j in range(2)] for i in range(2)]
    std_cols = [[r[perm.index(j)] for j in range(3)] for r in std]
    from nearlytu import ratcore as rc
    ker1 = rc.kernel_basis([list(r) for r in C.matrix()], 3)
    ker2 = rc.kernel_basis(std_cols, 3)
    assert rc.rank([list(v) for v in ker1 + ker2]) == 1


def test_cocircuit_examples():
    assert as_set(cc.cocircuits(conf([[1, 1]]))) == {(1, 1), (-1, -1)}
    assert as_set(cc.cocircuits(conf([[1, 0], [0, 1]]))) == {(1, 0), (-1, 0), (0, 1), (0, -1)}
    # triangle cocircuits are the three vertex cuts (edge j = (tail, head))
    tri = conf(TRIANGLE)
    cuts = {tuple(row) for row in TRIANGLE} | {tuple(-v for v in row) for row in TRIANGLE}
    assert as_set(cc.cocircuits(tri)) == cuts


def test_zero_on_basis_examples():
    A = conf([[1, 1]])
    w2 = cc.zero_on_basis(A, [1], [0, 5])
    assert w2[1] == 0 and w2[0] * 1 + w2[1] * -1 == -5
    assert cc.zero_on_basis(A, [1], [3, 0]) == (3, 0)
    assert cc.zero_on_basis(A, [1], [0, 0]) == (0, 0)
    with pytest.raises(ValidationError):
        cc.zero_on_basis(conf([[1, 1, 0], [0, 0, 1]]), [0, 1], [1, 1, 1])


def test_is_tame_examples():
    assert cc.is_tame(conf([[1, 1, 1]]), [[0, 0, 0]], 0)
    assert not cc.is_tame(conf([[1, 1, 1]]), [[0, 1, 2]], 0)
    assert cc.is_tame(conf([[1, 1]]), [[4, -7]], 0)


# ---------------------------------------------------------------- properties


@given(st.randoms(use_true_random=False))
def test_tu_circuits_are_ternary(r):
    M = random_tu_matrix(r)
    for c in cc.circuits(conf(M)):
        assert all(v in (-1, 0, 1) for v in c)


@given(st.randoms(use_true_random=False), st.integers(1, 5))
def test_delta_modularity_matches_subdeterminants(r, delta):
    M = random_tu_matrix(r)
    n = len(M[0])
    if n > 6:
        M = [row[:6] for row in M]
        n = 6
    w = [r.randint(-2, 2) for _ in range(n)]
    got = cc.is_totally_delta_modular_stacked(conf(M), w, delta)
    assert got == (oracle.max_abs_subdeterminant(M + [w]) <= delta)


@given(st.randoms(use_true_random=False))
def test_circuits_orthogonal_to_cocircuits(r):
    A = conf(random_tu_matrix(r))
    for c in cc.circuits(A):
        for d in cc.cocircuits(A):
            assert sum(a * b for a, b in zip(c, d)) == 0


@given(st.randoms(use_true_random=False))
def test_zero_on_basis_preserves_weights(r):
    A = conf(random_tu_matrix(r))
    w = [r.randint(-3, 3) for _ in range(A.n)]
    basis = cc.default_basis(A)
    w2 = cc.zero_on_basis(A, [A.labels[j] for j in basis], w)
    assert all(w2[j] == 0 for j in basis)
    for c in cc.circuits(A):
        assert sum(a * b for a, b in zip(w, c)) == sum(a * b for a, b in zip(w2, c))


@given(st.randoms(use_true_random=False))
def test_circuits_match_oracle(r):
    M = random_tu_matrix(r)
    assert as_set(cc.circuits(conf(M))) == oracle.brute_circuits(M, len(M[0]))


@given(st.randoms(use_true_random=False))
def test_conformal_decomposition_properties(r):
    M = random_tu_matrix(r)
    A = conf(M)
    n = A.n
    lo = [r.randint(-2, 0) for _ in range(n)]
    hi = [r.randint(0, 2) for _ in range(n)]
    circ = list(cc.circuits(A))
    x = [0] * n
    for _ in range(r.randint(0, 4)):
        if circ:
            c = r.choice(circ)
            y = [a + int(b) for a, b in zip(x, c)]
            if all(l <= v <= h for l, v, h in zip(lo, y, hi)):
                x = y
    x2 = [0] * n
    terms = cc.conformal_decompose(A, x2, x, lo, hi)
    total = list(x2)
    for c, lam in terms:
        assert lam > 0 and lam.denominator == 1
        total = [a + lam * b for a, b in zip(total, c)]
    assert total == x
    assert len(terms) <= n - A.rank
    for c1, _ in terms:
        for c2, _ in terms:
            assert cc.conformal(c1, c2)
    # partial sums stay inside the box
    for mask in range(1 << len(terms)):
        pt = [Fraction(v) for v in x2]
        for i, (c, lam) in enumerate(terms):
            if mask >> i & 1:
                pt = [a + lam * b for a, b in zip(pt, c)]
        assert all(l <= v <= h for l, v, h in zip(lo, pt, hi))
