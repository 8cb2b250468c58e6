import dataclasses
import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nearlytu import oracle
from nearlytu.errors import CapExceeded, InfiniteBoundError, ValidationError
from nearlytu.generate import generate
from nearlytu.pipeline import INFEASIBLE, solve_file


# ---------------------------------------------------------------- lattice scans


def test_brute_ip_small():
    res = oracle.brute_ip([1, 1], [[1, -1]], [0], [], [], [0, 0], [2, 2])
    assert res.value == 4 and res.x == (2, 2)


def test_brute_ip_lex_smallest_optimum_and_collect():
    res = oracle.brute_ip([0, 0], [[1, -1]], [0], [], [], [0, 0], [2, 2], collect=True)
    assert res.x == (0, 0)
    assert list(res.optima) == [(0, 0), (1, 1), (2, 2)]


def test_brute_ip_infeasible():
    assert oracle.brute_ip([1], [[2]], [1], [], [], [-3], [3]) is None


def test_brute_ip_needs_finite_bounds():
    with pytest.raises(InfiniteBoundError):
        oracle.brute_ip([1], [], [], [], [], [None], [3])


def test_brute_ip_budget():
    with pytest.raises(CapExceeded):
        oracle.brute_ip([1] * 4, [], [], [], [], [0] * 4, [9] * 4, oracle.BruteBudget(lattice=1000))


def test_budget_must_be_positive():
    with pytest.raises(ValidationError):
        oracle.BruteBudget(lattice=0)


@given(st.integers(0, 10**6))
@settings(max_examples=40)
def test_brute_ip_matches_itertools(seed):
    rng = random.Random(seed)
    n = rng.randint(1, 4)
    A = [[rng.randint(-2, 2) for _ in range(n)] for _ in range(rng.randint(0, 2))]
    lo = [rng.randint(-2, 0) for _ in range(n)]
    hi = [rng.randint(0, 2) for _ in range(n)]
    x0 = [rng.randint(a, b) for a, b in zip(lo, hi)]
    b = [sum(a * x for a, x in zip(r, x0)) + rng.randint(0, 1) for r in A]
    p = [rng.randint(-3, 3) for _ in range(n)]
    best = None
    for x in itertools.product(*(range(a, c + 1) for a, c in zip(lo, hi))):
        if all(sum(a * v for a, v in zip(r, x)) == rhs for r, rhs in zip(A, b)):
            val = sum(a * v for a, v in zip(p, x))
            if best is None or val > best[0]:
                best = (val, x)
    got = oracle.brute_ip(p, A, b, [], [], lo, hi)
    assert (got is None) == (best is None)
    if best is not None:
        assert (got.value, got.x) == best


def test_brute_ineq_and_box():
    M = [[1, 1], [1, 0], [-1, 0], [0, 1], [0, -1]]
    b = [3, 2, 0, 2, 0]
    assert oracle.box_from_rows(M, b) == ([0, 0], [2, 2])
    res = oracle.brute_ineq([2, 1], M, b, [0, 0], [2, 2])
    assert res.value == 5 and res.x == (2, 1)


# ---------------------------------------------------------------- determinants and circuits


def test_subdeterminant_examples():
    assert oracle.max_abs_subdeterminant([[1, 0], [0, 1]]) == 1
    assert oracle.max_abs_subdeterminant([[1, 1], [-1, 1]]) == 2
    assert oracle.max_abs_subdeterminant([[3]]) == 3
    assert oracle.max_abs_subdeterminant([[0, 0]]) == 0


@given(st.integers(0, 10**6))
@settings(max_examples=40)
def test_subdeterminants_match_numpy(seed):
    rng = random.Random(seed)
    m, n = rng.randint(1, 4), rng.randint(1, 4)
    M = [[rng.randint(-2, 2) for _ in range(n)] for _ in range(m)]
    want = 0
    for s in range(1, min(m, n) + 1):
        for R in itertools.combinations(range(m), s):
            for C in itertools.combinations(range(n), s):
                want = max(want, abs(round(np.linalg.det(np.array([[M[i][j] for j in C] for i in R], float)))))
    assert oracle.max_abs_subdeterminant(M) == want


def test_subdeterminant_caps():
    with pytest.raises(CapExceeded):
        oracle.max_abs_subdeterminant([[1] * 11] * 11)
    with pytest.raises(CapExceeded):
        oracle.max_abs_subdeterminant([[1] * 6] * 6, budget=oracle.BruteBudget(submatrices=10))


def test_brute_circuits_single_row():
    got = oracle.brute_circuits([[1, 1, 1]])
    want = {(1, -1, 0), (1, 0, -1), (0, 1, -1)}
    assert got == want | {tuple(-x for x in c) for c in want}


def test_brute_circuits_zero_column_and_weights():
    assert oracle.brute_circuits([[0, 1]]) == {(1, 0), (-1, 0)}
    assert oracle.max_circuit_weight([[1, 1, 1]], [[0, 1, 2]]) == 2


# ---------------------------------------------------------------- graphs


def test_brute_docsets_path_and_cut():
    assert oracle.brute_docsets(3, [(0, 1), (1, 2)]) == [frozenset({0}), frozenset({2}), frozenset({0, 1}),
                                                        frozenset({1, 2})]
    assert oracle.cut_indicator([(0, 1), (1, 2)], {1}) == (-1, 1)


def test_brute_beta():
    assert oracle.brute_beta(3, [(0, 1), (1, 2), (2, 0)], [1, -1, 0]) == 1


def test_check_rooted_model_reports_issues():
    edges = [(0, 2), (1, 2), (0, 3), (1, 3)]
    assert oracle.check_rooted_model(4, edges, [2, 3], [{0}, {1}], [{2}, {3}]) == []
    issues = oracle.check_rooted_model(4, edges, [2], [{0}, {1}], [{2}, {3}])
    assert any("no root" in s for s in issues)
    issues = oracle.check_rooted_model(4, edges, [2, 3], [{0}, {0, 1}], [{2}, {3}])
    assert any("overlap" in s for s in issues)


def test_brute_mcipp_triangle():
    res = oracle.brute_mcipp(3, [(0, 1), (1, 2), (2, 0)], [1, -1, 0], [[1, -1, 0]], [1], [-1] * 3, [1] * 3)
    assert res.value == 1 and res.x == (0, -1, -1)


def test_brute_mcipp_negative_cycle():
    assert oracle.brute_mcipp(2, [(0, 1), (1, 0)], [0, 0], [], [], [1, 1], [2, 2]) is None


def test_brute_docset_sum():
    edges = [(0, 1), (1, 2), (2, 0)]
    got = oracle.brute_docset_sum(3, edges, [2, 1, 0], 2)
    assert sorted(map(sorted, got)) == [[0], [0, 1]]
    assert oracle.brute_docset_sum(3, edges, [2, 1, 0], 1) is None
    assert oracle.brute_docset_sum(3, edges, [1, 1, 1], 1) is None


# ---------------------------------------------------------------- pipeline verification


@pytest.mark.parametrize("kind", ["ip_general", "ip_equality", "mcicp", "mcipp"])
def test_verify_pipeline_passes(kind):
    for seed in range(5):
        f = generate(kind, seed)
        rep = oracle.verify_pipeline(f, solve_file(f))
        assert rep.status == oracle.PASS, rep.to_dict()
        assert rep.checks


def _feasible_file(kind):
    for seed in range(50):
        f = generate(kind, seed)
        res = solve_file(f)
        if res.status == "optimal":
            return f, res
    raise AssertionError("no feasible instance")


@pytest.mark.parametrize("kind", ["ip_general", "mcicp", "mcipp"])
def test_verify_pipeline_catches_wrong_value(kind):
    f, res = _feasible_file(kind)
    bad = dataclasses.replace(res, value=res.value + 1)
    rep = oracle.verify_pipeline(f, bad)
    assert rep.status == oracle.FAIL
    assert rep.witness is not None and rep.oracle_value == res.value


def test_verify_pipeline_catches_wrong_status():
    f, res = _feasible_file("ip_equality")
    bad = dataclasses.replace(res, status=INFEASIBLE, value=None, x=None)
    rep = oracle.verify_pipeline(f, bad)
    assert rep.status == oracle.FAIL and rep.witness is not None


def test_verify_pipeline_unverified_on_budget():
    f, res = _feasible_file("mcicp")
    rep = oracle.verify_pipeline(f, res, oracle.BruteBudget(lattice=2))
    assert rep.status == oracle.UNVERIFIED and "lattice" in rep.reason


def test_brute_ip_unit_example():
    res = oracle.brute_ip([1, 0], [[1, 1]], [1], [], [], [0, 0], [1, 1])
    assert res.value == 1 and res.x == (1, 0)


def test_subdeterminant_mixed_example():
    assert oracle.max_abs_subdeterminant([[1, 1], [1, 2]]) == 2


def test_triangle_potential_problem_on_a_box():
    # the same instance scanned directly over y in [0, f]^3 with f = 3
    edges = [(0, 1), (1, 2), (2, 0)]
    rows, rhs = [], []
    for a, b in edges:
        r = [0, 0, 0]
        r[a], r[b] = 1, -1
        rows += [r, [-x for x in r]]
        rhs += [1, 1]
    res = oracle.brute_ineq([1, -1, 0], rows + [[1, -1, 0], [-1, 1, 0]], rhs + [1, -1], [0] * 3, [3] * 3)
    assert res.value == 1


@given(st.integers(0, 10**6))
@settings(max_examples=40)
def test_brute_ip_order_independent(seed):
    rng = random.Random(seed)
    n = rng.randint(2, 4)
    A = [[rng.randint(-1, 1) for _ in range(n)]]
    W = [[rng.randint(-1, 1) for _ in range(n)]]
    lo, hi = [-1] * n, [2] * n
    x0 = [rng.randint(-1, 2) for _ in range(n)]
    b = [sum(a * x for a, x in zip(A[0], x0))]
    d = [sum(a * x for a, x in zip(W[0], x0))]
    p = [rng.randint(-3, 3) for _ in range(n)]
    perm = list(range(n))
    rng.shuffle(perm)
    res = oracle.brute_ip(p, A, b, W, d, lo, hi)
    pres = oracle.brute_ip([p[j] for j in perm], [[A[0][j] for j in perm]], b, [[W[0][j] for j in perm]], d,
                           lo, hi)
    assert res.value == pres.value
    back = [0] * n
    for i, j in enumerate(perm):
        back[j] = pres.x[i]
    assert sum(a * x for a, x in zip(p, back)) == res.value
