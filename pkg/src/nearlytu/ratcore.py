"""Exact rational linear algebra and a bounded-variable simplex solver.

Everything here works on :class:`fractions.Fraction` (or plain ``int``)
entries.  Matrices are sequences of rows; vectors are sequences.  Results are
returned as tuples so they can be hashed and cached by callers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering
from math import gcd, lcm
from typing import Iterable, Sequence, Union

from .errors import DimensionError, InfeasibleError, InfiniteBoundError, ValidationError

Rational = Fraction
Vector = tuple[Fraction, ...]
Matrix = tuple[Vector, ...]


@total_ordering
class Infinity:
    """Signed infinity that compares totally with rationals."""

    __slots__ = ("sign",)

    def __init__(self, sign: int) -> None:
        self.sign = 1 if sign > 0 else -1

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Infinity) and other.sign == self.sign

    def __lt__(self, other: object) -> bool:
        if isinstance(other, Infinity):
            return self.sign < other.sign
        return self.sign < 0

    def __neg__(self) -> "Infinity":
        return NEG_INF if self.sign > 0 else POS_INF

    def __hash__(self) -> int:
        return hash(("inf", self.sign))

    def __repr__(self) -> str:
        return "inf" if self.sign > 0 else "-inf"


POS_INF = Infinity(1)
NEG_INF = Infinity(-1)

ExtendedBound = Union[Fraction, int, Infinity]


def is_finite(bound: ExtendedBound) -> bool:
    return not isinstance(bound, Infinity)


def to_rational(value: object) -> Fraction:
    """Convert ints, Fractions and ``"p/q"`` strings; floats are refused."""
    if isinstance(value, bool):
        raise ValidationError(f"boolean is not a rational: {value!r}")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise ValidationError(f"cannot read {value!r} as an exact rational")


def to_vector(values: Iterable[object]) -> Vector:
    return tuple(to_rational(v) for v in values)


def to_matrix(rows: Iterable[Iterable[object]]) -> Matrix:
    out = tuple(to_vector(r) for r in rows)
    if out and len({len(r) for r in out}) != 1:
        raise DimensionError("ragged matrix")
    return out


def ncols(M: Sequence[Sequence[object]], default: int = 0) -> int:
    return len(M[0]) if len(M) else default


def transpose(M: Sequence[Sequence[Fraction]], n: int | None = None) -> Matrix:
    if not len(M):
        return tuple(() for _ in range(n or 0))
    return tuple(tuple(col) for col in zip(*M))


def mat_vec(M: Sequence[Sequence[Fraction]], x: Sequence[Fraction]) -> Vector:
    return tuple(sum((a * b for a, b in zip(row, x)), Fraction(0)) for row in M)


def dot(a: Sequence[Fraction], b: Sequence[Fraction]) -> Fraction:
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


def _integer_row(row: Sequence[Fraction]) -> tuple[list[int], int]:
    """Scale a rational row to integers; returns the row and the multiplier."""
    scale = 1
    for v in row:
        scale = lcm(scale, Fraction(v).denominator)
    return [int(Fraction(v) * scale) for v in row], scale


def _bareiss(rows: list[list[int]]) -> tuple[list[list[int]], list[int], int]:
    """Fraction-free row echelon form.

    Returns the reduced rows, pivot columns and the sign of the row
    permutation applied (needed by the determinant).
    """
    a = [list(r) for r in rows]
    m = len(a)
    n = len(a[0]) if m else 0
    pivots: list[int] = []
    sign = 1
    prev = 1
    r = 0
    for c in range(n):
        if r == m:
            break
        p = next((i for i in range(r, m) if a[i][c] != 0), None)
        if p is None:
            continue
        if p != r:
            a[r], a[p] = a[p], a[r]
            sign = -sign
        piv = a[r][c]
        for i in range(r + 1, m):
            f = a[i][c]
            row_i = a[i]
            row_r = a[r]
            for j in range(c, n):
                row_i[j] = (piv * row_i[j] - f * row_r[j]) // prev
        prev = piv
        pivots.append(c)
        r += 1
    return a, pivots, sign


def rank(M: Sequence[Sequence[object]]) -> int:
    """Exact rank by fraction-free elimination."""
    rows = [_integer_row(to_vector(r))[0] for r in M]
    if not rows or not rows[0]:
        return 0
    return len(_bareiss(rows)[1])


def determinant(M: Sequence[Sequence[object]]) -> Fraction:
    """Exact determinant of a square matrix (Bareiss)."""
    n = len(M)
    if any(len(r) != n for r in M):
        raise DimensionError("determinant needs a square matrix")
    if n == 0:
        return Fraction(1)
    scaled = [_integer_row(to_vector(r)) for r in M]
    rows = [r for r, _ in scaled]
    denom = 1
    for _, s in scaled:
        denom *= s
    a, pivots, sign = _bareiss(rows)
    if len(pivots) < n:
        return Fraction(0)
    return Fraction(sign * a[n - 1][n - 1], denom)


def rref(M: Sequence[Sequence[object]]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form with exact arithmetic; zero rows dropped."""
    a = [list(to_vector(r)) for r in M]
    m = len(a)
    n = len(a[0]) if m else 0
    pivots: list[int] = []
    r = 0
    for c in range(n):
        if r == m:
            break
        p = next((i for i in range(r, m) if a[i][c] != 0), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        inv = 1 / a[r][c]
        a[r] = [v * inv for v in a[r]]
        for i in range(m):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
    return a[:r], pivots


def kernel_basis(M: Sequence[Sequence[object]], n: int | None = None) -> list[Vector]:
    """Basis of ``{x : Mx = 0}``; one vector per free column of the RREF.

    ``n`` gives the column count when ``M`` has no rows.
    """
    if n is None:
        n = ncols(M)
    if not len(M):
        return [tuple(Fraction(int(i == j)) for i in range(n)) for j in range(n)]
    R, pivots = rref(M)
    free = [j for j in range(n) if j not in set(pivots)]
    basis = []
    for f in free:
        v = [Fraction(0)] * n
        v[f] = Fraction(1)
        for row, pc in zip(R, pivots):
            v[pc] = -row[f]
        basis.append(tuple(v))
    return basis


def primitive(v: Sequence[Fraction]) -> tuple[int, ...]:
    """Scale a rational vector by a positive factor to coprime integers."""
    den = 1
    for x in v:
        den = lcm(den, Fraction(x).denominator)
    ints = [int(Fraction(x) * den) for x in v]
    g = 0
    for x in ints:
        g = gcd(g, x)
    if g == 0:
        return tuple(ints)
    return tuple(x // g for x in ints)


# ---------------------------------------------------------------- simplex


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LpOutcome:
    """Result of :func:`lp_solve`.

    ``x``/``value`` are set for optimal outcomes, ``ray`` for unbounded ones.
    """

    status: LpStatus
    x: Vector | None = None
    value: Fraction | None = None
    ray: Vector | None = None

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class _Tableau:
    """Dense bounded-variable tableau: maximize c x, Ax = b, 0 <= x <= ub."""

    def __init__(self, A: list[list[Fraction]], b: list[Fraction], ub: list[Fraction | None]) -> None:
        self.m = len(A)
        self.n = len(ub)
        self.T = [list(r) for r in A]
        self.beta = list(b)
        self.ub = ub
        self.basis: list[int] = []
        self.at_upper: set[int] = set()

    def value_of(self, j: int) -> Fraction:
        if j in self.basic_pos:
            return self.beta[self.basic_pos[j]]
        return self.ub[j] if j in self.at_upper else Fraction(0)  # type: ignore[return-value]

    @property
    def basic_pos(self) -> dict[int, int]:
        return {v: i for i, v in enumerate(self.basis)}

    def pivot(self, r: int, j: int) -> None:
        T = self.T
        piv = T[r][j]
        inv = 1 / piv
        T[r] = [v * inv for v in T[r]]
        row_r = T[r]
        for i in range(self.m):
            if i != r:
                f = T[i][j]
                if f != 0:
                    T[i] = [x - f * y for x, y in zip(T[i], row_r)]
        self.basis[r] = j

    def run(self, c: list[Fraction], allowed: int) -> tuple[str, list[Fraction] | None]:
        """Bland-rule iterations over columns ``< allowed``."""
        while True:
            pos = self.basic_pos
            cb = [c[v] for v in self.basis]
            enter = None
            for j in range(allowed):
                if j in pos:
                    continue
                r_j = c[j] - sum((cb[i] * self.T[i][j] for i in range(self.m) if cb[i] != 0), Fraction(0))
                if r_j > 0 and j not in self.at_upper:
                    enter, s = j, 1
                    break
                if r_j < 0 and j in self.at_upper:
                    enter, s = j, -1
                    break
            if enter is None:
                return "optimal", None
            j = enter
            best: Fraction | None = None
            leave_row: int | None = None
            leave_key: int | None = None
            flip = self.ub[j] is not None
            if flip:
                best = self.ub[j]
                leave_key = j
            for i in range(self.m):
                delta = -s * self.T[i][j]
                if delta < 0:
                    theta = self.beta[i] / (-delta)
                elif delta > 0 and self.ub[self.basis[i]] is not None:
                    theta = (self.ub[self.basis[i]] - self.beta[i]) / delta
                else:
                    continue
                key = self.basis[i]
                if best is None or theta < best or (theta == best and key < leave_key):
                    best, leave_row, leave_key = theta, i, key
            if best is None:
                direction = [Fraction(0)] * self.n
                direction[j] = Fraction(s)
                for i in range(self.m):
                    direction[self.basis[i]] = -s * self.T[i][j]
                return "unbounded", direction
            theta = best
            for i in range(self.m):
                self.beta[i] += -s * self.T[i][j] * theta
            if leave_row is None:
                if s > 0:
                    self.at_upper.add(j)
                else:
                    self.at_upper.discard(j)
                continue
            old = self.basis[leave_row]
            new_val = (self.ub[j] if j in self.at_upper else Fraction(0)) + s * theta
            if self.ub[old] is not None and self.beta[leave_row] == self.ub[old]:
                self.at_upper.add(old)
            else:
                self.at_upper.discard(old)
            self.at_upper.discard(j)
            self.pivot(leave_row, j)
            self.beta[leave_row] = new_val


def _simplex_standard(
    c: list[Fraction], A: list[list[Fraction]], b: list[Fraction], ub: list[Fraction | None]
) -> tuple[LpStatus, list[Fraction] | None, list[Fraction] | None]:
    """Two-phase simplex for max c x, Ax = b, 0 <= x <= ub."""
    m, n = len(A), len(c)
    A = [list(r) for r in A]
    b = list(b)
    for i in range(m):
        if b[i] < 0:
            A[i] = [-v for v in A[i]]
            b[i] = -b[i]
    rows = [A[i] + [Fraction(int(i == k)) for k in range(m)] for i in range(m)]
    tab = _Tableau(rows, b, list(ub) + [None] * m)
    tab.basis = list(range(n, n + m))
    phase1 = [Fraction(0)] * n + [Fraction(-1)] * m
    status, _ = tab.run(phase1, n + m)
    if sum((tab.beta[i] for i in range(m) if tab.basis[i] >= n), Fraction(0)) > 0:
        return LpStatus.INFEASIBLE, None, None
    # drive artificials out of the basis, dropping redundant rows
    r = 0
    while r < tab.m:
        if tab.basis[r] >= n:
            j = next((j for j in range(n) if j not in tab.basic_pos and tab.T[r][j] != 0), None)
            if j is None:
                del tab.T[r]
                del tab.beta[r]
                del tab.basis[r]
                tab.m -= 1
                continue
            val = tab.value_of(j)
            tab.at_upper.discard(j)
            tab.pivot(r, j)
            tab.beta[r] = val
        r += 1
    tab.T = [row[:n] for row in tab.T]
    tab.n = n
    tab.ub = tab.ub[:n]
    status, ray = tab.run(list(c), n)
    if status == "unbounded":
        return LpStatus.UNBOUNDED, None, ray
    x = [tab.value_of(j) for j in range(n)]
    return LpStatus.OPTIMAL, x, None


def lp_solve(
    p: Sequence[object],
    A: Sequence[Sequence[object]],
    b: Sequence[object],
    lower: Sequence[ExtendedBound],
    upper: Sequence[ExtendedBound],
) -> LpOutcome:
    """Maximize ``p x`` subject to ``Ax = b`` and ``lower <= x <= upper``.

    Bounds may be infinite.  An optimal answer is a basic feasible solution,
    hence a vertex whenever the feasible region is pointed.
    """
    n = len(p)
    pv = to_vector(p)
    Am = to_matrix(A)
    bv = to_vector(b)
    if len(Am) != len(bv) or any(len(r) != n for r in Am) or len(lower) != n or len(upper) != n:
        raise DimensionError("lp_solve: inconsistent dimensions")
    # map each variable to nonnegative standard-form columns
    cols: list[list[Fraction]] = []
    c: list[Fraction] = []
    ub: list[Fraction | None] = []
    recover: list[tuple[Fraction, list[tuple[int, int]]]] = []
    rhs = list(bv)
    for j in range(n):
        lo, hi = lower[j], upper[j]
        col = [row[j] for row in Am]
        if is_finite(lo) and is_finite(hi) and Fraction(lo) > Fraction(hi):
            return LpOutcome(LpStatus.INFEASIBLE)
        if is_finite(lo):
            lo = Fraction(lo)
            rhs = [r - a * lo for r, a in zip(rhs, col)]
            recover.append((lo, [(len(c), 1)]))
            cols.append(col)
            c.append(pv[j])
            ub.append(Fraction(hi) - lo if is_finite(hi) else None)
        elif is_finite(hi):
            hi = Fraction(hi)
            rhs = [r - a * hi for r, a in zip(rhs, col)]
            recover.append((hi, [(len(c), -1)]))
            cols.append([-a for a in col])
            c.append(-pv[j])
            ub.append(None)
        else:
            recover.append((Fraction(0), [(len(c), 1), (len(c) + 1, -1)]))
            cols.append(col)
            cols.append([-a for a in col])
            c.extend([pv[j], -pv[j]])
            ub.extend([None, None])
    A_std = [[cols[k][i] for k in range(len(cols))] for i in range(len(Am))]
    status, xs, ray = _simplex_standard(c, A_std, rhs, ub)
    if status is LpStatus.INFEASIBLE:
        return LpOutcome(status)
    if status is LpStatus.UNBOUNDED:
        assert ray is not None
        r = tuple(sum((sgn * ray[k] for k, sgn in parts), Fraction(0)) for _, parts in recover)
        return LpOutcome(status, ray=r)
    assert xs is not None
    x = tuple(off + sum((sgn * xs[k] for k, sgn in parts), Fraction(0)) for off, parts in recover)
    return LpOutcome(status, x=x, value=dot(pv, x))


def _require_finite(lower: Sequence[ExtendedBound], upper: Sequence[ExtendedBound]) -> None:
    if not all(is_finite(v) for v in list(lower) + list(upper)):
        raise InfiniteBoundError("solver-core routines require finite bounds")


def is_feasible_point(
    A: Sequence[Sequence[object]], b: Sequence[object], lower: Sequence[ExtendedBound],
    upper: Sequence[ExtendedBound], x: Sequence[object],
) -> bool:
    xv = to_vector(x)
    if mat_vec(to_matrix(A), xv) != to_vector(b):
        return False
    return all(lo <= v <= hi for lo, v, hi in zip(lower, xv, upper))


def minimal_face_bounds(
    A: Sequence[Sequence[object]],
    b: Sequence[object],
    lower: Sequence[ExtendedBound],
    upper: Sequence[ExtendedBound],
    x: Sequence[object],
) -> tuple[list[ExtendedBound], list[ExtendedBound]]:
    """Bounds describing the smallest face of the polytope that contains ``x``.

    Coordinates sitting on a bound get pinned; every other bound is kept.
    """
    if not is_feasible_point(A, b, lower, upper, x):
        raise ValidationError("minimal_face_bounds: point is not feasible")
    lo2: list[ExtendedBound] = []
    hi2: list[ExtendedBound] = []
    for lo, v, hi in zip(lower, to_vector(x), upper):
        if v == lo or v == hi:
            lo2.append(v)
            hi2.append(v)
        else:
            lo2.append(lo)
            hi2.append(hi)
    return lo2, hi2


def vertex_of_polytope(
    A: Sequence[Sequence[object]],
    b: Sequence[object],
    lower: Sequence[ExtendedBound],
    upper: Sequence[ExtendedBound],
) -> Vector:
    """Lexicographically smallest point (always a vertex) of a bounded polytope."""
    _require_finite(lower, upper)
    n = len(lower)
    lo = [Fraction(v) for v in lower]
    hi = [Fraction(v) for v in upper]
    for j in range(n):
        obj = [Fraction(0)] * n
        obj[j] = Fraction(-1)
        out = lp_solve(obj, A, b, lo, hi)
        if out.status is LpStatus.INFEASIBLE:
            raise InfeasibleError("vertex_of_polytope: empty polytope")
        assert out.x is not None
        lo[j] = hi[j] = out.x[j]
    return tuple(lo)
