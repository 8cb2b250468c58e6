"""Reductions from a general nearly totally unimodular program to circuit search.

The chain is: inequality form, folding of box rows into bounds, slack
variables, a finite box around the LP optimum, guessing the extra columns,
rounding the LP vertex to an integer anchor, and translating the anchor to
the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from itertools import product
from typing import Sequence

from . import configcore as cc
from . import ratcore as rc
from .errors import CapExceeded, DimensionError, InfeasibleError, ValidationError, check

ELIMINATION_CAP = 10_000


def f_bound(k: int, delta: int) -> int:
    """Number of circuits that suffice to reach an optimum from the anchor."""
    if k < 0 or delta < 1:
        raise ValidationError("f_bound needs k >= 0 and delta >= 1")
    if k == 0:
        return 0
    return k * (2 * k * delta + 1) ** k


def proximity_bound(k: int, delta: int) -> int:
    """Max-norm distance from an optimal LP vertex to some optimal integer point."""
    return 1 + k + f_bound(k, delta)


def _int_vector(v: Sequence[object], what: str) -> tuple[int, ...]:
    out = []
    for x in rc.to_vector(v):
        if x.denominator != 1:
            raise ValidationError(f"{what} must be integral")
        out.append(int(x))
    return tuple(out)


def _int_matrix(M: Sequence[Sequence[object]], what: str, n: int) -> tuple[tuple[int, ...], ...]:
    rows = tuple(_int_vector(r, what) for r in M)
    if any(len(r) != n for r in rows):
        raise DimensionError(f"{what}: every row needs {n} entries")
    return rows


@dataclass(frozen=True)
class EqualityInstance:
    """``max p x`` s.t. ``Ax = b``, ``Wx = d``, ``lower <= x <= upper``, ``x`` integral."""

    p: tuple[int, ...]
    A: tuple[tuple[int, ...], ...]
    b: tuple[int, ...]
    W: tuple[tuple[int, ...], ...]
    d: tuple[int, ...]
    lower: tuple[int, ...]
    upper: tuple[int, ...]
    delta: int

    def __post_init__(self) -> None:
        n = len(self.p)
        if len(self.A) != len(self.b) or len(self.W) != len(self.d):
            raise DimensionError("row count and right-hand side length differ")
        if any(len(r) != n for r in self.A + self.W) or len(self.lower) != n or len(self.upper) != n:
            raise DimensionError("equality instance dimensions disagree")
        if any(lo > hi for lo, hi in zip(self.lower, self.upper)):
            raise ValidationError("lower bound exceeds upper bound")
        if self.delta < 1:
            raise ValidationError("delta must be positive")

    @classmethod
    def build(cls, p, A, b, W, d, lower, upper, delta: int) -> "EqualityInstance":
        n = len(p)
        return cls(_int_vector(p, "p"), _int_matrix(A, "A", n), _int_vector(b, "b"),
                   _int_matrix(W, "W", n), _int_vector(d, "d"), _int_vector(lower, "lower"),
                   _int_vector(upper, "upper"), int(delta))

    @property
    def n(self) -> int:
        return len(self.p)

    @property
    def k(self) -> int:
        return len(self.W)

    def configuration(self) -> cc.Configuration:
        return cc.Configuration.from_matrix(self.A, labels=range(self.n), m=len(self.A))

    def validate(self, check_tu: bool = True) -> None:
        """Check total unimodularity of ``A`` and the circuit-weight bound."""
        if check_tu and self.A and self.n:
            if not cc.is_totally_unimodular(self.A):
                raise ValidationError(f"A is not totally unimodular: submatrix {cc.find_non_tu_submatrix(self.A)}")
        weight = cc.max_circuit_weight(self.configuration(), self.W)
        if weight > self.delta:
            raise ValidationError(f"circuit weight {weight} exceeds delta {self.delta}")

    def lp(self, objective: Sequence[object] | None = None) -> rc.LpOutcome:
        p = self.p if objective is None else objective
        return rc.lp_solve(p, self.A + self.W, self.b + self.d, self.lower, self.upper)

    def is_feasible(self, x: Sequence[int]) -> bool:
        return rc.is_feasible_point(self.A + self.W, self.b + self.d, self.lower, self.upper, x)

    def value(self, x: Sequence[int]) -> Fraction:
        return rc.dot(self.p, rc.to_vector(x))


@dataclass(frozen=True)
class InequalityInstance:
    """``max p x`` s.t. ``Ax <= b``, ``Wx <= d``, ``lower <= x <= upper`` (bounds may be infinite)."""

    p: tuple[int, ...]
    A: tuple[tuple[int, ...], ...]
    b: tuple[int, ...]
    W: tuple[tuple[int, ...], ...]
    d: tuple[int, ...]
    lower: tuple[rc.ExtendedBound, ...]
    upper: tuple[rc.ExtendedBound, ...]
    delta: int

    @property
    def n(self) -> int:
        return len(self.p)

    def lp(self, objective: Sequence[object] | None = None) -> rc.LpOutcome:
        """LP relaxation, with slacks appended and then dropped from the answer."""
        n, ma, mw = self.n, len(self.A), len(self.W)
        rows = [list(r) + [int(i == j) for j in range(ma + mw)] for i, r in enumerate(self.A + self.W)]
        p = list(self.p if objective is None else objective) + [0] * (ma + mw)
        lo = list(self.lower) + [0] * (ma + mw)
        hi = list(self.upper) + [rc.POS_INF] * (ma + mw)
        out = rc.lp_solve(p, rows, self.b + self.d, lo, hi)
        if out.status is rc.LpStatus.OPTIMAL:
            assert out.x is not None
            return rc.LpOutcome(out.status, x=out.x[:n], value=out.value)
        if out.status is rc.LpStatus.UNBOUNDED:
            assert out.ray is not None
            return rc.LpOutcome(out.status, ray=out.ray[:n])
        return out


@dataclass(frozen=True)
class GeneralIpInstance:
    """``max p x`` s.t. ``Mx <= b`` with near-TU metadata.

    ``w_rows`` lists the rows of ``M`` outside the TU part, ``extra_cols`` the
    columns to be guessed.  Rows with a single ``+-1`` entry act as bounds.
    """

    M: tuple[tuple[int, ...], ...]
    b: tuple[int, ...]
    p: tuple[int, ...]
    w_rows: tuple[int, ...]
    extra_cols: tuple[int, ...]
    delta: int

    def __post_init__(self) -> None:
        n = len(self.p)
        if len(self.M) != len(self.b) or any(len(r) != n for r in self.M):
            raise DimensionError("general instance dimensions disagree")
        if any(not 0 <= i < len(self.M) for i in self.w_rows) or any(not 0 <= j < n for j in self.extra_cols):
            raise ValidationError("metadata index out of range")
        if self.delta < 1:
            raise ValidationError("delta must be positive")

    @property
    def n(self) -> int:
        return len(self.p)

    @property
    def k(self) -> int:
        return len(self.w_rows)

    def tu_part(self) -> list[list[int]]:
        keep = [j for j in range(self.n) if j not in set(self.extra_cols)]
        return [[row[j] for j in keep] for i, row in enumerate(self.M) if i not in set(self.w_rows)]

    def validate(self) -> None:
        part = [r for r in self.tu_part() if _unit_entry(r) is None]
        if part and part[0] and min(len(part), len(part[0])) <= cc.TU_SIZE_CAP:
            bad = cc.find_non_tu_submatrix(part)
            if bad is not None:
                raise ValidationError(f"TU part has a violating submatrix at rows/cols {bad}")
        elif part and part[0]:
            raise CapExceeded("TU subdeterminant scan size", min(len(part), len(part[0])), cc.TU_SIZE_CAP)

    def as_inequality(self) -> InequalityInstance:
        return _split_rows(self.M, self.b, self.p, self.w_rows, self.delta)

    def lp(self, objective: Sequence[object] | None = None) -> rc.LpOutcome:
        return self.as_inequality().lp(objective)


def _unit_entry(row: Sequence[int]) -> tuple[int, int] | None:
    nz = [(j, v) for j, v in enumerate(row) if v]
    if len(nz) == 1 and abs(nz[0][1]) == 1:
        return nz[0]
    return None


def _split_rows(M, b, p, w_rows, delta) -> InequalityInstance:
    """Fold single-entry rows into bounds and separate the A and W rows."""
    n = len(p)
    lower: list[rc.ExtendedBound] = [rc.NEG_INF] * n
    upper: list[rc.ExtendedBound] = [rc.POS_INF] * n
    A, bA, W, dW = [], [], [], []
    for i, (row, rhs) in enumerate(zip(M, b)):
        if i in w_rows:
            W.append(tuple(row))
            dW.append(rhs)
            continue
        unit = _unit_entry(row)
        if unit is None:
            A.append(tuple(row))
            bA.append(rhs)
        elif unit[1] == 1:
            upper[unit[0]] = min(upper[unit[0]], Fraction(rhs))
        else:
            lower[unit[0]] = max(lower[unit[0]], Fraction(-rhs))
    return InequalityInstance(tuple(p), tuple(A), tuple(bA), tuple(W), tuple(dW), tuple(lower), tuple(upper), delta)


# ---------------------------------------------------------------- equality form


def cook_box(x_star: Sequence[Fraction], radius: int, lower, upper) -> tuple[list[int], list[int]]:
    """Integer box of max-norm ``radius`` around ``x_star`` intersected with the bounds."""
    lo, hi = [], []
    for x, l, u in zip(x_star, lower, upper):
        a = math.ceil(x - radius)
        z = math.floor(x + radius)
        if rc.is_finite(l):
            a = max(a, math.ceil(l))
        if rc.is_finite(u):
            z = min(z, math.floor(u))
        lo.append(a)
        hi.append(z)
    return lo, hi


def to_equality_form(inst: InequalityInstance, x_star: Sequence[Fraction] | None = None) -> EqualityInstance:
    """Slack variables plus finite bounds from the box around an LP optimum.

    The new variables are ``(x, slack_A, slack_W)``; slack bounds are implied
    by the box on ``x``.  Raises :class:`InfeasibleError` for an infeasible
    relaxation and :class:`ValidationError` for an unbounded one.
    """
    if x_star is None:
        out = inst.lp()
        if out.status is rc.LpStatus.INFEASIBLE:
            raise InfeasibleError("LP relaxation is infeasible")
        if out.status is rc.LpStatus.UNBOUNDED:
            raise ValidationError("LP relaxation is unbounded; use handle_unbounded")
        assert out.x is not None
        x_star = out.x
    n, ma, mw = inst.n, len(inst.A), len(inst.W)
    lo, hi = cook_box(x_star, n * inst.delta, inst.lower, inst.upper)
    if any(a > z for a, z in zip(lo, hi)):
        raise InfeasibleError("box around the LP optimum contains no integer point")
    slack_lo, slack_hi = [], []
    for row, rhs in zip(inst.A + inst.W, inst.b + inst.d):
        least = sum(min(a * l, a * u) for a, l, u in zip(row, lo, hi))
        slack_lo.append(0)
        slack_hi.append(max(0, rhs - least))
    A = tuple(tuple(row) + tuple(int(i == j) for j in range(ma)) + (0,) * mw for i, row in enumerate(inst.A))
    W = tuple(tuple(row) + (0,) * ma + tuple(int(i == j) for j in range(mw)) for i, row in enumerate(inst.W))
    return EqualityInstance(
        tuple(inst.p) + (0,) * (ma + mw), A, tuple(inst.b), W, tuple(inst.d),
        tuple(lo + slack_lo), tuple(hi + slack_hi), inst.delta,
    )


@dataclass(frozen=True)
class SubInstance:
    """One guess for the extra columns; ``equality`` is None when its relaxation is empty."""

    fixed: dict[int, int]
    columns: tuple[int, ...]
    equality: EqualityInstance | None = field(compare=False)


def eliminate_columns(inst: GeneralIpInstance, x_star: Sequence[Fraction],
                      cap: int = ELIMINATION_CAP) -> list[SubInstance]:
    """Guess every extra column inside the box around ``x_star``; substitute it out."""
    base = inst.as_inequality()
    radius = inst.n * inst.delta
    ranges = []
    for j in inst.extra_cols:
        lo, hi = cook_box([x_star[j]], radius, [base.lower[j]], [base.upper[j]])
        ranges.append(range(lo[0], hi[0] + 1))
    size = math.prod(len(r) for r in ranges)
    if size > cap:
        raise CapExceeded("extra-column guesses", size, cap)
    keep = tuple(j for j in range(inst.n) if j not in set(inst.extra_cols))
    out = []
    for values in product(*ranges):
        fixed = dict(zip(inst.extra_cols, values))
        b = tuple(rhs - sum(row[j] * v for j, v in fixed.items()) for row, rhs in zip(inst.M, inst.b))
        M = tuple(tuple(row[j] for j in keep) for row in inst.M)
        sub = _split_rows(M, b, tuple(inst.p[j] for j in keep), inst.w_rows, inst.delta)
        try:
            eq = to_equality_form(sub)
        except InfeasibleError:
            eq = None
        out.append(SubInstance(fixed, keep, eq))
    return out


# ---------------------------------------------------------------- anchoring


def round_to_anchor(inst: EqualityInstance, x_star: Sequence[object]) -> tuple[int, ...]:
    """Integer point of ``{Ax=b, lower<=x<=upper}`` within max-norm ``< k`` of the vertex ``x_star``."""
    xs = rc.to_vector(x_star)
    if not inst.is_feasible(xs):
        raise ValidationError("round_to_anchor: x* is not feasible")
    if all(v.denominator == 1 for v in xs):
        z = tuple(int(v) for v in xs)
    else:
        lo, hi = rc.minimal_face_bounds(inst.A, inst.b, inst.lower, inst.upper, xs)
        free = sum(1 for a, b in zip(lo, hi) if a != b)
        vertex = rc.vertex_of_polytope(inst.A, inst.b, lo, hi)
        check(all(v.denominator == 1 for v in vertex), "vertex of a TU face is not integral")
        terms = cc.conformal_decompose(inst.configuration(), xs, vertex, inst.lower, inst.upper)
        dim = _face_dimension(inst, lo, hi)
        check(len(terms) <= dim <= free, "conformal decomposition longer than the face dimension")
        if dim > inst.k:
            raise ValidationError("round_to_anchor: x* is not a vertex of the relaxation")
        zf = list(xs)
        for c, lam in terms:
            frac = lam - math.floor(lam)
            zf = [a + frac * ci for a, ci in zip(zf, c)]
        check(all(v.denominator == 1 for v in zf), "rounded anchor is not integral")
        z = tuple(int(v) for v in zf)
    check(rc.is_feasible_point(inst.A, inst.b, inst.lower, inst.upper, z), "anchor violates Ax=b or the bounds")
    check(all(abs(a - b) < max(inst.k, 1) or a == b for a, b in zip(xs, z)), "anchor is too far from x*")
    return z


def _face_dimension(inst: EqualityInstance, lo, hi) -> int:
    free = [j for j in range(inst.n) if lo[j] != hi[j]]
    if not free:
        return 0
    sub = [[row[j] for j in free] for row in inst.A]
    return len(free) - (rc.rank(sub) if sub else 0)


@dataclass(frozen=True)
class AnchoredInstance:
    """An instance translated so that the anchor sits at the origin (so ``b = 0``)."""

    shifted: EqualityInstance
    anchor: tuple[int, ...]
    t_max: int

    @property
    def offset(self) -> int:
        return sum(a * b for a, b in zip(self.shifted.p, self.anchor))

    def lift(self, x: Sequence[int]) -> tuple[int, ...]:
        return tuple(a + b for a, b in zip(x, self.anchor))


def translate(inst: EqualityInstance, z: Sequence[int]) -> EqualityInstance:
    Wz = [sum(a * b for a, b in zip(row, z)) for row in inst.W]
    return replace(
        inst,
        b=(0,) * len(inst.b),
        d=tuple(d - w for d, w in zip(inst.d, Wz)),
        lower=tuple(l - v for l, v in zip(inst.lower, z)),
        upper=tuple(u - v for u, v in zip(inst.upper, z)),
    )


def reduce_to_circuit_search(inst: EqualityInstance, x_star: Sequence[object]) -> AnchoredInstance:
    z = round_to_anchor(inst, x_star)
    return AnchoredInstance(translate(inst, z), z, f_bound(inst.k, inst.delta))


def handle_unbounded(inst: EqualityInstance | InequalityInstance | GeneralIpInstance, solve_feasibility) -> str:
    """Verdict for an unbounded relaxation: ``"unbounded"`` iff an integer point exists.

    ``solve_feasibility`` receives the instance with a zero objective and
    returns a feasible integer point or None.
    """
    out = inst.lp()
    if out.status is not rc.LpStatus.UNBOUNDED:
        raise ValidationError("handle_unbounded called on a relaxation that is not unbounded")
    point = solve_feasibility(replace(inst, p=(0,) * inst.n))
    return "infeasible" if point is None else "unbounded"
