"""Vector configurations and their circuits.

A configuration is an ordered list of labelled rational columns.  Circuits
are returned as integer tuples aligned with the column order, so a circuit
``c`` of ``A`` satisfies ``sum(c[j] * A.columns[j]) == 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from typing import Iterable, Sequence

from . import ratcore as rc
from .errors import CapExceeded, DimensionError, ValidationError, check

Circuit = tuple[int, ...]
WeightMatrix = tuple[tuple[int, ...], ...]

CIRCUIT_COLUMN_CAP = 26
TU_SIZE_CAP = 8


@dataclass(frozen=True)
class Configuration:
    """Ordered labelled columns living in ``Q^m``."""

    labels: tuple[int, ...]
    columns: tuple[rc.Vector, ...]
    m: int

    def __post_init__(self) -> None:
        if len(self.labels) != len(self.columns):
            raise DimensionError("one label per column required")
        if len(set(self.labels)) != len(self.labels):
            raise ValidationError("configuration labels must be unique")
        if any(len(c) != self.m for c in self.columns):
            raise DimensionError("column length differs from ambient dimension")

    @classmethod
    def from_matrix(cls, rows: Sequence[Sequence[object]], labels: Iterable[int] | None = None,
                    m: int | None = None) -> "Configuration":
        """Build from row-major data; pass ``labels`` to fix ``n`` when there are no rows."""
        M = rc.to_matrix(rows)
        labs = tuple(labels) if labels is not None else None
        if M:
            n = rc.ncols(M)
        elif labs is not None:
            n = len(labs)
        else:
            n = 0
        cols = rc.transpose(M, n) if M else tuple(() for _ in range(n))
        return cls(labs if labs is not None else tuple(range(n)), cols, len(M) if m is None else m)

    @classmethod
    def from_columns(cls, columns: Sequence[Sequence[object]], labels: Iterable[int] | None = None,
                     m: int | None = None) -> "Configuration":
        cols = tuple(rc.to_vector(c) for c in columns)
        if m is None:
            if not cols:
                raise DimensionError("ambient dimension needed for an empty configuration")
            m = len(cols[0])
        labs = tuple(labels) if labels is not None else tuple(range(len(cols)))
        return cls(labs, cols, m)

    @property
    def n(self) -> int:
        return len(self.columns)

    def matrix(self) -> rc.Matrix:
        return tuple(tuple(c[i] for c in self.columns) for i in range(self.m))

    def index(self, label: int) -> int:
        return self.labels.index(label)

    def column(self, label: int) -> rc.Vector:
        return self.columns[self.index(label)]

    def select(self, labels: Iterable[int]) -> "Configuration":
        labs = tuple(labels)
        return Configuration(labs, tuple(self.column(l) for l in labs), self.m)

    def delete(self, labels: Iterable[int]) -> "Configuration":
        drop = set(labels)
        return self.select(l for l in self.labels if l not in drop)

    def concat(self, other: "Configuration") -> "Configuration":
        if other.m != self.m:
            raise DimensionError("cannot concatenate configurations of different dimension")
        return Configuration(self.labels + other.labels, self.columns + other.columns, self.m)

    def rank_of(self, indices: Iterable[int]) -> int:
        cols = [self.columns[j] for j in indices]
        if not cols or self.m == 0:
            return 0
        return rc.rank(cols)

    @cached_property
    def rank(self) -> int:
        return self.rank_of(range(self.n))

    @cached_property
    def _circuits(self) -> tuple[Circuit, ...]:
        return _enumerate_circuits(self)


def _enumerate_circuits(A: Configuration) -> tuple[Circuit, ...]:
    """Depth-first search over independent sets kept in echelon form.

    Extending an independent set ``I`` by a larger index ``j`` either keeps it
    independent or exposes the unique dependency on ``I + j``; that dependency
    is a circuit exactly when it uses every element.  Each circuit is met once,
    from ``I`` = the circuit minus its largest element.
    """
    n = A.n
    cols = A.columns
    found: list[Circuit] = []
    stack: list[tuple[tuple[int, ...], list[tuple[int, list[Fraction], dict[int, Fraction]]]]] = [((), [])]
    while stack:
        I, ech = stack.pop()
        for j in range(I[-1] + 1 if I else 0, n):
            vec = list(cols[j])
            combo: dict[int, Fraction] = {j: Fraction(1)}
            for piv, ev, ec in ech:
                if vec[piv]:
                    factor = vec[piv] / ev[piv]
                    vec = [a - factor * b for a, b in zip(vec, ev)]
                    for key, val in ec.items():
                        combo[key] = combo.get(key, Fraction(0)) - factor * val
            piv = next((i for i, v in enumerate(vec) if v), None)
            if piv is not None:
                stack.append((I + (j,), ech + [(piv, vec, combo)]))
                continue
            if sum(1 for v in combo.values() if v) == len(I) + 1:
                keys = sorted(combo)
                c = [0] * n
                for key, v in zip(keys, rc.primitive([combo[key] for key in keys])):
                    c[key] = v
                found.append(tuple(c))
    out = set()
    for c in found:
        out.add(c)
        out.add(tuple(-v for v in c))
    return tuple(sorted(out, key=lambda c: (_support(c), c)))


def _support(c: Sequence[object]) -> tuple[int, ...]:
    return tuple(i for i, v in enumerate(c) if v != 0)


def circuits(A: Configuration, support_cap: int = CIRCUIT_COLUMN_CAP) -> tuple[Circuit, ...]:
    """All circuits of ``A`` in both signs, sorted by support then value."""
    if A.n > support_cap:
        raise CapExceeded("circuit enumeration columns", A.n, support_cap)
    return A._circuits


def positive_circuits(A: Configuration, support_cap: int = CIRCUIT_COLUMN_CAP) -> tuple[Circuit, ...]:
    """One representative per sign pair: the one whose first nonzero entry is positive."""
    return tuple(c for c in circuits(A, support_cap) if next(v for v in c if v) > 0)


def is_regular(A: Configuration) -> bool:
    return all(abs(v) <= 1 for c in circuits(A) for v in c)


def components(A: Configuration) -> list[list[int]]:
    """Column index classes of the relation "lie on a common circuit".

    Computed from fundamental circuits of one basis, which determine the
    components without enumerating all circuits.
    """
    parent = list(range(A.n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    basis = default_basis(A)
    rows = standard_rows(A, basis) if basis else ()
    for e in range(A.n):
        if e in basis:
            continue
        for b, row in zip(basis, rows):
            if row[e]:
                parent[find(b)] = find(e)
    groups: dict[int, list[int]] = {}
    for j in range(A.n):
        groups.setdefault(find(j), []).append(j)
    return sorted(groups.values())


def is_connected(A: Configuration) -> bool:
    """True iff ``A`` admits no 1-separation."""
    return len(components(A)) <= 1


# ---------------------------------------------------------------- unimodularity


def _as_matrix(A: Configuration | Sequence[Sequence[object]]) -> rc.Matrix:
    return A.matrix() if isinstance(A, Configuration) else rc.to_matrix(A)


def is_totally_unimodular(A: Configuration | Sequence[Sequence[object]], cap: int = TU_SIZE_CAP) -> bool:
    """Subdeterminant scan; square sizes up to ``min(m, n)`` which must be ``<= cap``."""
    M = _as_matrix(A)
    m, n = len(M), rc.ncols(M)
    if min(m, n) > cap:
        raise CapExceeded("TU subdeterminant scan size", min(m, n), cap)
    if any(v not in (-1, 0, 1) for row in M for v in row):
        return False
    for size in range(2, min(m, n) + 1):
        for rows in combinations(range(m), size):
            for cols in combinations(range(n), size):
                if abs(rc.determinant([[M[r][c] for c in cols] for r in rows])) > 1:
                    return False
    return True


def find_non_tu_submatrix(M: Sequence[Sequence[object]]) -> tuple[tuple[int, ...], tuple[int, ...]] | None:
    """Row and column indices of a square submatrix with determinant outside {-1,0,1}."""
    M = rc.to_matrix(M)
    m, n = len(M), rc.ncols(M)
    for size in range(1, min(m, n) + 1):
        for rows in combinations(range(m), size):
            for cols in combinations(range(n), size):
                if abs(rc.determinant([[M[r][c] for c in cols] for r in rows])) > 1:
                    return rows, cols
    return None


def max_circuit_weight(A: Configuration, W: Sequence[Sequence[object]]) -> int:
    """``max ||W c||_inf`` over circuits ``c``; 0 if there are none."""
    Wm = rc.to_matrix(W)
    if Wm and len(Wm[0]) != A.n:
        raise DimensionError("weight matrix width differs from column count")
    best = Fraction(0)
    for c in positive_circuits(A):
        for row in Wm:
            best = max(best, abs(rc.dot(row, c)))
    check(best.denominator == 1, "circuit weight is not integral")
    return int(best)


def is_totally_delta_modular_stacked(A: Configuration, w: Sequence[object], delta: int) -> bool:
    """Circuit-side test for ``[A; w]``: every circuit ``(x, y)`` of ``[A | I]`` has ``|w x| <= delta``."""
    if delta < 1:
        raise ValidationError("delta must be positive")
    return stacked_circuit_weight(A, w) <= delta


def stacked_circuit_weight(A: Configuration, w: Sequence[object]) -> int:
    wv = rc.to_vector(w)
    if len(wv) != A.n:
        raise DimensionError("weight vector length differs from column count")
    eye = tuple(tuple(Fraction(int(i == j)) for i in range(A.m)) for j in range(A.m))
    ext = Configuration(tuple(range(A.n + A.m)), A.columns + eye, A.m)
    return max_circuit_weight(ext, [tuple(wv) + (0,) * A.m])


# ---------------------------------------------------------------- conformality


def conformal(a: Sequence[object], b: Sequence[object]) -> bool:
    return all(x * y >= 0 for x, y in zip(a, b))


def _conformal_circuit(A: Configuration, g: Sequence[Fraction]) -> Circuit:
    """A circuit conformal to the nonzero kernel vector ``g`` with support inside ``supp(g)``."""
    v = list(g)
    while True:
        S = _support(v)
        ker = rc.kernel_basis(rc.transpose([A.columns[i] for i in S]), len(S))
        check(len(ker) >= 1, "conformal step left the kernel")
        if len(ker) == 1:
            c = [0] * A.n
            for i, x in zip(S, rc.primitive([v[i] for i in S])):
                c[i] = x
            return tuple(c)
        vs = [v[i] for i in S]
        h = next(k for k in ker if any(a * vs[0] != b * k[0] for a, b in zip(k, vs)))
        ratios = [vs[i] / h[i] for i in range(len(S)) if h[i] != 0 and (h[i] > 0) == (vs[i] > 0)]
        if not ratios:
            h = tuple(-x for x in h)
            ratios = [vs[i] / h[i] for i in range(len(S)) if h[i] != 0 and (h[i] > 0) == (vs[i] > 0)]
        t = min(ratios)
        for pos, i in enumerate(S):
            v[i] = vs[pos] - t * h[pos]


def conformal_decompose(A: Configuration, x: Sequence[object], x2: Sequence[object],
                        lower: Sequence[object] | None = None,
                        upper: Sequence[object] | None = None) -> list[tuple[Circuit, Fraction]]:
    """Write ``x2 - x`` as a sum of pairwise conformal circuits with positive multipliers."""
    xv, yv = rc.to_vector(x), rc.to_vector(x2)
    if len(xv) != A.n or len(yv) != A.n:
        raise DimensionError("point length differs from column count")
    g = [b - a for a, b in zip(xv, yv)]
    if A.m and any(rc.mat_vec(A.matrix(), g)):
        raise ValidationError("conformal_decompose: endpoints have different images")
    if lower is not None and upper is not None:
        for pt in (xv, yv):
            if not all(lo <= v <= hi for lo, v, hi in zip(lower, pt, upper)):
                raise ValidationError("conformal_decompose: endpoint outside the bounds")
    terms: list[tuple[Circuit, Fraction]] = []
    while any(g):
        c = _conformal_circuit(A, g)
        lam = min(g[i] / c[i] for i in _support(c))
        terms.append((c, lam))
        g = [gi - lam * ci for gi, ci in zip(g, c)]
    return terms


# ---------------------------------------------------------------- duality


def standard_rows(A: Configuration, basis: Sequence[int]) -> rc.Matrix:
    """Rows of ``B^-1 A`` for the basis given as column indices, ordered like ``basis``."""
    basis = list(basis)
    if len(set(basis)) != len(basis) or len(basis) != A.rank or A.rank_of(basis) != len(basis):
        raise ValidationError("given columns do not form a basis")
    order = basis + [j for j in range(A.n) if j not in set(basis)]
    M = A.matrix()
    R, pivots = rc.rref([[row[j] for j in order] for row in M]) if M else ([], [])
    check(pivots == list(range(len(basis))), "basis columns did not become pivots")
    out = []
    for r in R:
        full = [Fraction(0)] * A.n
        for pos, j in enumerate(order):
            full[j] = r[pos]
        out.append(tuple(full))
    return tuple(out)


def default_basis(A: Configuration) -> list[int]:
    """Column indices of the basis preferring later columns."""
    M = A.matrix()
    if not M or A.rank == 0:
        return []
    _, pivots = rc.rref([list(reversed(row)) for row in M])
    return sorted(A.n - 1 - p for p in pivots)


def standardize(A: Configuration) -> tuple[rc.Matrix, list[int], list[int]]:
    """Return ``(D, perm, basis_labels)``: ``A[:, perm]`` is row-equivalent to ``[D | I_r]``."""
    basis = default_basis(A)
    rows = standard_rows(A, basis)
    nonbasis = [j for j in range(A.n) if j not in set(basis)]
    D = tuple(tuple(r[j] for j in nonbasis) for r in rows)
    return D, nonbasis + basis, [A.labels[j] for j in basis]


def dual(A: Configuration) -> Configuration:
    """Dual configuration ``[I | -D^T]`` with columns back in the original order."""
    D, perm, _ = standardize(A)
    r = A.rank
    nonbasis = perm[: A.n - r]
    basis = perm[A.n - r:]
    cols: dict[int, tuple[Fraction, ...]] = {}
    size = len(nonbasis)
    for pos, j in enumerate(nonbasis):
        cols[j] = tuple(Fraction(int(i == pos)) for i in range(size))
    for i, j in enumerate(basis):
        cols[j] = tuple(-D[i][q] for q in range(size))
    return Configuration(A.labels, tuple(cols[j] for j in range(A.n)), size)


def cocircuits(A: Configuration, support_cap: int = CIRCUIT_COLUMN_CAP) -> tuple[Circuit, ...]:
    return circuits(dual(A), support_cap)


def zero_on_basis(A: Configuration, basis_labels: Sequence[int], w: Sequence[object]) -> tuple[Fraction, ...]:
    """An equivalent weight vector vanishing on the basis.

    Each basis element ``b`` contributes ``w(b)`` times its row of ``B^-1 A``,
    which is orthogonal to every circuit, so circuit weights are unchanged.
    """
    wv = list(rc.to_vector(w))
    if len(wv) != A.n:
        raise DimensionError("weight vector length differs from column count")
    basis = [A.index(l) for l in basis_labels]
    rows = standard_rows(A, basis)
    for b, row in zip(basis, rows):
        coef = wv[b]
        if coef:
            wv = [x - coef * y for x, y in zip(wv, row)]
    return tuple(wv)


def reference_circuit(A: Configuration, root_label: int) -> Circuit:
    """Circuit with coefficient 1 at the root and lexicographically least support."""
    j = A.index(root_label)
    through = [c for c in circuits(A) if c[j] == 1]
    if not through:
        raise ValidationError("no circuit crosses the root vector")
    return min(through, key=lambda c: (_support(c), c))


def redefine_root_weights(A: Configuration, W: Sequence[Sequence[object]], root_label: int) -> WeightMatrix:
    """Change the root column of ``W`` so the reference circuit has zero weight."""
    j = A.index(root_label)
    ref = reference_circuit(A, root_label)
    out = []
    for row in rc.to_matrix(W):
        shift = rc.dot(row, ref)
        new = list(row)
        new[j] = row[j] - shift
        check(all(v.denominator == 1 for v in new), "non-integral redefined weight")
        out.append(tuple(int(v) for v in new))
    return tuple(out)


def is_tame(A: Configuration, W: Sequence[Sequence[object]], root_label: int) -> bool:
    """True iff all circuits with coefficient 1 at the root share one weight vector."""
    if A.n >= 2 and not is_connected(A):
        raise ValidationError("is_tame requires a 2-connected configuration")
    W2 = redefine_root_weights(A, W, root_label)
    basis = [A.labels[j] for j in default_basis(A)]
    return all(not any(zero_on_basis(A, basis, row)) for row in W2)
