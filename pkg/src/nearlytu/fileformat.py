"""JSON instance files.

Every file carries ``format_version``, ``instance_kind``, ``k`` and
``delta``; the remaining keys depend on the kind.  Integers are JSON
numbers and rationals are ``"p/q"`` strings.  Output is canonical (sorted
keys, fixed indentation) so that emitting a parsed file reproduces it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

from .cographic import DirectedGraph, McippInstance
from .errors import DimensionError, ValidationError
from .mcippdp import SpecialTreeDecomposition, validate_special_td
from .proximity import EqualityInstance, GeneralIpInstance

FORMAT_VERSION = 1
KINDS = ("ip_general", "ip_equality", "mcicp", "mcipp")


@dataclass(frozen=True)
class InstanceFile:
    kind: str
    instance: GeneralIpInstance | EqualityInstance | McippInstance
    graph: DirectedGraph | None = None
    td: SpecialTreeDecomposition | None = None
    superprofiles: tuple[frozenset[frozenset[int]], ...] | None = None

    @property
    def k(self) -> int:
        return self.instance.k

    @property
    def delta(self) -> int:
        return self.instance.delta


def _scalar(x: Any, what: str) -> Fraction:
    if isinstance(x, bool):
        raise ValidationError(f"{what}: booleans are not numbers")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x)
        except (ValueError, ZeroDivisionError):
            raise ValidationError(f"{what}: cannot parse rational {x!r}") from None
    raise ValidationError(f"{what}: expected an integer or a 'p/q' string, got {type(x).__name__}")


def _int(x: Any, what: str) -> int:
    v = _scalar(x, what)
    if v.denominator != 1:
        raise ValidationError(f"{what}: expected an integer, got {v}")
    return int(v)


def _ints(xs: Any, what: str) -> list[int]:
    if not isinstance(xs, list):
        raise ValidationError(f"{what}: expected an array")
    return [_int(x, what) for x in xs]


def _matrix(rows: Any, what: str, n: int | None = None) -> list[list[int]]:
    if not isinstance(rows, list):
        raise ValidationError(f"{what}: expected an array of rows")
    out = [_ints(r, what) for r in rows]
    if n is not None and any(len(r) != n for r in out):
        raise DimensionError(f"{what}: every row needs {n} entries")
    return out


def _field(data: dict, key: str) -> Any:
    if key not in data:
        raise ValidationError(f"missing field {key!r}")
    return data[key]


def _graph(data: Any) -> DirectedGraph:
    if not isinstance(data, dict):
        raise ValidationError("graph: expected an object")
    vertices = _field(data, "vertices")
    edges = _field(data, "edges")
    if not isinstance(vertices, list) or not isinstance(edges, list):
        raise ValidationError("graph: vertices and edges must be arrays")
    if any(not isinstance(e, list) or len(e) != 2 for e in edges):
        raise ValidationError("graph: every edge is a pair")
    return DirectedGraph.from_edges(vertices, [tuple(e) for e in edges])


def _vertex_index(G: DirectedGraph, label: Any) -> int:
    labels = G.labels or tuple(range(G.n))
    try:
        return labels.index(label)
    except ValueError:
        raise ValidationError(f"unknown vertex {label!r}") from None


def loads(text: str, validate: bool = True) -> InstanceFile:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ValidationError("instance file must be a JSON object")
    if _field(data, "format_version") != FORMAT_VERSION:
        raise ValidationError(f"unsupported format_version {data['format_version']!r}")
    kind = _field(data, "instance_kind")
    if kind not in KINDS:
        raise ValidationError(f"unknown instance_kind {kind!r}")
    k = _int(_field(data, "k"), "k")
    delta = _int(_field(data, "delta"), "delta")
    graph = _graph(data["graph"]) if "graph" in data else None
    td = superprofiles = None
    if kind == "ip_general":
        p = _ints(_field(data, "p"), "p")
        inst = GeneralIpInstance(
            tuple(map(tuple, _matrix(_field(data, "M"), "M", len(p)))), tuple(_ints(_field(data, "b"), "b")),
            tuple(p), tuple(_ints(data.get("w_rows", []), "w_rows")),
            tuple(_ints(data.get("extra_cols", []), "extra_cols")), delta)
        if validate:
            inst.validate()
    elif kind in ("ip_equality", "mcicp"):
        p = _ints(_field(data, "p"), "p")
        n = len(p)
        A = _matrix(_field(data, "A"), "A", n)
        b = _ints(data.get("b", [0] * len(A)), "b") if kind == "ip_equality" else [0] * len(A)
        if kind == "mcicp" and "b" in data and any(_ints(data["b"], "b")):
            raise ValidationError("mcicp instances have b = 0")
        inst = EqualityInstance.build(p, A, b, _matrix(_field(data, "W"), "W", n), _ints(_field(data, "d"), "d"),
                                      _ints(_field(data, "lower"), "lower"), _ints(_field(data, "upper"), "upper"),
                                      delta)
        if validate:
            inst.validate()
            if graph is not None:
                from .cographic import is_tension_space

                if not is_tension_space(inst.configuration(), graph):
                    raise ValidationError("A is not the tension space of the supplied graph")
    else:
        if graph is None:
            raise ValidationError("mcipp instances need a graph")
        p = _ints(_field(data, "p"), "p")
        inst = McippInstance.build(graph, p, _matrix(_field(data, "W"), "W", graph.n), _ints(_field(data, "d"), "d"),
                                   _ints(_field(data, "lower"), "lower"), _ints(_field(data, "upper"), "upper"), delta)
        if validate:
            inst.validate()
        if "tree_decomposition" in data:
            td = parse_td(data["tree_decomposition"], graph)
        if "superprofiles" in data:
            sp = data["superprofiles"]
            if not isinstance(sp, list):
                raise ValidationError("superprofiles: expected one array per bag")
            superprofiles = tuple(
                frozenset(frozenset(_vertex_index(graph, v) for v in S) for S in bag) for bag in sp)
    if k != inst.k:
        raise ValidationError(f"declared k = {k} but the instance has {inst.k} weight rows")
    return InstanceFile(kind, inst, graph, td, superprofiles)


def parse_td(data: Any, graph: DirectedGraph) -> SpecialTreeDecomposition:
    if not isinstance(data, dict):
        raise ValidationError("tree_decomposition: expected an object")
    bags = _field(data, "bags")
    if not isinstance(bags, list):
        raise ValidationError("tree_decomposition: bags must be an array")
    parent = _field(data, "parent")
    if not isinstance(parent, list) or len(parent) != len(bags):
        raise ValidationError("tree_decomposition: one parent per bag")
    par = [None if x is None else _int(x, "parent") for x in parent]
    td = SpecialTreeDecomposition.build(
        [[_vertex_index(graph, v) for v in bag] for bag in bags], par, _int(_field(data, "ell"), "ell"))
    ok, issues = validate_special_td(graph, td)
    if not ok:
        raise ValidationError("tree_decomposition: " + "; ".join(issues))
    return td


def load(path: str, validate: bool = True) -> InstanceFile:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    return loads(text, validate)


# ---------------------------------------------------------------- emitting


def _graph_json(G: DirectedGraph) -> dict:
    labels = list(G.labels) if G.labels else list(range(G.n))
    return {"vertices": labels, "edges": [[labels[a], labels[b]] for a, b in G.edges]}


def to_dict(f: InstanceFile) -> dict:
    inst = f.instance
    out: dict[str, Any] = {"format_version": FORMAT_VERSION, "instance_kind": f.kind, "k": f.k, "delta": f.delta}
    if isinstance(inst, GeneralIpInstance):
        out.update(M=[list(r) for r in inst.M], b=list(inst.b), p=list(inst.p), w_rows=list(inst.w_rows),
                   extra_cols=list(inst.extra_cols))
    elif isinstance(inst, EqualityInstance):
        out.update(p=list(inst.p), A=[list(r) for r in inst.A], W=[list(r) for r in inst.W], d=list(inst.d),
                   lower=list(inst.lower), upper=list(inst.upper))
        if f.kind == "ip_equality":
            out["b"] = list(inst.b)
    else:
        out.update(p=list(inst.p), W=[list(r) for r in inst.W], d=list(inst.d), lower=list(inst.lower),
                   upper=list(inst.upper))
    if f.graph is not None:
        out["graph"] = _graph_json(f.graph)
    if f.td is not None:
        G = f.graph
        assert G is not None
        out["tree_decomposition"] = {"bags": [sorted(G.label(v) for v in B) for B in f.td.bags],
                                     "parent": list(f.td.parent), "ell": f.td.ell}
    if f.superprofiles is not None:
        G = f.graph
        assert G is not None
        out["superprofiles"] = [sorted(sorted(G.label(v) for v in S) for S in bag) for bag in f.superprofiles]
    return out


def dumps(f: InstanceFile) -> str:
    return json.dumps(to_dict(f), sort_keys=True, indent=1) + "\n"


def rational(x: Fraction | int) -> int | str:
    """JSON form of a rational: a number when integral, otherwise ``"p/q"``."""
    x = Fraction(x)
    return int(x) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
