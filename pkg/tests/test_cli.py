import dataclasses
import io
import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nearlytu import cli
from nearlytu import fileformat as ff
from nearlytu import oracle
from nearlytu import pipeline as pl
from nearlytu.errors import ValidationError
from nearlytu.generate import generate, heuristic_td

TRIANGLE_MCIPP = {
    "format_version": 1, "instance_kind": "mcipp", "k": 1, "delta": 1,
    "graph": {"vertices": ["a", "b", "c"], "edges": [["a", "b"], ["b", "c"], ["c", "a"]]},
    "p": [1, -1, 0], "W": [[1, -1, 0]], "d": [1], "lower": [-1, -1, -1], "upper": [1, 1, 1],
}


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def write(tmp_path, data, name="inst.json"):
    path = tmp_path / name
    path.write_text(data if isinstance(data, str) else json.dumps(data))
    return str(path)


# ---------------------------------------------------------------- file format


@pytest.mark.parametrize("kind", ff.KINDS)
def test_round_trip_is_byte_identical(kind):
    for seed in range(5):
        text = ff.dumps(generate(kind, seed))
        assert ff.dumps(ff.loads(text)) == text


def test_round_trip_with_td_and_labels():
    f = generate("mcipp", 3, td="heuristic")
    text = ff.dumps(f)
    g = ff.loads(text)
    assert g.td == f.td and g.graph.edges == f.graph.edges
    assert dataclasses.replace(g.instance, graph=f.instance.graph) == f.instance
    labelled = ff.loads(json.dumps(TRIANGLE_MCIPP))
    assert json.loads(ff.dumps(labelled))["graph"] == TRIANGLE_MCIPP["graph"]


def test_rationals():
    assert ff.rational(3) == 3
    assert ff.rational(Fraction(-3, 4)) == "-3/4"
    data = dict(TRIANGLE_MCIPP, d=["2/2"])
    assert ff.loads(json.dumps(data)).instance.d == (1,)
    with pytest.raises(ValidationError):
        ff.loads(json.dumps(dict(TRIANGLE_MCIPP, d=["1/2"])))


@pytest.mark.parametrize("patch", [
    {"format_version": 2},
    {"instance_kind": "lp"},
    {"k": 2},
    {"p": [1, 0, 0]},
    {"W": [[2, -2, 0]]},
    {"lower": [2, -1, -1]},
    {"graph": {"vertices": ["a"], "edges": [["a", "z"]]}},
    {"tree_decomposition": {"bags": [["a", "b"]], "parent": [None], "ell": 1}},
    {"d": [True]},
])
def test_invalid_files(patch):
    with pytest.raises(ValidationError):
        ff.loads(json.dumps({**TRIANGLE_MCIPP, **patch}))


def test_mcicp_needs_zero_rhs_and_tu():
    base = {"format_version": 1, "instance_kind": "mcicp", "k": 1, "delta": 1, "p": [1, 1], "A": [[1, 1]],
            "W": [[1, 0]], "d": [0], "lower": [-1, -1], "upper": [1, 1]}
    ff.loads(json.dumps(base))
    with pytest.raises(ValidationError):
        ff.loads(json.dumps({**base, "b": [1]}))
    with pytest.raises(ValidationError, match="submatrix"):
        ff.loads(json.dumps({**base, "A": [[2, 1]]}))


# ---------------------------------------------------------------- generator


def test_gen_is_deterministic():
    a = run("gen", "--kind", "mcipp", "--seed", "1", "--vertices", "6")
    b = run("gen", "--kind", "mcipp", "--seed", "1", "--vertices", "6")
    assert a[0] == 0 and a == b
    f = ff.loads(a[1])
    assert f.graph.n == 6
    assert run("gen", "--kind", "mcipp", "--seed", "2", "--vertices", "6")[1] != a[1]


def test_gen_general_respects_delta():
    code, text, _ = run("gen", "--kind", "ip_general", "--seed", "4", "--k", "1", "--delta", "2")
    f = ff.loads(text)
    assert code == 0 and f.k == 1 and f.delta == 2
    assert oracle.max_abs_subdeterminant([list(r) for r in f.instance.M]) <= 2


@given(st.sampled_from(ff.KINDS), st.integers(0, 10**6))
@settings(max_examples=20)
def test_generated_instances_validate_on_load(kind, seed):
    text = ff.dumps(generate(kind, seed))
    f = ff.loads(text)
    assert f.kind == kind


# ---------------------------------------------------------------- solve and verify


def test_solve_triangle(tmp_path):
    path = write(tmp_path, TRIANGLE_MCIPP)
    code, out, _ = run("solve", path, "--json")
    rep = json.loads(out)
    assert code == 0 and rep["status"] == "optimal" and rep["value"] == 1


def test_solve_human_output_and_trace(tmp_path):
    path = write(tmp_path, TRIANGLE_MCIPP)
    code, out, _ = run("solve", path, "--trace")
    assert code == 0
    assert "status: optimal" in out and "value: 1" in out and "trace:" in out


def test_solve_infeasible_exits_zero(tmp_path):
    path = write(tmp_path, dict(TRIANGLE_MCIPP, d=[5]))
    code, out, _ = run("solve", path, "--json")
    assert code == 0 and json.loads(out)["status"] == "infeasible"


def test_verify_passes(tmp_path):
    for kind in ff.KINDS:
        path = write(tmp_path, ff.dumps(generate(kind, 0)), f"{kind}.json")
        code, out, _ = run("verify", path, "--json")
        assert code == 0, out
        assert json.loads(out)["verification"]["status"] == "pass"


def test_verify_over_budget(tmp_path):
    path = write(tmp_path, TRIANGLE_MCIPP)
    code, out, _ = run("verify", path, "--json", "--budget", "2")
    rep = json.loads(out)
    assert code == 3 and rep["status"] == "unverified"
    assert rep["verification"]["status"] == "unverified"


def test_verify_injected_fault(tmp_path, monkeypatch):
    path = write(tmp_path, TRIANGLE_MCIPP)
    honest = pl.solve_file

    def faulty(f, td=None):
        return pl.SolveResult(pl.INFEASIBLE, trace=honest(f, td).trace)

    monkeypatch.setattr(cli, "solve_file", faulty)
    code, out, _ = run("verify", path, "--json")
    rep = json.loads(out)
    assert code == 1
    assert rep["verification"]["status"] == "fail"
    assert rep["verification"]["witness"] is not None


def test_emit_time_recheck(tmp_path, monkeypatch):
    path = write(tmp_path, TRIANGLE_MCIPP)
    monkeypatch.setattr(cli, "solve_file", lambda f, td=None: pl.SolveResult(pl.OPTIMAL, 1, (0, 0, 0)))
    code, _, err = run("solve", path)
    assert code == 4 and "invariant breach" in err


def test_parse_errors_exit_2(tmp_path):
    assert run("solve", write(tmp_path, "{not json"))[0] == 2
    assert run("solve", str(tmp_path / "missing.json"))[0] == 2
    assert run("check", write(tmp_path, dict(TRIANGLE_MCIPP, W=[[3, -3, 0]])))[0] == 2
    assert run("solve", write(tmp_path, TRIANGLE_MCIPP), "--budget", "0")[0] == 2


def test_oversized_instance_exits_3(tmp_path):
    n = 23
    data = {"format_version": 1, "instance_kind": "mcipp", "k": 1, "delta": 1,
            "graph": {"vertices": list(range(n)), "edges": [[i, (i + 1) % n] for i in range(n)]},
            "p": [0] * n, "W": [[1, -1] + [0] * (n - 2)], "d": [0], "lower": [-1] * n, "upper": [1] * n}
    code, _, err = run("solve", write(tmp_path, data))
    assert code == 3 and "docset enumeration" in err


def test_external_td(tmp_path):
    f = generate("mcipp", 5, n=6)
    td = heuristic_td(f.graph)
    path = write(tmp_path, ff.dumps(f))
    td_json = {"bags": [sorted(B) for B in td.bags], "parent": list(td.parent), "ell": td.ell}
    td_path = write(tmp_path, td_json, "td.json")
    a = json.loads(run("solve", path, "--json")[1])
    b = json.loads(run("solve", path, "--json", "--td", td_path)[1])
    assert a["status"] == b["status"] and a.get("value") == b.get("value")
    bad = write(tmp_path, {"bags": [[0]], "parent": [None], "ell": 1}, "bad.json")
    assert run("solve", path, "--td", bad)[0] == 2


def test_solve_is_deterministic(tmp_path):
    path = write(tmp_path, ff.dumps(generate("mcicp", 7)))
    assert run("solve", path, "--json", "--trace") == run("solve", path, "--json", "--trace")


# ---------------------------------------------------------------- check


def test_check_mcipp(tmp_path):
    code, out, _ = run("check", write(tmp_path, TRIANGLE_MCIPP), "--json")
    props = json.loads(out)["properties"]
    assert code == 0
    assert props["docsets (cographic)"] == 6
    assert props["beta per weight row (cographic)"] == [1]
    assert props["rooted K2,5 model (cographic)"] == "none"


def test_check_equality_and_general(tmp_path):
    for kind in ("mcicp", "ip_equality", "ip_general"):
        code, out, _ = run("check", write(tmp_path, ff.dumps(generate(kind, 1)), f"{kind}.json"))
        assert code == 0
        assert "TU" in out


def test_check_connectivity(tmp_path):
    data = {"format_version": 1, "instance_kind": "mcicp", "k": 1, "delta": 1, "p": [0, 0, 0, 0],
            "A": [[1, 1, 0, 0], [0, 0, 1, 1]], "W": [[1, 0, 0, 0]], "d": [0], "lower": [-1] * 4, "upper": [1] * 4}
    code, out, _ = run("check", write(tmp_path, data), "--json")
    assert code == 0 and json.loads(out)["properties"]["connectivity (sumdecomp)"] == 1


def test_random_cli_round_trip(tmp_path):
    rng = random.Random(0)
    for _ in range(5):
        kind = rng.choice(ff.KINDS)
        code, text, _ = run("gen", "--kind", kind, "--seed", str(rng.randint(0, 999)))
        path = write(tmp_path, text)
        assert code == 0
        assert run("verify", path)[0] == 0
