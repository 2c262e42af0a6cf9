from __future__ import annotations

import csv
import json
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from lvekit import cli
from lvekit.cli import COMMANDS, ExperimentConfig, UsageError, list_commands, main, run, to_jsonable, validate
from lvekit.errors import DomainError, NumericError, SingularityError, SizeLimitError
from lvekit.vector_lve import ModelPoint, catalan_g2, oracle_g2

CATALOG = [
    "forest-verify", "weights", "jungle-verify", "borel-check", "lve-sum", "lve-oracle", "mean-cut",
    "mlve-demo", "logz-oracle", "invariants", "gaussian-check", "power-count", "ics-demo", "graphs-d0",
]


def _records(capsys, argv):
    code = main(argv)
    out = capsys.readouterr()
    recs = [json.loads(line) for line in out.out.splitlines() if line]
    return code, recs, out.err


def _summary(recs):
    return next(r for r in recs if r["record"] == "summary")


def _items(recs):
    return [r for r in recs if r["record"] == "item"]


# ---------------------------------------------------------------- catalog


def test_catalog_is_stable():
    rows = list_commands()
    assert len(rows) == 14
    assert [r["command"] for r in rows] == CATALOG
    modules = {"combinatorics", "borel", "vector_lve", "mlve_toy", "tensor_quartic"}
    assert all(r["module"] in modules for r in rows)


def test_list_flag(capsys):
    code, recs, _ = _records(capsys, ["--list"])
    assert code == 0 and [r["command"] for r in recs] == CATALOG


def test_unknown_command_is_usage_error(capsys):
    with pytest.raises(UsageError):
        run(ExperimentConfig("foo"))
    code, recs, err = _records(capsys, ["foo"])
    assert code == 2 and recs == []
    assert json.loads(err)["error"] == "UsageError"


def test_missing_command_and_unknown_param(capsys):
    assert main([]) == 2
    assert main(["weights", "-p", "colour=3"]) == 2
    assert main(["weights", "-p", "n"]) == 2
    assert main(["weights", "--budget", "10"]) == 2
    capsys.readouterr()


# ---------------------------------------------------------------- examples


def test_forest_verify_example(capsys):
    code, recs, _ = _records(capsys, ["forest-verify", "-p", "n=3"])
    s = _summary(recs)
    assert code == 0 and s["forests"] == 7 and s["max_residual"] < 1e-8 and s["passed"]


def test_lve_sum_example(capsys):
    code, recs, _ = _records(capsys, ["lve-sum", "-p", "z=-0.03", "-p", "N=4", "-p", "n_max=5"])
    s = _summary(recs)
    assert code == 0
    ref = oracle_g2(ModelPoint(-0.03, 4))
    assert s["reference"] == "oracle" and s["reference_value"]["re"] == ref
    g2 = complex(s["G2"]["re"], s["G2"]["im"])
    assert abs(abs(g2 - ref) - s["discrepancy"]) < 1e-15
    assert s["discrepancy"] <= s["tail_bound"] + 3 * s["stderr"] and s["within_bound"]
    # one item per plane tree: Catalan numbers 1, 1, 2, 5, 14, 42
    assert len(_items(recs)) == 65


def test_lve_sum_large_n_uses_catalan_limit(capsys):
    code, recs, _ = _records(capsys, ["lve-sum", "-p", "N=inf", "-p", "n_max=4"])
    s = _summary(recs)
    assert code == 0 and s["reference"] == "catalan-limit"
    assert s["reference_value"]["re"] == catalan_g2(-0.03).real


def test_invariants_example(capsys):
    code, recs, _ = _records(capsys, ["invariants", "-p", "d=4"])
    rows = _items(recs)
    assert code == 0 and len(rows) == 7
    assert sum(r["melonic"] for r in rows) == 4
    assert all(set(r) >= {"d", "color_set", "melonic", "value"} for r in rows)


def test_weights_default_graph(capsys):
    code, recs, _ = _records(capsys, ["weights"])
    s = _summary(recs)
    assert code == 0 and s["trees"] == s["kirchhoff_count"] == 5
    assert s["total"] == "1" and s["sums_to_one"] and s["integral_agrees"]
    assert sum(Fraction(r["weight"]) for r in _items(recs)) == 1


def test_graphs_d0_counts(capsys):
    code, recs, _ = _records(capsys, ["graphs-d0", "-p", "orders=2"])
    assert code == 0 and [r["labeled_graphs"] for r in _items(recs)] == [1, 3, 105]
    assert _summary(recs)["consistent"]


def test_jungle_and_power_count(capsys):
    _, recs, _ = _records(capsys, ["jungle-verify", "-p", "n=5"])
    assert [r["two_level_trees"] for r in _items(recs)] == [1, 2, 12, 128, 2000]
    _, recs, _ = _records(capsys, ["power-count"])
    s = _summary(recs)
    assert [s[g]["growth"] for g in ("divergent-tadpole", "convergent-tadpole", "vacuum-linear", "vacuum-log")] == [
        "logarithmic", "bounded", "linear", "logarithmic",
    ]
    assert len(_items(recs)) == 16


def test_remaining_commands_run(capsys):
    for argv in (
        ["borel-check"],
        ["lve-oracle"],
        ["mean-cut", "-p", "n_max=1", "--budget", "500"],
        ["mlve-demo", "-p", "n_max=1"],
        ["logz-oracle", "-p", "j_max=4"],
        ["gaussian-check", "--budget", "200"],
        ["ics-demo", "-p", "n=1", "--budget", "5"],
    ):
        code, recs, err = _records(capsys, argv)
        assert code == 0, (argv, err)
        assert recs[0]["schema_version"] == cli.SCHEMA_VERSION and recs[-1]["record"] == "usage"


# ---------------------------------------------------------------- exit codes and validation


def test_domain_violation_names_the_bound(capsys):
    code, _, err = _records(capsys, ["forest-verify", "-p", "n=9"])
    msg = json.loads(err)
    assert code == 3 and msg["error"] == "DomainError" and "'n'" in msg["message"] and "5" in msg["message"]
    code, _, err = _records(capsys, ["lve-sum", "-p", "z=-0.1"])
    assert code == 3 and "0.0625" in json.loads(err)["message"]
    code, _, err = _records(capsys, ["lve-sum", "-p", "z=0.03"])
    assert code == 3 and "16|z|" in json.loads(err)["message"]
    code, _, err = _records(capsys, ["ics-demo", "-p", "lam=[0.0, 0.6]"])
    assert code == 3 and "cardioid" in json.loads(err)["message"]
    code, _, err = _records(capsys, ["weights", "-p", "edges=[[0,5]]"])
    assert code == 3 and "endpoint" in json.loads(err)["message"]
    assert main(["forest-verify", "-p", "n=2.5"]) == 3
    capsys.readouterr()


def test_size_limit_and_override(capsys):
    code, _, err = _records(capsys, ["invariants", "-p", "d=4", "-p", "N=9"])
    assert code == 4 and json.loads(err)["error"] == "SizeLimitError"
    code, recs, _ = _records(capsys, ["invariants", "-p", "d=4", "-p", "N=9", "--accept-exponential-cost"])
    assert code == 0 and len(_items(recs)) == 7


@pytest.mark.parametrize("exc,code", [
    (NumericError("no convergence"), 5),
    (SingularityError("pole"), 6),
    (SizeLimitError("too big"), 4),
    (DomainError("bad"), 3),
])
def test_error_families_map_to_exit_codes(monkeypatch, capsys, exc, code):
    def boom(a, cfg):
        raise exc

    monkeypatch.setitem(COMMANDS, "graphs-d0", cli.Command("graphs-d0", "combinatorics", COMMANDS["graphs-d0"].params, boom, ""))
    assert main(["graphs-d0"]) == code
    assert json.loads(capsys.readouterr().err)["error"] == type(exc).__name__


@settings(max_examples=40, deadline=None)
@given(st.integers(-5, 12))
def test_validation_matches_bounds(n):
    cfg = ExperimentConfig("forest-verify", {"n": n})
    if 2 <= n <= 5:
        assert validate(cfg)["n"] == n
    else:
        with pytest.raises(DomainError):
            validate(cfg)


def test_complex_parameter_forms():
    for value in ("0.1+0.05j", [0.1, 0.05], "0.1+0.05i"):
        assert validate(ExperimentConfig("ics-demo", {"lam": value}))["lam"] == complex(0.1, 0.05)
    polar = validate(ExperimentConfig("ics-demo", {"lam": {"rho": 0.1, "phi": 1.0}}))["lam"]
    assert abs(polar - 0.1 * complex(math.cos(1.0), math.sin(1.0))) < 1e-15


# ---------------------------------------------------------------- config, determinism, output


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"command": "forest-verify", "params": {"n": 4, "trials": 2}, "seed": 7}))
    _, recs, _ = _records(capsys, ["--config", str(cfg), "-p", "n=3"])
    head = recs[0]
    assert head["params"]["n"] == 3 and head["params"]["trials"] == 2 and head["seed"] == 7
    _, recs, _ = _records(capsys, ["--config", str(cfg), "--seed", "8"])
    assert recs[0]["seed"] == 8 and recs[0]["params"]["n"] == 4
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["--config", str(bad)]) == 2
    capsys.readouterr()


def test_reruns_are_identical():
    def body(seed):
        recs = run(ExperimentConfig("lve-sum", {"n_max": 4, "budget": 500}, seed=seed)).records()
        return [r for r in recs if r["record"] != "usage"]

    assert body(3) == body(3)
    assert body(3) != body(4)
    exact = [run(ExperimentConfig("weights")).records()[:-1] for _ in range(2)]
    assert exact[0] == exact[1]


def test_out_and_csv_files(tmp_path, capsys):
    out, table = tmp_path / "r" / "w.jsonl", tmp_path / "w.csv"
    assert main(["weights", "--out", str(out), "--csv", str(table)]) == 0
    assert capsys.readouterr().out == ""
    recs = [json.loads(line) for line in out.read_text().splitlines()]
    assert [r["record"] for r in recs] == ["header"] + ["item"] * 5 + ["summary", "usage"]
    rows = list(csv.DictReader(table.open()))
    assert len(rows) == 5 and {"weight_num", "weight_den", "edges"} <= set(rows[0])


def test_csv_flattens_complex_values():
    bundle = run(ExperimentConfig("lve-sum", {"n_max": 1}))
    header = cli.items_csv(bundle).splitlines()[0].split(",")
    assert "value.re" in header and "value.im" in header


def test_out_dir_environment(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(cli.OUT_DIR_ENV, str(tmp_path))
    assert main(["graphs-d0"]) == 0
    assert (tmp_path / "graphs-d0.jsonl").exists()
    capsys.readouterr()


def test_to_jsonable():
    assert to_jsonable({"a": Fraction(1, 3), "b": 1 + 2j, "c": (1, math.inf)}) == {
        "a": "1/3", "b": {"re": 1.0, "im": 2.0}, "c": [1, "inf"],
    }
