import csv
import json

import numpy as np
import pytest

from cf_audit import __version__
from cf_audit.classifiers import load_model
from cf_audit.cli import main

SMALL = {"dataset": {"name": "half_moons", "n": 120, "noise": 0.2},
         "model": {"family": "forest", "n_trees": 10}, "n": 400, "runs": 1,
         "max_instances": 12, "generators": ["gs", "lore", "nearest_enemy"]}
POCKET = {"dataset": {"name": "pocket"}, "model": {"family": "pocket"}, "standardize": False,
          "n": 3000, "runs": 2,
          "generators": ["nearest_enemy", {"name": "fixed", "label": "pocket",
                                           "point": [-0.5, 0.0]}]}


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def rows(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


def run(tmp_path, cfg, *cmd, out="out"):
    return main([*cmd, "--config", write_cfg(tmp_path, cfg), "--out", str(tmp_path / out)])


def test_train_writes_model_and_metrics(tmp_path):
    assert run(tmp_path, SMALL, "train") == 0
    meta = json.loads((tmp_path / "out/model.json").read_text())["meta"]
    assert meta["seed"] == 0 and meta["version"] == __version__
    assert meta["config"]["model"]["n_trees"] == 10
    metrics = json.loads((tmp_path / "out/train_metrics.json").read_text())
    assert metrics["n_train"] == 84 and metrics["n_test"] == 36
    assert metrics["test_accuracy"] > 0.8
    load_model(tmp_path / "out/model.json")


def test_rf3_on_moons_is_accurate(tmp_path):
    cfg = {**SMALL, "dataset": {"name": "half_moons", "n": 500, "noise": 0.2},
           "model": {"family": "forest", "n_trees": 3}}
    assert run(tmp_path, cfg, "train") == 0
    acc = json.loads((tmp_path / "out/train_metrics.json").read_text())["test_accuracy"]
    assert acc >= 0.9


def test_exit_codes(tmp_path):
    assert run(tmp_path, {**SMALL, "model": {"family": "perceptron"}}, "train") == 2
    assert run(tmp_path, {**SMALL, "bogus": 1}, "train") == 2
    assert run(tmp_path, {**SMALL, "model": {"family": "forest", "depth": 3}}, "train") == 2
    assert run(tmp_path, SMALL, "lra", out="empty") == 3
    assert run(tmp_path, {**SMALL, "dataset": {"name": "mnist"}}, "train") == 3
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    assert main(["train", "--config", str(bad)]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["explode"])
    assert exc.value.code == 2


def test_lra_rows_and_summary(tmp_path):
    assert run(tmp_path, SMALL, "train") == 0
    assert run(tmp_path, SMALL, "lra") == 0
    r = rows(tmp_path / "out/lra_instances.csv")
    assert len(r) == 12 and [int(x["instance"]) for x in r] == list(range(12))
    summary = json.loads((tmp_path / "out/lra_summary.json").read_text())
    ok = [x for x in r if x["status"] == "ok"]
    assert summary["S_bar"] == pytest.approx(np.mean([float(x["S"]) for x in ok]))
    assert summary["config"]["n"] == 400
    assert "wall_time" not in r[0]


def test_full_test_split_row_count(tmp_path):
    cfg = {**SMALL, "max_instances": None, "n": 100}
    assert run(tmp_path, cfg, "train") == 0
    assert run(tmp_path, cfg, "lra") == 0
    assert len(rows(tmp_path / "out/lra_instances.csv")) == 36


def test_flags_override_config(tmp_path):
    cfgp = write_cfg(tmp_path, SMALL)
    out = str(tmp_path / "o")
    assert main(["train", "--config", cfgp, "--out", out, "--seed", "4"]) == 0
    assert main(["lra", "--config", cfgp, "--out", out, "--seed", "4", "--n", "150",
                 "--runs", "2", "--timing"]) == 0
    s = json.loads((tmp_path / "o/lra_summary.json").read_text())
    assert (s["seed"], s["config"]["n"], s["config"]["runs"]) == (4, 150, 2)
    assert "wall_time" in rows(tmp_path / "o/lra_instances.csv")[0]


def test_1nn_aggregate_is_risk_free(tmp_path):
    cfg = {**SMALL, "dataset": {"name": "half_moons", "n": 300, "noise": 0.2},
           "model": {"family": "knn", "k": 1}, "n": 2000, "max_instances": 30}
    assert run(tmp_path, cfg, "train") == 0
    assert run(tmp_path, cfg, "lra") == 0
    assert json.loads((tmp_path / "out/lra_summary.json").read_text())["S_bar"] == 0.0


def test_ve_pocket_extremes(tmp_path):
    assert run(tmp_path, POCKET, "train") == 0
    assert run(tmp_path, POCKET, "ve") == 0
    table = rows(tmp_path / "out/ve_table.csv")
    assert list(table[0]) == ["dataset", "instances_kept", "nearest_enemy", "pocket"]
    assert float(table[0]["nearest_enemy"]) == 1.0 and float(table[0]["pocket"]) == 0.0
    long = rows(tmp_path / "out/ve_benchmark.csv")
    assert [r["generator"] for r in long] == ["nearest_enemy", "pocket"]
    assert set(long[0]) == {"dataset", "generator", "instances_kept", "J_bar", "failure_rate",
                            "mean_queries"}


def test_ve_three_generators_three_columns(tmp_path):
    assert run(tmp_path, SMALL, "train") == 0
    assert run(tmp_path, {**SMALL, "threshold": -1.0}, "ve") == 0
    table = rows(tmp_path / "out/ve_table.csv")
    assert list(table[0])[2:] == ["gs", "lore", "nearest_enemy"]
    assert int(table[0]["instances_kept"]) == 12


def test_ve_empty_marker(tmp_path):
    assert run(tmp_path, POCKET, "train") == 0
    assert run(tmp_path, {**POCKET, "threshold": 1.0}, "ve") == 0
    assert "# empty" in (tmp_path / "out/ve_benchmark.csv").read_text()


def test_grid(tmp_path):
    assert run(tmp_path, SMALL, "train") == 0
    assert run(tmp_path, {**SMALL, "grid": {"resolution": 100, "bounds": None}}, "grid") == 0
    r = rows(tmp_path / "out/grid.csv")
    assert len(r) == 10000
    model = load_model(tmp_path / "out/model.json")
    pick = np.random.default_rng(0).choice(len(r), 50, replace=False)
    P = np.array([[float(r[i]["x"]), float(r[i]["y"])] for i in pick])
    assert np.array_equal(model.predict(P), [int(r[i]["label"]) for i in pick])


def test_grid_constant_region(tmp_path):
    cfg = {**POCKET, "grid": {"resolution": 20, "bounds": [0.0, 0.5, -1.0, 1.0]}}
    assert run(tmp_path, cfg, "train") == 0
    assert run(tmp_path, cfg, "grid") == 0
    assert {x["label"] for x in rows(tmp_path / "out/grid.csv")} == {"0"}


def test_grid_rejects_non_2d(tmp_path):
    cfg = {**SMALL, "dataset": {"name": "boston"}, "model": {"family": "logreg"}}
    assert run(tmp_path, cfg, "train") == 0
    assert run(tmp_path, cfg, "grid") == 2


def test_audit_is_byte_identical(tmp_path):
    assert run(tmp_path, SMALL, "audit", out="a") == 0
    assert run(tmp_path, SMALL, "grid", out="a") == 0
    assert run(tmp_path, SMALL, "audit", out="b") == 0
    assert run(tmp_path, SMALL, "grid", out="b") == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert len(files) == 7
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_fetch_checksum_mismatch(tmp_path):
    src = tmp_path / "src.csv"
    src.write_text("a,t\n1,0\n")
    dest = tmp_path / "dest.csv"
    assert main(["fetch", "--url", src.as_uri(), "--sha256", "0" * 64, "--dest", str(dest)]) == 3
    assert not dest.exists()
    import hashlib
    good = hashlib.sha256(src.read_bytes()).hexdigest()
    assert main(["fetch", "--url", src.as_uri(), "--sha256", good, "--dest", str(dest)]) == 0
    assert dest.read_bytes() == src.read_bytes()
