"""cf-audit: train a black box, assess local risk, benchmark generators.

Subcommands share one JSON config (see README); flags override its keys.

    cf-audit train --config run.json --out results/
    cf-audit lra   --config run.json --out results/ --runs 10
    cf-audit ve    --config run.json --out results/ --threshold 0.25
    cf-audit grid  --config run.json --out results/
    cf-audit audit --config run.json --out results/
    cf-audit fetch --url URL --sha256 HEX --dest file.csv

Exit codes: 0 ok, 2 usage or config error, 3 data error, 4 audit error.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .classifiers import (load_model, save_model, train_forest, train_knn, train_logreg,
                          train_rbf_svm, train_tree)
from .data import DataError, Dataset, fetch, load_csv, load_dataset, make_half_moons, split, \
    standardize
from .generators import NoCounterfactualError, fixed_point, get_generator
from .lra import NoAnchorError, aggregate
from .oracles import PocketClassifier, PocketGeometry
from .ve import ve_benchmark

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_AUDIT = 0, 2, 3, 4

DEFAULTS = {
    "dataset": {"name": "half_moons", "n": 500, "noise": 0.2},
    "train_frac": 0.7,
    "standardize": True,
    "model": {"family": "forest", "n_trees": 200},
    "generators": ["gs", "hcls", "lore"],
    "n": 2000,
    "runs": 10,
    "threshold": 0.25,
    "seed": 0,
    "max_instances": None,
    "grid": {"bounds": None, "resolution": 100},
    "timing": False,
}

TRAINERS = {
    "tree": train_tree,
    "forest": train_forest,
    "knn": train_knn,
    "logreg": train_logreg,
    "svm": train_rbf_svm,
}
RANDOMIZED = {"tree", "forest"}
POCKET_KEYS = ("x", "pocket_center", "pocket_side", "axis", "boundary", "a0")


class ConfigError(Exception):
    pass


class AuditError(Exception):
    pass


# configuration

def build_config(args) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                user = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(user) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(user)
    for key in ("seed", "n", "runs", "threshold"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "timing", False):
        cfg["timing"] = True
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("seed must be a non-negative integer")
    if cfg["n"] < 2 or cfg["runs"] < 1:
        raise ConfigError("n must be >= 2 and runs >= 1")
    if not isinstance(cfg["model"], dict) or "family" not in cfg["model"]:
        raise ConfigError("model must be an object with a 'family'")
    return cfg


def _seeds(seed):
    """Independent integer seeds for data generation, split, model and audit."""
    children = np.random.SeedSequence(seed).spawn(4)
    return [int(c.generate_state(1, np.uint64)[0]) for c in children]


def _pocket_geometry(spec):
    kw = {k: (tuple(v) if isinstance(v, list) else v) for k, v in spec.items() if k in POCKET_KEYS}
    return PocketGeometry(**kw)


def prepare_data(cfg):
    """(train, test) for the configured dataset, standardized if requested."""
    spec = cfg["dataset"]
    if isinstance(spec, str):
        spec = {"name": spec}
    data_seed, split_seed, _, _ = _seeds(cfg["seed"])
    name = spec.get("name")
    if name == "pocket":
        g = _pocket_geometry(spec)
        X, y = g.training_set()
        train = Dataset("pocket", X, y, ("x1", "x2"))
        test = Dataset("pocket", np.asarray([g.x], dtype=float), np.zeros(1, np.int64),
                       ("x1", "x2"))
        return train, test
    if name == "half_moons":
        ds = make_half_moons(int(spec.get("n", 500)), float(spec.get("noise", 0.2)), data_seed)
    elif "path" in spec:
        if "target" not in spec:
            raise ConfigError("a CSV dataset needs a 'target' column")
        ds = load_csv(spec["path"], spec["target"], spec.get("rule", "as_is"),
                      spec.get("features"), spec.get("exclude", ()), name=name)
    elif name:
        ds = load_dataset(name)
    else:
        raise ConfigError("dataset needs a 'name' or a 'path'")
    train, test = split(ds, cfg["train_frac"], split_seed)
    if cfg["standardize"]:
        train, test, _ = standardize(train, test)
    return train, test


def train_model(cfg, train):
    spec = dict(cfg["model"])
    family = spec.pop("family")
    if family == "pocket":
        ds = cfg["dataset"] if isinstance(cfg["dataset"], dict) else {}
        return PocketClassifier(_pocket_geometry({**ds, **spec}))
    if family not in TRAINERS:
        raise ConfigError(f"unknown model family {family!r} (known: {sorted(TRAINERS) + ['pocket']})")
    if family in RANDOMIZED:
        spec["rng"] = _seeds(cfg["seed"])[2]
    try:
        return TRAINERS[family](train.X, train.y, **spec)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {family}: {exc}") from None


def make_generators(cfg):
    gens = {}
    for g in cfg["generators"]:
        if isinstance(g, str):
            g = {"name": g}
        g = dict(g)
        name = g.pop("name", None)
        label = g.pop("label", name)
        if name == "fixed":
            if "point" not in g:
                raise ConfigError("the fixed generator needs a 'point'")
            gens[label] = fixed_point(g["point"])
            continue
        try:
            gens[label] = get_generator(name, **g)
        except KeyError as exc:
            raise ConfigError(str(exc)) from None
    if not gens:
        raise ConfigError("no generators configured")
    return gens


# output helpers

def _provenance(cfg):
    return {"config": cfg, "seed": cfg["seed"], "version": __version__}


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _write_csv(path, header, rows, cfg, footer=None):
    buf = io.StringIO()
    buf.write("# " + json.dumps(_provenance(cfg), sort_keys=True, separators=(",", ":")) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    if footer:
        buf.write("# " + footer + "\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_model(args, out):
    path = Path(args.model) if getattr(args, "model", None) else out / "model.json"
    if not path.exists():
        raise DataError(f"model file {path} not found (run 'cf-audit train' first)")
    try:
        return load_model(path)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot load model {path}: {exc}") from None


def _test_points(cfg, test):
    m = cfg["max_instances"]
    return test.X if m is None else test.X[: int(m)]


# commands

def cmd_train(cfg, args):
    out = _out_dir(args)
    train, test = prepare_data(cfg)
    model = train_model(cfg, train)
    meta = _provenance(cfg)
    meta["features"] = list(train.feature_names)
    if train.scaler is not None:
        meta["scaler"] = train.scaler.to_dict()
    save_model(model, out / "model.json", meta)
    metrics = {
        "train_accuracy": float(np.mean(model.predict(train.X) == train.y)),
        "test_accuracy": float(np.mean(model.predict(test.X) == test.y)),
        "n_train": len(train), "n_test": len(test),
        **_provenance(cfg),
    }
    _write_json(out / "train_metrics.json", metrics)
    print(f"test accuracy {metrics['test_accuracy']:.4f} -> {out / 'model.json'}")
    return model


def cmd_lra(cfg, args, model=None):
    out = _out_dir(args)
    train, test = prepare_data(cfg)
    model = model or _load_model(args, out)
    res = aggregate(_test_points(cfg, test), model, train, cfg["n"], cfg["runs"],
                    _seeds(cfg["seed"])[3])
    header = ["instance", "status", "S", "R", "n_J", "n_U", "epsilon", "layers", "empty_balls"]
    if cfg["timing"]:
        header.append("wall_time")
    rows = []
    for r in res.instances:
        row = [r.instance, r.status, r.S, r.R, r.n_J, r.n_U, r.epsilon, r.layers, r.empty_balls]
        if cfg["timing"]:
            row.append(r.wall_time)
        rows.append([_fmt(v) for v in row])
    summary = {"S_bar": res.S_bar, "R_bar": res.R_bar, "R_std": res.R_std,
               "n_instances": res.n_instances, "n_skipped": res.n_skipped}
    _write_csv(out / "lra_instances.csv", header, rows, cfg,
               footer="aggregate " + json.dumps(summary, sort_keys=True))
    _write_json(out / "lra_summary.json", {**summary, **_provenance(cfg)})
    print(f"S_bar {res.S_bar:.4f}  R_bar {res.R_bar:.4f} +- {res.R_std:.4f}  "
          f"({res.n_instances} instances)")
    return res


def cmd_ve(cfg, args, model=None):
    out = _out_dir(args)
    train, test = prepare_data(cfg)
    model = model or _load_model(args, out)
    gens = make_generators(cfg)
    name = cfg["dataset"]["name"] if isinstance(cfg["dataset"], dict) else cfg["dataset"]
    bench = ve_benchmark(_test_points(cfg, test), model, train, gens, cfg["threshold"],
                         cfg["n"], cfg["runs"], _seeds(cfg["seed"])[3], dataset=name or "")
    long_rows = [[r.dataset, r.generator, r.instances_kept, _fmt(r.J_bar), _fmt(r.failure_rate),
                  _fmt(r.mean_queries)] for r in bench.rows]
    _write_csv(out / "ve_benchmark.csv",
               ["dataset", "generator", "instances_kept", "J_bar", "failure_rate", "mean_queries"],
               long_rows, cfg, footer="empty" if bench.empty else None)
    wide = [name or "", len(bench.kept)] + [_fmt(r.J_bar) for r in bench.rows]
    _write_csv(out / "ve_table.csv", ["dataset", "instances_kept"] + [r.generator for r in bench.rows],
               [wide], cfg, footer="empty" if bench.empty else None)
    if bench.empty:
        print("no instance passed the risk filter")
    for r in bench.rows:
        print(f"{r.generator:>14}  J_bar {r.J_bar:.3f}  kept {r.instances_kept}")
    return bench


def cmd_grid(cfg, args, model=None):
    out = _out_dir(args)
    train, test = prepare_data(cfg)
    if train.dim != 2:
        raise ConfigError(f"grid needs a 2-D model, this dataset has {train.dim} features")
    model = model or _load_model(args, out)
    res = int(cfg["grid"].get("resolution", 100))
    if res < 2:
        raise ConfigError("grid resolution must be >= 2")
    bounds = cfg["grid"].get("bounds")
    if bounds is None:
        X = np.vstack([train.X, test.X])
        lo, hi = X.min(axis=0), X.max(axis=0)
        pad = 0.1 * (hi - lo)
        bounds = [lo[0] - pad[0], hi[0] + pad[0], lo[1] - pad[1], hi[1] + pad[1]]
    xs = np.linspace(bounds[0], bounds[1], res)
    ys = np.linspace(bounds[2], bounds[3], res)
    gx, gy = np.meshgrid(xs, ys)
    P = np.column_stack([gx.ravel(), gy.ravel()])
    labels = model.predict(P)
    rows = [[_fmt(p[0]), _fmt(p[1]), int(lab)] for p, lab in zip(P, labels)]
    _write_csv(out / "grid.csv", ["x", "y", "label"], rows, cfg)
    print(f"{len(rows)} grid nodes -> {out / 'grid.csv'}")


def cmd_audit(cfg, args):
    model = cmd_train(cfg, args)
    cmd_lra(cfg, args, model)
    cmd_ve(cfg, args, model)


def cmd_fetch(args):
    dest = fetch(args.url, args.sha256, args.dest)
    print(f"verified -> {dest}")


def build_parser():
    p = argparse.ArgumentParser(prog="cf-audit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("train", "lra", "ve", "grid", "audit"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--n", type=int, help="ball samples per assessment")
        sp.add_argument("--runs", type=int)
        sp.add_argument("--threshold", type=float, help="R_x filter for ve")
        sp.add_argument("--out", default="cf_audit_out")
        sp.add_argument("--timing", action="store_true", help="add wall-clock columns")
        if name in ("lra", "ve", "grid"):
            sp.add_argument("--model", help="model file (default OUT/model.json)")
    fp = sub.add_parser("fetch")
    fp.add_argument("--url", required=True)
    fp.add_argument("--sha256", required=True)
    fp.add_argument("--dest", required=True)
    return p


COMMANDS = {"train": cmd_train, "lra": cmd_lra, "ve": cmd_ve, "grid": cmd_grid,
            "audit": cmd_audit}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "fetch":
            cmd_fetch(args)
            return EXIT_OK
        cfg = build_config(args)
        COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NoAnchorError, NoCounterfactualError, AuditError, ValueError) as exc:
        print(f"audit error: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
