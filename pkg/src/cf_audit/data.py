"""Datasets: synthetic half-moons, CSV ingestion, splits and standardization."""
from __future__ import annotations

import csv
import hashlib
import json
import os
import shutil
import urllib.request
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

DATA_ENV = "CF_AUDIT_DATA_DIR"
BUNDLED_DIR = Path(__file__).parent / "datasets"
_MISSING = {"", "na", "nan", "null", "none"}


class DataError(Exception):
    pass


@dataclass(frozen=True)
class Standardization:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.std

    def inverse(self, X):
        return np.asarray(X, dtype=float) * self.std + self.mean

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}


@dataclass(frozen=True)
class Dataset:
    name: str
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple
    scaler: Standardization | None = None
    info: dict = field(default_factory=dict)

    def __len__(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]

    def subset(self, idx):
        return replace(self, X=self.X[idx], y=self.y[idx])


def make_half_moons(n=1000, noise_std=0.2, rng=None, name="half_moons") -> Dataset:
    """Two interleaving unit half-circles, labels 0 (upper) and 1 (lower)."""
    if n < 2:
        raise ValueError("half-moons needs n >= 2")
    rng = np.random.default_rng(rng)
    n0 = n - n // 2
    n1 = n // 2
    t0 = rng.uniform(0.0, np.pi, n0)
    t1 = rng.uniform(0.0, np.pi, n1)
    upper = np.column_stack([np.cos(t0), np.sin(t0)])
    lower = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    X = np.vstack([upper, lower])
    if noise_std > 0:
        X = X + rng.normal(0.0, noise_std, X.shape)
    y = np.concatenate([np.zeros(n0, np.int64), np.ones(n1, np.int64)])
    order = rng.permutation(n)
    return Dataset(name, X[order], y[order], ("x1", "x2"),
                   info={"generator": "half_moons", "n": n, "noise_std": noise_std})


def _binarize(raw, rule, column):
    if rule == "as_is":
        try:
            vals = np.array([int(float(v)) for v in raw])
        except ValueError as exc:
            raise DataError(f"target column {column!r}: {exc}") from None
        if not set(np.unique(vals)) <= {0, 1}:
            raise DataError(f"target column {column!r} is not a 0/1 flag")
        return vals.astype(np.int64)
    if rule.startswith("equals:"):
        return np.array([v == rule[len("equals:"):] for v in raw], dtype=np.int64)
    try:
        vals = np.array([float(v) for v in raw])
    except ValueError as exc:
        raise DataError(f"target column {column!r}: {exc}") from None
    if rule == "median":
        return (vals > np.median(vals)).astype(np.int64)
    if rule.startswith("gt:"):
        return (vals > float(rule[3:])).astype(np.int64)
    raise DataError(f"unknown target rule {rule!r}")


def load_csv(path, target, rule="as_is", features=None, exclude=(), name=None) -> Dataset:
    """Read a header-row CSV into a Dataset.

    Feature columns default to every column except the target and `exclude`.
    Rows with a missing feature or target are dropped and counted in
    info["dropped_rows"]; any other unparseable feature cell is an error.
    Target rules: "as_is" (0/1 flag), "median" (value > median),
    "gt:<v>", "equals:<string>".
    """
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: empty file")
    header = rows[0]
    if target not in header:
        raise DataError(f"{path}: target column {target!r} not found")
    if features is None:
        features = [c for c in header if c != target and c not in set(exclude)]
    # some files repeat column names; the first occurrence wins
    col = {}
    for k, c in enumerate(header):
        col.setdefault(c, k)
    missing_cols = [c for c in features if c not in col]
    if missing_cols:
        raise DataError(f"{path}: feature columns not found: {missing_cols}")
    fidx = [col[c] for c in features]
    tidx = col[target]

    X, raw_target, dropped = [], [], 0
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataError(f"{path}: line {line_no} has {len(row)} fields, expected {len(header)}")
        cells = [row[k].strip() for k in fidx]
        t = row[tidx].strip()
        if t.lower() in _MISSING or any(c.lower() in _MISSING for c in cells):
            dropped += 1
            continue
        values = []
        for c, cname in zip(cells, features):
            try:
                values.append(float(c))
            except ValueError:
                raise DataError(f"{path}: line {line_no}, column {cname!r}: "
                                f"non-numeric value {c!r}") from None
        X.append(values)
        raw_target.append(t)
    if not X:
        raise DataError(f"{path}: no complete rows")
    y = _binarize(raw_target, rule, target)
    return Dataset(name or path.stem, np.array(X, dtype=float), y, tuple(features),
                   info={"path": str(path), "target": target, "rule": rule,
                         "dropped_rows": dropped})


def data_dir(explicit=None) -> Path:
    if explicit is not None:
        return Path(explicit)
    env = os.environ.get(DATA_ENV)
    return Path(env) if env else BUNDLED_DIR


def read_manifest(directory=None) -> dict:
    directory = data_dir(directory)
    path = directory / "manifest.json"
    if not path.exists():
        path = BUNDLED_DIR / "manifest.json"
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_dataset(name, directory=None) -> Dataset:
    """Load a manifest-registered dataset (boston, recidivism, iris2d, ...)."""
    directory = data_dir(directory)
    manifest = read_manifest(directory)
    if name not in manifest:
        raise DataError(f"dataset {name!r} not in manifest (known: {sorted(manifest)})")
    entry = manifest[name]
    ds = load_csv(directory / entry["path"], entry["target"], entry.get("rule", "as_is"),
                  entry.get("features"), entry.get("exclude", ()), name=name)
    return replace(ds, info={**ds.info, "manifest": entry})


def split(dataset: Dataset, train_frac=0.7, rng=None):
    n = len(dataset)
    n_train = int(round(train_frac * n))
    if n_train < 1 or n_train >= n:
        raise DataError(f"split of {n} rows at {train_frac} leaves an empty side")
    order = np.random.default_rng(rng).permutation(n)
    return dataset.subset(order[:n_train]), dataset.subset(order[n_train:])


def standardize(train: Dataset, test: Dataset | None = None):
    """Z-score with train-only statistics; constant columns keep std 1."""
    mean = train.X.mean(axis=0)
    std = train.X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    params = Standardization(mean, std)
    tr = replace(train, X=params.transform(train.X), scaler=params)
    te = None if test is None else replace(test, X=params.transform(test.X), scaler=params)
    return tr, te, params


def fetch(url, sha256, dest):
    """Download `url` to `dest` and verify its SHA-256 before keeping it."""
    dest = Path(dest)
    tmp = dest.with_suffix(dest.suffix + ".part")
    with urllib.request.urlopen(url) as resp, open(tmp, "wb") as out:
        shutil.copyfileobj(resp, out)
    digest = hashlib.sha256(tmp.read_bytes()).hexdigest()
    if digest != sha256.lower():
        tmp.unlink()
        raise DataError(f"checksum mismatch for {url}: got {digest}")
    tmp.replace(dest)
    return dest
