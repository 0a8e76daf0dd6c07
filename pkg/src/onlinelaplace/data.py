"""Tabular dataset loading, reproducible train/val/test splits and standardisation.

Split permutations are drawn from numpy's Philox4x64 counter-based generator,
keyed by ``SeedSequence([seed, split_index])``, and consumed as raw 64-bit
words by an explicit Fisher-Yates shuffle, so index sets do not depend on
numpy's higher-level sampling algorithms.
"""

import configparser
import hashlib
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import MissingValue, ParseError, TooFewRows

DATA_ROOT_ENV = "ONLINELAPLACE_DATA"
MISSING_TOKENS = {"", "na", "nan", "?", "null", "none"}


@dataclass
class Dataset:
    name: str
    X: np.ndarray
    y: np.ndarray
    feature_names: list = field(default_factory=list)
    target_name: str = ""
    checksum: str = ""

    @property
    def n(self):
        return self.X.shape[0]


def _split_line(line, delimiter):
    if delimiter == "whitespace":
        return line.split()
    return [c.strip() for c in line.split(delimiter)]


def _detect_delimiter(first_line):
    if "," in first_line:
        return ","
    if ";" in first_line:
        return ";"
    return "whitespace"


def _to_float(tok):
    try:
        return float(tok)
    except ValueError:
        return None


def load_csv(path, target_column=-1, delimiter=None, name=None, drop_columns=()):
    """Read a numeric table; one column becomes the target.

    The delimiter is taken from the first non-empty line unless given: a comma
    wins, then a semicolon, otherwise runs of whitespace. The first line is a
    header when none of its cells parse as numbers. ``target_column`` and
    ``drop_columns`` accept header names or integer positions (negative ok).
    """
    path = Path(path)
    raw = path.read_bytes()
    lines = [ln for ln in raw.decode("utf-8").splitlines()]
    numbered = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip()]
    if not numbered:
        raise ParseError(f"{path}: file is empty")

    delimiter = delimiter or _detect_delimiter(numbered[0][1])
    if delimiter in ("whitespace", "space", "ws"):
        delimiter = "whitespace"

    header = None
    first = [c.strip().strip('"').strip("'") for c in _split_line(numbered[0][1], delimiter)]
    if all(_to_float(c) is None for c in first if c.lower() not in MISSING_TOKENS):
        header = first
        numbered = numbered[1:]

    rows = []
    width = None
    for lineno, line in numbered:
        cells = _split_line(line, delimiter)
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise ParseError(
                f"{path}:{lineno}: expected {width} columns, found {len(cells)}", row=lineno
            )
        vals = []
        for j, cell in enumerate(cells):
            tok = cell.strip().strip('"')
            if tok.lower() in MISSING_TOKENS:
                raise MissingValue(f"{path}:{lineno}: missing value in column {j + 1}", lineno, j + 1)
            v = _to_float(tok)
            if v is None or not math.isfinite(v):
                raise ParseError(
                    f"{path}:{lineno}: non-numeric cell {tok!r} in column {j + 1}", lineno, j + 1
                )
            vals.append(v)
        rows.append(vals)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    table = np.array(rows, dtype=np.float64)
    if header is None:
        header = [f"x{j}" for j in range(table.shape[1])]
    elif len(header) != table.shape[1]:
        raise ParseError(f"{path}: header has {len(header)} names but rows have {table.shape[1]}")

    def resolve(col):
        if isinstance(col, str) and not re.fullmatch(r"-?\d+", col):
            if col not in header:
                raise ParseError(f"{path}: no column named {col!r}")
            return header.index(col)
        idx = int(col)
        if not -table.shape[1] <= idx < table.shape[1]:
            raise ParseError(f"{path}: column index {idx} out of range")
        return idx % table.shape[1]

    t = resolve(target_column)
    dropped = {resolve(c) for c in drop_columns}
    keep = [j for j in range(table.shape[1]) if j != t and j not in dropped]
    return Dataset(
        name=name or path.stem,
        X=table[:, keep],
        y=table[:, t].copy(),
        feature_names=[header[j] for j in keep],
        target_name=header[t],
        checksum=hashlib.sha256(raw).hexdigest(),
    )


@dataclass(frozen=True)
class SplitSpec:
    seed: int = 0
    split_index: int = 0
    test_fraction: float = 0.10
    val_fraction: float = 0.10
    use_validation: bool = False


def split_sizes(n, spec):
    n_test = math.floor(spec.test_fraction * n)
    n_val = math.floor(spec.val_fraction * (n - n_test)) if spec.use_validation else 0
    return n - n_test - n_val, n_val, n_test


def permutation(n, seed, split_index):
    """Fisher-Yates shuffle of ``range(n)`` driven by Philox raw 64-bit outputs."""
    bitgen = np.random.Philox(np.random.SeedSequence([int(seed), int(split_index)]))
    raw = bitgen.random_raw(max(n - 1, 0))
    perm = np.arange(n)
    for k, i in enumerate(range(n - 1, 0, -1)):
        j = int(raw[k]) % (i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return perm


@dataclass
class Standardizer:
    feature_means: np.ndarray
    feature_stds: np.ndarray
    target_mean: float
    target_std: float
    constant_columns: np.ndarray

    @classmethod
    def fit(cls, X, y):
        means = X.mean(axis=0)
        stds = X.std(axis=0)
        const = stds <= 1e-12 * np.maximum(1.0, np.abs(means))
        stds = np.where(const, 1.0, stds)
        y_std = float(y.std())
        if y_std <= 0:
            y_std = 1.0
        return cls(means, stds, float(y.mean()), y_std, const)

    def transform_X(self, X):
        return (X - self.feature_means) / self.feature_stds

    def transform_y(self, y):
        return (y - self.target_mean) / self.target_std

    def inverse_y(self, y):
        return y * self.target_std + self.target_mean


@dataclass
class Split:
    """Standardised train/val/test arrays plus the statistics that produced them."""

    X_train: np.ndarray
    y_train: np.ndarray
    X_val: np.ndarray = None
    y_val: np.ndarray = None
    X_test: np.ndarray = None
    y_test: np.ndarray = None
    scaler: Standardizer = None
    indices: dict = field(default_factory=dict)

    @property
    def target_std(self):
        return 1.0 if self.scaler is None else self.scaler.target_std

    @property
    def has_validation(self):
        return self.X_val is not None and len(self.X_val) > 0


def make_split(ds, spec):
    n = ds.n
    n_train, n_val, n_test = split_sizes(n, spec)
    if n_train < 1 or n_test < 1 or (spec.use_validation and n_val < 1):
        raise TooFewRows(f"{ds.name}: {n} rows give train/val/test sizes {n_train}/{n_val}/{n_test}")
    perm = permutation(n, spec.seed, spec.split_index)
    test_idx = np.sort(perm[:n_test])
    val_idx = np.sort(perm[n_test : n_test + n_val])
    train_idx = np.sort(perm[n_test + n_val :])

    scaler = Standardizer.fit(ds.X[train_idx], ds.y[train_idx])

    def view(idx):
        return scaler.transform_X(ds.X[idx]), scaler.transform_y(ds.y[idx])

    X_tr, y_tr = view(train_idx)
    X_te, y_te = view(test_idx)
    X_va, y_va = view(val_idx) if n_val else (None, None)
    return Split(
        X_tr, y_tr, X_va, y_va, X_te, y_te, scaler,
        indices={"train": train_idx, "val": val_idx, "test": test_idx},
    )


@dataclass(frozen=True)
class ManifestEntry:
    name: str
    path: Path
    target: str = "-1"
    delimiter: str = None
    drop: tuple = ()


def data_root():
    return Path(os.environ.get(DATA_ROOT_ENV, "data"))


def read_manifest(path):
    """Parse an INI-style dataset manifest.

    Each section names a dataset; keys are ``path`` (relative paths resolve
    against the manifest's directory), ``target`` (name or index), and the
    optional ``delimiter`` (``,`` ``;`` or ``whitespace``) and ``drop``
    (comma-separated columns).
    """
    path = Path(path)
    cp = configparser.ConfigParser(interpolation=None)
    with open(path, encoding="utf-8") as fh:
        cp.read_file(fh)
    entries = {}
    for name in cp.sections():
        sec = cp[name]
        p = Path(sec["path"])
        if not p.is_absolute():
            p = path.parent / p
        drop = tuple(c.strip() for c in sec.get("drop", "").split(",") if c.strip())
        entries[name] = ManifestEntry(name, p, sec.get("target", "-1"), sec.get("delimiter"), drop)
    return entries


def load_dataset(name, manifest=None):
    manifest = Path(manifest) if manifest else data_root() / "datasets.ini"
    entries = read_manifest(manifest)
    if name not in entries:
        raise KeyError(f"dataset {name!r} not listed in {manifest}")
    e = entries[name]
    return load_csv(e.path, e.target, e.delimiter, name=name, drop_columns=e.drop)
