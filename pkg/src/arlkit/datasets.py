"""Dataset generation and ingestion.

Provides the four-component Gaussian mixture benchmark, a schema-driven
loader for delimited tabular files (UCI-style), attribute-correlation
diagnostics, and a binary container for caching prepared datasets.

All datasets are column-major: X is d x n, Y is p x n, S is q x n, and a
boolean train mask tags each column. Preprocessing statistics (z-scoring
means/stds, one-hot vocabularies) come from the training split only.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Dataset",
    "ColumnSpec",
    "TabularSchema",
    "gaussian_mixture",
    "load_tabular",
    "attribute_correlation",
    "input_attribute_correlation",
    "save_container",
    "load_container",
    "decode_categorical",
]

logger = logging.getLogger(__name__)

MIXTURE_MEANS = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]).T  # 2 x 4
MIXTURE_STD = 0.2


@dataclass
class Dataset:
    """Column-major data matrix with target/sensitive rows and split tags."""

    x: np.ndarray  # d x n
    y: np.ndarray  # p x n
    s: np.ndarray  # q x n
    feature_names: list[str]
    label_encodings: dict
    is_train: np.ndarray  # bool, length n
    target_kind: str  # "continuous" | "binary" | "onehot"
    sensitive_kind: str

    def __post_init__(self):
        n = self.x.shape[1]
        if self.y.shape[1] != n or self.s.shape[1] != n or self.is_train.shape[0] != n:
            raise ValueError("X, Y, S, and split tags must agree on sample count")
        for name, a in (("X", self.x), ("Y", self.y), ("S", self.s)):
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name} contains non-finite entries")

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def d(self) -> int:
        return self.x.shape[0]

    def train_arrays(self):
        m = self.is_train
        return self.x[:, m], self.y[:, m], self.s[:, m]

    def test_arrays(self):
        m = ~self.is_train
        return self.x[:, m], self.y[:, m], self.s[:, m]


def gaussian_mixture(n_train: int, n_test: int, seed: int) -> Dataset:
    """Sample the four-Gaussian benchmark with a binary color attribute.

    Components sit at (0,0), (0,1), (1,0), (1,1) with covariance 0.2^2 I.
    Color is uniform; red draws from components {1, 2, 3} and blue from
    {4, 2, 3}, both with probabilities (1/2, 1/4, 1/4). The target is
    reconstructing the input (Y = X) and S is the color row.
    """
    if n_train < 1 or n_test < 0:
        raise ValueError("need n_train >= 1 and n_test >= 0")
    n = n_train + n_test
    rng = np.random.default_rng(seed)
    color = rng.integers(0, 2, size=n)  # 0 red, 1 blue
    u = rng.random(n)
    own = np.where(color == 0, 0, 3)  # f1 for red, f4 for blue
    comp = np.where(u < 0.5, own, np.where(u < 0.75, 1, 2))
    x = MIXTURE_MEANS[:, comp] + MIXTURE_STD * rng.standard_normal((2, n))
    is_train = np.zeros(n, dtype=bool)
    is_train[:n_train] = True
    return Dataset(
        x=x,
        y=x.copy(),
        s=color[None, :].astype(np.float64),
        feature_names=["x1", "x2"],
        label_encodings={"sensitive": {"0": "red", "1": "blue"}},
        is_train=is_train,
        target_kind="continuous",
        sensitive_kind="binary",
    )


@dataclass(frozen=True)
class ColumnSpec:
    """One column of a delimited file.

    kind is one of continuous / categorical / target / sensitive. A binary
    target or sensitive column names its positive value; a numeric sensitive
    column may instead carry greater_than, encoding 1 where value > threshold.
    """

    name: str
    kind: str
    positive: str | None = None
    greater_than: float | None = None

    def __post_init__(self):
        if self.kind not in ("continuous", "categorical", "target", "sensitive"):
            raise ValueError(f"unknown column kind {self.kind!r} for {self.name!r}")


@dataclass
class TabularSchema:
    columns: list[ColumnSpec]
    delimiter: str = ","  # "," / ";" / "\t" / "whitespace"
    missing_values: tuple = ("?",)
    missing_policy: str = "drop"
    comment_prefix: str = "|"

    def __post_init__(self):
        kinds = [c.kind for c in self.columns]
        if kinds.count("target") != 1 or kinds.count("sensitive") != 1:
            raise ValueError("schema must designate exactly one target and one sensitive column")
        if self.missing_policy != "drop":
            raise ValueError(f"unsupported missing policy {self.missing_policy!r}")

    @classmethod
    def from_json(cls, path) -> "TabularSchema":
        with open(path, encoding="utf-8") as f:
            d = json.load(f)
        cols = [
            ColumnSpec(
                name=c["name"],
                kind=c["kind"],
                positive=c.get("positive"),
                greater_than=c.get("greater_than"),
            )
            for c in d["columns"]
        ]
        return cls(
            columns=cols,
            delimiter=d.get("delimiter", ","),
            missing_values=tuple(d.get("missing_values", ["?"])),
            missing_policy=d.get("missing_policy", "drop"),
            comment_prefix=d.get("comment_prefix", "|"),
        )


def _parse_rows(path, schema: TabularSchema) -> list[list[str]]:
    rows = []
    ncols = len(schema.columns)
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or (schema.comment_prefix and line.startswith(schema.comment_prefix)):
                continue
            if schema.delimiter == "whitespace":
                parts = line.split()
            else:
                parts = [p.strip() for p in line.split(schema.delimiter)]
            if len(parts) != ncols:
                raise ValueError(
                    f"{path}:{lineno}: expected {ncols} fields, got {len(parts)}"
                )
            rows.append(parts)
    return rows


def _drop_missing(rows: list[list[str]], schema: TabularSchema, path) -> list[list[str]]:
    missing = set(schema.missing_values)
    kept = [r for r in rows if not missing.intersection(r)]
    if len(kept) < len(rows):
        logger.info("%s: dropped %d rows with missing values", path, len(rows) - len(kept))
    return kept


def _encode_label(values: list[str], spec: ColumnSpec):
    """Encode a target/sensitive column as {0,1} row(s); strips a trailing
    period from tokens (UCI test files suffix labels with '.')."""
    values = [v.rstrip(".") for v in values]
    if spec.greater_than is not None:
        row = np.array([1.0 if float(v) > spec.greater_than else 0.0 for v in values])
        return row[None, :], {"rule": f"{spec.name} > {spec.greater_than}"}, "binary"
    vocab = sorted(set(values))
    if spec.positive is not None:
        positive = spec.positive.rstrip(".")
        if positive not in vocab:
            raise ValueError(f"positive value {positive!r} never occurs in column {spec.name!r}")
        row = np.array([1.0 if v == positive else 0.0 for v in values])
        return row[None, :], {"positive": positive, "vocabulary": vocab}, "binary"
    if len(vocab) == 2:
        positive = vocab[1]
        row = np.array([1.0 if v == positive else 0.0 for v in values])
        return row[None, :], {"positive": positive, "vocabulary": vocab}, "binary"
    index = {v: i for i, v in enumerate(vocab)}
    mat = np.zeros((len(vocab), len(values)))
    for j, v in enumerate(values):
        mat[index[v], j] = 1.0
    return mat, {"vocabulary": vocab}, "onehot"


def load_tabular(
    path,
    schema: TabularSchema,
    *,
    test_path=None,
    test_fraction: float = 0.3,
    split_seed: int = 0,
) -> Dataset:
    """Load a delimited file (plus optional separate test file) per a schema.

    Continuous features are z-scored with training-split statistics;
    categoricals are one-hot with vocabularies from the training split
    (unknown test-time categories map to an all-zero block, with a logged
    count); rows containing missing values are dropped. Without a test file,
    a deterministic seeded split holds out ``test_fraction`` of the rows.
    """
    rows = _drop_missing(_parse_rows(path, schema), schema, path)
    if test_path is not None:
        test_rows = _drop_missing(_parse_rows(test_path, schema), schema, test_path)
        is_train = np.concatenate([np.ones(len(rows), bool), np.zeros(len(test_rows), bool)])
        rows = rows + test_rows
    else:
        n = len(rows)
        n_test = int(round(n * test_fraction))
        perm = np.random.default_rng(split_seed).permutation(n)
        is_train = np.ones(n, dtype=bool)
        is_train[perm[:n_test]] = False
    if len(rows) < 2:
        raise ValueError(f"{path}: not enough usable rows")

    columns = {c.name: [r[i] for r in rows] for i, c in enumerate(schema.columns)}
    target_spec = next(c for c in schema.columns if c.kind == "target")
    sens_spec = next(c for c in schema.columns if c.kind == "sensitive")
    y, target_enc, target_kind = _encode_label(columns[target_spec.name], target_spec)
    s, sens_enc, sens_kind = _encode_label(columns[sens_spec.name], sens_spec)

    feature_blocks: list[np.ndarray] = []
    feature_names: list[str] = []
    vocabularies: dict[str, list[str]] = {}
    unknown_count = 0
    for col in schema.columns:
        vals = columns[col.name]
        if col.kind == "continuous":
            v = np.array([float(x) for x in vals])
            mu = v[is_train].mean()
            sd = v[is_train].std()
            if sd < 1e-12:
                sd = 1.0
            feature_blocks.append(((v - mu) / sd)[None, :])
            feature_names.append(col.name)
        elif col.kind == "categorical":
            vocab = sorted({vals[i] for i in range(len(vals)) if is_train[i]})
            vocabularies[col.name] = vocab
            index = {v: i for i, v in enumerate(vocab)}
            block = np.zeros((len(vocab), len(vals)))
            for j, v in enumerate(vals):
                i = index.get(v)
                if i is None:
                    unknown_count += 1
                else:
                    block[i, j] = 1.0
            feature_blocks.append(block)
            feature_names.extend(f"{col.name}={v}" for v in vocab)
    if unknown_count:
        logger.warning("%s: %d test-time category values unseen in training", path, unknown_count)

    return Dataset(
        x=np.vstack(feature_blocks),
        y=y,
        s=s,
        feature_names=feature_names,
        label_encodings={"target": target_enc, "sensitive": sens_enc, "categories": vocabularies},
        is_train=is_train,
        target_kind=target_kind,
        sensitive_kind=sens_kind,
    )


def attribute_correlation(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation of two attribute rows."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape or a.size < 2:
        raise ValueError("need two equal-length vectors of size >= 2")
    a = a - a.mean()
    b = b - b.mean()
    va, vb = float(a @ a), float(b @ b)
    if va <= 0.0 or vb <= 0.0:
        raise ValueError("zero-variance attribute")
    return float(a @ b / np.sqrt(va * vb))


def input_attribute_correlation(x: np.ndarray, s: np.ndarray) -> float:
    """First canonical correlation between the rows of X and a single attribute.

    Equals the maximal Pearson correlation of any linear projection of X with
    s: sqrt(c_xs^T C_xx^{-1} c_xs / var(s)). A singular input covariance is
    regularized by 1e-9 * trace on the diagonal.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    s = np.asarray(s, dtype=np.float64).ravel()
    n = s.size
    if x.shape[1] != n or n < 2:
        raise ValueError("X columns and s length must match, with n >= 2")
    xc = x - x.mean(axis=1, keepdims=True)
    sc = s - s.mean()
    var_s = float(sc @ sc) / n
    if var_s <= 0.0:
        raise ValueError("zero-variance attribute")
    cxx = xc @ xc.T / n
    cxs = xc @ sc / n
    try:
        sol = np.linalg.solve(cxx, cxs)
    except np.linalg.LinAlgError:
        cxx = cxx + 1e-9 * np.trace(cxx) * np.eye(cxx.shape[0])
        sol = np.linalg.solve(cxx, cxs)
    rho_sq = float(cxs @ sol) / var_s
    return float(np.sqrt(min(max(rho_sq, 0.0), 1.0)))


def save_container(ds: Dataset, path) -> None:
    """Dump a dataset to a single .npz container (arrays + JSON metadata)."""
    meta = {
        "feature_names": ds.feature_names,
        "label_encodings": ds.label_encodings,
        "target_kind": ds.target_kind,
        "sensitive_kind": ds.sensitive_kind,
    }
    np.savez(
        path,
        x=ds.x,
        y=ds.y,
        s=ds.s,
        is_train=ds.is_train,
        meta=np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8),
    )


def load_container(path) -> Dataset:
    with np.load(path) as z:
        meta = json.loads(bytes(z["meta"]).decode("utf-8"))
        return Dataset(
            x=z["x"],
            y=z["y"],
            s=z["s"],
            feature_names=list(meta["feature_names"]),
            label_encodings=meta["label_encodings"],
            is_train=z["is_train"].astype(bool),
            target_kind=meta["target_kind"],
            sensitive_kind=meta["sensitive_kind"],
        )


def decode_categorical(ds: Dataset, column: str) -> list[str]:
    """Invert the one-hot block of a categorical column back to its labels."""
    vocab = ds.label_encodings.get("categories", {}).get(column)
    if not vocab:
        raise KeyError(f"no categorical encoding recorded for column {column!r}")
    rows = [i for i, name in enumerate(ds.feature_names) if name.startswith(f"{column}=")]
    if len(rows) != len(vocab):
        raise ValueError(f"feature rows for {column!r} do not match its vocabulary")
    block = ds.x[rows, :]
    return [vocab[int(k)] for k in block.argmax(axis=0)]
