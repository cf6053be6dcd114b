"""Dataset schema, CSV ingestion, preprocessing, splitting, synthetic data.

Conventions:
  * categorical vocabularies reserve index 0 for values unseen at fit time,
    so inference never fails on a new category;
  * standardization statistics are fitted on the training split only and
    applied unchanged to the test split;
  * splits are stratified by class so rare-class evaluation stays stable.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError

log = logging.getLogger(__name__)

UNKNOWN_VALUE = "<unk>"


@dataclass
class CategoricalField:
    name: str
    values: list[str]  # index i+1 encodes values[i]; 0 is reserved for unseen

    @property
    def vocab_size(self) -> int:
        return len(self.values) + 1

    def encode(self, value: str) -> int:
        if not hasattr(self, "_index"):
            self._index = {v: i + 1 for i, v in enumerate(self.values)}
        return self._index.get(value, 0)

    def decode(self, index: int) -> str:
        return UNKNOWN_VALUE if index == 0 else self.values[index - 1]


@dataclass
class NumericalField:
    name: str
    mean: float = 0.0
    std: float = 1.0


@dataclass
class FeatureSchema:
    categorical_fields: list[CategoricalField]
    numerical_fields: list[NumericalField]
    labels: list[str]

    def __post_init__(self):
        names = [f.name for f in self.categorical_fields]
        names += [f.name for f in self.numerical_fields]
        if len(set(names)) != len(names):
            raise DataError(f"duplicate field names in schema: {sorted(names)}")
        for f in self.numerical_fields:
            if not f.std > 0:
                raise DataError(f"numerical field {f.name!r} has std {f.std} <= 0")

    @property
    def n_classes(self) -> int:
        return len(self.labels)

    def label_index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise DataError(f"unknown label {label!r}; known: {self.labels}")

    def to_dict(self) -> dict:
        return {
            "categorical": [
                {"name": f.name, "values": list(f.values)}
                for f in self.categorical_fields
            ],
            "numerical": [
                {"name": f.name, "mean": f.mean, "std": f.std}
                for f in self.numerical_fields
            ],
            "labels": list(self.labels),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        return cls(
            categorical_fields=[
                CategoricalField(f["name"], list(f["values"]))
                for f in d["categorical"]
            ],
            numerical_fields=[
                NumericalField(f["name"], f["mean"], f["std"])
                for f in d["numerical"]
            ],
            labels=list(d["labels"]),
        )


@dataclass
class Dataset:
    categorical: np.ndarray  # int64 [N x C]
    numerical: np.ndarray  # float64 [N x M]
    labels: np.ndarray  # int64 [N]
    schema: FeatureSchema

    @property
    def n(self) -> int:
        return len(self.labels)

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(
            self.categorical[idx], self.numerical[idx], self.labels[idx], self.schema
        )


@dataclass
class Batch:
    categorical: np.ndarray  # int64 [B x C]
    numerical: np.ndarray  # float64 [B x M]
    labels: np.ndarray  # int64 [B]

    @property
    def size(self) -> int:
        return len(self.labels)


@dataclass
class SyntheticSpec:
    n_classes: int = 5
    samples_per_class: list[int] = field(default_factory=lambda: [200] * 5)
    n_categorical: int = 8
    vocab_size: int = 12
    n_numerical: int = 6
    class_separation: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if len(self.samples_per_class) != self.n_classes:
            raise DataError(
                f"samples_per_class has {len(self.samples_per_class)} entries "
                f"for {self.n_classes} classes"
            )
        if any(s < 1 for s in self.samples_per_class):
            raise DataError("every class needs at least one sample")
        if self.class_separation < 0:
            raise DataError("class_separation must be >= 0")


# -- CSV ingestion --------------------------------------------------------


def _parse_rows(path: str, label_column: str, schema_hints: dict | None):
    """Read the CSV, infer column types, and drop rows with bad numerics.

    Returns (cat_names, num_names, cat_rows, num_matrix, label_values).
    """
    schema_hints = schema_hints or {}
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}")
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty")
        rows = [row for row in reader if row]
    if label_column not in header:
        raise DataError(
            f"label column {label_column!r} not in header {header}"
        )
    if not rows:
        raise DataError(f"{path} has a header but no data rows")

    label_pos = header.index(label_column)
    feature_pos = [i for i in range(len(header)) if i != label_pos]

    # A column is numerical when every non-empty cell parses as a float,
    # unless a hint says otherwise. Empty cells in numerical columns reject
    # the row later.
    def is_numeric(col: int) -> bool:
        hint = schema_hints.get(header[col])
        if hint in ("categorical", "numerical"):
            return hint == "numerical"
        seen_value = False
        for row in rows:
            cell = row[col].strip() if col < len(row) else ""
            if not cell:
                continue
            seen_value = True
            try:
                float(cell)
            except ValueError:
                return False
        return seen_value

    num_pos = [i for i in feature_pos if is_numeric(i)]
    cat_pos = [i for i in feature_pos if i not in num_pos]

    cat_rows: list[list[str]] = []
    num_rows: list[list[float]] = []
    label_values: list[str] = []
    rejected: list[int] = []
    for r, row in enumerate(rows):
        if len(row) != len(header):
            rejected.append(r)
            continue
        try:
            numeric = [float(row[i]) for i in num_pos]
        except ValueError:
            rejected.append(r)
            continue
        if any(not np.isfinite(v) for v in numeric):
            rejected.append(r)
            continue
        cat_rows.append([row[i].strip() for i in cat_pos])
        num_rows.append(numeric)
        label_values.append(row[label_pos].strip())
    if rejected:
        log.warning(
            "%s: rejected %d rows with unparseable numerics (first indices: %s)",
            path, len(rejected), rejected[:10],
        )
    if not label_values:
        raise DataError(f"{path}: every row was rejected")
    return (
        [header[i] for i in cat_pos],
        [header[i] for i in num_pos],
        cat_rows,
        np.array(num_rows, dtype=np.float64).reshape(len(num_rows), len(num_pos)),
        label_values,
    )


def _fit_schema(cat_names, num_names, cat_rows, num_matrix, label_values,
                fit_idx: np.ndarray) -> FeatureSchema:
    """Fit vocabularies, standardization stats and label set on `fit_idx` rows."""
    cat_fields = []
    for c, name in enumerate(cat_names):
        seen: dict[str, None] = {}
        for i in fit_idx:
            seen.setdefault(cat_rows[i][c])
        cat_fields.append(CategoricalField(name, list(seen)))
    num_fields = []
    for m, name in enumerate(num_names):
        col = num_matrix[fit_idx, m]
        std = float(col.std())
        num_fields.append(
            NumericalField(name, float(col.mean()), std if std > 0 else 1.0)
        )
    labels: dict[str, None] = {}
    for i in fit_idx:
        labels.setdefault(label_values[i])
    return FeatureSchema(cat_fields, num_fields, sorted(labels))


def _encode(cat_rows, num_matrix, label_values, schema: FeatureSchema,
            idx: np.ndarray) -> Dataset:
    cat = np.zeros((len(idx), len(schema.categorical_fields)), dtype=np.int64)
    for j, i in enumerate(idx):
        for c, f in enumerate(schema.categorical_fields):
            cat[j, c] = f.encode(cat_rows[i][c])
    means = np.array([f.mean for f in schema.numerical_fields])
    stds = np.array([f.std for f in schema.numerical_fields])
    num = (num_matrix[idx] - means) / stds if len(means) else num_matrix[idx]
    labels = np.array([schema.label_index(label_values[i]) for i in idx],
                      dtype=np.int64)
    return Dataset(cat, num, labels, schema)


def load_csv(path: str, label_column: str, schema_hints: dict | None = None,
             schema: FeatureSchema | None = None):
    """Load a CSV into an encoded Dataset.

    With `schema` given (inference/eval path) the file is encoded with the
    existing vocabularies and statistics; unseen categorical values map to
    index 0. Without it, vocabularies and statistics are fitted on the whole
    file — for leakage-safe training use ``load_csv_split``.
    """
    if schema is not None:
        # force the schema's column typing so e.g. numeric-looking
        # categorical values stay categorical
        schema_hints = dict(schema_hints or {})
        for f in schema.categorical_fields:
            schema_hints.setdefault(f.name, "categorical")
        for f in schema.numerical_fields:
            schema_hints.setdefault(f.name, "numerical")
    parsed = _parse_rows(path, label_column, schema_hints)
    cat_names, num_names, cat_rows, num_matrix, label_values = parsed
    all_idx = np.arange(len(label_values))
    if schema is None:
        schema = _fit_schema(*parsed, all_idx)
    else:
        want_cat = [f.name for f in schema.categorical_fields]
        want_num = [f.name for f in schema.numerical_fields]
        if sorted(want_cat) != sorted(cat_names) or \
                sorted(want_num) != sorted(num_names):
            missing = set(want_cat + want_num) - set(cat_names + num_names)
            extra = set(cat_names + num_names) - set(want_cat + want_num)
            raise DataError(
                f"schema mismatch: missing columns {sorted(missing)}, "
                f"unexpected columns {sorted(extra)}"
            )
        # reorder file columns into schema order
        cat_perm = [cat_names.index(n) for n in want_cat]
        num_perm = [num_names.index(n) for n in want_num]
        cat_rows = [[row[i] for i in cat_perm] for row in cat_rows]
        num_matrix = num_matrix[:, num_perm]
    return _encode(cat_rows, num_matrix, label_values, schema, all_idx), schema


def load_csv_split(path: str, label_column: str, train_fraction: float,
                   seed: int, schema_hints: dict | None = None):
    """Load, stratified-split on raw rows, fit the schema on train rows only,
    then encode both splits. Returns (train, test, schema)."""
    parsed = _parse_rows(path, label_column, schema_hints)
    cat_names, num_names, cat_rows, num_matrix, label_values = parsed
    raw_labels = np.unique(label_values, return_inverse=True)[1]
    train_idx, test_idx = _stratified_indices(raw_labels, train_fraction, seed)
    schema = _fit_schema(*parsed, train_idx)
    train = _encode(cat_rows, num_matrix, label_values, schema, train_idx)
    test = _encode(cat_rows, num_matrix, label_values, schema, test_idx)
    return train, test, schema


# -- splitting ------------------------------------------------------------


def _stratified_indices(labels: np.ndarray, train_fraction: float, seed: int):
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"train_fraction must be in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    train_parts, test_parts = [], []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if len(idx) < 2:
            log.warning(
                "class %d has %d sample(s); assigning to train without a "
                "test counterpart", cls, len(idx),
            )
            train_parts.append(idx)
            continue
        idx = rng.permutation(idx)
        n_train = int(round(train_fraction * len(idx)))
        n_train = min(max(n_train, 1), len(idx) - 1)
        train_parts.append(idx[:n_train])
        test_parts.append(idx[n_train:])
    train_idx = np.sort(np.concatenate(train_parts))
    test_idx = np.sort(np.concatenate(test_parts)) if test_parts else \
        np.empty(0, dtype=np.int64)
    return train_idx, test_idx


def split(ds: Dataset, train_fraction: float, seed: int):
    """Stratified train/test split of an encoded dataset."""
    train_idx, test_idx = _stratified_indices(ds.labels, train_fraction, seed)
    return ds.subset(train_idx), ds.subset(test_idx)


def standardize(train: Dataset, test: Dataset | None = None):
    """Fit per-column mean/std on `train`, transform train (and test).

    Returns datasets whose schema carries the fitted statistics; constant
    columns get std 1 so the transform stays invertible.
    """
    if train.numerical.shape[1] == 0:
        return (train, test) if test is not None else (train, None)
    means = train.numerical.mean(axis=0)
    stds = train.numerical.std(axis=0)
    stds = np.where(stds > 0, stds, 1.0)
    num_fields = [
        replace(f, mean=float(mu), std=float(sd))
        for f, mu, sd in zip(train.schema.numerical_fields, means, stds)
    ]
    schema = replace(train.schema, numerical_fields=num_fields)

    def transform(ds: Dataset) -> Dataset:
        return Dataset(
            ds.categorical, (ds.numerical - means) / stds, ds.labels, schema
        )

    return transform(train), (transform(test) if test is not None else None)


def destandardize(ds: Dataset) -> Dataset:
    """Invert `standardize` using the statistics carried by the schema."""
    means = np.array([f.mean for f in ds.schema.numerical_fields])
    stds = np.array([f.std for f in ds.schema.numerical_fields])
    if len(means) == 0:
        return ds
    return Dataset(ds.categorical, ds.numerical * stds + means, ds.labels, ds.schema)


# -- synthetic data -------------------------------------------------------


def generate_synthetic(spec: SyntheticSpec):
    """Draw an imbalanced synthetic dataset with a tunable difficulty knob.

    Each class gets a Gaussian mean of norm `class_separation` for the
    numerical features and a preferred symbol per categorical field drawn
    with probability class_separation/(1+class_separation) (uniform noise
    otherwise). Separation 0 therefore carries no class signal at all.
    Numerical values are raw (not standardized); run `standardize` after
    splitting. Deterministic given spec.seed.
    """
    rng = np.random.default_rng(spec.seed)
    n_total = sum(spec.samples_per_class)
    centers = np.zeros((spec.n_classes, spec.n_numerical))
    if spec.n_numerical > 0 and spec.class_separation > 0:
        directions = rng.normal(size=(spec.n_classes, spec.n_numerical))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        centers = spec.class_separation * directions
    preferred = rng.integers(
        0, spec.vocab_size, size=(spec.n_classes, spec.n_categorical)
    )
    bias = spec.class_separation / (1.0 + spec.class_separation)

    cat = np.zeros((n_total, spec.n_categorical), dtype=np.int64)
    num = np.zeros((n_total, spec.n_numerical))
    labels = np.zeros(n_total, dtype=np.int64)
    row = 0
    for cls, count in enumerate(spec.samples_per_class):
        sl = slice(row, row + count)
        labels[sl] = cls
        if spec.n_numerical > 0:
            num[sl] = centers[cls] + rng.normal(size=(count, spec.n_numerical))
        uniform = rng.integers(0, spec.vocab_size,
                               size=(count, spec.n_categorical))
        take_pref = rng.random(size=(count, spec.n_categorical)) < bias
        cat[sl] = np.where(take_pref, preferred[cls], uniform)
        row += count
    perm = rng.permutation(n_total)
    cat, num, labels = cat[perm], num[perm], labels[perm]

    schema = FeatureSchema(
        categorical_fields=[
            CategoricalField(f"cat_{c}", [f"v{j}" for j in range(spec.vocab_size)])
            for c in range(spec.n_categorical)
        ],
        numerical_fields=[
            NumericalField(f"num_{m}") for m in range(spec.n_numerical)
        ],
        labels=[f"class_{k}" for k in range(spec.n_classes)],
    )
    # symbol j encodes to index j+1 (0 stays reserved for unseen values)
    return Dataset(cat + 1, num, labels, schema), schema


def write_csv(ds: Dataset, path: str, label_column: str = "label") -> None:
    """Write a dataset back to CSV using the schema's value mappings."""
    schema = ds.schema
    header = [f.name for f in schema.categorical_fields] + \
             [f.name for f in schema.numerical_fields] + [label_column]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(ds.n):
            row = [
                f.decode(int(ds.categorical[i, c]))
                for c, f in enumerate(schema.categorical_fields)
            ]
            row += [repr(float(v)) for v in ds.numerical[i]]
            row.append(schema.labels[int(ds.labels[i])])
            writer.writerow(row)


# -- batching -------------------------------------------------------------


def iterate_batches(ds: Dataset, batch_size: int, shuffle_seed: int | None = None):
    """Yield Batches covering every sample exactly once; final batch may be
    short. Shuffles when a seed is given."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    order = np.arange(ds.n)
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(order)
    for start in range(0, ds.n, batch_size):
        idx = order[start:start + batch_size]
        yield Batch(ds.categorical[idx], ds.numerical[idx], ds.labels[idx])
