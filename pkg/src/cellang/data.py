"""Feature tables: CSV ingestion, stratified splitting, standardization and
a synthetic Gaussian stand-in for the private cell cohort."""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DataError

DEFAULT_LABELS = ("CD3", "CD20", "CD68", "Claudin1", "Negative")
DEFAULT_COUNTS = (138, 132, 177, 391, 3287)
FEATURES_PER_BLOCK = 7


@dataclass
class CellRecord:
    features: np.ndarray
    label: str


@dataclass
class Dataset:
    records: list
    concept_set: list
    standardization: tuple = None  # (mean, std) fitted on a training split
    _index: dict = field(default=None, repr=False, compare=False)

    def __len__(self):
        return len(self.records)

    def by_label(self, label):
        if self._index is None:
            self._index = {c: [] for c in self.concept_set}
            for r in self.records:
                self._index[r.label].append(r)
        return self._index[label]

    def feature_matrix(self):
        return np.stack([r.features for r in self.records])


@dataclass
class SyntheticSpec:
    n_per_class: tuple = DEFAULT_COUNTS
    labels: tuple = DEFAULT_LABELS
    class_separation: float = 5.0
    noise_sigma: float = 1.0
    seed: int = 0
    feature_dim: int = 28

    def __post_init__(self):
        if len(self.n_per_class) != len(self.labels):
            raise DataError("n_per_class and labels lengths differ")
        if any(n < 1 for n in self.n_per_class):
            raise DataError("all class counts must be positive")
        if self.noise_sigma <= 0:
            raise DataError("noise_sigma must be > 0")
        if self.class_separation < 0:
            raise DataError("class_separation must be >= 0")


def _feature_columns(n):
    return ["f%02d" % i for i in range(n)]


def load_table(path, concepts=None, feature_dim=None):
    """Read a `label,f00,...` CSV into a Dataset.

    When `concepts` is given, labels outside it are rejected; otherwise the
    concept set is the labels in order of first appearance.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("%s: empty file" % path)
        if not header or header[0] != "label":
            raise DataError("%s: first column must be 'label'" % path)
        n_feat = len(header) - 1
        if header[1:] != _feature_columns(n_feat):
            raise DataError("%s: feature columns must be f00..f%02d"
                            % (path, n_feat - 1))
        if feature_dim is not None and n_feat != feature_dim:
            raise DataError("%s: expected %d features, file has %d"
                            % (path, feature_dim, n_feat))
        records = []
        seen = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != n_feat + 1:
                raise DataError("%s: row %d has %d columns, expected %d"
                                % (path, lineno, len(row), n_feat + 1))
            label = row[0]
            if concepts is not None and label not in concepts:
                raise DataError("%s: row %d has unknown label %r"
                                % (path, lineno, label))
            try:
                feats = np.array([float(v) for v in row[1:]])
            except ValueError:
                raise DataError("%s: row %d has a non-numeric feature"
                                % (path, lineno))
            if not np.all(np.isfinite(feats)):
                raise DataError("%s: row %d has a non-finite feature"
                                % (path, lineno))
            if label not in seen:
                seen.append(label)
            records.append(CellRecord(feats, label))
    concept_set = list(concepts) if concepts is not None else seen
    return Dataset(records, concept_set)


def save_table(dataset, path):
    """Write a Dataset as CSV; float repr keeps round-trips bit-exact."""
    n_feat = dataset.records[0].features.shape[0] if dataset.records else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + _feature_columns(n_feat))
        for r in dataset.records:
            writer.writerow([r.label] + [repr(float(v)) for v in r.features])


def _apportion(quotas, total):
    """Integer counts summing to `total`: floors plus largest-remainder
    top-up (ties broken by position)."""
    floors = [math.floor(q) for q in quotas]
    deficit = total - sum(floors)
    order = sorted(range(len(quotas)),
                   key=lambda i: (-(quotas[i] - floors[i]), i))
    counts = list(floors)
    i = 0
    while deficit > 0:
        counts[order[i % len(order)]] += 1
        i += 1
        deficit -= 1
    return counts


def stratified_split(dataset, fractions=(0.64, 0.16, 0.20), seed=0):
    """Per-class stratified train/val/test partition.

    Train and val take floor(fraction * class size) per class; the handful
    of seats left by flooring are topped up largest-remainder so the global
    split sizes hit the exact fractions, and each class's leftover goes to
    test. Splits are disjoint and exhaustive.
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ContractError("split fractions must sum to 1")
    counts = {c: len(dataset.by_label(c)) for c in dataset.concept_set}
    for c, n in counts.items():
        if n < 3:
            raise DataError("class %r has only %d records; need >= 3" % (c, n))
    n_total = len(dataset)
    totals = _apportion([f * n_total for f in fractions], n_total)
    classes = dataset.concept_set
    train_c = _apportion([fractions[0] * counts[c] for c in classes], totals[0])
    val_quotas = [fractions[1] * counts[c] for c in classes]
    val_floors = [math.floor(q) for q in val_quotas]
    # Cap val so train + val never exceeds the class size.
    val_c = _apportion(val_quotas, totals[1])
    for i, c in enumerate(classes):
        overflow = train_c[i] + val_c[i] - counts[c]
        if overflow > 0:
            val_c[i] -= overflow
    rng = np.random.default_rng(seed)
    splits = ([], [], [])
    for i, c in enumerate(classes):
        pool = dataset.by_label(c)
        order = rng.permutation(len(pool))
        a, b = train_c[i], train_c[i] + val_c[i]
        for j in order[:a]:
            splits[0].append(pool[j])
        for j in order[a:b]:
            splits[1].append(pool[j])
        for j in order[b:]:
            splits[2].append(pool[j])
    return tuple(Dataset(list(records), list(classes),
                         standardization=dataset.standardization)
                 for records in splits)


def standardize(train, *others):
    """Per-feature z-scoring fitted on the training split only.

    Near-constant features (std < 1e-12) are centered but not divided.
    Re-standardizing an already standardized split is a contract violation.
    """
    for ds in (train,) + others:
        if ds.standardization is not None:
            raise ContractError("dataset is already standardized")
    if not train.records:
        raise ContractError("training split is empty")
    x = train.feature_matrix()
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    divisor = np.where(std < 1e-12, 1.0, std)
    out = []
    for ds in (train,) + others:
        records = [CellRecord((r.features - mean) / divisor, r.label)
                   for r in ds.records]
        out.append(Dataset(records, list(ds.concept_set),
                           standardization=(mean.copy(), std.copy())))
    return out[0] if not others else tuple(out)


def generate_synthetic(spec):
    """Gaussian mixture stand-in: class c elevates feature block
    [7c, 7c+7) by the separation delta; the final (null) class has an
    all-zero mean. Deterministic given the seed."""
    rng = np.random.default_rng(spec.seed)
    records = []
    for c, (label, n) in enumerate(zip(spec.labels, spec.n_per_class)):
        mu = np.zeros(spec.feature_dim)
        block = c * FEATURES_PER_BLOCK
        is_null = c == len(spec.labels) - 1
        if not is_null and block + FEATURES_PER_BLOCK <= spec.feature_dim:
            mu[block:block + FEATURES_PER_BLOCK] = spec.class_separation
        samples = rng.normal(mu, spec.noise_sigma, size=(n, spec.feature_dim))
        for row in samples:
            records.append(CellRecord(row, label))
    return Dataset(records, list(spec.labels))
