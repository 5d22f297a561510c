"""Generative model, partitions and dataset ingestion.

Labels and cluster indices are 0-based throughout: a two-cluster partition
assigns each sample to cluster 0 or 1.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterator, Optional

import numpy as np

from .rng import Stream

ENUMERATION_LIMIT = 30


class ValidationError(ValueError):
    """Raised when inputs violate a documented precondition."""


class DatasetParseError(ValueError):
    """CSV parsing failure; carries the 1-based row and column."""

    def __init__(self, message: str, row: int, column: Optional[int] = None):
        where = f"row {row}" if column is None else f"row {row}, column {column}"
        super().__init__(f"{where}: {message}")
        self.row = row
        self.column = column


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GmmSpec:
    """Parameters of the isotropic Gaussian mixture.

    ``class_sizes`` fixes the ground-truth labels: the first
    ``class_sizes[0]`` rows belong to class 0, the next block to class 1, etc.
    """

    K: int
    d: int
    tau_sq: float
    sigma_sq: float
    class_sizes: tuple
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "class_sizes", tuple(int(s) for s in self.class_sizes))
        if int(self.K) < 2:
            raise ValidationError(f"K must be >= 2, got {self.K}")
        if int(self.d) < 1:
            raise ValidationError(f"d must be >= 1, got {self.d}")
        if len(self.class_sizes) != self.K:
            raise ValidationError("class_sizes must have exactly K entries")
        if any(s < 1 for s in self.class_sizes):
            raise ValidationError("every class must contain at least one sample")
        if not (self.tau_sq >= 0 and self.sigma_sq >= 0):
            raise ValidationError("variances must be non-negative")
        if not (0 <= int(self.seed) < 2**64):
            raise ValidationError("seed must be an unsigned 64-bit integer")

    @property
    def n(self) -> int:
        return sum(self.class_sizes)

    @classmethod
    def balanced(cls, K, d, tau_sq, sigma_sq, per_class, seed=0) -> "GmmSpec":
        return cls(K, d, tau_sq, sigma_sq, (per_class,) * K, seed)

    def to_json(self) -> str:
        obj = asdict(self)
        obj["class_sizes"] = list(self.class_sizes)
        return json.dumps(obj)

    @classmethod
    def from_json(cls, text: str) -> "GmmSpec":
        obj = json.loads(text)
        expected = {"K", "d", "tau_sq", "sigma_sq", "class_sizes", "seed"}
        if set(obj) != expected:
            raise ValidationError(f"GmmSpec JSON must have exactly the fields {sorted(expected)}")
        return cls(**obj)


@dataclass(frozen=True)
class Dataset:
    data: np.ndarray
    labels: Optional[np.ndarray] = None
    spec: Optional[GmmSpec] = None
    centers: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        if data.ndim != 2:
            raise ValidationError("data must be a 2-D matrix")
        object.__setattr__(self, "data", _frozen(data))
        if self.labels is not None:
            labels = np.array(self.labels, dtype=np.int64)
            if labels.shape != (data.shape[0],):
                raise ValidationError("labels must have one entry per row")
            if labels.size and labels.min() < 0:
                raise ValidationError("labels must be non-negative integers")
            object.__setattr__(self, "labels", _frozen(labels))

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def with_data(self, data: np.ndarray) -> "Dataset":
        return Dataset(data, self.labels, self.spec)


@dataclass(frozen=True)
class Partition:
    """Cluster assignment over ``n`` samples into ``K`` clusters."""

    assign: np.ndarray
    K: int

    def __post_init__(self):
        assign = np.array(self.assign, dtype=np.int64)
        if assign.ndim != 1:
            raise ValidationError("assignment must be a vector")
        if assign.size and (assign.min() < 0 or assign.max() >= self.K):
            raise ValidationError(f"cluster indices must lie in [0, {self.K})")
        object.__setattr__(self, "assign", _frozen(assign))
        object.__setattr__(self, "sizes", _frozen(np.bincount(assign, minlength=self.K)))

    @classmethod
    def from_labels(cls, labels, K=None) -> "Partition":
        labels = np.asarray(labels, dtype=np.int64)
        return cls(labels, int(labels.max()) + 1 if K is None else K)

    @property
    def n(self) -> int:
        return self.assign.shape[0]

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.assign == k)

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return self.K == other.K and np.array_equal(self.assign, other.assign)

    def __hash__(self):
        return hash((self.K, self.assign.tobytes()))


@dataclass(frozen=True)
class PurityView:
    """Class proportions and per-cluster purities.

    ``purity[j, l]`` is the fraction of cluster j drawn from class l.  Rows of
    empty clusters are zero and flagged in ``empty``.
    """

    proportions: np.ndarray
    purity: np.ndarray
    r_star: float
    empty: tuple = ()


def sample_gmm(spec: GmmSpec, label_mode: str = "contiguous", keep_centers: bool = False) -> Dataset:
    """Draw a dataset from the isotropic mixture described by ``spec``.

    The stream first yields the K centers (row-major), then the n noise
    vectors.  In ``"iid"`` mode labels are drawn uniformly afterwards and
    redrawn until no class is empty; ``class_sizes`` then only fixes n.
    """
    n, d, K = spec.n, spec.d, spec.K
    stream = Stream(spec.seed)
    centers = math.sqrt(spec.tau_sq) * stream.normal((K, d))
    noise = math.sqrt(spec.sigma_sq) * stream.normal((n, d))
    if label_mode == "contiguous":
        labels = np.repeat(np.arange(K), spec.class_sizes)
    elif label_mode == "iid":
        while True:
            labels = np.minimum((stream.uniform(n) * K).astype(np.int64), K - 1)
            if np.bincount(labels, minlength=K).min() > 0:
                break
    else:
        raise ValidationError(f"unknown label_mode {label_mode!r}")
    data = centers[labels] + noise
    return Dataset(data, labels, spec, centers if keep_centers else None)


def _class_index(labels) -> tuple[np.ndarray, int]:
    classes, inverse = np.unique(np.asarray(labels), return_inverse=True)
    return inverse.reshape(-1), len(classes)


def purity_view(p: Partition, labels) -> PurityView:
    labels = np.asarray(labels)
    if labels.shape != p.assign.shape:
        raise ValidationError("labels and assignment differ in length")
    cls, L = _class_index(labels)
    table = np.zeros((p.K, L), dtype=np.int64)
    np.add.at(table, (p.assign, cls), 1)
    sizes = table.sum(axis=1)
    empty = tuple(int(j) for j in np.flatnonzero(sizes == 0))
    purity = np.zeros((p.K, L))
    nonempty = sizes > 0
    purity[nonempty] = table[nonempty] / sizes[nonempty, None]
    proportions = table.sum(axis=0) / p.n
    return PurityView(proportions, purity, float(proportions.min()), empty)


def is_correct_partition(p: Partition, labels) -> bool:
    """True iff ``p`` equals the ground-truth classes up to relabeling."""
    labels = np.asarray(labels)
    if labels.shape != p.assign.shape:
        raise ValidationError("labels and assignment differ in length")
    pairs = {(int(a), int(b)) for a, b in zip(p.assign, labels)}
    return len(pairs) == len(set(p.assign.tolist())) == len(set(labels.tolist()))


def is_q_balanced(p: Partition, q: float) -> bool:
    if p.K != 2:
        raise ValidationError("balance is defined for bipartitions")
    return bool(balanced_size_mask(p.n, q)[p.sizes[0]])


def balanced_size_mask(n: int, q: float) -> np.ndarray:
    """Boolean array over sizes 0..n: is a cluster of this size admissible?

    A bipartition is q-balanced iff both of its cluster sizes are admissible;
    since the window is symmetric about n/2 it suffices to check one size.
    """
    s = np.arange(n + 1)
    half, spread = n / 2, q * math.sqrt(n / 4)
    ok = (s > 2) & (s > half - spread) & (s < half + spread)
    return ok & ok[::-1]


def enumerate_bipartitions(
    n: int,
    nonempty_only: bool = True,
    start: int = 0,
    stop: Optional[int] = None,
    limit: int = ENUMERATION_LIMIT,
) -> Iterator[Partition]:
    """Yield two-cluster assignments in binary-counting order.

    Index m maps to the assignment whose i-th entry is bit ``n-1-i`` of m.
    ``start``/``stop`` select a contiguous index range for sharding.
    """
    if n > limit:
        raise ValidationError(f"refusing to enumerate 2^{n} partitions (limit n <= {limit})")
    total = 1 << n
    stop = total if stop is None else min(stop, total)
    for m in range(start, stop):
        if nonempty_only and (m == 0 or m == total - 1):
            continue
        yield Partition(bipartition_block(n, m, m + 1)[0], 2)


def bipartition_block(n: int, start: int, stop: int) -> np.ndarray:
    """Assignments for indices ``start..stop-1`` as an int8 matrix."""
    m = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((m[:, None] >> shifts[None, :]) & 1).astype(np.int8)


def count_unbalanced(n: int, q: float) -> int:
    """Number of labeled bipartitions (all 2^n) that are not q-balanced."""
    mask = balanced_size_mask(n, q)
    return sum(math.comb(n, s) for s in range(n + 1) if not mask[s])


def load_dataset_csv(path, has_labels: bool = False) -> Dataset:
    """Read a numeric CSV; with ``has_labels`` the last column is the class."""
    rows = []
    with open(path, newline="") as fh:
        for r, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            values = []
            for c, cell in enumerate(row, start=1):
                try:
                    values.append(float(cell.strip()))
                except ValueError:
                    raise DatasetParseError(f"non-numeric cell {cell!r}", r, c) from None
            if rows and len(values) != len(rows[0][1]):
                raise DatasetParseError(
                    f"expected {len(rows[0][1])} columns, found {len(values)}", r
                )
            rows.append((r, values))
    if not rows:
        raise DatasetParseError("empty file", 1)
    table = np.array([v for _, v in rows])
    if not has_labels:
        return Dataset(table)
    if table.shape[1] < 2:
        raise DatasetParseError("labelled file needs at least one feature column", rows[0][0])
    lab = table[:, -1]
    for (r, _), v in zip(rows, lab):
        if v != int(v) or v < 0:
            raise DatasetParseError(f"label {v!r} is not a non-negative integer", r, table.shape[1])
    return Dataset(table[:, :-1], lab.astype(np.int64))


def save_dataset_csv(ds: Dataset, path, with_labels: bool = True) -> None:
    """Write rows with 17 significant digits; ``path`` may be an open text file."""
    if hasattr(path, "write"):
        _write_rows(ds, path, with_labels)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(ds, fh, with_labels)


def _write_rows(ds, fh, with_labels):
    w = csv.writer(fh, lineterminator="\n")
    for i, row in enumerate(ds.data):
        cells = [format(v, ".17g") for v in row]
        if with_labels and ds.labels is not None:
            cells.append(str(int(ds.labels[i])))
        w.writerow(cells)
