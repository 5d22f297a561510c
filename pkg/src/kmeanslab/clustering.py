"""Lloyd's and Hartigan's k-means, initializations and PCA baselines."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .model import Dataset, Partition, ValidationError
from .rng import Stream

RETAIN = "retain-centroid"
ABORT = "abort"
# Full centroid recomputation period for incremental Hartigan updates.
REFRESH_EVERY = 1024


class EmptyClusterError(RuntimeError):
    def __init__(self, iteration: int, cluster: int):
        super().__init__(f"cluster {cluster} became empty at iteration {iteration}")
        self.iteration = iteration
        self.cluster = cluster


@dataclass(frozen=True)
class CentroidSet:
    centers: np.ndarray
    sizes: np.ndarray


@dataclass(frozen=True)
class RunConfig:
    max_iters: int = 300
    tie_epsilon: float = 0.0
    sweep_order: str = "fixed"
    empty_cluster_policy: str = RETAIN
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValidationError("max_iters must be >= 1")
        if not (np.isfinite(self.tie_epsilon) and self.tie_epsilon >= 0):
            raise ValidationError("tie_epsilon must be finite and non-negative")
        if self.sweep_order not in ("fixed", "shuffle"):
            raise ValidationError(f"unknown sweep_order {self.sweep_order!r}")
        if self.empty_cluster_policy not in (RETAIN, ABORT):
            raise ValidationError(f"unknown empty_cluster_policy {self.empty_cluster_policy!r}")


@dataclass
class RunReport:
    iterations: int = 0
    loss_trajectory: list = field(default_factory=list)
    moves_per_sweep: list = field(default_factory=list)
    empty_cluster_events: int = 0
    converged: bool = False

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "loss_trajectory": [float(v) for v in self.loss_trajectory],
            "moves_per_sweep": [int(v) for v in self.moves_per_sweep],
            "empty_cluster_events": self.empty_cluster_events,
            "converged": self.converged,
        }


# -- objective and centroids -------------------------------------------------

def _cluster_losses(X, assign, K):
    out = np.zeros(K)
    for k in range(K):
        rows = X[assign == k]
        if len(rows):
            out[k] = np.sum((rows - rows.mean(axis=0)) ** 2)
    return out


def wcss(X, assign, K) -> float:
    """Within-cluster sum of squares; empty clusters contribute nothing."""
    return float(_cluster_losses(np.asarray(X), np.asarray(assign), K).sum())


def kmeans_loss(ds: Dataset, p: Partition) -> float:
    """Within-cluster sum of squared distances to the empirical centroids."""
    if np.any(p.sizes == 0):
        raise ValidationError(f"loss undefined: cluster(s) {np.flatnonzero(p.sizes == 0).tolist()} empty")
    return float(_cluster_losses(ds.data, p.assign, p.K).sum())


def _means(X, assign, K, previous=None):
    sizes = np.bincount(assign, minlength=K)
    centers = np.zeros((K, X.shape[1]))
    for k in range(K):
        if sizes[k]:
            centers[k] = X[assign == k].mean(axis=0)
        elif previous is not None:
            centers[k] = previous[k]
        else:
            raise ValidationError(f"cluster {k} is empty")
    return centers, sizes


def centroids(ds: Dataset, p: Partition, previous: CentroidSet | None = None) -> CentroidSet:
    """Empirical centroids; empty clusters keep ``previous`` centers if given."""
    centers, sizes = _means(ds.data, p.assign, p.K, None if previous is None else previous.centers)
    return CentroidSet(centers, sizes)


def _sq_dists(X, centers):
    # explicit differences: the expanded Gram form loses precision when d >> n
    return np.stack([np.sum((X - c) ** 2, axis=1) for c in centers], axis=1)


def lloyd_assign(X, centers, current=None, tie_epsilon=0.0):
    """Nearest-centroid assignment; near-ties keep the current label."""
    D = _sq_dists(X, centers)
    best = np.argmin(D, axis=1)
    if current is None:
        return best
    rows = np.arange(len(X))
    keep = D[rows, current] <= D[rows, best] + tie_epsilon
    return np.where(keep, current, best)


# -- Lloyd -------------------------------------------------------------------

def lloyd_run(ds: Dataset, init: Union[Partition, CentroidSet], cfg: RunConfig = RunConfig()):
    """Alternate nearest-centroid assignment and averaging until stable.

    A centroid initialization first induces a partition (not counted as an
    iteration).  Each iteration reassigns every sample against the current
    centroids, then recomputes the centroids; iterations stop when the
    reassignment leaves the partition unchanged.
    """
    X = ds.data
    report = RunReport()
    if isinstance(init, CentroidSet):
        K = init.centers.shape[0]
        centers = np.array(init.centers, dtype=float)
        assign = lloyd_assign(X, centers)
    else:
        K = init.K
        assign = init.assign.copy()
        if np.any(init.sizes == 0):
            raise ValidationError("initial partition has an empty cluster")
        centers = None
    centers, sizes = _refresh(X, assign, K, centers, report, cfg, iteration=0)
    report.loss_trajectory.append(float(_cluster_losses(X, assign, K).sum()))

    for it in range(1, cfg.max_iters + 1):
        new = lloyd_assign(X, centers, assign, cfg.tie_epsilon)
        report.iterations = it
        changed = not np.array_equal(new, assign)
        assign = new
        centers, sizes = _refresh(X, assign, K, centers, report, cfg, iteration=it)
        report.loss_trajectory.append(float(_cluster_losses(X, assign, K).sum()))
        if not changed:
            report.converged = True
            break
    return Partition(assign, K), report


def _refresh(X, assign, K, previous, report, cfg, iteration):
    sizes = np.bincount(assign, minlength=K)
    empty = np.flatnonzero(sizes == 0)
    if len(empty):
        if cfg.empty_cluster_policy == ABORT or previous is None:
            raise EmptyClusterError(iteration, int(empty[0]))
        report.empty_cluster_events += len(empty)
    return _means(X, assign, K, previous)


# -- Hartigan ----------------------------------------------------------------

def _hartigan_weights(sizes, current):
    s = sizes.astype(float)
    w = s / (s + 1.0)
    w[current] = s[current] / (s[current] - 1.0)
    return w


def hartigan_distance(ds: Dataset, p: Partition, i: int, j: int) -> float:
    """Size-weighted squared distance from sample i to cluster j's centroid."""
    size = int(p.sizes[j])
    if size == 0:
        raise ValidationError(f"cluster {j} is empty")
    inside = p.assign[i] == j
    if inside and size < 2:
        raise ValidationError("Hartigan distance to a singleton current cluster is undefined")
    mu = ds.data[p.assign == j].mean(axis=0)
    w = size / (size - 1) if inside else size / (size + 1)
    return float(w * np.sum((ds.data[i] - mu) ** 2))


def hartigan_candidates(X, centers, sizes, i, m):
    """Weighted distances from sample i (in cluster m) to every cluster."""
    dist = np.sum((X[i] - centers) ** 2, axis=1)
    return _hartigan_weights(sizes, m) * dist


def hartigan_run(ds: Dataset, init: Partition, cfg: RunConfig = RunConfig()):
    """Single-sample greedy relocation sweeps until no move is accepted."""
    X = ds.data
    K = init.K
    if np.any(init.sizes == 0):
        raise ValidationError("initial partition has an empty cluster")
    assign = init.assign.copy()
    centers, sizes = _means(X, assign, K)
    sizes = sizes.astype(np.int64)
    report = RunReport()
    report.loss_trajectory.append(float(_cluster_losses(X, assign, K).sum()))
    stream = Stream(cfg.seed) if cfg.sweep_order == "shuffle" else None
    since_refresh = 0

    for sweep in range(1, cfg.max_iters + 1):
        order = stream.permutation(len(X)) if stream else range(len(X))
        moves = 0
        for i in order:
            m = assign[i]
            if sizes[m] <= 1:
                continue
            delta = hartigan_candidates(X, centers, sizes, i, m)
            j = int(np.argmin(delta))
            if j != m and delta[j] < delta[m]:
                x = X[i]
                centers[m] = (sizes[m] * centers[m] - x) / (sizes[m] - 1)
                centers[j] = (sizes[j] * centers[j] + x) / (sizes[j] + 1)
                sizes[m] -= 1
                sizes[j] += 1
                assign[i] = j
                moves += 1
                since_refresh += 1
                if since_refresh >= REFRESH_EVERY:
                    centers, _ = _means(X, assign, K)
                    since_refresh = 0
        report.iterations = sweep
        report.moves_per_sweep.append(moves)
        report.loss_trajectory.append(float(_cluster_losses(X, assign, K).sum()))
        if moves == 0:
            report.converged = True
            break
    return Partition(assign, K), report


# -- fixed-point predicates --------------------------------------------------

def is_lloyd_fixed_point(ds: Dataset, p: Partition, tie_epsilon: float = 0.0) -> bool:
    if np.any(p.sizes == 0):
        raise ValidationError("fixed-point test needs nonempty clusters")
    centers, _ = _means(ds.data, p.assign, p.K)
    return bool(np.array_equal(lloyd_assign(ds.data, centers, p.assign, tie_epsilon), p.assign))


def is_hartigan_fixed_point(ds: Dataset, p: Partition) -> bool:
    if np.any(p.sizes == 0):
        raise ValidationError("fixed-point test needs nonempty clusters")
    X = ds.data
    centers, sizes = _means(X, p.assign, p.K)
    D = _sq_dists(X, centers)
    s = sizes.astype(float)
    other = D * (s / (s + 1.0))
    rows = np.arange(len(X))
    cur = p.assign
    movable = sizes[cur] > 1
    with np.errstate(divide="ignore", invalid="ignore"):
        own = D[rows, cur] * s[cur] / (s[cur] - 1.0)
    other[rows, cur] = np.inf
    improves = other.min(axis=1) < own
    return not bool(np.any(improves & movable))


# -- initializations ---------------------------------------------------------

def init_random_partition(n: int, K: int, seed: int) -> Partition:
    """Uniformly random assignment with cluster sizes differing by at most one."""
    if K > n:
        raise ValidationError("need K <= n")
    stream = Stream(seed)
    base = np.arange(n) % K
    relabel = stream.permutation(K)
    return Partition(relabel[base[stream.permutation(n)]], K)


def init_random_centers(ds: Dataset, K: int, seed: int) -> CentroidSet:
    if K > ds.n:
        raise ValidationError("need K <= n")
    idx = Stream(seed).permutation(ds.n)[:K]
    return CentroidSet(ds.data[idx].copy(), np.ones(K, dtype=np.int64))


def kmeanspp_d2_weights(X, chosen):
    """Squared distance of every row to its nearest chosen center."""
    return _sq_dists(X, X[list(chosen)]).min(axis=1)


def init_kmeanspp(ds: Dataset, K: int, seed: int) -> CentroidSet:
    """k-means++ seeding: uniform first center, then D^2 sampling."""
    X = ds.data
    if K > ds.n:
        raise ValidationError("need K <= n")
    stream = Stream(seed)
    chosen = [stream.integer(ds.n)]
    for _ in range(1, K):
        w = kmeanspp_d2_weights(X, chosen)
        if not w.sum() > 0:
            raise ValidationError("k-means++ needs at least K distinct points")
        chosen.append(stream.choice(w))
    return CentroidSet(X[chosen].copy(), np.ones(K, dtype=np.int64))


def partition_from_centers(ds: Dataset, cs: CentroidSet) -> Partition:
    K = cs.centers.shape[0]
    return Partition(lloyd_assign(ds.data, cs.centers), K)


# -- PCA ---------------------------------------------------------------------

def _top_directions(Xc, r, seed, tol=1e-10, max_iter=10_000):
    """Top-r right singular vectors of Xc by deflated power iteration.

    Iterates on the n x n Gram matrix when n < d (same nonzero spectrum),
    then maps each vector back to data space.
    """
    n, d = Xc.shape
    use_gram = n < d
    M = Xc @ Xc.T if use_gram else Xc.T @ Xc
    stream = Stream(seed)
    found = []
    for _ in range(r):
        v = stream.normal(M.shape[0])
        for u in found:
            v -= (u @ v) * u
        v /= np.linalg.norm(v)
        for _ in range(max_iter):
            w = M @ v
            for u in found:
                w -= (u @ w) * u
            norm = np.linalg.norm(w)
            if norm == 0:
                break
            w /= norm
            # sine of the angle between successive iterates
            if np.linalg.norm(w - (w @ v) * v) < tol:
                v = w
                break
            v = w
        found.append(v)
    V = np.array(found)
    if use_gram:
        V = V @ Xc
        norms = np.linalg.norm(V, axis=1, keepdims=True)
        V = np.divide(V, norms, out=np.zeros_like(V), where=norms > 0)
    return V


def _centered(ds: Dataset):
    if ds.n < 2:
        raise ValidationError("PCA needs at least two samples")
    Xc = ds.data - ds.data.mean(axis=0)
    if not np.any(Xc):
        raise ValidationError("PCA undefined for zero-variance data")
    return Xc


def pca_first_component(ds: Dataset, seed: int = 0) -> np.ndarray:
    return _top_directions(_centered(ds), 1, seed)[0]


def pca_split(ds: Dataset, seed: int = 0) -> Partition:
    """Split by the sign of the first principal score; zero goes to cluster 0."""
    Xc = _centered(ds)
    v = _top_directions(Xc, 1, seed)[0]
    return Partition((Xc @ v > 0).astype(np.int64), 2)


def pca_reduce(ds: Dataset, r: int, seed: int = 0) -> Dataset:
    if not (1 <= r <= min(ds.n, ds.d)):
        raise ValidationError(f"r must lie in [1, {min(ds.n, ds.d)}]")
    Xc = _centered(ds)
    V = _top_directions(Xc, r, seed)
    return ds.with_data(Xc @ V.T)
