"""Seeded Monte Carlo harness.

Every random draw is keyed by :func:`kmeanslab.rng.derive_seed` on the
master seed and the identity of the unit of work (cell parameters, trial
index, dataset index).  Work is farmed out to a thread pool but results are
always collected in a fixed order, so reports are byte-identical for any
worker count, and dropping a cell from a grid leaves every other cell's
numbers untouched.
"""

from __future__ import annotations

import contextlib
import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Optional, Sequence

import numpy as np

from . import theory
from .clustering import (
    EmptyClusterError,
    RunConfig,
    RunReport,
    hartigan_run,
    init_kmeanspp,
    init_random_centers,
    init_random_partition,
    lloyd_run,
    partition_from_centers,
    pca_reduce,
    pca_split,
    wcss,
)
from .metrics import nmi, wilson_interval, win_rate_score
from .model import (
    Dataset,
    GmmSpec,
    Partition,
    ValidationError,
    balanced_size_mask,
    bipartition_block,
    sample_gmm,
)
from .rng import Stream, derive_seed

ALGORITHMS = ("lloyd", "hartigan", "pca_lloyd", "pca_split")
INITS = ("random_partition", "random_centers", "kmeanspp")
CENSUS_LIMIT = 16


def _pmap(fn, items, threads):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- synthetic grid ----------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    dims: tuple
    noise_vars: tuple
    K: int = 2
    samples_per_class: int = 20
    tau_sq: float = 1.0
    trials: int = 50
    algorithms: tuple = ("lloyd", "hartigan")
    inits: tuple = ("random_partition",)
    master_seed: int = 0
    max_iters: int = 300
    pca_rank: Optional[int] = None

    def __post_init__(self):
        for name in ("dims", "noise_vars", "algorithms", "inits"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
            if not getattr(self, name):
                raise ValidationError(f"{name} must not be empty")
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValidationError(f"unknown algorithm {a!r}")
        for i in self.inits:
            if i not in INITS:
                raise ValidationError(f"unknown init {i!r}")
        if "pca_split" in self.algorithms and self.K != 2:
            raise ValidationError("pca_split only produces two clusters")

    def cells(self):
        """(algorithm, init) pairs; pca_split takes no initialization."""
        out = []
        for a in self.algorithms:
            if a == "pca_split":
                out.append((a, "none"))
            else:
                out.extend((a, i) for i in self.inits)
        return out


@dataclass
class CellSummary:
    d: int
    sigma_sq: float
    algorithm: str
    init: str
    trials: int
    nmi_mean: float
    nmi_stderr: float
    win_rate_mean: float
    iterations_mean: float
    n_errors: int = 0


def _make_init(ds, K, init, seed):
    if init == "random_partition":
        return init_random_partition(ds.n, K, seed)
    if init == "random_centers":
        return init_random_centers(ds, K, seed)
    if init == "kmeanspp":
        return init_kmeanspp(ds, K, seed)
    raise ValidationError(f"unknown init {init!r}")


def run_algorithm(ds: Dataset, algorithm: str, init: str, K: int, seed: int, cfg: RunConfig = RunConfig(),
                  pca_rank=None):
    """Run one (algorithm, init) pair; returns (partition, RunReport).

    ``pca_lloyd`` runs Lloyd on the rank-``pca_rank`` (default K) projection;
    ``pca_split`` ignores ``init`` and reports zero iterations.  Hartigan
    started from centers uses the partition those centers induce.
    """
    if algorithm == "pca_split":
        return pca_split(ds, seed), RunReport(converged=True)
    if algorithm == "pca_lloyd":
        ds = pca_reduce(ds, min(pca_rank or K, ds.n, ds.d), seed)
        algorithm = "lloyd"
    start = _make_init(ds, K, init, seed)
    if algorithm == "lloyd":
        return lloyd_run(ds, start, cfg)
    if algorithm == "hartigan":
        if not isinstance(start, Partition):
            start = partition_from_centers(ds, start)
        return hartigan_run(ds, start, cfg)
    raise ValidationError(f"unknown algorithm {algorithm!r}")


def _grid_trial(gs: GridSpec, d, s2, t):
    spec = GmmSpec.balanced(gs.K, d, gs.tau_sq, s2, gs.samples_per_class, derive_seed(gs.master_seed, "grid-data", d, s2, t))
    ds = sample_gmm(spec)
    truth_loss = wcss(ds.data, ds.labels, gs.K)
    cfg = RunConfig(max_iters=gs.max_iters)
    out = []
    for algorithm, init in gs.cells():
        seed = derive_seed(gs.master_seed, "grid-run", d, s2, algorithm, init, t)
        try:
            p, report = run_algorithm(ds, algorithm, init, gs.K, seed, cfg, gs.pca_rank)
        except (ValidationError, EmptyClusterError):
            out.append(None)
            continue
        loss = wcss(ds.data, p.assign, p.K)
        out.append((nmi(p.assign, ds.labels), win_rate_score(loss, truth_loss), report.iterations))
    return out


def run_grid(gs: GridSpec, threads: int = 1) -> list:
    tasks = [(d, s2, t) for d in gs.dims for s2 in gs.noise_vars for t in range(gs.trials)]
    results = _pmap(lambda task: _grid_trial(gs, *task), tasks, threads)
    by_key = {task: res for task, res in zip(tasks, results)}
    summaries = []
    for d in gs.dims:
        for s2 in gs.noise_vars:
            for c, (algorithm, init) in enumerate(gs.cells()):
                recs = [by_key[(d, s2, t)][c] for t in range(gs.trials)]
                ok = np.array([r for r in recs if r is not None], dtype=float).reshape(-1, 3)
                m = len(ok)
                summaries.append(CellSummary(
                    d=int(d), sigma_sq=float(s2), algorithm=algorithm, init=init, trials=gs.trials,
                    nmi_mean=float(ok[:, 0].mean()) if m else math.nan,
                    nmi_stderr=float(ok[:, 0].std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0,
                    win_rate_mean=float(ok[:, 1].mean()) if m else math.nan,
                    iterations_mean=float(ok[:, 2].mean()) if m else math.nan,
                    n_errors=gs.trials - m,
                ))
    return summaries


# -- divergent single-sample experiment --------------------------------------

@dataclass
class DivergentSummary:
    beta: float
    d: int
    algo: str
    stay_ratio: float
    wilson_low: float
    wilson_high: float
    theory_bound: float
    n_stay: int
    trials: int
    sigma_sq: float
    rho: float
    wilson_width: float


def mixed_partition(n: int):
    """Balanced classes and clusters with 25/75 purities for sample 0.

    Classes are contiguous halves.  Cluster 0 takes the first n/8 samples of
    class 0 and the first 3n/8 of class 1; cluster 1 takes the rest.  Sample 0
    sits in cluster 0, whose purity with respect to its class is 1/4, while
    the other cluster has purity 3/4.
    """
    if n % 8:
        raise ValidationError("n must be divisible by 8 for 25/75 purities with balanced clusters")
    half, eighth = n // 2, n // 8
    assign = np.ones(n, dtype=np.int64)
    assign[:eighth] = 0
    assign[half:half + 3 * eighth] = 0
    labels = np.repeat([0, 1], half)
    return Partition(assign, 2), labels


def divergent_sigma_sq(beta, n, tau_sq):
    """Noise variance ``beta`` times the squared Lloyd threshold at c = c_bar = n/2."""
    s0 = theory.lloyd_noise_threshold(math.sqrt(tau_sq), n // 2, n // 2)
    return beta * s0 * s0


def _divergent_trial(n, tau_sq, s2, d, seed, part):
    ds = sample_gmm(GmmSpec(2, d, tau_sq, s2, (n // 2, n // 2), seed))
    X = ds.data
    c = part.sizes
    mu0 = X[part.assign == 0].mean(axis=0)
    mu1 = X[part.assign == 1].mean(axis=0)
    d_cur = float(np.sum((X[0] - mu0) ** 2))
    d_oth = float(np.sum((X[0] - mu1) ** 2))
    lloyd_stay = d_cur <= d_oth
    hart_stay = c[0] / (c[0] - 1) * d_cur <= c[1] / (c[1] + 1) * d_oth
    return lloyd_stay, hart_stay


def run_divergent(n=40, tau_sq=1.0, beta_list=(1.25, 2.0, 4.0), d_list=(50, 500, 3000), trials=2000,
                  master_seed=0, threads=1, z=1.96) -> list:
    """Does the designated sample stay put under each algorithm's criterion?

    For Lloyd the reported ``theory_bound`` is a lower bound on the stay
    ratio (one minus the switch bound); for Hartigan it is an upper bound.
    """
    part, _ = mixed_partition(n)
    c = n // 2
    out = []
    for beta in beta_list:
        s2 = divergent_sigma_sq(beta, n, tau_sq)
        rho_l = theory.lloyd_rho(tau_sq, s2, c, c)
        rho_h = theory.hartigan_rho(tau_sq, s2, c, c, 0.25, 0.75)
        for d in d_list:
            seeds = [derive_seed(master_seed, "divergent", n, float(beta), int(d), t) for t in range(trials)]
            res = np.array(_pmap(lambda s: _divergent_trial(n, tau_sq, s2, int(d), s, part), seeds, threads))
            for k, (algo, rho) in enumerate((("lloyd", rho_l), ("hartigan", rho_h))):
                stays = int(res[:, k].sum())
                wi = wilson_interval(stays, trials - stays, z)
                decay = rho ** (d / 4)
                bound = 1 - decay if algo == "lloyd" else decay
                out.append(DivergentSummary(float(beta), int(d), algo, wi.estimate, wi.low, wi.high, bound,
                                            stays, trials, s2, rho, wi.width))
    return out


# -- exhaustive fixed-point census -------------------------------------------

@dataclass
class CensusRecord:
    dataset_seed: int
    n: int
    d: int
    sigma_sq: float
    q: float
    n_balanced: int
    n_lloyd_fixed_balanced: int
    n_incorrect: int
    n_hartigan_fixed_incorrect: int
    lloyd_union_bound_log: float
    hartigan_union_bound_log: float
    n_lloyd_fixed: int = 0
    n_hartigan_fixed: int = 0
    n_hartigan_fixed_not_lloyd: int = 0

    @property
    def lloyd_fixed_fraction(self) -> float:
        return self.n_lloyd_fixed_balanced / self.n_balanced if self.n_balanced else math.nan


_COUNT_KEYS = ("n_balanced", "n_lloyd_fixed_balanced", "n_incorrect", "n_hartigan_fixed_incorrect",
               "n_lloyd_fixed", "n_hartigan_fixed", "n_hartigan_fixed_not_lloyd")


def fixed_point_flags(X: np.ndarray, A: np.ndarray):
    """Lloyd and Hartigan fixed-point flags for many bipartitions at once.

    ``A`` holds one 0/1 assignment per row; all clusters must be nonempty.
    Distances to centroids come from the Gram matrix:
    ||x_i - mu_C||^2 = G_ii - 2/|C| sum_{k in C} G_ik + 1/|C|^2 sum_{k,l in C} G_kl.
    """
    G = X @ X.T
    diag = np.diag(G)
    M1 = A.astype(float)
    M0 = 1.0 - M1
    dists, sizes = [], []
    for M in (M0, M1):
        s = M.sum(axis=1)
        MG = M @ G
        within = np.einsum("pi,pi->p", MG, M)
        dists.append(diag[None, :] - 2 * MG / s[:, None] + (within / s**2)[:, None])
        sizes.append(s)
    D0, D1 = dists
    s0, s1 = sizes
    in1 = A.astype(bool)
    d_cur = np.where(in1, D1, D0)
    d_oth = np.where(in1, D0, D1)
    s_cur = np.where(in1, s1[:, None], s0[:, None])
    s_oth = np.where(in1, s0[:, None], s1[:, None])
    lloyd = np.all(d_cur <= d_oth, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        h_cur = s_cur / (s_cur - 1) * d_cur
    h_oth = s_oth / (s_oth + 1) * d_oth
    moves = (s_cur > 1) & (h_oth < h_cur)
    hartigan = ~np.any(moves, axis=1)
    return lloyd, hartigan


def census_counts(X, labels, q, start, stop, block=4096) -> dict:
    """Fixed-point counts over bipartition indices ``start..stop-1`` (nonempty only)."""
    n = X.shape[0]
    total = 1 << n
    size_ok = balanced_size_mask(n, q)
    truth = np.asarray(labels, dtype=np.int8)
    counts = dict.fromkeys(_COUNT_KEYS, 0)
    for lo in range(start, stop, block):
        hi = min(stop, lo + block)
        A = bipartition_block(n, lo, hi)
        idx = np.arange(lo, hi)
        keep = (idx != 0) & (idx != total - 1)
        A = A[keep]
        if not len(A):
            continue
        lloyd, hart = fixed_point_flags(X, A)
        balanced = size_ok[A.sum(axis=1)]
        correct = np.all(A == truth, axis=1) | np.all(A != truth, axis=1)
        counts["n_balanced"] += int(balanced.sum())
        counts["n_lloyd_fixed_balanced"] += int((balanced & lloyd).sum())
        counts["n_incorrect"] += int((~correct).sum())
        counts["n_hartigan_fixed_incorrect"] += int((~correct & hart).sum())
        counts["n_lloyd_fixed"] += int(lloyd.sum())
        counts["n_hartigan_fixed"] += int(hart.sum())
        counts["n_hartigan_fixed_not_lloyd"] += int((hart & ~lloyd).sum())
    return counts


def _shards(total, parts):
    step = -(-total // parts)
    return [(lo, min(total, lo + step)) for lo in range(0, total, step)]


def run_fixed_point_census(n=12, d=4096, tau_sq=1.0, beta=1.5, q=3.0, datasets=20, master_seed=0,
                           threads=1, sigma_sq=None) -> list:
    """Enumerate every nonempty bipartition of each sampled dataset.

    Noise defaults to the balanced-partition level for (beta, n, q), scaled
    by tau.  Pass ``sigma_sq`` to override (e.g. for low-dimension controls).
    """
    if n > CENSUS_LIMIT:
        raise ValidationError(f"census limited to n <= {CENSUS_LIMIT}")
    if n < 4:
        raise ValidationError("census needs n >= 4")
    tau = math.sqrt(tau_sq)
    if sigma_sq is None:
        sigma_sq = (tau * theory.sigma_balanced(beta, n, q)) ** 2
        rho_q = theory.rho_q(beta, n, q)
    else:
        rho_q = theory.lloyd_rho_balanced(math.sqrt(sigma_sq) / tau, n, q, unchecked=True)
    sizes = (n // 2, n - n // 2)
    rho_h = theory.hartigan_rho_uniform(tau_sq, sigma_sq, n, min(sizes) / n)
    lub = theory.lloyd_union_bound(n, d, min(max(rho_q, 0.0), 1.0)).log_value
    hub = theory.hartigan_union_bound(n, d, rho_h).log_value
    shards = _shards(1 << n, max(1, threads))
    out = []
    for k in range(datasets):
        seed = derive_seed(master_seed, "census", n, int(d), float(sigma_sq), float(q), k)
        ds = sample_gmm(GmmSpec(2, d, tau_sq, sigma_sq, sizes, seed))
        parts = _pmap(lambda sh: census_counts(ds.data, ds.labels, q, *sh), shards, threads)
        counts = {key: sum(p[key] for p in parts) for key in _COUNT_KEYS}
        out.append(CensusRecord(seed, n, int(d), float(sigma_sq), float(q),
                                lloyd_union_bound_log=lub, hartigan_union_bound_log=hub, **counts))
    return out


# -- distance-scale moment check ---------------------------------------------

@dataclass
class ScaleCheck:
    which: str
    expected_scale: float
    mean: float
    expected_mean: float
    stderr: float
    z: float
    var: float
    expected_var: float


def run_scale_check(c, c_bar, r_current, r_other, tau_sq, sigma_sq, d, replicates=2000, master_seed=0,
                    threads=1) -> list:
    """Monte Carlo moments of the squared distance from sample 0 to both centroids.

    Sample 0 belongs to class 0 and sits in a cluster of size ``c`` whose
    class-0 fraction is ``r_current``; the other cluster has size ``c_bar``
    and class-0 fraction ``r_other``.
    """
    k_cur, k_oth = r_current * c, r_other * c_bar
    if abs(k_cur - round(k_cur)) > 1e-9 or abs(k_oth - round(k_oth)) > 1e-9:
        raise ValidationError("purities must correspond to whole sample counts")
    k_cur, k_oth = int(round(k_cur)), int(round(k_oth))
    if k_cur < 1:
        raise ValidationError("the current cluster must contain sample 0's class")
    labels = np.array([0] * k_cur + [1] * (c - k_cur) + [0] * k_oth + [1] * (c_bar - k_oth))
    assign = np.array([0] * c + [1] * c_bar)
    n = c + c_bar

    def one(t):
        s = Stream(derive_seed(master_seed, "scale", c, c_bar, float(r_current), float(r_other), int(d), t))
        centers = math.sqrt(tau_sq) * s.normal((2, d))
        X = centers[labels] + math.sqrt(sigma_sq) * s.normal((n, d))
        return (float(np.sum((X[0] - X[assign == 0].mean(axis=0)) ** 2)),
                float(np.sum((X[0] - X[assign == 1].mean(axis=0)) ** 2)))

    vals = np.array(_pmap(one, range(replicates), threads))
    scales = {
        "current": theory.alpha_current(tau_sq, sigma_sq, c, r_current),
        "other": theory.alpha_other(tau_sq, sigma_sq, c_bar, r_other),
    }
    out = []
    for k, (which, alpha) in enumerate(scales.items()):
        v = vals[:, k]
        se = v.std(ddof=1) / math.sqrt(len(v))
        out.append(ScaleCheck(which, alpha, float(v.mean()), alpha * d, float(se),
                              float((v.mean() - alpha * d) / se) if se > 0 else 0.0,
                              float(v.var(ddof=1)), 2 * alpha**2 * d))
    return out


# -- reports -----------------------------------------------------------------

SCHEMAS = {
    "grid": ("d", "sigma_sq", "algorithm", "init", "trials", "nmi_mean", "nmi_stderr", "win_rate_mean",
             "iterations_mean"),
    "divergent": ("beta", "d", "algo", "stay_ratio", "wilson_low", "wilson_high", "theory_bound"),
    "census": ("dataset_seed", "n", "d", "sigma_sq", "q", "n_balanced", "n_lloyd_fixed_balanced", "n_incorrect",
               "n_hartigan_fixed_incorrect", "lloyd_union_bound_log", "hartigan_union_bound_log"),
    "scale": ("which", "expected_scale", "mean", "expected_mean", "stderr", "z", "var", "expected_var"),
}
_KIND_OF = {CellSummary: "grid", DivergentSummary: "divergent", CensusRecord: "census", ScaleCheck: "scale"}


def _cell(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


@contextlib.contextmanager
def _open_out(path):
    if str(path) == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def write_report(results: Sequence, path, fmt: str = "csv", kind: Optional[str] = None) -> None:
    """Write one row per result; columns follow the fixed schema for ``kind``."""
    if kind is None:
        if not results:
            raise ValidationError("kind is required for an empty result list")
        kind = _KIND_OF[type(results[0])]
    columns = SCHEMAS[kind]
    if fmt not in ("csv", "json"):
        raise ValidationError(f"unknown report format {fmt!r}")
    try:
        with _open_out(path) as fh:
            if fmt == "csv":
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(columns)
                for r in results:
                    w.writerow([_cell(getattr(r, c)) for c in columns])
            elif fmt == "json":
                rows = [{f.name: getattr(r, f.name) for f in fields(r)} for r in results]
                json.dump(rows, fh, indent=1)
                fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def read_report_json(path) -> list:
    with open(path) as fh:
        return json.load(fh)


def as_dicts(results) -> list:
    return [asdict(r) for r in results]
