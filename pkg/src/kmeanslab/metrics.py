"""Partition agreement and proportion statistics."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .model import ValidationError


class WilsonInterval(NamedTuple):
    low: float
    high: float
    center: float
    width: float
    estimate: float


def contingency(a, b) -> np.ndarray:
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValidationError("label vectors differ in length")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia.reshape(-1), ib.reshape(-1)), 1)
    return table


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def nmi(a, b) -> float:
    """Mutual information normalized by the arithmetic mean of the entropies.

    Two constant labelings score 1; a constant labeling against a
    non-constant one scores 0.
    """
    table = contingency(a, b)
    n = table.sum()
    if n == 0:
        raise ValidationError("need at least one sample")
    ra, cb = table.sum(axis=1), table.sum(axis=0)
    ha, hb = _entropy(ra, n), _entropy(cb, n)
    if ha == 0 or hb == 0:
        return 1.0 if ha == hb else 0.0
    nz = table > 0
    pij = table[nz] / n
    outer = np.outer(ra, cb)[nz] / (n * n)
    mi = float(np.sum(pij * np.log(pij / outer)))
    return float(min(1.0, max(0.0, mi / ((ha + hb) / 2))))


def win_rate_score(loss_alg: float, loss_truth: float, rel_tol: float = 1e-6) -> int:
    """+1 if the algorithm beats the ground-truth loss, -1 if it loses, 0 within tolerance."""
    scale = max(loss_truth, np.finfo(float).tiny)
    if abs(loss_alg - loss_truth) <= rel_tol * scale:
        return 0
    return 1 if loss_alg < loss_truth else -1


def wilson_interval(n_success: int, n_fail: int, z: float = 1.96) -> WilsonInterval:
    n = n_success + n_fail
    if n < 1:
        raise ValidationError("need at least one trial")
    if not z > 0:
        raise ValidationError("z must be positive")
    z2 = z * z
    center = (n_success + z2 / 2) / (n + z2)
    width = z / (n + z2) * math.sqrt(n_success * n_fail / n + z2 / 4)
    low = max(0.0, center - width)
    high = min(1.0, center + width)
    return WilsonInterval(low, high, center, width, n_success / n)
