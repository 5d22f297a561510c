"""Closed-form distance scales and probability bounds.

Squared distances from a sample to empirical centroids under the isotropic
mixture are scaled chi-square variables with d degrees of freedom.  The
functions here evaluate those scales and the Chernoff-type bounds built on
them.  Bounds of the form ``rho ** (d / 4)`` are returned as probabilities;
union bounds are evaluated in log space and reported both raw and clamped.

Most functions validate the domain of the statement they implement.  Pass
``unchecked=True`` to evaluate the arithmetic at boundary inputs anyway.
"""

from __future__ import annotations

import math
from typing import NamedTuple

from .model import ValidationError


class ScalePair(NamedTuple):
    """Chi-square scales with ``b1`` the larger one."""

    b1: float
    b2: float


class UnionBound(NamedTuple):
    log_value: float
    probability: float


def _require(cond, msg, unchecked=False):
    if not unchecked and not cond:
        raise ValidationError(msg)


def alpha_current(tau_sq, sigma_sq, c, r):
    """Scale of ||x_i - mu_j||^2 for the cluster j that contains i.

    ``c`` is the cluster size and ``r`` the fraction of the cluster sharing
    sample i's class.
    """
    _require(c >= 1 and 0 <= r <= 1, "need c >= 1 and r in [0, 1]")
    return 2 * tau_sq * (1 - r) ** 2 + (1 - 1 / c) * sigma_sq


def alpha_other(tau_sq, sigma_sq, c_bar, r):
    """Scale of the squared distance to a cluster of size ``c_bar`` not containing i."""
    _require(c_bar >= 1 and 0 <= r <= 1, "need c_bar >= 1 and r in [0, 1]")
    return 2 * tau_sq * (1 - r) ** 2 + (1 + 1 / c_bar) * sigma_sq


def favorable_current_scale(tau_sq, sigma_sq, c):
    """Largest current-cluster scale over feasible purities (purity 1/c)."""
    return (1 - 1 / c) * sigma_sq + 2 * tau_sq * (c - 1) ** 2 / c**2


def favorable_other_scale(sigma_sq, c_bar):
    """Smallest other-cluster scale (purity 1)."""
    return (1 + 1 / c_bar) * sigma_sq


def most_favorable_scales(tau_sq, sigma_sq, c, c_bar) -> ScalePair:
    _require(c >= 2 and c_bar >= 1, "need c >= 2 and c_bar >= 1")
    a_t = favorable_other_scale(sigma_sq, c_bar)
    a_c = favorable_current_scale(tau_sq, sigma_sq, c)
    if not a_t > a_c:
        raise ValidationError(
            f"noise below threshold: other-cluster scale {a_t:.6g} <= current-cluster scale {a_c:.6g}"
        )
    return ScalePair(a_t, a_c)


def rho_from_scales(b1, b2):
    return 1 - ((b1 - b2) / (b1 + b2)) ** 2


def chi_diff_tail_bound(sp: ScalePair, m, d, return_rho=False):
    """Upper bound on P(Y1 - Y2 <= m) for Y_k ~ b_k chi^2_d, b1 > b2 > 0."""
    b1, b2 = sp
    if not (b1 > b2 > 0):
        raise ValidationError(f"need b1 > b2 > 0, got b1={b1}, b2={b2}")
    _require(d >= 1, "need d >= 1")
    rho = rho_from_scales(b1, b2)
    bound = math.exp(m * (b1 - b2) / (8 * b1 * b2) + (d / 4) * math.log(rho))
    return (bound, rho) if return_rho else bound


def lloyd_noise_threshold(tau, c, c_bar, unchecked=False):
    """Noise level sigma above which the single-sample Lloyd bound applies."""
    _require(c >= 2 and c_bar >= 1, "need c >= 2 and c_bar >= 1", unchecked)
    return math.sqrt(2 * c_bar) * tau * (c - 1) / math.sqrt(c * (c + c_bar))


def lloyd_rho(tau_sq, sigma_sq, c, c_bar, unchecked=False):
    """Decay base of the single-sample Lloyd switch probability."""
    _require(c >= 2 and c_bar >= 1, "need c >= 2 and c_bar >= 1", unchecked)
    if not unchecked and not math.sqrt(sigma_sq) > lloyd_noise_threshold(math.sqrt(tau_sq), c, c_bar):
        raise ValidationError("sigma must exceed the Lloyd noise threshold")
    s2, t2, cb = sigma_sq, tau_sq, c_bar
    num = 4 * s2 * (c - 1) * c**2 * cb * (cb + 1) * (c * (s2 + 2 * t2) - 2 * t2)
    den = (-c * (s2 + 4 * t2) * cb + c**2 * (s2 + 2 * (s2 + t2) * cb) + 2 * t2 * cb) ** 2
    return num / den


def lloyd_rho_from_scales(tau_sq, sigma_sq, c, c_bar):
    """Same quantity as :func:`lloyd_rho`, assembled from the extremal scales."""
    a_t = favorable_other_scale(sigma_sq, c_bar)
    a_c = favorable_current_scale(tau_sq, sigma_sq, c)
    return rho_from_scales(a_t, a_c)


def sigma_balanced(beta, n, q, unchecked=False):
    """Noise level that makes every q-balanced partition satisfy the Lloyd condition (tau = 1)."""
    _require(n >= 4 and q >= 1 and beta >= 1, "need n >= 4, q >= 1, beta >= 1", unchecked)
    root_n = math.sqrt(n)
    return beta * (root_n * q + n - 2) / (math.sqrt(2) * math.sqrt(root_n * q + n))


def lloyd_rho_balanced(sigma, n, q, unchecked=False):
    """Uniform decay base over q-balanced partitions (tau = 1)."""
    _require(n >= 4 and q >= 1, "need n >= 4 and q >= 1", unchecked)
    s2 = sigma * sigma
    rn = math.sqrt(n)
    a = rn * q + n
    num = s2 * (a - 2) * a * (a + 2) * (rn * (s2 + 2) * (rn + q) - 4)
    den = (n * s2 * (rn + q) ** 2 + (a - 2) ** 2) ** 2
    return num / den


def rho_q(beta, n, q, unchecked=False):
    """Balanced decay base written in terms of beta (tau = 1).

    Equal to ``lloyd_rho_balanced(sigma_balanced(beta, n, q), n, q)``.  At
    c = c_bar = (n + q sqrt(n)) / 2 the scale ratio simplifies to
    (beta^2 - 1) / (beta^2 c + 1), which makes beta = 1 give exactly 1.
    """
    _require(n >= 4 and q >= 1 and beta >= 1, "need n >= 4, q >= 1, beta >= 1", unchecked)
    c = (n + q * math.sqrt(n)) / 2
    b2 = beta * beta
    return 1 - ((b2 - 1) / (b2 * c + 1)) ** 2


def rho_balanced_asymptotic(beta, n, q=None):
    """Large-n expansion of the balanced decay base.

    With ``q`` given, includes the n^(-5/2) correction term.
    """
    b2 = beta * beta
    out = 1 - 4 * (b2 - 1) ** 2 / (b2 * b2 * n * n)
    if q is not None:
        out += 8 * (b2 - 1) ** 2 * q / (b2 * b2 * n**2.5)
    return out


def sigma_sq_balanced_asymptotic(beta, n, q):
    b2 = beta * beta
    return b2 * n / 2 + b2 * q * math.sqrt(n) / 2 - 2 * b2 + 2 * b2 / n


def _union(log_count, d, rho):
    if not 0 <= rho <= 1:
        raise ValidationError("rho must lie in [0, 1]")
    if rho == 0:
        return UnionBound(-math.inf, 0.0)
    log_value = log_count + (d / 4) * math.log(rho)
    return UnionBound(log_value, math.exp(min(log_value, 0.0)))


def lloyd_union_bound(n, d, rho_q) -> UnionBound:
    """Bound on P(some balanced partition is not a Lloyd fixed point): 2^n n rho_q^(d/4)."""
    return _union(n * math.log(2) + math.log(n), d, rho_q)


def hartigan_union_bound(n, d, rho_h) -> UnionBound:
    """Bound on P(some incorrect partition is a Hartigan fixed point): 2^n rho_h^(d/4)."""
    return _union(n * math.log(2), d, rho_h)


def hartigan_weight(size, is_current):
    return size / (size - 1) if is_current else size / (size + 1)


def hartigan_eta(tau_sq, sigma_sq, size, r, is_current, unchecked=False):
    """Scale of the Hartigan weighted distance to a cluster."""
    if is_current:
        _require(size >= 2, "current cluster must hold at least two samples", unchecked)
    w = hartigan_weight(size, is_current)
    return 2 * tau_sq * w * (1 - r) ** 2 + sigma_sq


def hartigan_rho(tau_sq, sigma_sq, size_j, size_jbar, r_j, r_jbar, unchecked=False):
    """Decay base bounding the probability that Hartigan keeps sample i in place."""
    _require(size_j >= 2 and size_jbar >= 1, "need size_j >= 2 and size_jbar >= 1", unchecked)
    _require(0 < r_j <= r_jbar <= 1, "need 0 < r_j <= r_jbar <= 1", unchecked)
    a = hartigan_weight(size_j, True) * (1 - r_j) ** 2
    b = hartigan_weight(size_jbar, False) * (1 - r_jbar) ** 2
    return 1 - (tau_sq * (a - b) / (tau_sq * (a + b) + sigma_sq)) ** 2


def hartigan_rho_uniform(tau_sq, sigma_sq, n, r_star, unchecked=False):
    """Decay base valid for every nonempty incorrect bipartition."""
    _require(n >= 4, "need n >= 4", unchecked)
    _require(0 < r_star <= 0.5, "need 0 < r_star <= 0.5", unchecked)
    return 1 - (4 * tau_sq * r_star**2 / n / (3 * tau_sq + sigma_sq)) ** 2
