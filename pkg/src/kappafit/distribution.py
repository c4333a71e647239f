"""Four-parameter kappa distribution (K4D): density, cdf, quantile, sampling.

The K4D has location mu, scale sigma and two shape parameters k and h
(Hosking 1994).  It contains the generalized Pareto (h=1), GEV (h=0),
generalized logistic (h=-1) and generalized Gumbel (k=0) families as
special cases.  All evaluators below switch to the exact limit
distributions when a shape parameter is within ``BranchPolicy.shape_zero_threshold``
of zero, so optimizers can propose k, h arbitrarily close to 0 without
hitting 0/0 forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "K4Params",
    "Support",
    "BranchPolicy",
    "DEFAULT_POLICY",
    "SpecialCase",
    "pdf",
    "log_pdf",
    "cdf",
    "quantile",
    "support",
    "sample",
    "classify_special_case",
]


@dataclass(frozen=True)
class K4Params:
    """Parameter vector (mu, sigma, k, h); sigma must be strictly positive."""

    mu: float
    sigma: float
    k: float
    h: float

    def __post_init__(self):
        vals = (self.mu, self.sigma, self.k, self.h)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"parameters must be finite, got {vals}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.sigma, self.k, self.h])


@dataclass(frozen=True)
class Support:
    """Interval on which the distribution puts mass; endpoints may be +-inf.

    Finite endpoints are treated as outside: cdf is clamped to 0/1 there
    and pdf to 0, so the interior is always the open interval.
    """

    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"empty support [{self.lower}, {self.upper}]")

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x)
        return (x > self.lower) & (x < self.upper)


@dataclass(frozen=True)
class BranchPolicy:
    """Threshold below which |k| or |h| is routed to the limit branch."""

    shape_zero_threshold: float = 1e-9

    def __post_init__(self):
        if not 0 < self.shape_zero_threshold < 1e-4:
            raise ValueError(
                f"threshold must lie in (0, 1e-4), got {self.shape_zero_threshold}"
            )


DEFAULT_POLICY = BranchPolicy()


class SpecialCase(Enum):
    GPD = "GPD"
    GEV = "GEV"
    GLO = "GLO"
    GENERALIZED_GUMBEL = "GENERALIZED_GUMBEL"
    GENERAL = "GENERAL"


def _check_x(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    return x


def _effective_shapes(params: K4Params, policy: BranchPolicy) -> tuple[float, float]:
    thr = policy.shape_zero_threshold
    k = 0.0 if abs(params.k) < thr else params.k
    h = 0.0 if abs(params.h) < thr else params.h
    return k, h


def cdf(params: K4Params, x, policy: BranchPolicy = DEFAULT_POLICY):
    """Cumulative distribution function, clamped to 0 below and 1 above support.

    Accepts scalar or array x; returns the same shape.
    """
    x = _check_x(x)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    k, h = _effective_shapes(params, policy)
    y = (x - params.mu) / params.sigma

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if k != 0.0:
            ky = k * y
            # 1 - k*y <= 0 is off-support: beyond the upper bound when
            # k > 0, below the lower bound when k < 0.  log1p keeps the
            # power accurate when k is at the branch threshold.
            t = np.where(ky < 1.0, np.exp(np.log1p(-np.minimum(ky, 1.0)) / k), np.nan)
        else:
            t = np.exp(-y)
        if h != 0.0:
            ht = h * t
            F = np.where(ht < 1.0, np.exp(np.log1p(-np.minimum(ht, 1.0)) / h), 0.0)
        else:
            F = np.exp(-t)

    if k > 0:
        F = np.where(np.isnan(t), 1.0, F)
    elif k < 0:
        F = np.where(np.isnan(t), 0.0, F)
    F = np.clip(F, 0.0, 1.0)
    return float(F[0]) if scalar else F


def log_pdf(params: K4Params, x, policy: BranchPolicy = DEFAULT_POLICY):
    """Log density; -inf outside the (open) support."""
    x = _check_x(x)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    k, h = _effective_shapes(params, policy)
    sup = support(params, policy)
    inside = sup.contains(x)
    y = (x - params.mu) / params.sigma

    out = np.full(x.shape, -np.inf)
    if np.any(inside):
        yi = y[inside]
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            if k != 0.0:
                log_g = np.log1p(-np.minimum(k * yi, 1.0))
                log_inner = (1.0 / k - 1.0) * log_g
                t = np.exp(log_g / k)
            else:
                log_inner = -yi
                t = np.exp(-yi)
            if h != 0.0:
                logF = np.log1p(-np.minimum(h * t, 1.0)) / h
            else:
                logF = -t
            out[inside] = -math.log(params.sigma) + log_inner + (1.0 - h) * logF
    out = np.where(np.isnan(out), -np.inf, out)
    return float(out[0]) if scalar else out


def pdf(params: K4Params, x, policy: BranchPolicy = DEFAULT_POLICY):
    """Probability density; 0 outside the support."""
    lp = log_pdf(params, x, policy)
    with np.errstate(over="ignore"):
        return np.exp(lp)


def quantile(params: K4Params, F, policy: BranchPolicy = DEFAULT_POLICY):
    """Inverse cdf for F strictly inside (0, 1)."""
    F = np.asarray(F, dtype=float)
    scalar = F.ndim == 0
    F = np.atleast_1d(F)
    if not np.all(np.isfinite(F)) or np.any(F <= 0.0) or np.any(F >= 1.0):
        raise ValueError("F must lie strictly inside (0, 1)")
    k, h = _effective_shapes(params, policy)

    with np.errstate(over="ignore"):
        if h != 0.0:
            # (1 - F^h)/h, written to stay accurate as F -> 1
            w = -np.expm1(h * np.log(F)) / h
        else:
            w = -np.log(F)
        if k != 0.0:
            # sigma/k * (1 - w^k) via expm1, accurate for k near the threshold
            x = params.mu - params.sigma * np.expm1(k * np.log(w)) / k
        else:
            x = params.mu - params.sigma * np.log(w)
    return float(x[0]) if scalar else x


def support(params: K4Params, policy: BranchPolicy = DEFAULT_POLICY) -> Support:
    """Interval where the density is positive, from the cdf validity ranges."""
    k, h = _effective_shapes(params, policy)
    mu, sigma = params.mu, params.sigma

    upper = mu + sigma / k if k > 0 else math.inf
    if h > 0:
        if k != 0.0:
            lower = mu + sigma * (1.0 - h ** (-k)) / k
        else:
            lower = mu + sigma * math.log(h)
    elif k < 0:
        lower = mu + sigma / k
    else:
        lower = -math.inf
    return Support(lower, upper)


def sample(
    params: K4Params,
    n: int,
    seed=None,
    policy: BranchPolicy = DEFAULT_POLICY,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Draw n variates by inverse-transform sampling.

    Deterministic for a given seed; pass ``rng`` instead to consume an
    existing stream (e.g. a per-replication substream).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if rng is None:
        rng = np.random.default_rng(seed)
    u = rng.random(n)
    # random() can return exactly 0.0; quantile needs (0, 1)
    u = np.maximum(u, 2.0**-53)
    return quantile(params, u, policy)


def classify_special_case(params: K4Params, tol: float = 1e-9) -> tuple[SpecialCase, ...]:
    """Known sub-families the parameters fall into, h-matches before the k-match.

    Returns every match within tol, e.g. (GEV, GENERALIZED_GUMBEL) for
    k = h = 0; (GENERAL,) when no special case applies.
    """
    if tol < 0:
        raise ValueError("tol must be >= 0")
    tags = []
    if abs(params.h - 1.0) <= tol:
        tags.append(SpecialCase.GPD)
    if abs(params.h) <= tol:
        tags.append(SpecialCase.GEV)
    if abs(params.h + 1.0) <= tol:
        tags.append(SpecialCase.GLO)
    if abs(params.k) <= tol:
        tags.append(SpecialCase.GENERALIZED_GUMBEL)
    if not tags:
        tags.append(SpecialCase.GENERAL)
    return tuple(tags)
