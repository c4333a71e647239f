"""Goodness-of-fit statistics for fitted kappa models.

Three fit diagnostics: mean percentage absolute error between order
statistics and fitted quantiles at the Hazen-like plotting position
(i - 0.35)/n, the Anderson-Darling statistic, and the Kolmogorov-Smirnov
statistic. Because the parameters are estimated from the same data,
plug-in null tables do not apply; p-values come from a parametric
bootstrap that refits every synthetic sample with the same procedure.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .distribution import (
    BranchPolicy,
    DEFAULT_POLICY,
    K4Params,
    cdf,
    quantile,
    sample,
    support,
)
from .errors import DegenerateDataError
from .results import FitResult

__all__ = [
    "BootstrapPvalues",
    "GofReport",
    "SupportMismatchWarning",
    "ad_statistic",
    "bootstrap_pvalues",
    "gof_report",
    "ks_statistic",
    "mpae",
]

Fitter = Callable[[np.ndarray], FitResult]

_CDF_CLAMP = 1e-12


class SupportMismatchWarning(UserWarning):
    """Data fell outside the fitted support; statistics use clamped cdf values."""


@dataclass(frozen=True)
class GofReport:
    """Bundle of fit statistics, with bootstrap p-values when requested."""

    mpae: float
    ad: float
    ks: float
    ad_pvalue: float | None = None
    ks_pvalue: float | None = None
    bootstrap_reps: int = 0

    def __post_init__(self) -> None:
        if self.mpae < 0:
            raise ValueError("mpae must be nonnegative")
        if self.ad < 0:
            raise ValueError("ad must be nonnegative")
        if not 0.0 <= self.ks <= 1.0:
            raise ValueError("ks must lie in [0, 1]")
        if self.bootstrap_reps > 0:
            if self.ad_pvalue is None or self.ks_pvalue is None:
                raise ValueError("p-values required when bootstrap_reps > 0")
            for p in (self.ad_pvalue, self.ks_pvalue):
                if not 0.0 <= p <= 1.0:
                    raise ValueError("p-values must lie in [0, 1]")
        elif self.ad_pvalue is not None or self.ks_pvalue is not None:
            raise ValueError("p-values present without bootstrap replicates")


class BootstrapPvalues(NamedTuple):
    """Parametric-bootstrap p-values with refit-failure accounting."""

    ad_pvalue: float
    ks_pvalue: float
    failures: int
    reliable: bool


def _sorted_data(data, min_n: int) -> np.ndarray:
    x = np.asarray(data, dtype=float)
    if x.ndim != 1:
        raise ValueError("data must be one-dimensional")
    if x.size < min_n:
        raise ValueError(f"need at least {min_n} data points, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("data must be finite")
    return np.sort(x)


def mpae(data, params: K4Params, policy: BranchPolicy = DEFAULT_POLICY) -> float:
    """Mean absolute gap between order statistics and fitted quantiles.

    Quantiles are evaluated at the plotting positions (i - 0.35)/n.
    """
    x = _sorted_data(data, 1)
    n = x.size
    positions = (np.arange(1, n + 1) - 0.35) / n
    fitted = quantile(params, positions, policy)
    return float(np.mean(np.abs(x - fitted)))


def _clamped_cdf(x: np.ndarray, params: K4Params, policy: BranchPolicy) -> np.ndarray:
    bounds = support(params, policy)
    if np.any(x < bounds.lower) or np.any(x > bounds.upper):
        warnings.warn(
            "data outside the fitted support; cdf values clamped",
            SupportMismatchWarning,
            stacklevel=3,
        )
    return np.clip(cdf(params, x, policy), _CDF_CLAMP, 1.0 - _CDF_CLAMP)


def ad_statistic(data, params: K4Params, policy: BranchPolicy = DEFAULT_POLICY) -> float:
    """Anderson-Darling statistic with the fitted parameters plugged in.

    Off-support points would send the log terms to infinity, so cdf values
    are clamped to [1e-12, 1 - 1e-12] and a SupportMismatchWarning is
    issued when any point lies outside the fitted support.
    """
    x = _sorted_data(data, 2)
    n = x.size
    F = _clamped_cdf(x, params, policy)
    weights = 2.0 * np.arange(1, n + 1) - 1.0
    return float(-n - np.mean(weights * (np.log(F) + np.log1p(-F[::-1]))))


def ks_statistic(data, params: K4Params, policy: BranchPolicy = DEFAULT_POLICY) -> float:
    """Kolmogorov-Smirnov distance between the empirical and fitted cdf."""
    x = _sorted_data(data, 1)
    n = x.size
    F = cdf(params, x, policy)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - F)
    d_minus = np.max(F - (i - 1) / n)
    return float(max(d_plus, d_minus))


def gof_report(data, params: K4Params, policy: BranchPolicy = DEFAULT_POLICY) -> GofReport:
    """Evaluate all three statistics at the given parameters, no p-values."""
    return GofReport(
        mpae=mpae(data, params, policy),
        ad=ad_statistic(data, params, policy),
        ks=ks_statistic(data, params, policy),
    )


def bootstrap_pvalues(
    data,
    method: Fitter,
    reps: int = 999,
    seed: int = 0,
    policy: BranchPolicy = DEFAULT_POLICY,
) -> BootstrapPvalues:
    """Parametric-bootstrap p-values for the AD and KS statistics.

    The observed statistics come from fitting ``data`` with ``method``.
    Each replicate draws a sample of the same size from the fitted
    parameters, refits it with the same method, and evaluates the
    statistics at the refit parameters; p = (1 + #{replicate >= observed})
    / (successes + 1). Replicates whose refit raises or fails to converge
    are excluded and counted; more than 20% failures marks the p-values
    unreliable. Replicate streams derive from (seed, replicate index), so
    results are independent of evaluation order.
    """
    if reps < 99:
        raise ValueError("need at least 99 bootstrap replicates")
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    x = _sorted_data(data, 2)
    observed = method(x)
    if observed is None or not observed.converged:
        raise ValueError("method did not converge on the observed data")
    fitted = observed.params
    obs_ad = ad_statistic(x, fitted, policy)
    obs_ks = ks_statistic(x, fitted, policy)

    ad_exceed = ks_exceed = successes = failures = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SupportMismatchWarning)
        for j in range(reps):
            rng = np.random.default_rng([seed, j])
            boot = sample(fitted, x.size, rng)
            try:
                refit = method(boot)
            except (ValueError, DegenerateDataError):
                refit = None
            if refit is None or not refit.converged:
                failures += 1
                continue
            successes += 1
            if ad_statistic(boot, refit.params, policy) >= obs_ad:
                ad_exceed += 1
            if ks_statistic(boot, refit.params, policy) >= obs_ks:
                ks_exceed += 1
    if successes == 0:
        raise ValueError("every bootstrap refit failed")
    return BootstrapPvalues(
        ad_pvalue=(1 + ad_exceed) / (successes + 1),
        ks_pvalue=(1 + ks_exceed) / (successes + 1),
        failures=failures,
        reliable=failures <= 0.2 * reps,
    )
