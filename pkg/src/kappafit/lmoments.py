"""Sample and population L-moments, and the L-moment estimator.

Population L-moments are integrals of the quantile function against shifted
Legendre polynomials (Hosking 1990).  No closed form covers the whole
four-parameter range, so they are evaluated with tanh-sinh quadrature,
which keeps its accuracy in the presence of the algebraic endpoint
singularities that appear for negative shape parameters.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .distribution import DEFAULT_POLICY, BranchPolicy, K4Params, log_pdf
from .errors import DegenerateDataError, MomentExistenceError
from .results import FitResult

__all__ = [
    "LMomentSet",
    "LmeFailure",
    "LmeOutcome",
    "sample_lmoments",
    "population_lmoments",
    "moments_exist",
    "params_from_lmoments",
    "fit_lme",
]


@dataclass(frozen=True)
class LMomentSet:
    """First two L-moments plus L-skewness and L-kurtosis.

    Only ``lambda2 > 0`` is enforced here.  The sampling-theoretic bound
    ``tau4 >= (5*tau3**2 - 1)/4`` holds for every distribution but not for
    the unbiased sample estimators (tied or small samples violate it), so
    it is checked by :func:`fit_lme` rather than at construction.
    """

    lambda1: float
    lambda2: float
    tau3: float
    tau4: float

    def __post_init__(self) -> None:
        for name in ("lambda1", "lambda2", "tau3", "tau4"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.lambda2 <= 0.0:
            raise ValueError("lambda2 must be positive")

    @property
    def lambda3(self) -> float:
        return self.tau3 * self.lambda2

    @property
    def lambda4(self) -> float:
        return self.tau4 * self.lambda2


class LmeFailure(Enum):
    """Reason an L-moment fit returned no parameters."""

    TAU_OUTSIDE_FEASIBLE = "tau_outside_feasible"
    ROOT_SOLVE_DIVERGED = "root_solve_diverged"


@dataclass(frozen=True)
class LmeOutcome:
    """Either a successful L-moment fit or a classified failure."""

    result: FitResult | None
    failure: LmeFailure | None

    def __post_init__(self) -> None:
        if (self.result is None) == (self.failure is None):
            raise ValueError("exactly one of result and failure must be set")

    @property
    def ok(self) -> bool:
        return self.result is not None


def sample_lmoments(data) -> LMomentSet:
    """Unbiased sample L-moments lambda1, lambda2 and ratios tau3, tau4.

    Uses the probability-weighted-moment estimators of Hosking (1990),
    which are unbiased for the first four L-moments.  Requires at least
    four observations; data with zero dispersion raises
    :class:`DegenerateDataError`.
    """
    x = np.asarray(data, dtype=float)
    if x.ndim != 1:
        raise ValueError("data must be one-dimensional")
    if x.size < 4:
        raise ValueError("need at least 4 observations for four L-moments")
    if not np.all(np.isfinite(x)):
        raise ValueError("data must be finite")
    if np.max(x) == np.min(x):
        raise DegenerateDataError("data has zero dispersion")

    x = np.sort(x)
    n = x.size
    i = np.arange(1, n + 1, dtype=float)
    w1 = (i - 1.0) / (n - 1.0)
    w2 = w1 * (i - 2.0) / (n - 2.0)
    w3 = w2 * (i - 3.0) / (n - 3.0)
    b0 = np.mean(x)
    b1 = np.mean(w1 * x)
    b2 = np.mean(w2 * x)
    b3 = np.mean(w3 * x)

    lam1 = b0
    lam2 = 2.0 * b1 - b0
    lam3 = 6.0 * b2 - 6.0 * b1 + b0
    lam4 = 20.0 * b3 - 30.0 * b2 + 12.0 * b1 - b0
    return LMomentSet(lam1, lam2, lam3 / lam2, lam4 / lam2)


def moments_exist(k: float, h: float) -> bool:
    """Whether the kappa distribution with these shapes has a finite mean.

    The right tail requires ``k > -1``.  For ``h < 0`` the lower endpoint
    is infinite and the left tail decays like ``|x|**(-1/(k*h))`` when
    ``k > 0``, so ``k*h > -1`` is needed as well (Hosking 1994).
    """
    if k <= -1.0:
        return False
    if h < 0.0 and k * h <= -1.0:
        return False
    return True


_T_MAX = 6.0
_LEVELS = (4, 5, 6, 7)
_QUAD_TOL = 1e-10


@lru_cache(maxsize=None)
def _nodes(level: int):
    """Tanh-sinh abscissas on (0, 1) at step 2**-level.

    Returns the distance ``v`` from each node to its nearer endpoint, a
    mask for the upper half, the quadrature weights, and the shifted
    Legendre polynomial values P1..P3 at the nodes.  Arrays are cached and
    must not be mutated.
    """
    step = 0.5**level
    count = int(np.floor(_T_MAX / step))
    t = np.arange(-count, count + 1, dtype=float) * step
    u = 0.5 * np.pi * np.sinh(t)
    e = np.exp(-2.0 * np.abs(u))
    v = e / (1.0 + e)
    w = step * np.pi * np.cosh(t) * e / (1.0 + e) ** 2
    upper = t > 0.0
    F = np.where(upper, 1.0 - v, v)
    p1 = 2.0 * F - 1.0
    p2 = (6.0 * F - 6.0) * F + 1.0
    p3 = ((20.0 * F - 30.0) * F + 12.0) * F - 1.0
    return v, upper, w, p1, p2, p3


def _std_quantile_nodes(k: float, h: float, v: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Quantiles of the (0, 1, k, h) distribution at tanh-sinh nodes.

    Works from ``log F`` computed off the nearer endpoint so that nodes
    within 1e-275 of either end still evaluate to finite values whenever
    the integral converges.
    """
    logF = np.where(upper, np.log1p(-v), np.log(v))
    if h > 0.0:
        s = -h * logF
        logw = np.log(-np.expm1(-s)) - np.log(h)
    elif h < 0.0:
        s = h * logF
        logw = s + np.log(-np.expm1(-s)) - np.log(-h)
    else:
        logw = np.log(-logF)
    if k != 0.0:
        return -np.expm1(k * logw) / k
    return -logw


def _std_lmoments(k: float, h: float, level: int) -> np.ndarray:
    v, upper, w, p1, p2, p3 = _nodes(level)
    x = _std_quantile_nodes(k, h, v, upper)
    c = w * x
    return np.array([np.sum(c), c @ p1, c @ p2, c @ p3])


def population_lmoments(params: K4Params, policy: BranchPolicy = DEFAULT_POLICY) -> LMomentSet:
    """Population L-moments of the distribution, accurate to ~1e-10.

    The quadrature level is doubled until the first four L-moments change
    by less than 1e-10 relative to their scale.  Raises
    :class:`MomentExistenceError` when the mean is infinite and
    RuntimeError if the refinement fails to stabilize (shapes very close
    to the existence boundary).
    """
    k, h = _shape_values(params.k, params.h, policy)
    if not moments_exist(k, h):
        raise MomentExistenceError(f"L-moments do not exist for k={k}, h={h}")

    prev = None
    lams = None
    for level in _LEVELS:
        lams = _std_lmoments(k, h, level)
        if not np.all(np.isfinite(lams)):
            raise RuntimeError(f"quadrature produced non-finite values for k={k}, h={h}")
        if prev is not None:
            scale = max(1.0, abs(lams[0]), abs(lams[1]))
            if np.max(np.abs(lams - prev)) < _QUAD_TOL * scale:
                break
        prev = lams
    else:
        raise RuntimeError(f"quadrature did not stabilize for k={k}, h={h}")

    lam1 = params.mu + params.sigma * lams[0]
    lam2 = params.sigma * lams[1]
    return LMomentSet(lam1, lam2, lams[2] / lams[1], lams[3] / lams[1])


def _shape_values(k: float, h: float, policy: BranchPolicy) -> tuple[float, float]:
    ke = 0.0 if abs(k) < policy.shape_zero_threshold else float(k)
    he = 0.0 if abs(h) < policy.shape_zero_threshold else float(h)
    return ke, he


_K_GRID = np.linspace(-0.9, 0.9, 21)
_H_GRID = np.linspace(-1.2, 1.2, 25)
_EXIST_MARGIN = 1e-6


@lru_cache(maxsize=1)
def _tau_table():
    """Population (tau3, tau4) on a coarse shape grid, for solver starts.

    Grid points whose moments do not exist (or whose quadrature will not
    stabilize) are masked out.
    """
    shape = (_K_GRID.size, _H_GRID.size)
    t3 = np.full(shape, np.nan)
    t4 = np.full(shape, np.nan)
    for a, k in enumerate(_K_GRID):
        for b, h in enumerate(_H_GRID):
            if not moments_exist(k, h) or (h < 0.0 and k * h <= -1.0 + 0.05):
                continue
            try:
                lms = population_lmoments(K4Params(0.0, 1.0, k, h))
            except (MomentExistenceError, RuntimeError):
                continue
            t3[a, b] = lms.tau3
            t4[a, b] = lms.tau4
    return t3, t4


def _tau_residual(k: float, h: float, target3: float, target4: float) -> np.ndarray:
    lams = None
    prev = None
    for level in _LEVELS:
        lams = _std_lmoments(k, h, level)
        if not np.all(np.isfinite(lams)) or lams[1] <= 0.0:
            raise RuntimeError("quadrature failed")
        if prev is not None:
            scale = max(1.0, abs(lams[0]), abs(lams[1]))
            if np.max(np.abs(lams - prev)) < _QUAD_TOL * scale:
                break
        prev = lams
    else:
        raise RuntimeError("quadrature did not stabilize")
    return np.array([lams[2] / lams[1] - target3, lams[3] / lams[1] - target4])


def _feasible_step(k: float, h: float) -> bool:
    if not (-1.0 + _EXIST_MARGIN < k < 10.0):
        return False
    if not (-10.0 < h < 10.0):
        return False
    if h < 0.0 and k * h <= -1.0 + _EXIST_MARGIN:
        return False
    return True


def _solve_tau(
    target3: float,
    target4: float,
    k0: float,
    h0: float,
    max_iter: int,
    tol: float,
) -> tuple[float, float, int] | None:
    """Damped Newton iteration on (tau3, tau4) residuals. None on failure."""
    k, h = float(k0), float(h0)
    try:
        r = _tau_residual(k, h, target3, target4)
    except RuntimeError:
        return None
    rn = np.max(np.abs(r))
    delta = 1e-6
    for it in range(max_iter):
        if rn < tol:
            return k, h, it
        try:
            jk = (
                _tau_residual(k + delta, h, target3, target4)
                - _tau_residual(k - delta, h, target3, target4)
            ) / (2.0 * delta)
            jh = (
                _tau_residual(k, h + delta, target3, target4)
                - _tau_residual(k, h - delta, target3, target4)
            ) / (2.0 * delta)
        except RuntimeError:
            return None
        jac = np.column_stack([jk, jh])
        try:
            step = np.linalg.solve(jac, r)
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        accepted = False
        while lam >= 1e-8:
            kn = k - lam * step[0]
            hn = h - lam * step[1]
            if _feasible_step(kn, hn):
                try:
                    r_new = _tau_residual(kn, hn, target3, target4)
                except RuntimeError:
                    r_new = None
                if r_new is not None and np.max(np.abs(r_new)) < rn:
                    k, h, r = kn, hn, r_new
                    rn = np.max(np.abs(r))
                    accepted = True
                    break
            lam *= 0.5
        if not accepted:
            return None
        if lam * np.max(np.abs(step)) < 1e-13 and rn >= tol:
            return None
    return None


def _match_lmoments(
    lms: LMomentSet,
    policy: BranchPolicy,
    max_iter: int,
    tol: float,
) -> tuple[K4Params, int] | None:
    """Parameters whose population L-moments equal ``lms``, or None.

    The ratio map folds: most interior (tau3, tau4) pairs are attained by
    two parameter pairs, the second of which has strongly negative h.
    All starts are therefore solved and the root with the largest h is
    kept, which selects the moderate branch deterministically.
    """
    t3, t4 = lms.tau3, lms.tau4
    tab3, tab4 = _tau_table()
    dist2 = (tab3 - t3) ** 2 + (tab4 - t4) ** 2
    flat = np.where(np.isnan(dist2), np.inf, dist2).ravel()
    order = np.argsort(flat)[:3]

    roots: list[tuple[float, float, int]] = []
    for idx in order:
        if not np.isfinite(flat[idx]):
            break
        a, b = np.unravel_index(idx, dist2.shape)
        solved = _solve_tau(t3, t4, _K_GRID[a], _H_GRID[b], max_iter, tol)
        if solved is None:
            continue
        k, h, iters = solved
        if not any(abs(k - rk) < 1e-7 and abs(h - rh) < 1e-7 for rk, rh, _ in roots):
            roots.append((k, h, iters))
    if not roots:
        return None

    k, h, iters = max(roots, key=lambda r: r[1])
    k, h = _shape_values(k, h, policy)
    popstd = population_lmoments(K4Params(0.0, 1.0, k, h), policy)
    sigma = lms.lambda2 / popstd.lambda2
    mu = lms.lambda1 - sigma * popstd.lambda1
    return K4Params(mu, sigma, k, h), iters


def params_from_lmoments(
    lms: LMomentSet,
    *,
    policy: BranchPolicy = DEFAULT_POLICY,
    max_iter: int = 100,
    tol: float = 1e-11,
) -> K4Params | None:
    """Invert the population L-moment map, or None when no root is found.

    Composed with :func:`population_lmoments` this is the identity on the
    parameter space (to solver tolerance), which is the defining property
    of the L-moment estimator.  The identity holds away from the fold of
    the ratio map; where two roots share the same ratios, the one with
    the larger h is returned.
    """
    matched = _match_lmoments(lms, policy, max_iter, tol)
    return None if matched is None else matched[0]


def fit_lme(
    data,
    *,
    policy: BranchPolicy = DEFAULT_POLICY,
    max_iter: int = 100,
    tol: float = 1e-11,
) -> LmeOutcome:
    """L-moment estimate of the four parameters.

    Matches the sample (tau3, tau4) to their population counterparts by a
    damped Newton iteration started from the best cells of a precomputed
    shape grid, then recovers sigma and mu from lambda2 and lambda1.
    Failures are classified rather than raised: sample ratios outside the
    feasible region give ``TAU_OUTSIDE_FEASIBLE``, a stalled or diverged
    iteration gives ``ROOT_SOLVE_DIVERGED``.  Sample ratios that no
    parameter choice can attain (tau4 above the generalized-logistic
    ceiling happens regularly at small n) surface as divergence, so a
    failed outcome is an expected result, not an exception.  Input
    validation errors are those of :func:`sample_lmoments`.
    """
    lms = sample_lmoments(data)
    t3, t4 = lms.tau3, lms.tau4
    if not (abs(t3) < 1.0 and t4 < 1.0 and t4 >= (5.0 * t3 * t3 - 1.0) / 4.0):
        return LmeOutcome(None, LmeFailure.TAU_OUTSIDE_FEASIBLE)

    matched = _match_lmoments(lms, policy, max_iter, tol)
    if matched is None:
        return LmeOutcome(None, LmeFailure.ROOT_SOLVE_DIVERGED)
    params, iters = matched
    nll = float(-np.sum(log_pdf(params, np.asarray(data, dtype=float), policy)))
    result = FitResult(
        params=params,
        nll=nll,
        penalized_nll=nll,
        method="LME",
        converged=True,
        iterations=iters,
    )
    return LmeOutcome(result, None)
