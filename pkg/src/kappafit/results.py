"""Result container shared by all estimation routines."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distribution import K4Params


@dataclass(frozen=True)
class FitResult:
    """Outcome of a successful parameter estimation.

    Attributes
    ----------
    params : K4Params
        Estimated distribution parameters.
    nll : float
        Negative log-likelihood of the data at ``params``.  May be ``inf``
        for moment-based fits whose support excludes an observation.
    penalized_nll : float
        Penalized negative log-likelihood; equals ``nll`` when no penalty
        was applied.
    method : str
        Label of the estimator that produced the fit, e.g. ``"MLE"``,
        ``"LME"``, or ``"MPLE.MSo(k)MSo(h)"``.
    converged : bool
        Whether the underlying solver reported convergence.
    iterations : int
        Number of solver iterations consumed.
    se : np.ndarray | None
        Standard errors for (mu, sigma, k, h) when available, else None.
    """

    params: K4Params
    nll: float
    penalized_nll: float
    method: str
    converged: bool
    iterations: int
    se: np.ndarray | None = None

    def __post_init__(self) -> None:
        if np.isnan(self.nll):
            raise ValueError("nll must not be NaN")
        if np.isnan(self.penalized_nll):
            raise ValueError("penalized_nll must not be NaN")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
