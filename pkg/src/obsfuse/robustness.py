"""Leave-one-out cross-validation on the experimental units.

Folds only ever drop experimental units; the observational statistics are
computed once and held fixed across folds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import FusedDataset, split
from .errors import DegenerateFold, SingularDesign, ValidationError
from .estimators import (
    SINGULAR_TOL,
    ExperimentOnly,
    ObsFit,
    Regularized,
    Weighted,
    _ols,
    bias_corrected_obs,
    fit_observational,
)
from .moments import Moments, X, Y, Z

DEFAULT_WEIGHT_GRID = tuple(round(0.05 * k, 2) for k in range(21))
DEFAULT_LAMBDA_GRID = (0.0, *np.logspace(-3, 4, 25).tolist(), math.inf)


@dataclass(frozen=True)
class CVResult:
    grid: tuple[float, ...]
    cv_error: tuple[float, ...]
    selected: int

    def __post_init__(self):
        if len(self.grid) != len(self.cv_error):
            raise ValueError("grid and cv_error differ in length")

    @property
    def best(self) -> float:
        return self.grid[self.selected]

    @classmethod
    def from_errors(cls, grid, errors) -> "CVResult":
        errors = np.asarray(errors, float)
        return cls(tuple(float(g) for g in grid), tuple(errors.tolist()), int(np.argmin(errors)))


def _folds(ds: FusedDataset):
    exp, obs = split(ds)
    if len(exp) < 4:
        raise ValidationError("leave-one-out needs at least 4 experimental units")
    loo = Moments.leave_one_out(exp)
    return exp, obs, loo


def _obs_fit(obs) -> ObsFit | None:
    return fit_observational(obs) if len(obs) else None


def _first_bad_fold(loo: Moments) -> int:
    a = loo.design
    ev = np.linalg.eigvalsh(a)
    bad = ~(ev[:, -1] > 0) | (np.abs(ev[:, 0]) < SINGULAR_TOL * ev[:, -1])
    hits = np.flatnonzero(bad)
    return int(hits[0]) if hits.size else 0


def _prediction_errors(exp, loo: Moments, b1, b2) -> np.ndarray:
    return (
        (exp.y - loo.mean[:, Y])
        - b1 * (exp.x - loo.mean[:, X])
        - b2 * (exp.z - loo.mean[:, Z])
    )


def loocv_error(ds: FusedDataset, estimator=None, obs_fit: ObsFit | None = None) -> float:
    """Mean squared leave-one-out prediction error over experimental units.

    ``estimator`` is a handle from :mod:`obsfuse.estimators` (``fit(m_e, obs)``);
    the default is the experiment-only regression.  Predictions include the
    fold's intercept, matching the demeaned fits.
    """
    estimator = estimator or ExperimentOnly()
    exp, obs, loo = _folds(ds)
    if obs_fit is None and not isinstance(estimator, ExperimentOnly):
        obs_fit = _obs_fit(obs)
    try:
        b1, b2 = estimator.fit(loo, obs_fit)
    except SingularDesign as exc:
        raise DegenerateFold(_first_bad_fold(loo), exc) from exc
    r = _prediction_errors(exp, loo, b1, b2)
    return float(np.mean(r**2))


def tune_weight(ds: FusedDataset, grid=DEFAULT_WEIGHT_GRID, obs_fit: ObsFit | None = None) -> CVResult:
    """LOOCV over w_O for w_O*beta1_O + (1 - w_O)*beta1_E (b2 from the experiment)."""
    grid = tuple(grid)
    if not grid or any(not 0 <= w <= 1 for w in grid):
        raise ValueError("weight grid must be non-empty with values in [0, 1]")
    exp, obs, loo = _folds(ds)
    obs_fit = obs_fit or fit_observational(obs)
    try:
        b1e, b2e, var, _ = _ols(loo)
    except SingularDesign as exc:
        raise DegenerateFold(_first_bad_fold(loo), exc) from exc
    b1o, _ = bias_corrected_obs(obs_fit.b_iv, obs_fit.gamma, b2e)
    base = _prediction_errors(exp, loo, b1e, b2e)
    shift = (b1o - b1e) * (exp.x - loo.mean[:, X])
    w = np.asarray(grid, float)[:, None]
    errors = np.mean((base[None, :] - w * shift[None, :]) ** 2, axis=1)
    return CVResult.from_errors(grid, errors)


def tune_lambda(ds: FusedDataset, grid=DEFAULT_LAMBDA_GRID, obs_fit: ObsFit | None = None) -> CVResult:
    """LOOCV over the regularization strength of the constrained regression."""
    grid = tuple(float(g) for g in grid)
    if not grid or any(not g >= 0 for g in grid):
        raise ValueError("lambda grid must be non-empty and >= 0")
    _, obs = split(ds)
    obs_fit = obs_fit or fit_observational(obs)
    errors = [loocv_error(ds, Regularized(lam), obs_fit) for lam in grid]
    return CVResult.from_errors(grid, errors)


def cv_result_rows(result: CVResult) -> list[tuple[float, float, int]]:
    return [(g, e, int(i == result.selected)) for i, (g, e) in enumerate(zip(result.grid, result.cv_error))]


__all__ = [
    "CVResult",
    "DEFAULT_LAMBDA_GRID",
    "DEFAULT_WEIGHT_GRID",
    "Weighted",
    "cv_result_rows",
    "loocv_error",
    "tune_lambda",
    "tune_weight",
]
