"""Point estimators for the effect of X on Y from fused samples.

All slopes are computed on data demeaned within each group, so group-specific
intercepts never enter the formulas.  The closed forms work on
:class:`~obsfuse.moments.Moments` stacks and broadcast over any leading axes.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .data import Block, FusedDataset, split
from .errors import (
    DegenerateZ,
    EmptyGroup,
    NonpositiveVariance,
    SingularDesign,
    SingularWeighting,
    WeakFirstStage,
)
from .moments import Moments, X, Y, Z

SINGULAR_TOL = 1e-10
WEAK_CORR_TOL = 1e-8


class Method(str, enum.Enum):
    EXPERIMENT_ONLY = "ExperimentOnly"
    OBS_OLS = "ObsOLS"
    OBS_IV = "ObsIV"
    BIAS_CORRECTED_OBS = "BiasCorrectedObs"
    WEIGHTED = "Weighted"
    REGULARIZED = "Regularized"
    COMBINED_GMM = "CombinedGMM"
    PROBIT_EXPERIMENT_ONLY = "ProbitExperimentOnly"
    PROBIT_COMBINED = "ProbitCombined"


@dataclass
class EstimateReport:
    method: Method
    beta1_hat: float
    b2_hat: float | None
    var_beta1: float
    hyperparameters: dict[str, float] = field(default_factory=dict)
    diagnostics: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.method = Method(self.method)
        if not self.var_beta1 >= 0:
            raise NonpositiveVariance(f"var_beta1 must be >= 0, got {self.var_beta1}")

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "beta1_hat": float(self.beta1_hat),
            "b2_hat": None if self.b2_hat is None else float(self.b2_hat),
            "var_beta1": float(self.var_beta1),
            "hyperparameters": {k: _jsonable(v) for k, v in self.hyperparameters.items()},
            "diagnostics": {k: _jsonable(v) for k, v in self.diagnostics.items()},
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "EstimateReport":
        return cls(
            method=Method(d["method"]),
            beta1_hat=d["beta1_hat"],
            b2_hat=d.get("b2_hat"),
            var_beta1=d["var_beta1"],
            hyperparameters={k: _from_jsonable(v) for k, v in d.get("hyperparameters", {}).items()},
            diagnostics={k: _from_jsonable(v) for k, v in d.get("diagnostics", {}).items()},
        )


def _jsonable(v):
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _from_jsonable(v):
    return float(v)


# -- experimental block ------------------------------------------------------


class OLSFit(NamedTuple):
    beta1_hat: float
    b2_hat: float
    var_matrix: np.ndarray
    sigma2_hat: float


def _check_design(a: np.ndarray, tol: float = SINGULAR_TOL) -> None:
    ev = np.linalg.eigvalsh(a)
    lo, hi = np.abs(ev[..., 0]), ev[..., -1]
    bad = ~(hi > 0) | (lo < tol * hi)
    if np.any(bad):
        raise SingularDesign("SingularDesign: (X, Z) cross-product matrix is rank deficient")


def _ols(m: Moments, tol: float = SINGULAR_TOL):
    """Two-slope least squares on demeaned data: (b1, b2, var_matrix, sigma2)."""
    a = m.design
    _check_design(a, tol)
    c = m.design_y
    theta = np.linalg.solve(a, c[..., None])[..., 0]
    rss = np.maximum(m.c(Y, Y) - np.einsum("...i,...i->...", theta, c), 0.0)
    sigma2 = rss / (m.n - 2)
    var = sigma2[..., None, None] * np.linalg.inv(a)
    return theta[..., 0], theta[..., 1], var, sigma2


def ols2(y, x, z, tol: float = SINGULAR_TOL) -> OLSFit:
    """Regress ``y`` on ``(x, z)`` after demeaning.

    ``sigma2_hat`` is RSS/(n-2) and ``var_matrix`` is sigma2_hat (M'M)^-1 for the
    demeaned design M.
    """
    y = np.asarray(y, float)
    if y.shape[0] < 3:
        raise SingularDesign("SingularDesign: need at least 3 rows")
    b1, b2, var, s2 = _ols(Moments.of(Block(y, np.asarray(x, float), np.asarray(z, float))), tol)
    return OLSFit(float(b1), float(b2), var, float(s2))


# -- observational block -----------------------------------------------------


def _iv_guard(m: Moments) -> None:
    sxx, szz, sxz = m.c(X, X), m.c(Z, Z), m.c(X, Z)
    denom = np.sqrt(sxx * szz)
    if not (denom > 0) or abs(sxz / denom) <= WEAK_CORR_TOL:
        raise WeakFirstStage("WeakFirstStage: |corr(X, Z)| in observational data is ~0")


def incorrect_iv(obs: Block) -> float:
    """Cov(Y, Z)/Cov(X, Z) in the observational block (Z used as if it were an IV)."""
    m = Moments.of(obs)
    if len(obs) < 2:
        raise WeakFirstStage("WeakFirstStage: need at least 2 observational rows")
    _iv_guard(m)
    return float(m.c(Y, Z) / m.c(X, Z))


def first_stage(obs: Block) -> tuple[float, float]:
    """Slope of X on Z in the observational block and its classical variance."""
    n = len(obs)
    if n < 2:
        raise DegenerateZ("DegenerateZ: need at least 2 observational rows")
    m = Moments.of(obs)
    szz = float(m.c(Z, Z))
    if not szz > 1e-300 * max(1.0, float(np.sum(obs.z**2))):
        raise DegenerateZ("DegenerateZ: Z has no variation in observational data")
    gamma = float(m.c(X, Z)) / szz
    rss = max(float(m.c(X, X)) - gamma * float(m.c(X, Z)), 0.0)
    return gamma, rss / max(n - 2, 1) / szz


@dataclass(frozen=True)
class ObsFit:
    """Observational-block statistics consumed by the combining estimators.

    Variances and the covariance of (b_iv, gamma) come either from influence
    functions (``variance='delta'``) or from an O-row bootstrap.
    """

    b_iv: float
    gamma: float
    var_b_iv: float
    var_gamma: float
    cov_biv_gamma: float
    moments: Moments
    n: int


def _obs_point(m: Moments) -> tuple[float, float]:
    return float(m.c(Y, Z) / m.c(X, Z)), float(m.c(X, Z) / m.c(Z, Z))


def fit_observational(obs: Block, variance: str = "delta", draws: int = 500, seed: int = 0) -> ObsFit:
    if len(obs) == 0:
        raise EmptyGroup("O")
    m = Moments.of(obs)
    if float(m.c(Z, Z)) <= 0:
        raise DegenerateZ("DegenerateZ: Z has no variation in observational data")
    _iv_guard(m)
    b_iv, gamma = _obs_point(m)
    if variance == "delta":
        xt, zt, yt = obs.x - m.mean[X], obs.z - m.mean[Z], obs.y - m.mean[Y]
        infl_iv = zt * (yt - b_iv * xt) / m.c(X, Z)
        infl_g = zt * (xt - gamma * zt) / m.c(Z, Z)
        v_iv, v_g, cov = float(infl_iv @ infl_iv), float(infl_g @ infl_g), float(infl_iv @ infl_g)
    elif variance == "bootstrap":
        rng = np.random.default_rng(seed)
        n = len(obs)
        reps = np.empty((draws, 2))
        for b in range(draws):
            idx = rng.integers(0, n, n)
            reps[b] = _obs_point(Moments.of(obs.take(idx)))
        c = np.cov(reps, rowvar=False)
        v_iv, v_g, cov = float(c[0, 0]), float(c[1, 1]), float(c[0, 1])
    else:
        raise ValueError(f"unknown variance method {variance!r}")
    return ObsFit(b_iv, gamma, v_iv, v_g, cov, m, len(obs))


def bias_corrected_obs(
    b_iv_hat,
    gamma_hat,
    b2_hat_E,
    var_b_iv=0.0,
    var_gamma=0.0,
    var_b2_E=0.0,
    cov_biv_gamma=0.0,
):
    """Correct the observational IV slope by the experimental exclusion violation.

    Returns ``(b_iv - b2/gamma, delta-method variance)``; experimental and
    observational estimates are independent so no cross-dataset covariance enters.
    """
    g = np.asarray(gamma_hat, float)
    if np.any(~np.isfinite(g) | (np.abs(g) < WEAK_CORR_TOL)):
        raise WeakFirstStage("WeakFirstStage: first-stage slope is ~0")
    beta = b_iv_hat - b2_hat_E / g
    var = var_b_iv + var_b2_E / g**2 + b2_hat_E**2 * var_gamma / g**4 + 2 * b2_hat_E / g**2 * cov_biv_gamma
    return beta, var


def weighted_combine(beta1_E, var_E, beta1_O, var_O):
    """Inverse-variance weighting of two uncorrelated estimates.

    Returns ``(estimate, variance, w_O, w_E)``.
    """
    if np.any(~(np.asarray(var_E) > 0)) or np.any(~(np.asarray(var_O) > 0)):
        raise NonpositiveVariance("NonpositiveVariance: both variances must be > 0")
    if np.isinf(var_O):
        return beta1_E, var_E, 0.0, 1.0
    w_O = var_E / (var_E + var_O)
    w_E = var_O / (var_E + var_O)
    return w_O * beta1_O + w_E * beta1_E, w_O**2 * var_O + w_E**2 * var_E, w_O, w_E


# -- regularized / constrained regression --------------------------------------


def _regularized(m: Moments, b_iv, gamma, lam, tol: float = SINGULAR_TOL):
    a = m.design
    c = m.design_y
    if math.isinf(lam):
        # Substitute beta1 = b_iv - b2/gamma: Y - b_iv X = b2 (Z - X/gamma) + e.
        sxx, sxz, szz = m.c(X, X), m.c(X, Z), m.c(Z, Z)
        sww = szz - 2 * sxz / gamma + sxx / gamma**2
        swy = (m.c(Z, Y) - b_iv * sxz) - (m.c(X, Y) - b_iv * sxx) / gamma
        scale = szz + sxx
        if np.any(~(sww > tol * scale)):
            raise SingularDesign("SingularDesign: constrained design has no variation")
        b2 = swy / sww
        return b_iv - b2 / gamma, b2
    if lam < 0 or not math.isfinite(lam):
        raise ValueError("lambda must be >= 0 or inf")
    if lam == 0:
        b1, b2, _, _ = _ols(m, tol)
        return b1, b2
    av = np.stack(np.broadcast_arrays(np.ones_like(np.asarray(gamma, float)), 1.0 / np.asarray(gamma, float)), -1)
    aug = a + lam * av[..., :, None] * av[..., None, :]
    _check_design(aug, tol)
    rhs = c + lam * av * np.asarray(b_iv)[..., None]
    theta = np.linalg.solve(aug, rhs[..., None])[..., 0]
    return theta[..., 0], theta[..., 1]


def regularized_regression(exp: Block, b_iv_hat: float, gamma_hat: float, lam: float, tol: float = SINGULAR_TOL):
    """Minimize the experimental residual sum of squares plus
    ``lam * (b_iv - beta1 - b2/gamma)**2``; ``lam=inf`` imposes the constraint exactly.
    """
    if abs(gamma_hat) < WEAK_CORR_TOL:
        raise WeakFirstStage("WeakFirstStage: first-stage slope is ~0")
    b1, b2 = _regularized(Moments.of(exp), b_iv_hat, gamma_hat, float(lam), tol)
    return float(b1), float(b2)


def _regularized_variance(m: Moments, sigma2: float, obs: ObsFit, lam: float) -> float:
    """Delta-method variance of the regularized beta1: E noise plus (b_iv, gamma) noise."""
    a = m.design
    g = obs.gamma
    if math.isinf(lam):
        sww = m.c(Z, Z) - 2 * m.c(X, Z) / g + m.c(X, X) / g**2
        h_b2 = np.array([-1.0 / g, 1.0]) / sww
        h = -h_b2 / g
    else:
        av = np.array([1.0, 1.0 / g])
        h = np.linalg.inv(a + lam * np.outer(av, av))[0]
    var_e = sigma2 * float(h @ a @ h)

    def b1_at(b_iv, gamma):
        return float(_regularized(m, b_iv, gamma, lam)[0])

    eb = 1e-6 * max(1.0, abs(obs.b_iv))
    eg = 1e-6 * max(1.0, abs(g))
    jb = (b1_at(obs.b_iv + eb, g) - b1_at(obs.b_iv - eb, g)) / (2 * eb)
    jg = (b1_at(obs.b_iv, g + eg) - b1_at(obs.b_iv, g - eg)) / (2 * eg)
    var_o = jb**2 * obs.var_b_iv + jg**2 * obs.var_gamma + 2 * jb * jg * obs.cov_biv_gamma
    return var_e + max(var_o, 0.0)


# -- GMM --------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentSystem:
    """Linear moment system m0 - gamma_mat @ theta = 0 for theta = (beta1, b2).

    ``gamma_mat`` uses the exact sample cross-products, so the experimental
    rows carry X_E'Z_E off the diagonal.  ``omega`` is the homoscedastic moment
    covariance over sigma^2: the E design block and Z_O'Z_O, zero across groups.
    """

    gamma_mat: np.ndarray
    m0: np.ndarray
    omega: np.ndarray
    sigma2_hat: float

    @classmethod
    def build(cls, m_e: Moments, m_o: Moments | None, sigma2_hat: float) -> "MomentSystem":
        rows = [[m_e.c(X, X), m_e.c(X, Z)], [m_e.c(X, Z), m_e.c(Z, Z)]]
        m0 = [m_e.c(X, Y), m_e.c(Z, Y)]
        if m_o is not None:
            rows.append([m_o.c(X, Z), m_o.c(Z, Z)])
            m0.append(m_o.c(Z, Y))
        return cls(np.array(rows, float), np.array(m0, float), _homoscedastic_moment_cov(m_e, m_o), float(sigma2_hat))

    def solve(self, w: np.ndarray, tol: float = SINGULAR_TOL) -> np.ndarray:
        gw = self.gamma_mat.T @ w
        h = gw @ self.gamma_mat
        _check_weighting(h, tol)
        return np.linalg.solve(h, gw @ self.m0)

    def objective(self, theta, w) -> float:
        r = self.m0 - self.gamma_mat @ np.asarray(theta)
        return float(r @ w @ r)


def _check_weighting(h: np.ndarray, tol: float) -> None:
    ev = np.linalg.eigvalsh(0.5 * (h + h.T))
    if not (ev[-1] > 0 and ev[0] > tol * ev[-1]):
        raise SingularWeighting("SingularWeighting: Gamma' W Gamma is not invertible")


def _gmm_optimal(m_e: Moments, m_o: Moments | None):
    """Vectorized GMM with weight Omega^-1.

    The experimental rows of Gamma equal their block of Omega, so Gamma' Omega^-1
    Gamma reduces to the E design plus a rank-one observational term.
    """
    h = np.array(m_e.design, float)
    r = np.array(m_e.design_y, float)
    if m_o is not None:
        ozz, oxz, ozy = m_o.c(Z, Z), m_o.c(X, Z), m_o.c(Z, Y)
        o = np.stack(np.broadcast_arrays(oxz, ozz), -1)
        h = h + o[..., :, None] * o[..., None, :] / np.asarray(ozz)[..., None, None]
        r = r + o * (ozy / ozz)[..., None]
    _check_design(h)
    theta = np.linalg.solve(h, r[..., None])[..., 0]
    return theta[..., 0], theta[..., 1], h


def gmm_combine(
    ds: FusedDataset,
    weighting="optimal",
    tol: float = SINGULAR_TOL,
) -> EstimateReport:
    """Combined GMM with two experimental moments and one observational moment.

    ``weighting`` is ``"optimal"`` (block-diagonal Omega^-1 under
    homoscedasticity), ``"twostep"`` (identity first step, then the inverse of
    the residual-based moment covariance) or an explicit weighting matrix.
    """
    exp, obs = split(ds)
    if len(exp) < 3:
        raise SingularDesign("SingularDesign: need at least 3 experimental rows")
    m_e = Moments.of(exp)
    m_o = Moments.of(obs) if len(obs) > 0 else None
    _, _, _, sigma2 = _ols(m_e, tol)
    sigma2 = float(sigma2)
    system = MomentSystem.build(m_e, m_o, sigma2)
    k = system.m0.shape[0]
    hyper: dict[str, float] = {}

    if isinstance(weighting, str) and weighting == "optimal":
        w = _inv_omega(system.omega)
        theta = system.solve(w, tol)
        cov = sigma2 * np.linalg.inv(system.gamma_mat.T @ w @ system.gamma_mat)
        label = "optimal"
    elif isinstance(weighting, str) and weighting == "twostep":
        theta1 = system.solve(np.eye(k), tol)
        s = _robust_moment_cov(exp, obs, m_e, m_o, theta1)
        try:
            w = np.linalg.inv(s)
        except np.linalg.LinAlgError:
            raise SingularWeighting("SingularWeighting: residual moment covariance is singular") from None
        theta = system.solve(w, tol)
        cov = np.linalg.inv(system.gamma_mat.T @ w @ system.gamma_mat)
        label = "twostep"
    else:
        w = np.asarray(weighting, float)
        if w.shape != (k, k):
            raise SingularWeighting(f"SingularWeighting: weighting matrix must be {k}x{k}")
        if not np.allclose(w, w.T) or np.linalg.eigvalsh(0.5 * (w + w.T))[0] < -1e-12 * np.abs(w).max():
            raise SingularWeighting("SingularWeighting: weighting matrix must be symmetric PSD")
        theta = system.solve(w, tol)
        s = sigma2 * _homoscedastic_moment_cov(m_e, m_o)
        bread = np.linalg.inv(system.gamma_mat.T @ w @ system.gamma_mat)
        gw = system.gamma_mat.T @ w
        cov = bread @ gw @ s @ gw.T @ bread
        label = "custom"

    hyper["weighting_" + label] = 1.0
    diag = {"sigma2_hat": sigma2, "var_b2": float(cov[1, 1]), "n_moments": float(k)}
    return EstimateReport(Method.COMBINED_GMM, float(theta[0]), float(theta[1]), max(float(cov[0, 0]), 0.0), hyper, diag)


def _inv_omega(omega: np.ndarray) -> np.ndarray:
    try:
        _check_design(omega[:2, :2])
        if omega.shape[0] == 3 and not omega[2, 2] > 0:
            raise SingularDesign("")
    except SingularDesign:
        raise SingularWeighting("SingularWeighting: Omega is not invertible") from None
    return np.linalg.inv(omega)


def _homoscedastic_moment_cov(m_e: Moments, m_o: Moments | None) -> np.ndarray:
    k = 2 if m_o is None else 3
    s = np.zeros((k, k))
    s[:2, :2] = m_e.design
    if m_o is not None:
        s[2, 2] = m_o.c(Z, Z)
    return s


def _robust_moment_cov(exp: Block, obs: Block, m_e: Moments, m_o: Moments | None, theta) -> np.ndarray:
    xe, ze, ye = exp.x - m_e.mean[X], exp.z - m_e.mean[Z], exp.y - m_e.mean[Y]
    eps = ye - theta[0] * xe - theta[1] * ze
    ge = np.column_stack([eps * xe, eps * ze])
    k = 2 if m_o is None else 3
    s = np.zeros((k, k))
    s[:2, :2] = ge.T @ ge
    if m_o is not None:
        xo, zo, yo = obs.x - m_o.mean[X], obs.z - m_o.mean[Z], obs.y - m_o.mean[Y]
        go = (yo - theta[0] * xo - theta[1] * zo) * zo
        s[2, 2] = go @ go
    return s


# -- dispatcher -------------------------------------------------------------------

METHOD_ALIASES = {
    "experiment-only": Method.EXPERIMENT_ONLY,
    "obs-ols": Method.OBS_OLS,
    "obs-iv": Method.OBS_IV,
    "bias-corrected": Method.BIAS_CORRECTED_OBS,
    "weighted": Method.WEIGHTED,
    "regularized": Method.REGULARIZED,
    "gmm": Method.COMBINED_GMM,
}


def estimate(
    ds: FusedDataset,
    method: Method | str,
    *,
    lam: float = math.inf,
    w_O: float | None = None,
    weighting="optimal",
    obs_variance: str = "delta",
    bootstrap_draws: int = 500,
    seed: int = 0,
) -> EstimateReport:
    """Run one linear estimator on ``ds`` and wrap the result in a report.

    ``w_O=None`` selects the inverse-variance weight for the weighted method.
    """
    method = METHOD_ALIASES.get(method, method) if isinstance(method, str) else method
    method = Method(method)
    exp, obs = split(ds)

    if method is Method.COMBINED_GMM:
        return gmm_combine(ds, weighting)
    if method is Method.OBS_OLS:
        b1, zc, var, s2 = ols2(obs.y, obs.x, obs.z)
        return EstimateReport(method, b1, None, float(var[0, 0]), {}, {"z_coef": zc, "sigma2_hat": s2})

    if method is Method.OBS_IV:
        of = fit_observational(obs, obs_variance, bootstrap_draws, seed)
        return EstimateReport(method, of.b_iv, None, of.var_b_iv, {}, {"gamma_hat": of.gamma})

    if len(exp) < 3:
        raise SingularDesign("SingularDesign: need at least 3 experimental rows")
    m_e = Moments.of(exp)
    b1e, b2e, var_e, s2 = (np.asarray(v) for v in _ols(m_e))
    b1e, b2e, s2 = float(b1e), float(b2e), float(s2)
    if method is Method.EXPERIMENT_ONLY:
        return EstimateReport(method, b1e, b2e, float(var_e[0, 0]), {}, {"sigma2_hat": s2, "var_b2": float(var_e[1, 1])})

    of = fit_observational(obs, obs_variance, bootstrap_draws, seed)
    b1o, var_o = bias_corrected_obs(of.b_iv, of.gamma, b2e, of.var_b_iv, of.var_gamma, float(var_e[1, 1]), of.cov_biv_gamma)
    diag = {"b_iv_hat": of.b_iv, "gamma_hat": of.gamma, "b2_hat_E": b2e, "sigma2_hat": s2}
    if method is Method.BIAS_CORRECTED_OBS:
        return EstimateReport(method, float(b1o), b2e, float(var_o), {}, diag)

    if method is Method.WEIGHTED:
        if w_O is None:
            est, var, wo, we = weighted_combine(b1e, float(var_e[0, 0]), float(b1o), float(var_o))
        else:
            if not 0 <= w_O <= 1:
                raise ValueError("w_O must lie in [0, 1]")
            wo, we = float(w_O), 1.0 - float(w_O)
            est = wo * b1o + we * b1e
            var = wo**2 * var_o + we**2 * var_e[0, 0]
        diag.update(beta1_hat_E=b1e, beta1_hat_O=float(b1o), var_beta1_E=float(var_e[0, 0]), var_beta1_O=float(var_o))
        return EstimateReport(method, float(est), b2e, float(var), {"w_O": float(wo), "w_E": float(we)}, diag)

    if method is Method.REGULARIZED:
        lam = float(lam)
        b1, b2 = _regularized(m_e, of.b_iv, of.gamma, lam)
        b1, b2 = float(b1), float(b2)
        var = _regularized_variance(m_e, s2, of, lam)
        diag["constraint_residual"] = of.b_iv - b1 - b2 / of.gamma
        return EstimateReport(method, b1, b2, var, {"lambda": lam}, diag)

    raise ValueError(f"method {method.value} is not a linear estimator")


# -- estimator handles for cross-validation ---------------------------------------


class ExperimentOnly:
    name = "experiment_only"

    def fit(self, m_e: Moments, obs: ObsFit | None):
        b1, b2, _, _ = _ols(m_e)
        return b1, b2


class Weighted:
    """Fixed-weight combination; ``w_O=None`` uses inverse-variance weights."""

    name = "weighted"

    def __init__(self, w_O: float | None = None):
        self.w_O = w_O

    def fit(self, m_e: Moments, obs: ObsFit):
        b1e, b2e, var, _ = _ols(m_e)
        b1o, var_o = bias_corrected_obs(obs.b_iv, obs.gamma, b2e, obs.var_b_iv, obs.var_gamma, var[..., 1, 1], obs.cov_biv_gamma)
        if self.w_O is None:
            var_e = var[..., 0, 0]
            w = var_e / (var_e + var_o)
        else:
            w = self.w_O
        return w * b1o + (1 - w) * b1e, b2e


class Regularized:
    name = "regularized"

    def __init__(self, lam: float):
        self.lam = float(lam)

    def fit(self, m_e: Moments, obs: ObsFit):
        return _regularized(m_e, obs.b_iv, obs.gamma, self.lam)


class CombinedGMM:
    name = "gmm"

    def fit(self, m_e: Moments, obs: ObsFit | None):
        b1, b2, _ = _gmm_optimal(m_e, None if obs is None else obs.moments)
        return b1, b2
