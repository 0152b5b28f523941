"""Binary probit with an endogenous regressor.

The experimental likelihood identifies (beta1, b2) alone.  The observational
reduced-form probit slopes (C1, C2) and the Gaussian first stage (gamma,
sigma_v) add two constraints linking (beta1, b2, rho_uv):

    C1 = (beta1 + rho/sigma_v) / sqrt(1 - rho^2)
    C2 = (b2 - rho*gamma/sigma_v) / sqrt(1 - rho^2)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import log_ndtr
from scipy.stats import norm

from .data import Block, FusedDataset, split
from .errors import DegenerateZ, EmptyGroup, NonBinaryOutcome, NonConvergence
from .estimators import EstimateReport, Method

RHO_BOUND = 0.999
GOLDEN = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class ProbitParams:
    beta1: float
    b2: float
    rho_uv: float = 0.0
    gamma: float = 1.0
    sigma_v: float = 1.0

    def __post_init__(self):
        if not abs(self.rho_uv) < 1:
            raise ValueError("|rho_uv| must be < 1")
        if not self.sigma_v > 0:
            raise ValueError("sigma_v must be > 0")

    def constraints(self) -> tuple[float, float]:
        return constraint_values(self.beta1, self.b2, self.rho_uv, self.gamma, self.sigma_v)


def constraint_values(beta1, b2, rho, gamma, sigma_v):
    s = np.sqrt(1.0 - rho**2)
    return (beta1 + rho / sigma_v) / s, (b2 - rho * gamma / sigma_v) / s


def params_on_constraints(c1, c2, rho, gamma, sigma_v):
    """(beta1, b2) that satisfy both constraints exactly at ``rho``."""
    s = np.sqrt(1.0 - rho**2)
    return c1 * s - rho / sigma_v, c2 * s + rho * gamma / sigma_v


def _binary(y, group: str) -> np.ndarray:
    y = np.asarray(y, float)
    if not np.all((y == 0) | (y == 1)):
        raise NonBinaryOutcome(group)
    return y


def _mills(t):
    """phi(t)/Phi(t), stable in both tails."""
    return np.exp(norm.logpdf(t) - log_ndtr(t))


def probit_loglik(beta, design, y) -> float:
    q = 2.0 * y - 1.0
    return float(np.sum(log_ndtr(q * (design @ beta))))


def probit_score(beta, design, y) -> np.ndarray:
    q = 2.0 * y - 1.0
    return design.T @ (q * _mills(q * (design @ beta)))


def probit_hessian(beta, design, y) -> np.ndarray:
    q = 2.0 * y - 1.0
    t = q * (design @ beta)
    lam = _mills(t)
    w = lam * (t + lam)
    return -(design * w[:, None]).T @ design


@dataclass
class ProbitFit:
    beta: np.ndarray
    cov: np.ndarray
    loglik: float
    history: list[float] = field(default_factory=list)


def probit_mle(design, y, start=None, tol: float = 1e-10, max_iter: int = 100) -> ProbitFit:
    """Newton-Raphson with step halving; the log-likelihood never decreases."""
    design = np.asarray(design, float)
    beta = np.zeros(design.shape[1]) if start is None else np.asarray(start, float).copy()
    ll = probit_loglik(beta, design, y)
    history = [ll]
    for _ in range(max_iter):
        g = probit_score(beta, design, y)
        h = probit_hessian(beta, design, y)
        try:
            step = np.linalg.solve(-h, g)
        except np.linalg.LinAlgError:
            raise NonConvergence("singular probit Hessian", best=beta) from None
        t = 1.0
        while True:
            cand = beta + t * step
            ll_c = probit_loglik(cand, design, y)
            if ll_c >= ll - 1e-12 * abs(ll) or t < 1e-10:
                break
            t *= 0.5
        if ll_c < ll:
            break
        beta, ll_old, ll = cand, ll, ll_c
        history.append(ll)
        if np.max(np.abs(t * step)) < tol or abs(ll - ll_old) < tol * (1 + abs(ll)) * 1e-3:
            break
        if np.max(np.abs(beta)) > 1e6:
            raise NonConvergence("probit slopes diverge (separated data)", best=beta)
    else:
        raise NonConvergence(f"no convergence after {max_iter} iterations", best=beta)
    h = probit_hessian(beta, design, y)
    try:
        cov = np.linalg.inv(-h)
    except np.linalg.LinAlgError:
        raise NonConvergence("singular information matrix at the optimum", best=beta) from None
    # Information collapse relative to the null fit signals (quasi-)separation.
    null_info = (2 / math.pi) * np.sum(design**2, axis=0)
    if np.any(~np.isfinite(np.diag(cov))) or np.any(np.diag(cov) * null_info > 1e8):
        raise NonConvergence("probit slopes diverge (separated data)", best=beta)
    return ProbitFit(beta, cov, ll, history)


def _exp_design(exp: Block) -> np.ndarray:
    return np.column_stack([exp.x, exp.z])


def probit_loglik_E(params, exp: Block) -> float:
    """Experimental log-likelihood sum log Phi(+-(beta1*X + b2*Z))."""
    y = _binary(exp.y, "E")
    if isinstance(params, ProbitParams):
        beta = np.array([params.beta1, params.b2])
    else:
        beta = np.asarray(params, float)[:2]
    return probit_loglik(beta, _exp_design(exp), y)


def probit_score_E(params, exp: Block) -> np.ndarray:
    y = _binary(exp.y, "E")
    beta = np.array([params.beta1, params.b2]) if isinstance(params, ProbitParams) else np.asarray(params, float)[:2]
    return probit_score(beta, _exp_design(exp), y)


@dataclass(frozen=True)
class ObsConstraints:
    """Observational constraint estimates and their covariance (order C1, C2, gamma, sigma_v)."""

    C1: float
    C2: float
    gamma: float
    sigma_v: float
    cov: np.ndarray
    n: int


def obs_constraints(obs: Block) -> ObsConstraints:
    if len(obs) < 3:
        raise EmptyGroup("O")
    y = _binary(obs.y, "O")
    z, x = obs.z, obs.x
    if np.ptp(z) == 0:
        raise DegenerateZ("DegenerateZ: Z is constant in observational data")
    n = len(obs)
    szz = float(z @ z)
    gamma = float(x @ z) / szz
    sv2 = float(np.sum((x - gamma * z) ** 2)) / n
    fit = probit_mle(np.column_stack([x, z]), y)
    cov = np.zeros((4, 4))
    cov[:2, :2] = fit.cov
    cov[2, 2] = sv2 / szz
    cov[3, 3] = sv2 / (2 * n)
    return ObsConstraints(float(fit.beta[0]), float(fit.beta[1]), gamma, math.sqrt(sv2), cov, n)


def _golden_max(f, lo, hi, tol=1e-10, max_iter=200):
    """Golden-section maximization; returns (argmax, value, best-so-far history)."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    best = max(fc, fd)
    history = [best]
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
        best = max(best, fc, fd)
        history.append(best)
    x, fx = (c, fc) if fc >= fd else (d, fd)
    return x, fx, history


@dataclass
class HardFit:
    beta1: float
    b2: float
    rho_uv: float
    loglik: float
    var_beta1: float
    history: list[float]


def _hard_profile(exp: Block, oc: ObsConstraints, grid_points: int = 401) -> HardFit:
    design = _exp_design(exp)
    y = _binary(exp.y, "E")

    def prof(rho):
        b1, b2 = params_on_constraints(oc.C1, oc.C2, rho, oc.gamma, oc.sigma_v)
        return probit_loglik(np.array([b1, b2]), design, y)

    grid = np.linspace(-RHO_BOUND, RHO_BOUND, grid_points)
    vals = np.array([prof(r) for r in grid])
    k = int(np.argmax(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid_points - 1)]
    rho, ll, hist = _golden_max(prof, lo, hi)
    if vals[k] > ll:
        rho, ll = float(grid[k]), float(vals[k])
    history = [float(vals.max())] + [max(h, float(vals.max())) for h in hist]
    b1, b2 = params_on_constraints(oc.C1, oc.C2, rho, oc.gamma, oc.sigma_v)

    h = 1e-4
    r_lo, r_hi = max(rho - h, -RHO_BOUND), min(rho + h, RHO_BOUND)
    r_mid = 0.5 * (r_lo + r_hi)
    step = 0.5 * (r_hi - r_lo)
    curv = (prof(r_hi) - 2 * prof(r_mid) + prof(r_lo)) / step**2
    s = math.sqrt(1 - rho**2)
    db1 = -oc.C1 * rho / s - 1.0 / oc.sigma_v
    var = db1**2 / -curv if curv < 0 else math.inf
    return HardFit(float(b1), float(b2), float(rho), float(ll), float(var), history)


def _numeric_hessian(f, x, h=1e-4):
    k = x.size
    out = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            ei = np.zeros(k)
            ej = np.zeros(k)
            ei[i] = h
            ej[j] = h
            v = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * h * h)
            out[i, j] = out[j, i] = v
    return out


def _constraint_cov(oc: ObsConstraints, b1, b2, rho) -> np.ndarray:
    """Covariance of (C1_hat - c1, C2_hat - c2) from the four observational estimates."""
    s = math.sqrt(1 - rho**2)
    sv, g = oc.sigma_v, oc.gamma
    # d(c1, c2)/d(gamma, sigma_v) at fixed (beta1, b2, rho).
    jac = np.array([[0.0, -rho / (sv**2 * s)], [-rho / (sv * s), rho * g / (sv**2 * s)]])
    full = np.zeros((2, 4))
    full[:, :2] = np.eye(2)
    full[:, 2:] = -jac
    return full @ oc.cov @ full.T


def probit_experiment_only(ds: FusedDataset) -> EstimateReport:
    exp, _ = split(ds)
    y = _binary(exp.y, "E")
    fit = probit_mle(_exp_design(exp), y)
    return EstimateReport(
        Method.PROBIT_EXPERIMENT_ONLY,
        float(fit.beta[0]),
        float(fit.beta[1]),
        float(fit.cov[0, 0]),
        {},
        {"loglik_E": fit.loglik, "var_b2": float(fit.cov[1, 1])},
    )


def probit_combined(ds: FusedDataset, mode: str = "hard") -> EstimateReport:
    """Experimental probit MLE constrained by the observational (C1, C2).

    ``mode='hard'`` imposes both constraints exactly and profiles the
    likelihood over rho_uv; ``mode='quadratic'`` penalizes constraint residuals
    with the inverse of their estimated covariance (no penalty without
    observational rows).
    """
    exp, obs = split(ds)
    y = _binary(exp.y, "E")
    design = _exp_design(exp)
    if mode not in ("hard", "quadratic"):
        raise ValueError("mode must be 'hard' or 'quadratic'")

    if len(obs) == 0:
        if mode == "hard":
            raise EmptyGroup("O")
        rep = probit_experiment_only(ds)
        rep.method = Method.PROBIT_COMBINED
        rep.hyperparameters["penalty_quadratic"] = 1.0
        return rep

    oc = obs_constraints(obs)
    hard = _hard_profile(exp, oc)
    diag = {"C1_hat": oc.C1, "C2_hat": oc.C2, "gamma_hat": oc.gamma, "sigma_v_hat": oc.sigma_v}
    if mode == "hard":
        c1, c2 = constraint_values(hard.beta1, hard.b2, hard.rho_uv, oc.gamma, oc.sigma_v)
        diag.update(rho_uv_hat=hard.rho_uv, loglik_E=hard.loglik, constraint_residual_1=oc.C1 - c1, constraint_residual_2=oc.C2 - c2)
        return EstimateReport(Method.PROBIT_COMBINED, hard.beta1, hard.b2, hard.var_beta1, {"penalty_hard": 1.0}, diag)

    s_inv = np.linalg.inv(_constraint_cov(oc, hard.beta1, hard.b2, hard.rho_uv))

    def neg_obj(p):
        b1, b2, a = p
        rho = math.tanh(a)
        c1, c2 = constraint_values(b1, b2, rho, oc.gamma, oc.sigma_v)
        r = np.array([oc.C1 - c1, oc.C2 - c2])
        return -(probit_loglik(np.array([b1, b2]), design, y) - 0.5 * r @ s_inv @ r)

    start = np.array([hard.beta1, hard.b2, math.atanh(np.clip(hard.rho_uv, -0.99, 0.99))])
    history: list[float] = []
    res = minimize(neg_obj, start, method="BFGS", callback=lambda xk: history.append(-neg_obj(xk)), options={"gtol": 1e-8})
    if not np.all(np.isfinite(res.x)):
        raise NonConvergence("penalized probit diverged", best=start)
    b1, b2, a = res.x
    rho = math.tanh(a)

    def neg_obj_rho(p):
        return neg_obj(np.array([p[0], p[1], math.atanh(np.clip(p[2], -RHO_BOUND, RHO_BOUND))]))

    hess = _numeric_hessian(neg_obj_rho, np.array([b1, b2, rho]))
    try:
        var = float(np.linalg.inv(hess)[0, 0])
    except np.linalg.LinAlgError:
        var = math.inf
    if not var >= 0:
        var = math.inf
    diag.update(rho_uv_hat=rho, objective=-float(res.fun), iterations=float(res.nit))
    return EstimateReport(Method.PROBIT_COMBINED, float(b1), float(b2), var, {"penalty_quadratic": 1.0}, diag)


# -- simulation ------------------------------------------------------------------------


@dataclass(frozen=True)
class ProbitDGP:
    """Latent-index DGP: Y = 1[beta1*X + beta2*Z + U > 0] with U | Z ~ N(rho_zu*Z, 1)."""

    beta1: float = 0.5
    beta2: float = 0.1
    rho_zu: float = 0.2
    rho_uv: float = 0.5
    gamma: float = 0.95
    sigma_v: float = 1.0

    @property
    def b2(self) -> float:
        return self.beta2 + self.rho_zu

    def params(self) -> ProbitParams:
        return ProbitParams(self.beta1, self.b2, self.rho_uv, self.gamma, self.sigma_v)


def draw_probit_sample(dgp: ProbitDGP, n_E: int, n_O: int, rng: np.random.Generator) -> FusedDataset:
    n = n_E + n_O
    z = rng.standard_normal(n)
    e1 = rng.standard_normal(n)
    e2 = rng.standard_normal(n)
    u = dgp.rho_zu * z + e1
    v = dgp.sigma_v * (dgp.rho_uv * e1 + math.sqrt(1 - dgp.rho_uv**2) * e2)
    is_exp = np.zeros(n, bool)
    is_exp[:n_E] = True
    x = np.where(is_exp, rng.standard_normal(n), dgp.gamma * z + v)
    y = (dgp.beta1 * x + dgp.beta2 * z + u > 0).astype(float)
    return FusedDataset(y, x, z, is_exp)


def simulate_probit(dgp: ProbitDGP, n_E: int, n_O: int, replications: int, seed: int = 0, mode: str = "hard"):
    """Experiment-only and combined beta1 estimates over replications (NaN on failure)."""
    from .simulation import replication_rng

    out = np.full((replications, 2), np.nan)
    for r in range(replications):
        ds = draw_probit_sample(dgp, n_E, n_O, replication_rng(seed, r))
        try:
            out[r, 0] = probit_experiment_only(ds).beta1_hat
        except NonConvergence:
            pass
        try:
            out[r, 1] = probit_combined(ds, mode).beta1_hat
        except NonConvergence:
            pass
    return {"experiment_only": out[:, 0], "combined": out[:, 1]}
