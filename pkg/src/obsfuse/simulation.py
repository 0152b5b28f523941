"""Data-generating processes, experimental-design rules and the Monte Carlo harness.

Each unit draws (Z, U, V) from a trivariate normal with unit-variance Z and U;
Cov(Z, U) may differ by group.  Observational units get X = gamma*Z + V,
experimental units get X ~ N(0, 1), and Y = beta1*X + beta2*Z + theta*X*U + U.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .data import FusedDataset, split
from .errors import ConfigError, EstimationError, InfeasibleDesign, MonteCarloFailure, ObsFuseError
from .estimators import (
    _gmm_optimal,
    _ols,
    _regularized,
    bias_corrected_obs,
    fit_observational,
    gmm_combine,
    weighted_combine,
)
from .moments import Moments
from .robustness import DEFAULT_LAMBDA_GRID, DEFAULT_WEIGHT_GRID, tune_lambda, tune_weight

DESIGN_TOL = 1e-12


@dataclass(frozen=True)
class DesignRule:
    """``kind='random'`` or ``kind='quantile'`` (experiment drawn from the two Z tails of mass ``q`` each)."""

    kind: str = "random"
    q: float | None = None

    def __post_init__(self):
        if self.kind not in ("random", "quantile"):
            raise ConfigError(f"unknown design kind {self.kind!r}")
        if self.kind == "quantile" and not (self.q is not None and 0 < self.q <= 0.5):
            raise ConfigError("quantile design needs 0 < Q <= 0.5")

    @classmethod
    def random_split(cls) -> "DesignRule":
        return cls("random")

    @classmethod
    def quantile_tails(cls, q: float) -> "DesignRule":
        return cls("quantile", float(q))

    def assignment_probability(self, pi_E: float) -> float:
        """Probability that a tail unit joins the experiment."""
        return pi_E if self.kind == "random" else pi_E / (2 * self.q)

    def label(self) -> str:
        return "random" if self.kind == "random" else f"quantile(Q={self.q:g})"


@dataclass(frozen=True)
class SimulationConfig:
    """Ground truth for one simulated world.

    ``gamma`` is the observational first-stage coefficient; ``sigma_v2=None``
    means ``1 - gamma**2`` so that Var(X|O) = Var(X|E) = 1.  Cov(U, V) is
    ``rho_uv_scaled * sigma_v``.
    """

    beta1: float = 0.1
    beta2: float = 0.1
    gamma: float = 0.95
    sigma_v2: float | None = None
    rho_zu_E: float = 0.4
    rho_zu_O: float = 0.4
    rho_uv_scaled: float = 0.4
    theta: float = 0.0
    pi_E: float = 0.05
    n_E: int = 100
    design: DesignRule = field(default_factory=DesignRule)
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.pi_E <= 1:
            raise ConfigError("pi_E must lie in (0, 1]")
        if self.n_E < 3:
            raise ConfigError("n_E must be >= 3")
        for name in ("rho_zu_E", "rho_zu_O"):
            if not -1 < getattr(self, name) < 1:
                raise ConfigError(f"{name} must lie in (-1, 1)")
        if not self.sigma_v > 0:
            raise ConfigError("sigma_v2 must be > 0 (|gamma| < 1 when sigma_v2 is derived)")
        if self.design.kind == "quantile" and self.design.q < self.pi_E / 2 - DESIGN_TOL:
            raise ConfigError("quantile design needs Q >= pi_E/2")
        for g in ("E", "O"):
            self.cholesky(g)

    @classmethod
    def with_first_stage_r2(cls, r2: float, **kw) -> "SimulationConfig":
        """Parameterize the first stage by Var(gamma*Z)/Var(X|O) instead of gamma."""
        if not 0 <= r2 < 1:
            raise ConfigError("first-stage R^2 must lie in [0, 1)")
        return cls(gamma=math.sqrt(r2), sigma_v2=1.0 - r2, **kw)

    @property
    def sigma_v(self) -> float:
        s2 = 1.0 - self.gamma**2 if self.sigma_v2 is None else self.sigma_v2
        return math.sqrt(s2) if s2 > 0 else float("nan")

    @property
    def pi_O(self) -> float:
        return 1.0 - self.pi_E

    @property
    def n_O(self) -> int:
        return int(round(self.n_E * self.pi_O / self.pi_E))

    @property
    def b2(self) -> float:
        """Exclusion-restriction violation identified from the observational group."""
        return self.beta2 + self.rho_zu_O

    def covariance(self, group: str) -> np.ndarray:
        rho = self.rho_zu_E if group == "E" else self.rho_zu_O
        sv = self.sigma_v
        c = self.rho_uv_scaled * sv
        return np.array([[1.0, rho, 0.0], [rho, 1.0, c], [0.0, c, sv**2]])

    def cholesky(self, group: str) -> np.ndarray:
        cov = self.covariance(group)
        try:
            return np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise ConfigError(f"(Z, U, V) covariance for group {group} is not positive definite") from None

    def with_param(self, name: str, value: float) -> "SimulationConfig":
        """Copy with one sweepable parameter changed."""
        if name == "pi_O":
            return replace(self, pi_E=1.0 - value)
        if name == "pi_E":
            return replace(self, pi_E=value)
        if name == "Q":
            return replace(self, design=DesignRule.quantile_tails(value))
        if name == "first_stage_r2":
            return replace(self, gamma=math.sqrt(value), sigma_v2=1.0 - value)
        if name == "rho_diff":
            return replace(self, rho_zu_O=self.rho_zu_E - value)
        if name in ("gamma", "theta", "rho_zu_O", "rho_zu_E", "beta1", "beta2", "rho_uv_scaled"):
            return replace(self, **{name: float(value)})
        if name == "n_E":
            return replace(self, n_E=int(value))
        raise ConfigError(f"parameter {name!r} cannot be swept")


SWEEPABLE = ("pi_O", "gamma", "theta", "rho_zu_O", "Q", "first_stage_r2", "rho_diff", "n_E")


def replication_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream keyed by (seed, replication index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def _select_experimental(z: np.ndarray, n_E: int, design: DesignRule, rng) -> np.ndarray:
    n = z.shape[0]
    if design.kind == "random":
        candidates = np.arange(n)
    else:
        order = np.argsort(z, kind="stable")
        k = int(round(design.q * n))
        candidates = order if 2 * k >= n else np.concatenate([order[:k], order[n - k:]])
        candidates = np.sort(candidates)
    if candidates.shape[0] < n_E:
        raise InfeasibleDesign(f"InfeasibleDesign: only {candidates.shape[0]} tail units for n_E={n_E}")
    chosen = rng.choice(candidates.shape[0], size=n_E, replace=False)
    mask = np.zeros(n, bool)
    mask[candidates[chosen]] = True
    return mask


def _draw(cfg: SimulationConfig, replication_index: int):
    rng = replication_rng(cfg.seed, replication_index)
    n = cfg.n_E + cfg.n_O
    e = rng.standard_normal((n, 3))
    x_exp = rng.standard_normal(n)
    z = e[:, 0]
    is_exp = _select_experimental(z, cfg.n_E, cfg.design, rng)
    u = np.empty(n)
    v = np.empty(n)
    for g, mask in (("E", is_exp), ("O", ~is_exp)):
        uv = e[mask] @ cfg.cholesky(g)[1:].T
        u[mask], v[mask] = uv[:, 0], uv[:, 1]
    x = np.where(is_exp, x_exp, cfg.gamma * z + v)
    y = cfg.beta1 * x + cfg.beta2 * z + cfg.theta * x * u + u
    return FusedDataset(y, x, z, is_exp), u, v


def draw_sample(cfg: SimulationConfig, replication_index: int = 0) -> FusedDataset:
    """One fused sample with exactly ``cfg.n_E`` experimental units.

    The pool of ``n_E + n_O`` units is drawn first, experimental units are picked
    from it by the design rule (uniformly among eligible units, which is the
    tail-probability rule conditioned on the group size), then (U, V) are drawn
    given Z from each group's own covariance.
    """
    return _draw(cfg, replication_index)[0]


def draw_latent(cfg: SimulationConfig, replication_index: int = 0):
    """Same draw as :func:`draw_sample`, also returning the latent (U, V)."""
    return _draw(cfg, replication_index)


# -- estimator registry --------------------------------------------------------------


class _Replication:
    """Lazily shared intermediate fits for one simulated dataset."""

    def __init__(self, ds: FusedDataset):
        self.ds = ds
        self.exp, self.obs = split(ds)

    @cached_property
    def m_e(self):
        return Moments.of(self.exp)

    @cached_property
    def m_o(self):
        return Moments.of(self.obs)

    @cached_property
    def ols_e(self):
        return tuple(np.asarray(v) for v in _ols(self.m_e))

    @cached_property
    def obs_fit(self):
        return fit_observational(self.obs)

    @cached_property
    def corrected(self):
        b1, b2, var, _ = self.ols_e
        of = self.obs_fit
        return bias_corrected_obs(of.b_iv, of.gamma, float(b2), of.var_b_iv, of.var_gamma, float(var[1, 1]), of.cov_biv_gamma)


def _experiment_only(r):
    return float(r.ols_e[0])


def _gmm(r):
    return float(_gmm_optimal(r.m_e, r.m_o if len(r.obs) else None)[0])


def _gmm_twostep(r):
    return gmm_combine(r.ds, "twostep").beta1_hat


def _obs_ols(r):
    return float(_ols(r.m_o)[0])


def _obs_iv(r):
    return r.obs_fit.b_iv


def _bias_corrected(r):
    return float(r.corrected[0])


def _weighted(r):
    b1o, var_o = r.corrected
    return float(weighted_combine(float(r.ols_e[0]), float(r.ols_e[2][0, 0]), float(b1o), float(var_o))[0])


def _weighted_cv(r):
    cv = tune_weight(r.ds, DEFAULT_WEIGHT_GRID, r.obs_fit)
    w = cv.best
    return w * float(r.corrected[0]) + (1 - w) * float(r.ols_e[0])


def _regularized_inf(r):
    return float(_regularized(r.m_e, r.obs_fit.b_iv, r.obs_fit.gamma, math.inf)[0])


def _regularized_cv(r):
    cv = tune_lambda(r.ds, DEFAULT_LAMBDA_GRID, r.obs_fit)
    return float(_regularized(r.m_e, r.obs_fit.b_iv, r.obs_fit.gamma, cv.best)[0])


ESTIMATORS = {
    "experiment_only": _experiment_only,
    "gmm": _gmm,
    "gmm_twostep": _gmm_twostep,
    "obs_ols": _obs_ols,
    "obs_iv": _obs_iv,
    "bias_corrected": _bias_corrected,
    "weighted": _weighted,
    "weighted_cv": _weighted_cv,
    "regularized_inf": _regularized_inf,
    "regularized_cv": _regularized_cv,
}
TABLE1_ESTIMATORS = ("experiment_only", "gmm", "obs_ols", "obs_iv")
REFERENCE = "experiment_only"


def replicate_estimates(cfg: SimulationConfig, estimators, indices) -> np.ndarray:
    """Matrix (len(indices), len(estimators)) of beta1 estimates; NaN marks a failed fit."""
    out = np.full((len(indices), len(estimators)), np.nan)
    fns = [ESTIMATORS[name] for name in estimators]
    for row, idx in enumerate(indices):
        rep = _Replication(draw_sample(cfg, idx))
        for col, fn in enumerate(fns):
            try:
                out[row, col] = fn(rep)
            except (EstimationError, ObsFuseError):
                pass
    return out


# -- summaries -------------------------------------------------------------------------


@dataclass(frozen=True)
class EstimatorSummary:
    estimator: str
    bias: float
    bias2: float
    variance: float
    mse: float
    relative_mse: float
    efficiency_gain: float
    mc_se_bias: float
    failures: int


@dataclass
class MonteCarloSummary:
    config: SimulationConfig
    replications: int
    rows: dict[str, EstimatorSummary]
    estimates: dict[str, np.ndarray] = field(repr=False, default_factory=dict)

    def __getitem__(self, name: str) -> EstimatorSummary:
        return self.rows[name]

    def relative_mse(self, name: str = "gmm") -> float:
        return self.rows[name].relative_mse


def summarize(cfg: SimulationConfig, estimators, est: np.ndarray, max_failure_rate: float = 0.01) -> MonteCarloSummary:
    reps = est.shape[0]
    raw = {}
    for col, name in enumerate(estimators):
        col_vals = est[:, col]
        failures = int(np.isnan(col_vals).sum())
        if failures and failures / reps >= max_failure_rate:
            raise MonteCarloFailure(f"estimator {name} failed in {failures} of {reps} replications")
        ok = col_vals[~np.isnan(col_vals)]
        err = ok - cfg.beta1
        bias = float(err.mean())
        variance = float(ok.var())
        raw[name] = (bias, variance, float(np.mean(err**2)), float(ok.std(ddof=1) / math.sqrt(ok.size)), failures)
    ref_mse = raw[REFERENCE][2] if REFERENCE in raw else float("nan")
    rows = {}
    for name, (bias, variance, mse, se, failures) in raw.items():
        if name == REFERENCE:
            rel = 1.0
        else:
            rel = mse / ref_mse if ref_mse > 0 else float("nan")
        rows[name] = EstimatorSummary(name, bias, bias**2, variance, mse, rel, 1.0 - rel, se, failures)
    return MonteCarloSummary(cfg, reps, rows, {n: est[:, i].copy() for i, n in enumerate(estimators)})


def _chunk_worker(args):
    cfg, estimators, indices = args
    return replicate_estimates(cfg, estimators, indices)


def run_monte_carlo(
    cfg: SimulationConfig,
    estimators=TABLE1_ESTIMATORS,
    replications: int = 10_000,
    workers: int = 1,
) -> MonteCarloSummary:
    """Draw ``replications`` datasets, run every estimator, and summarize.

    Results depend only on (cfg, replications): replication ``r`` always uses the
    stream keyed by (cfg.seed, r), and chunks are reassembled in index order.
    """
    if replications < 2:
        raise ConfigError("replications must be >= 2")
    estimators = tuple(estimators)
    unknown = [e for e in estimators if e not in ESTIMATORS]
    if unknown:
        raise ConfigError(f"unknown estimators: {', '.join(unknown)}")
    if REFERENCE not in estimators:
        estimators = (REFERENCE, *estimators)
    indices = list(range(replications))
    if workers > 1:
        chunks = [indices[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_worker, [(cfg, estimators, c) for c in chunks]))
        est = np.empty((replications, len(estimators)))
        for c, part in zip(chunks, parts):
            est[c] = part
    else:
        est = replicate_estimates(cfg, estimators, indices)
    return summarize(cfg, estimators, est)


def misspecification_sweep(
    cfg: SimulationConfig,
    param: str,
    values,
    estimators=("experiment_only", "gmm"),
    replications: int = 10_000,
    workers: int = 1,
) -> list[tuple[float, MonteCarloSummary]]:
    """One Monte Carlo summary per value of ``param``."""
    if param not in SWEEPABLE:
        raise ConfigError(f"parameter {param!r} cannot be swept (choose from {', '.join(SWEEPABLE)})")
    return [(float(v), run_monte_carlo(cfg.with_param(param, v), estimators, replications, workers)) for v in values]


SUMMARY_COLUMNS = (
    "estimator",
    "replications",
    "bias",
    "bias2",
    "variance",
    "mse",
    "relative_mse",
    "efficiency_gain",
    "mc_se_bias",
    "failures",
)


def summary_rows(summary: MonteCarloSummary) -> list[list]:
    return [
        [s.estimator, summary.replications, s.bias, s.bias2, s.variance, s.mse, s.relative_mse, s.efficiency_gain, s.mc_se_bias, s.failures]
        for s in summary.rows.values()
    ]


# -- config files ------------------------------------------------------------------------

_FLOAT_KEYS = ("beta1", "beta2", "gamma", "sigma_v2", "rho_zu_E", "rho_zu_O", "rho_uv_scaled", "theta", "pi_E")
RUN_KEYS = ("replications", "estimators", "workers")


def parse_config(text: str) -> tuple[SimulationConfig, dict]:
    """Parse flat ``key = value`` text (``#`` starts a comment).

    Returns the config and the run options (replications, estimators, workers).
    """
    values: dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {line_no}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        values[key] = val
    kw: dict = {}
    run: dict = {}
    design_kind = values.pop("design", None)
    q = values.pop("Q", None)
    r2 = values.pop("first_stage_r2", None)
    for key, val in values.items():
        try:
            if key in _FLOAT_KEYS:
                kw[key] = float(val)
            elif key == "rho_zu":
                kw["rho_zu_E"] = kw["rho_zu_O"] = float(val)
            elif key == "pi_O":
                kw["pi_E"] = 1.0 - float(val)
            elif key in ("n_E", "seed"):
                kw[key] = int(val)
            elif key in ("replications", "workers"):
                run[key] = int(val)
            elif key == "estimators":
                run[key] = tuple(s.strip() for s in val.split(",") if s.strip())
            else:
                raise ConfigError(f"unknown config key {key!r}")
        except ValueError:
            raise ConfigError(f"config key {key!r}: cannot parse {val!r}") from None
    if r2 is not None:
        r2f = float(r2)
        if "gamma" in kw:
            raise ConfigError("give either gamma or first_stage_r2, not both")
        kw["gamma"] = math.sqrt(r2f)
        kw.setdefault("sigma_v2", 1.0 - r2f)
    if q is not None or design_kind == "quantile":
        if q is None:
            raise ConfigError("quantile design needs Q")
        kw["design"] = DesignRule.quantile_tails(float(q))
    elif design_kind not in (None, "random"):
        raise ConfigError(f"unknown design {design_kind!r}")
    return SimulationConfig(**kw), run


def config_items(cfg: SimulationConfig) -> dict[str, object]:
    d = {k: getattr(cfg, k) for k in ("beta1", "beta2", "gamma", "sigma_v2", "rho_zu_E", "rho_zu_O", "rho_uv_scaled", "theta", "pi_E", "n_E", "seed")}
    d["design"] = cfg.design.kind
    if cfg.design.kind == "quantile":
        d["Q"] = cfg.design.q
    return d
