"""Predicted variance of the combined GMM estimator and its gain over the
experiment-only estimator, for random and Z-dependent experimental designs."""

from __future__ import annotations

from dataclasses import dataclass

from scipy.stats import norm


@dataclass(frozen=True)
class MomentProfile:
    """Population moments that drive the efficiency gain.

    ``var_Z`` (pooled) is implied: ``pi_O*var_Z_O + pi_E*var_Z_E``.
    """

    pi_O: float
    var_X_E: float
    var_X_O: float
    var_Z_E: float
    var_Z_O: float
    gamma: float
    sigma2: float = 1.0
    n_E: int = 1

    def __post_init__(self):
        if not 0 <= self.pi_O < 1:
            raise ValueError("pi_O must lie in [0, 1)")
        for name in ("var_X_E", "var_X_O", "var_Z_E", "var_Z_O", "sigma2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.n_E < 1:
            raise ValueError("n_E must be >= 1")

    @property
    def pi_E(self) -> float:
        return 1.0 - self.pi_O

    @property
    def var_Z(self) -> float:
        return self.pi_O * self.var_Z_O + self.pi_E * self.var_Z_E


def experiment_only_var(p: MomentProfile) -> float:
    return p.sigma2 / (p.n_E * p.var_X_E)


def asymptotic_var_gmm(p: MomentProfile) -> float:
    info = p.var_X_E + p.pi_O * p.gamma**2 * p.var_Z_O * p.var_Z_E / p.var_Z
    return p.sigma2 / p.n_E / info


def efficiency_ratio(p: MomentProfile) -> float:
    """Var(experiment-only) / Var(GMM), written as the product of its drivers."""
    rel_var_z = p.var_Z_E / p.var_Z
    relevance = p.gamma**2 * p.var_Z_O / p.var_X_O
    rel_var_x = p.var_X_O / p.var_X_E
    return 1.0 + p.pi_O * rel_var_z * relevance * rel_var_x


def design_limit_ratio(var_Z_E: float, var_Z_O: float) -> float:
    """Limit of :func:`efficiency_ratio` as pi_O -> 1."""
    if not (var_Z_E >= 0 and var_Z_O > 0):
        raise ValueError("variances must be positive")
    return 1.0 + var_Z_E / var_Z_O


def tail_second_moment(q: float) -> float:
    """E[Z^2 | Z in the top or bottom q quantile] for standard normal Z.

    Mills-ratio form: 1 + c*phi(c)/q with c the upper q quantile.
    """
    if not 0 < q <= 0.5:
        raise ValueError("q must lie in (0, 0.5]")
    c = norm.isf(q)
    return float(1.0 + c * norm.pdf(c) / q)


def quantile_design_moments(q: float, pi_E: float) -> tuple[float, float]:
    """(Var(Z|E), Var(Z|O)) when the experiment draws only from the two q-tails.

    Z is standard normal; the observational group keeps everything else, so its
    variance follows from the pooled variance being 1.
    """
    if q < pi_E / 2 - 1e-12:
        raise ValueError("q must be at least pi_E/2")
    var_e = tail_second_moment(q)
    var_o = (1.0 - pi_E * var_e) / (1.0 - pi_E)
    return var_e, var_o


def quantile_design_profile(
    q: float | None,
    pi_E: float,
    gamma: float,
    sigma_v2: float | None = None,
    sigma2: float = 1.0,
    n_E: int = 1,
    var_X_E: float = 1.0,
) -> MomentProfile:
    """Profile for the simulated design: X_O = gamma*Z + V, Z ~ N(0, 1).

    ``q=None`` is random assignment.
    """
    if sigma_v2 is None:
        sigma_v2 = 1.0 - gamma**2
    if q is None:
        var_e = var_o = 1.0
    else:
        var_e, var_o = quantile_design_moments(q, pi_E)
    return MomentProfile(
        pi_O=1.0 - pi_E,
        var_X_E=var_X_E,
        var_X_O=gamma**2 * var_o + sigma_v2,
        var_Z_E=var_e,
        var_Z_O=var_o,
        gamma=gamma,
        sigma2=sigma2,
        n_E=n_E,
    )


def predicted_relative_mse(p: MomentProfile) -> float:
    return 1.0 / efficiency_ratio(p)


def residual_variance(rho_zu: float = 0.4, var_u: float = 1.0) -> float:
    """Var of U - Cov(U,Z) Z for standard normal Z (0.84 in the baseline design)."""
    return var_u - rho_zu**2


__all__ = [
    "MomentProfile",
    "asymptotic_var_gmm",
    "design_limit_ratio",
    "efficiency_ratio",
    "experiment_only_var",
    "predicted_relative_mse",
    "quantile_design_moments",
    "quantile_design_profile",
    "residual_variance",
    "tail_second_moment",
]

