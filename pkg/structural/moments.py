# structural/moments.py
"""
Reduced-form moments and the minimum-distance objective.

The moment vector is (beta_L, beta_K, beta_R): the reform's effects on log
employment, log capital and log revenue. The model maps (eps, eta, rho) to the
same three numbers through reform_effect, and the objective is the weighted
quadratic distance between the two.
"""

import logging
from dataclasses import dataclass

import numpy as np

from config.exceptions import ConfigurationError, DomainError, SolverError
from economy.elasticities import FD_STEP, reform_effect

logger = logging.getLogger(__name__)

MOMENT_NAMES = ("beta_L", "beta_K", "beta_R")
RIDGE = 1e-10
PENALTY = 1e12
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class MomentVector:
    beta_L: float
    beta_K: float
    beta_R: float
    vcov: np.ndarray

    def __post_init__(self):
        for name in MOMENT_NAMES:
            if not np.isfinite(getattr(self, name)):
                raise ConfigurationError(f"{name} must be finite", key=name)
        vcov = np.asarray(self.vcov, dtype=float)
        if vcov.shape != (3, 3):
            raise ConfigurationError(f"vcov must be 3x3, got shape {vcov.shape}", key="vcov")
        if not np.all(np.isfinite(vcov)):
            raise ConfigurationError("vcov must be finite", key="vcov")
        if not np.allclose(vcov, vcov.T, rtol=0.0, atol=SYMMETRY_TOL * max(1.0, np.abs(vcov).max())):
            raise ConfigurationError("vcov must be symmetric", key="vcov")
        if np.any(np.diag(vcov) < 0):
            raise ConfigurationError("vcov diagonal must be non-negative", key="vcov")
        object.__setattr__(self, "vcov", vcov)

    @classmethod
    def from_dict(cls, data):
        return cls(
            beta_L=float(data["beta_L"]),
            beta_K=float(data["beta_K"]),
            beta_R=float(data["beta_R"]),
            vcov=np.asarray(data["vcov"], dtype=float),
        )

    @property
    def values(self):
        return np.array([self.beta_L, self.beta_K, self.beta_R])

    def to_dict(self):
        return {
            "beta_L": self.beta_L,
            "beta_K": self.beta_K,
            "beta_R": self.beta_R,
            "vcov": self.vcov.tolist(),
        }


def weighting_matrix(vcov):
    """Inverse of the moment covariance; ridge pseudo-inverse when it is singular."""
    vcov = np.asarray(vcov, dtype=float)
    try:
        weight = np.linalg.inv(vcov)
        if np.all(np.isfinite(weight)) and np.linalg.cond(vcov) < 1e12:
            return weight
    except np.linalg.LinAlgError:
        pass
    logger.warning("Moment covariance is singular or ill-conditioned, using a ridge pseudo-inverse")
    return np.linalg.pinv(vcov + RIDGE * np.eye(vcov.shape[0]))


def quadratic_distance(residual, weight):
    residual = np.asarray(residual, dtype=float)
    value = float(residual @ np.asarray(weight, dtype=float) @ residual)
    # a PSD weight can still leave a tiny negative from rounding
    return max(value, 0.0)


def model_moments(params, phi1, phi2, step=FD_STEP):
    effect = reform_effect(params, phi1, phi2, step=step)
    return np.array([effect.beta_L, effect.beta_K, effect.beta_R])


def moments_at(params, phi1, phi2, vcov, step=FD_STEP):
    """The MomentVector the model produces at params, carrying the given covariance."""
    beta = model_moments(params, phi1, phi2, step=step)
    return MomentVector(beta_L=beta[0], beta_K=beta[1], beta_R=beta[2], vcov=vcov)


def simulate_moments(truth, phi1, phi2, vcov, rng, step=FD_STEP):
    """Model moments at truth plus a draw from N(0, vcov)."""
    beta = model_moments(truth, phi1, phi2, step=step)
    noise = rng.multivariate_normal(np.zeros(3), np.asarray(vcov, dtype=float), method="eigh")
    noisy = beta + noise
    return MomentVector(beta_L=noisy[0], beta_K=noisy[1], beta_R=noisy[2], vcov=vcov)


def cmd_objective(moments, params, phi1, phi2, weight=None, step=FD_STEP):
    """
    [beta_hat - m(params)]' W [beta_hat - m(params)].

    W defaults to the inverse moment covariance. A model that cannot be
    solved at params scores PENALTY.
    """
    if weight is None:
        weight = weighting_matrix(moments.vcov)
    try:
        model = model_moments(params, phi1, phi2, step=step)
    except (SolverError, DomainError) as exc:
        logger.debug(f"Penalized candidate eps={params.eps:.6g} eta={params.eta:.6g} rho={params.rho:.6g}: {exc}")
        return PENALTY
    return quadratic_distance(moments.values - model, weight)


def is_penalized(value):
    return value >= PENALTY
