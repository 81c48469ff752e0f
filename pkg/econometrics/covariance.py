# econometrics/covariance.py
import numpy as np
from statsmodels.stats.sandwich_covariance import S_crosssection

from config.exceptions import InferenceError
from econometrics.fixed_effects import compact


def small_sample_factor(n_obs, n_clusters, k):
    """CR1: (G / (G - 1)) * ((N - 1) / (N - K))."""
    if n_obs - k <= 0:
        raise InferenceError(f"no residual degrees of freedom (N = {n_obs}, K = {k})")
    return n_clusters / (n_clusters - 1) * (n_obs - 1) / (n_obs - k)


def cluster_robust_vcov(X, resid, clusters, *, bread=None, extra_dof=0):
    """
    Liang-Zeger sandwich bread @ meat @ bread with the CR1 factor.

    The meat is statsmodels' sum over clusters of outer products of the
    summed scores x_i * e_i. For 2SLS pass the projected regressors as X and
    second-stage residuals as resid; bread is then the projected (X'X)^-1,
    e.g. a statsmodels fit's normalized_cov_params. extra_dof adds absorbed
    fixed-effect levels to K.
    """
    X = np.asarray(X, dtype=float)
    resid = np.asarray(resid, dtype=float)
    n, k = X.shape
    codes = compact(np.asarray(clusters))
    n_clusters = int(codes.max()) + 1 if n else 0
    if n_clusters < 2:
        raise InferenceError(f"cluster-robust inference needs at least 2 clusters, got {n_clusters}")
    if bread is None:
        bread = np.linalg.pinv(X.T @ X)

    meat = S_crosssection(X * resid[:, None], codes)
    vcov = small_sample_factor(n, n_clusters, k + extra_dof) * (bread @ meat @ bread)
    return (vcov + vcov.T) / 2.0, n_clusters
