# econometrics/regression.py
"""
OLS and two-stage least squares on fixed-effect-absorbed data with
cluster-robust (CR1) standard errors.

Fixed effects are absorbed with pyhdfe; every least-squares stage is a
statsmodels OLS fit on the absorbed columns.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import statsmodels.api as sm

from config.exceptions import ConfigurationError, EstimationError
from econometrics.covariance import cluster_robust_vcov
from econometrics.fixed_effects import (
    absorb_fixed_effects,
    absorbed_dof,
    compact,
    group_codes,
    singleton_mask,
)
from econometrics.specs import Coefficient, EstimateReport

logger = logging.getLogger(__name__)

INTERCEPT = "const"
COLLINEAR_TOL = 1e-9
WEAK_F = 1e-8


@dataclass
class Design:
    """Absorbed data for one specification."""

    y: np.ndarray
    endogenous: dict
    instruments: dict
    controls: dict
    clusters: np.ndarray
    n_obs: int
    sweeps: int
    fe_dof: int
    has_fe: bool
    singletons: int
    dropped: list = field(default_factory=list)


def select_rows(spec, data):
    missing = [c for c in spec.columns() if c not in data.columns]
    if missing:
        raise ConfigurationError(f"data lacks columns {missing}", key="columns")
    frame = data[spec.columns()]
    for column, wanted in spec.subsample.items():
        values = wanted if isinstance(wanted, (list, tuple, set)) else [wanted]
        frame = frame[frame[column].isin(values)]
    frame = frame.dropna()
    if frame.empty:
        raise EstimationError("no observations left after subsampling and dropping missing values")
    return frame


def _independent_columns(columns, base=None, tol=COLLINEAR_TOL):
    """
    Greedy rank filter: keep a column when it is not spanned by base plus the
    columns kept before it. Returns (kept names, dropped names).
    """
    basis = [] if base is None else [base[:, j] for j in range(base.shape[1])]
    kept, dropped = [], []
    for name, column in columns.items():
        scale = np.linalg.norm(column)
        if scale == 0:
            dropped.append(name)
            continue
        if basis:
            B = np.column_stack(basis)
            coef, *_ = np.linalg.lstsq(B, column, rcond=None)
            residual = column - B @ coef
        else:
            residual = column
        if np.linalg.norm(residual) <= tol * max(scale, 1.0):
            dropped.append(name)
        else:
            basis.append(column)
            kept.append(name)
    return kept, dropped


def build_design(spec, data):
    frame = select_rows(spec, data)
    codes_list = [group_codes(frame, key) for key in spec.fixed_effects]
    singletons = 0
    if codes_list:
        keep = singleton_mask(codes_list)
        singletons = int((~keep).sum())
        if singletons:
            logger.info(f"Dropped {singletons} singleton observation(s) before absorption")
            frame = frame[keep]
            codes_list = [compact(c[keep]) for c in codes_list]
        if frame.empty:
            raise EstimationError("every observation is a fixed-effect singleton")

    exog_names = list(spec.controls)
    if not codes_list:
        exog_names = [INTERCEPT, *exog_names]
    excluded = [z for z in spec.instruments if z not in spec.endogenous]
    names = [spec.outcome, *spec.endogenous, *excluded, *spec.controls]
    raw = frame[names].to_numpy(dtype=float)
    absorbed, sweeps = absorb_fixed_effects(raw, codes_list, names=names)
    columns = dict(zip(names, absorbed.T))
    if not codes_list:
        columns[INTERCEPT] = np.ones(len(frame))

    clusters = frame[spec.cluster].to_numpy() if spec.cluster else np.arange(len(frame))
    dropped = []

    controls_kept, controls_dropped = _independent_columns({c: columns[c] for c in exog_names})
    for name in controls_dropped:
        logger.warning(f"Dropped control {name!r}: no variation left after absorbing fixed effects or collinear")
    dropped += controls_dropped
    control_matrix = np.column_stack([columns[c] for c in controls_kept]) if controls_kept else None

    endog_kept, endog_dropped = _independent_columns({c: columns[c] for c in spec.endogenous}, control_matrix)
    if endog_dropped:
        raise EstimationError(f"regressor(s) {endog_dropped} have no variation after absorption")

    inst_kept = []
    if spec.is_iv:
        inst_kept, inst_dropped = _independent_columns({z: columns[z] for z in excluded}, control_matrix)
        for name in inst_dropped:
            logger.warning(f"Dropped instrument {name!r}: collinear with the controls")
        dropped += inst_dropped

    return Design(
        y=columns[spec.outcome],
        endogenous={c: columns[c] for c in endog_kept},
        instruments={z: columns[z] for z in inst_kept},
        controls={c: columns[c] for c in controls_kept},
        clusters=clusters,
        n_obs=len(frame),
        sweeps=sweeps,
        fe_dof=absorbed_dof(codes_list, clusters if spec.cluster else None),
        has_fe=bool(codes_list),
        singletons=singletons,
        dropped=dropped,
    )


def _matrix(columns, n):
    if not columns:
        return np.zeros((n, 0))
    return np.column_stack(list(columns.values()))


def _r2(y, resid, has_fe):
    centered = y if has_fe else y - y.mean()
    total = float(centered @ centered)
    if total == 0:
        return None
    return 1.0 - float(resid @ resid) / total


def _coefficients(names, beta, vcov):
    return {name: Coefficient(float(b), float(np.sqrt(max(vcov[i, i], 0.0)))) for i, (name, b) in enumerate(zip(names, beta))}


def ols(spec, data, design=None):
    """Least squares of the outcome on endogenous and control columns (no instruments used)."""
    if design is None:
        design = build_design(spec, data)
    regressors = {**design.endogenous, **design.controls}
    X = _matrix(regressors, design.n_obs)
    if X.shape[1] == 0:
        raise EstimationError("no regressors left to estimate")
    fit = sm.OLS(design.y, X).fit()
    beta, resid = fit.params, fit.resid
    vcov, n_clusters = cluster_robust_vcov(
        X, resid, design.clusters, bread=fit.normalized_cov_params, extra_dof=design.fe_dof
    )
    return EstimateReport(
        method="ols",
        spec=spec,
        coefficients=_coefficients(list(regressors), beta, vcov),
        n_obs=design.n_obs,
        n_clusters=n_clusters,
        fe_iterations=design.sweeps,
        r2=_r2(design.y, resid, design.has_fe),
        dropped=list(design.dropped),
        singletons_dropped=design.singletons,
        dof_k=X.shape[1] + design.fe_dof,
    )


def first_stage_F(target, W, W_restricted, n_obs, extra_dof):
    """Homoskedastic F for the excluded instruments in a first-stage regression."""
    def rss(M):
        if M.shape[1] == 0:
            return float(target @ target)
        return float(sm.OLS(target, M).fit().ssr)

    q = W.shape[1] - W_restricted.shape[1]
    unrestricted, restricted = rss(W), rss(W_restricted)
    gain = max(restricted - unrestricted, 0.0)
    dof = n_obs - W.shape[1] - extra_dof
    if dof <= 0:
        return float("nan")
    if unrestricted <= 1e-14 * max(restricted, 1e-300):
        return float("inf") if gain > 0 else 0.0
    return (gain / q) / (unrestricted / dof)


def tsls(spec, data, design=None):
    """
    Two-stage least squares. Reports first-stage coefficients on the
    excluded instruments and their F statistics; a first stage with F below
    1e-8 is treated as singular.
    """
    if not spec.is_iv:
        raise ConfigurationError("tsls needs instruments", key="instruments")
    if design is None:
        design = build_design(spec, data)
    n = design.n_obs
    C = _matrix(design.controls, n)
    # endogenous columns that instrument themselves pass straight through
    own = [e for e in design.endogenous if e in spec.instruments]
    Z = _matrix({**design.instruments, **{e: design.endogenous[e] for e in own}}, n)
    W = np.column_stack([Z, C])
    if W.shape[1] < len(design.endogenous) + C.shape[1]:
        raise EstimationError("order condition fails after dropping collinear instruments")

    first_stage, fstats, fitted = {}, {}, {}
    instrument_names = [*design.instruments, *own]
    for name, D in design.endogenous.items():
        stage = sm.OLS(D, W).fit()
        fitted[name] = stage.fittedvalues
        F = first_stage_F(D, W, C, n, design.fe_dof)
        fstats[name] = F
        if not F >= WEAK_F:
            raise EstimationError(f"first stage for {name!r} is singular (F = {F:.3g})")
        fs_vcov, _ = cluster_robust_vcov(
            W, stage.resid, design.clusters, bread=stage.normalized_cov_params, extra_dof=design.fe_dof
        )
        first_stage[name] = _coefficients(instrument_names, stage.params[: Z.shape[1]], fs_vcov)

    names = [*design.endogenous, *design.controls]
    X = np.column_stack([*design.endogenous.values(), C]) if C.shape[1] else _matrix(design.endogenous, n)
    X_hat = np.column_stack([*fitted.values(), C]) if C.shape[1] else _matrix(fitted, n)
    XtX = X_hat.T @ X_hat
    if np.linalg.cond(XtX) > 1e14:
        raise EstimationError("projected regressors are singular; instruments do not separate the endogenous columns")
    second = sm.OLS(design.y, X_hat).fit()
    beta = second.params
    # structural residuals use the observed regressors, not the projected ones
    resid = design.y - X @ beta
    vcov, n_clusters = cluster_robust_vcov(
        X_hat, resid, design.clusters, bread=second.normalized_cov_params, extra_dof=design.fe_dof
    )
    return EstimateReport(
        method="2sls",
        spec=spec,
        coefficients=_coefficients(names, beta, vcov),
        n_obs=n,
        n_clusters=n_clusters,
        fe_iterations=design.sweeps,
        r2=_r2(design.y, resid, design.has_fe),
        first_stage=first_stage,
        first_stage_F=fstats,
        dropped=list(design.dropped),
        singletons_dropped=design.singletons,
        dof_k=X.shape[1] + design.fe_dof,
    )
