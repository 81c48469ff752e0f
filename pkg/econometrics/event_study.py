# econometrics/event_study.py
"""
Difference-in-differences designs on the synthetic panels.

Treatment D is actual take-up, eligibility L is sector-level access. The
pooled design instruments D with L; the event study instruments each
event-time indicator D^k with the matching sector event-time indicator Z^k
(L interacted with years since the sector's cohort), leaving k = -1 out.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from config.exceptions import ConfigurationError, EstimationError
from econometrics.regression import build_design, ols, tsls
from econometrics.specs import (
    EVENT_WINDOW,
    REFERENCE_PERIOD,
    RegressionSpec,
    event_column,
    event_times,
)

logger = logging.getLogger(__name__)

ENDPOINTS = ("trim", "bin")


@dataclass(frozen=True)
class PanelLevel:
    """Column roles for one panel level."""

    name: str
    outcome: str
    treated: str
    eligible: str
    first_treated: str
    cohort: str
    fixed_effects: tuple
    cluster: str


FIRM = PanelLevel(
    name="firm",
    outcome="log_employment",
    treated="treated_now",
    eligible="eligible_now",
    first_treated="first_treated_year",
    cohort="cohort",
    fixed_effects=("firm_id", "sector_1d:year"),
    cluster="cluster",
)

# worker effects plus current-employer effects; clusters follow the base employer
WORKER = PanelLevel(
    name="worker",
    outcome="log_net_earnings",
    treated="treated_now",
    eligible="eligible_now",
    first_treated="base_first_treated_year",
    cohort="cohort_base",
    fixed_effects=("worker_id", "firm_id", "sector_1d_base:year"),
    cluster="cluster_base",
)

LEVELS = {"firm": FIRM, "worker": WORKER}


def panel_level(name):
    try:
        return LEVELS[name]
    except KeyError:
        raise ConfigurationError(f"unknown panel level {name!r}; expected one of {sorted(LEVELS)}", key="level")


@dataclass
class PooledDid:
    """First stage (pi), reduced form (delta) and the IV estimate of one outcome."""

    first_stage: object
    reduced_form: object
    iv: object

    @property
    def pi(self):
        return self.first_stage.coef(self.iv.spec.instruments[0])

    @property
    def delta(self):
        return self.reduced_form.coef(self.iv.spec.instruments[0])

    @property
    def wald_ratio(self):
        return self.delta / self.pi

    def as_dict(self):
        return {
            "first_stage": self.first_stage.as_dict(),
            "reduced_form": self.reduced_form.as_dict(),
            "iv": self.iv.as_dict(),
            "pi": self.pi,
            "delta": self.delta,
            "wald_ratio": self.wald_ratio,
        }


def pooled_did(panel, outcome=None, level="firm", subsample=None):
    """
    The pooled design: D on L (first stage), outcome on L (reduced form),
    and 2SLS of the outcome on D instrumented by L, all with the level's
    fixed effects and clustering.
    """
    lv = panel_level(level) if isinstance(level, str) else level
    outcome = outcome or lv.outcome
    common = dict(fixed_effects=lv.fixed_effects, cluster=lv.cluster, subsample=dict(subsample or {}))
    iv_spec = RegressionSpec(outcome=outcome, endogenous=(lv.treated,), instruments=(lv.eligible,), **common)
    # all three regressions share one absorbed sample
    design = build_design(iv_spec, panel)
    iv = tsls(iv_spec, panel, design=design)
    exogenous = {**design.instruments, **design.controls}
    first = ols(
        RegressionSpec(outcome=lv.treated, controls=(lv.eligible,), **common),
        panel,
        design=replace(design, y=design.endogenous[lv.treated], endogenous={}, controls=exogenous),
    )
    reduced = ols(
        RegressionSpec(outcome=outcome, controls=(lv.eligible,), **common),
        panel,
        design=replace(design, endogenous={}, controls=exogenous),
    )
    result = PooledDid(first_stage=first, reduced_form=reduced, iv=iv)
    logger.info(
        f"Pooled DiD on {outcome} ({lv.name}): pi={result.pi:.4f} delta={result.delta:.4f} "
        f"iv={iv.coef(lv.treated):.4f} (se {iv.se(lv.treated):.4f}, G={iv.n_clusters})"
    )
    return result


def event_time(years, event_years):
    """years - event_years where an event exists (event year 0 means never), else NaN."""
    years = np.asarray(years, dtype=float)
    event_years = np.asarray(event_years, dtype=float)
    return np.where(event_years > 0, years - event_years, np.nan)


def add_event_columns(panel, level=FIRM, window=EVENT_WINDOW, endpoints="trim"):
    """
    Copy of panel with D_k<k> and Z_k<k> indicator columns.

    "trim" drops unit-years whose own or sector event time lies outside the
    window; "bin" folds them into the end periods.
    """
    if endpoints not in ENDPOINTS:
        raise ConfigurationError(f"endpoints must be one of {ENDPOINTS}, got {endpoints!r}", key="endpoints")
    lo, hi = window
    if not lo < REFERENCE_PERIOD < hi:
        raise ConfigurationError(f"event window {window} must contain k = {REFERENCE_PERIOD} inside it", key="window")
    own = event_time(panel["year"], panel[level.first_treated])
    sector = event_time(panel["year"], panel[level.cohort])
    if endpoints == "trim":
        outside = ((own < lo) | (own > hi)) | ((sector < lo) | (sector > hi))
        frame = panel.loc[~outside].copy()
        own, sector = own[~outside], sector[~outside]
    else:
        frame = panel.copy()
        own, sector = np.clip(own, lo, hi), np.clip(sector, lo, hi)
    for k in event_times(window):
        frame[event_column("D", k)] = (own == k).astype(float)
        frame[event_column("Z", k)] = (sector == k).astype(float)
    return frame


def event_study(panel, level="firm", outcome=None, window=EVENT_WINDOW, endpoints="trim", subsample=None):
    """
    Event-time IV: one first stage per D^k on the full Z set.

    k-cells with no treated or no eligible observations are left out of the
    regression and listed in the report's flags.
    """
    lv = panel_level(level) if isinstance(level, str) else level
    outcome = outcome or lv.outcome
    frame = add_event_columns(panel, lv, window, endpoints)
    for column, wanted in (subsample or {}).items():
        values = wanted if isinstance(wanted, (list, tuple, set)) else [wanted]
        frame = frame[frame[column].isin(values)]
    if frame.empty:
        raise EstimationError("no observations inside the event window")

    ks, flags = [], []
    for k in event_times(window):
        d, z = event_column("D", k), event_column("Z", k)
        if frame[d].sum() == 0 or frame[z].sum() == 0:
            flags.append(f"empty cell k={k}")
            logger.warning(f"Event time k={k} has no treated or no eligible observations; coefficient omitted")
        else:
            ks.append(k)
    if not ks:
        raise EstimationError("every event-time cell is empty")

    spec = RegressionSpec(
        outcome=outcome,
        endogenous=tuple(event_column("D", k) for k in ks),
        instruments=tuple(event_column("Z", k) for k in ks),
        fixed_effects=lv.fixed_effects,
        cluster=lv.cluster,
    )
    report = tsls(spec, frame)
    report.event_profile = {k: report[event_column("D", k)] for k in ks}
    report.flags = flags + list(report.flags)
    logger.info(
        f"Event study on {outcome} ({lv.name}, {endpoints}): N={report.n_obs} G={report.n_clusters} "
        f"cells={len(ks)}"
    )
    return report


def event_frame(report):
    """(k, beta, se) table in event-time order, reference period excluded."""
    rows = [{"k": k, "beta": c.coef, "se": c.se} for k, c in sorted(report.event_profile.items())]
    return pd.DataFrame(rows, columns=["k", "beta", "se"])


def post_period_mean(report):
    post = [c.coef for k, c in report.event_profile.items() if k >= 0]
    return float(np.mean(post)) if post else float("nan")


def pre_period_coefficients(report):
    return {k: c for k, c in report.event_profile.items() if k < REFERENCE_PERIOD}


def joint_pretrend_rejects(report, z=1.96):
    """True when any pre-period coefficient has |t| >= z."""
    return any(abs(c.t) >= z for c in pre_period_coefficients(report).values())

