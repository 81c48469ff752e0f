# econometrics/matching.py
"""
Matched difference-in-differences.

Treated firms are matched 1:1, without replacement, to never-treated firms
in the same cell of pre-reform deciles of employment, wages and hires. A
logistic propensity score on the same pre-reform covariates breaks ties
inside a cell; remaining ties go to the lower firm_id.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import statsmodels.api as sm
from statsmodels.tools.sm_exceptions import PerfectSeparationError

from config.exceptions import ConfigurationError, EstimationError
from econometrics.regression import ols
from econometrics.specs import RegressionSpec
from panels.sectors import REFORM_YEAR

logger = logging.getLogger(__name__)

MATCH_VARIABLES = ("log_employment", "log_avg_wage", "hires")
DECILES = 10
PLACEBO_SHARE = 0.3
MATCHED_POST = "matched_post"


@dataclass
class MatchingResult:
    pairs: pd.DataFrame
    unmatched: list
    report: object
    sample: pd.DataFrame
    placebo: bool = False
    flags: list = field(default_factory=list)

    @property
    def effect(self):
        return self.report[MATCHED_POST]

    def as_dict(self):
        return {
            "placebo": self.placebo,
            "matched_pairs": int(len(self.pairs)),
            "unmatched_treated": len(self.unmatched),
            "unmatched_firm_ids": list(self.unmatched),
            "effect": {"coef": self.effect.coef, "se": self.effect.se, "t": self.effect.t},
            "report": self.report.as_dict(),
        }


def pre_period_profile(panel, variables=MATCH_VARIABLES, reform_year=REFORM_YEAR):
    """One row per firm: pre-reform means of variables plus treatment timing."""
    pre = panel[panel["year"] < reform_year]
    if pre.empty:
        raise ConfigurationError(f"matching needs at least one year before {reform_year}", key="input")
    profile = pre.groupby("firm_id", sort=True)[list(variables)].mean()
    timing = panel.groupby("firm_id", sort=True)["first_treated_year"].first()
    profile = profile.join(timing)
    profile["treated"] = (profile["first_treated_year"] > 0).astype(int)
    return profile.reset_index()


def decile_codes(values, n=DECILES):
    """Quantile bins of values; equal values always share a bin."""
    values = pd.Series(values)
    bins = min(n, values.size)
    if bins < 2:
        return np.zeros(values.size, dtype=int)
    return pd.qcut(values.rank(method="average"), bins, labels=False, duplicates="drop").to_numpy(dtype=int)


def propensity_scores(profile, variables=MATCH_VARIABLES, treated="treated"):
    X = sm.add_constant(profile[list(variables)].to_numpy(dtype=float), has_constant="add")
    y = profile[treated].to_numpy(dtype=float)
    share = float(y.mean())
    if share in (0.0, 1.0):
        return np.full(y.size, share)
    try:
        fit = sm.Logit(y, X).fit(disp=0)
        scores = np.asarray(fit.predict(X), dtype=float)
    except (np.linalg.LinAlgError, ValueError, PerfectSeparationError) as exc:
        logger.warning(f"Propensity score fit failed ({exc}); ties fall back to firm_id order")
        return np.full(y.size, share)
    if not np.all(np.isfinite(scores)):
        logger.warning("Propensity score fit produced non-finite scores; ties fall back to firm_id order")
        return np.full(y.size, share)
    return scores


def match_firms(profile, variables=MATCH_VARIABLES, treated="treated"):
    """
    Greedy nearest-neighbour matching within decile cells.

    Returns (pairs, unmatched treated firm ids). Treated firms are visited in
    firm_id order.
    """
    profile = profile.sort_values("firm_id").reset_index(drop=True)
    profile["cell"] = list(zip(*(decile_codes(profile[v]) for v in variables)))
    profile["pscore"] = propensity_scores(profile, variables, treated)

    pairs, unmatched = [], []
    for cell, group in profile.groupby("cell", sort=True):
        treated_rows = group[group[treated] == 1]
        controls = group[group[treated] == 0]
        control_ids = controls["firm_id"].to_numpy()
        control_scores = controls["pscore"].to_numpy()
        available = np.ones(control_ids.size, dtype=bool)
        for firm_id, score in zip(treated_rows["firm_id"], treated_rows["pscore"]):
            if not available.any():
                unmatched.append(int(firm_id))
                continue
            distance = np.where(available, np.abs(control_scores - score), np.inf)
            pick = int(np.argmin(distance))
            available[pick] = False
            pairs.append({
                "treated_firm": int(firm_id),
                "control_firm": int(control_ids[pick]),
                "cell": "-".join(str(int(c)) for c in cell),
                "distance": float(distance[pick]),
            })
    columns = ["treated_firm", "control_firm", "cell", "distance"]
    return pd.DataFrame(pairs, columns=columns), sorted(unmatched)


def placebo_profile(profile, share=PLACEBO_SHARE, seed=0):
    """Never-treated firms only, a random share of them marked as treated in the reform year."""
    if not 0.0 < share < 1.0:
        raise ConfigurationError(f"placebo_share must lie in (0, 1), got {share}", key="placebo_share")
    pool = profile[profile["treated"] == 0].copy()
    rng = np.random.default_rng(seed)
    chosen = rng.random(len(pool)) < share
    pool["treated"] = chosen.astype(int)
    pool["first_treated_year"] = np.where(chosen, REFORM_YEAR, 0)
    return pool


def matched_sample(panel, pairs, event_years):
    """Panel rows of matched firms with the matched_post regressor."""
    treated_ids = pairs["treated_firm"].to_numpy()
    control_ids = pairs["control_firm"].to_numpy()
    group = pd.DataFrame({
        "firm_id": np.concatenate([treated_ids, control_ids]),
        "matched_group": np.concatenate([np.ones(treated_ids.size, dtype=int), np.zeros(control_ids.size, dtype=int)]),
        # a control firm inherits its partner's event year
        "event_year": np.tile(event_years.loc[treated_ids].to_numpy(), 2),
    })
    sample = panel.merge(group, on="firm_id", how="inner")
    sample[MATCHED_POST] = sample["matched_group"] * (sample["year"] >= sample["event_year"]).astype(float)
    return sample.sort_values(["firm_id", "year"]).reset_index(drop=True)


def matching_did(panel, outcome="log_employment", variables=MATCH_VARIABLES, placebo=False,
                 placebo_share=PLACEBO_SHARE, seed=0, cluster="cluster"):
    """Match, then DiD on the matched sample with firm and year fixed effects."""
    profile = pre_period_profile(panel, variables)
    if placebo:
        profile = placebo_profile(profile, placebo_share, seed)
    pairs, unmatched = match_firms(profile, variables)
    flags = []
    if unmatched:
        flags.append(f"unmatched treated firms: {len(unmatched)}")
        logger.warning(f"{len(unmatched)} treated firm(s) found no control in their decile cell")
    if pairs.empty:
        raise EstimationError("no treated firm could be matched to a control")

    event_years = profile.set_index("firm_id")["first_treated_year"]
    sample = matched_sample(panel, pairs, event_years)
    spec = RegressionSpec(
        outcome=outcome,
        controls=(MATCHED_POST,),
        fixed_effects=("firm_id", "year"),
        cluster=cluster,
    )
    report = ols(spec, sample)
    report.method = "matched_did" if not placebo else "matched_did_placebo"
    report.flags = flags + list(report.flags)
    logger.info(
        f"Matched DiD on {outcome}: {len(pairs)} pairs, effect {report.coef(MATCHED_POST):.4f} "
        f"(se {report.se(MATCHED_POST):.4f})"
    )
    return MatchingResult(pairs=pairs, unmatched=unmatched, report=report, sample=sample, placebo=placebo, flags=flags)
