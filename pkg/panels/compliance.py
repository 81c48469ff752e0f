# panels/compliance.py
"""
Who actually gets the payroll-tax cut.

Firms in eligible sectors take it up from their cohort year with probability
p_take. Any firm can also qualify through the product criterion, with
probability p_ncm, from the reform's first year. Treatment is absorbing.

Take-up among eligible firms not already treated through the product
criterion is scaled so that P(treated | eligible now) = max(p_take, p_ncm)
and P(treated | not eligible now, after the reform) = p_ncm.
"""

import logging

import numpy as np
import pandas as pd

from config.exceptions import ConfigurationError
from panels.sectors import NEVER, REFORM_YEAR

logger = logging.getLogger(__name__)

YEARS = tuple(range(2008, 2018))


def _check_probability(name, value):
    if not (0.0 <= value <= 1.0):
        raise ConfigurationError(f"{name} must lie in [0, 1], got {value}", key=name)


def first_treated_years(cohort, p_take, p_ncm, rng, reform_year=REFORM_YEAR):
    """First treated year per firm (0 = never) given each firm's sector cohort."""
    _check_probability("p_take", p_take)
    _check_probability("p_ncm", p_ncm)
    cohort = np.asarray(cohort)
    n = cohort.size
    product_route = rng.random(n) < p_ncm
    take_given_untreated = max(p_take - p_ncm, 0.0) / (1.0 - p_ncm) if p_ncm < 1.0 else 0.0
    takes_up = rng.random(n) < take_given_untreated

    first = np.full(n, NEVER, dtype=int)
    eligible = cohort != NEVER
    first[eligible & takes_up] = cohort[eligible & takes_up]
    # the product route starts at the reform and wins over a later cohort
    first[product_route] = reform_year
    return first


def treatment_flags(first_treated, years):
    """(n_firms, n_years) 0/1 matrix of treated_now from first treated years."""
    first = np.asarray(first_treated)[:, None]
    years = np.asarray(years)[None, :]
    return ((first != NEVER) & (years >= first)).astype(int)


def eligibility_flags(cohort, years):
    cohort = np.asarray(cohort)[:, None]
    years = np.asarray(years)[None, :]
    return ((cohort != NEVER) & (years >= cohort)).astype(int)


def assign_compliance(tree, firms, p_take, p_ncm, seed=0, years=YEARS):
    """
    Firm-year eligibility and treatment flags.

    firms holds one row per firm with firm_id and sector_7d. Returns a long
    frame with firm_id, year, cohort, eligible_now, first_treated_year and
    treated_now, firm-major and year-minor.
    """
    rng = np.random.default_rng(seed)
    cohorts = tree.cohorts()
    unknown = set(firms["sector_7d"]) - set(cohorts)
    if unknown:
        raise ConfigurationError(f"firms reference unknown sectors: {sorted(unknown)[:5]}", key="sector_7d")

    cohort = firms["sector_7d"].map(cohorts).to_numpy(dtype=int)
    first = first_treated_years(cohort, p_take, p_ncm, rng)
    years = np.asarray(years)
    eligible_now = eligibility_flags(cohort, years)
    treated_now = treatment_flags(first, years)

    n_years = years.size
    frame = pd.DataFrame({
        "firm_id": np.repeat(firms["firm_id"].to_numpy(), n_years),
        "year": np.tile(years, len(firms)),
        "cohort": np.repeat(cohort, n_years),
        "eligible_now": eligible_now.ravel(),
        "first_treated_year": np.repeat(first, n_years),
        "treated_now": treated_now.ravel(),
    })
    logger.info(
        f"Compliance: {int((first != NEVER).sum())}/{len(first)} firms ever treated "
        f"(p_take={p_take}, p_ncm={p_ncm})"
    )
    return frame
