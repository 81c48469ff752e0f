# panels/firms.py
"""
Synthetic firm-year panel with a known treatment effect.

log_employment = firm_fe + year_fe + sector1 x year_fe + att(size) * treated_now
                 + pre-reform trend (confounded sectors only) + error
"""

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from config.exceptions import ConfigurationError
from panels.compliance import YEARS, assign_compliance
from panels.sectors import NEVER, REFORM_YEAR, cluster_key

logger = logging.getLogger(__name__)

BASELINE_TAX_RATE = 0.3178
TAX_CUT = 0.20
BASE_EARNINGS = 2315.46
SIZE_CLASSES = ("small", "medium", "large")
IID = "iid"
AR1 = "ar1"

FIRM_COLUMNS = [
    "firm_id",
    "year",
    "sector_1d",
    "sector_5d",
    "sector_7d",
    "state",
    "cluster",
    "cohort",
    "eligible_ever",
    "eligible_now",
    "first_treated_year",
    "treated_now",
    "size_class",
    "firm_fe",
    "log_employment",
    "log_avg_wage",
    "hires",
    "payroll_tax_rate",
    "log_labor_cost",
]


def size_class(employees):
    """small below 10 employees, medium 10 to 49, large from 50."""
    employees = np.asarray(employees)
    return np.where(employees < 10, "small", np.where(employees < 50, "medium", "large"))


def first_stage_dlog_cost(baseline=BASELINE_TAX_RATE, cut=TAX_CUT):
    """Statutory change in log(1 + payroll tax rate) for a treated firm."""
    return math.log1p(baseline - cut) - math.log1p(baseline)


@dataclass(frozen=True)
class FirmPanelConfig:
    n_firms: int = 5000
    first_year: int = YEARS[0]
    last_year: int = YEARS[-1]
    # pre-reform employment is log-normal
    size_mu: float = 2.5
    size_sigma: float = 1.2
    att_employment: float = 0.09
    # per size class; missing classes fall back to att_employment
    att_by_size: dict = field(default_factory=dict)
    att_wage: float = 0.0
    p_take: float = 0.7
    p_ncm: float = 0.05
    error: str = IID
    serial_corr_rho: float = 0.0
    error_sd: float = 0.1
    year_sd: float = 0.05
    sector_year_sd: float = 0.03
    wage_sd: float = 0.3
    wage_error_sd: float = 0.05
    hire_rate: float = 0.2
    baseline_tax_rate: float = BASELINE_TAX_RATE
    tax_cut: float = TAX_CUT

    def __post_init__(self):
        if self.n_firms < 1:
            raise ConfigurationError("n_firms must be >= 1", key="n_firms")
        if not (self.first_year < REFORM_YEAR <= self.last_year):
            raise ConfigurationError(f"the panel must straddle {REFORM_YEAR}", key="first_year")
        if self.size_sigma <= 0:
            raise ConfigurationError(f"size_sigma must be > 0, got {self.size_sigma}", key="size_sigma")
        for name in ("error_sd", "year_sd", "sector_year_sd", "wage_sd", "wage_error_sd", "hire_rate"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0", key=name)
        unknown = set(self.att_by_size) - set(SIZE_CLASSES)
        if unknown:
            raise ConfigurationError(f"unknown size classes {sorted(unknown)}", key="att_by_size")
        if self.error not in (IID, AR1):
            raise ConfigurationError(f"error must be {IID!r} or {AR1!r}, got {self.error!r}", key="error")
        if not (-1.0 < self.serial_corr_rho < 1.0):
            raise ConfigurationError("serial_corr_rho must lie in (-1, 1)", key="serial_corr_rho")
        if not (0.0 <= self.tax_cut <= self.baseline_tax_rate):
            raise ConfigurationError("tax_cut must lie in [0, baseline_tax_rate]", key="tax_cut")

    @property
    def years(self):
        return np.arange(self.first_year, self.last_year + 1)

    def att_for(self, size):
        return self.att_by_size.get(size, self.att_employment)

    def to_dict(self):
        return asdict(self)


def _errors(rng, n, years, config):
    """(n, years) disturbances with marginal sd error_sd; AR(1) starts from its stationary law."""
    if config.error == IID:
        return rng.normal(0.0, config.error_sd, size=(n, years))
    rho = config.serial_corr_rho
    shocks = rng.normal(0.0, config.error_sd * math.sqrt(1.0 - rho**2), size=(n, years))
    out = np.empty((n, years))
    out[:, 0] = rng.normal(0.0, config.error_sd, size=n)
    for t in range(1, years):
        out[:, t] = rho * out[:, t - 1] + shocks[:, t]
    return out


def generate_firm_panel(tree, config=None, seed=0):
    """Firm-year table in FIRM_COLUMNS order and the effects it was generated with."""
    config = config or FirmPanelConfig()
    seed_seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seeds = seed_seq.spawn(2)
    rng = np.random.default_rng(seeds[0])
    years = config.years
    n, n_years = config.n_firms, years.size

    sector_pick = rng.integers(0, len(tree.frame), size=n)
    sectors = tree.frame.iloc[sector_pick].reset_index(drop=True)
    state = np.asarray(tree.states)[rng.integers(0, len(tree.states), size=n)]
    log_size = rng.normal(config.size_mu, config.size_sigma, size=n)
    employees = np.maximum(np.rint(np.exp(log_size)), 1)
    sizes = size_class(employees)

    firms = pd.DataFrame({"firm_id": np.arange(1, n + 1), "sector_7d": sectors["sector_7d"].to_numpy()})
    flags = assign_compliance(tree, firms, config.p_take, config.p_ncm, seed=seeds[1], years=years)
    treated = flags["treated_now"].to_numpy().reshape(n, n_years)

    year_fe = rng.normal(0.0, config.year_sd, size=n_years)
    sector_1d_codes = np.sort(tree.frame["sector_1d"].unique())
    sector_year = rng.normal(0.0, config.sector_year_sd, size=(sector_1d_codes.size, n_years))
    sector_row = np.searchsorted(sector_1d_codes, sectors["sector_1d"].to_numpy())
    pre_years = np.minimum(years - (REFORM_YEAR - 1), 0)
    trend = sectors["trend"].to_numpy()[:, None] * pre_years[None, :]
    att = np.array([config.att_for(s) for s in sizes])

    log_employment = (
        log_size[:, None]
        + year_fe[None, :]
        + sector_year[sector_row]
        + att[:, None] * treated
        + trend
        + _errors(rng, n, n_years, config)
    )

    wage_fe = rng.normal(math.log(BASE_EARNINGS), config.wage_sd, size=n)
    wage_year = rng.normal(0.0, config.year_sd, size=n_years)
    log_avg_wage = (
        wage_fe[:, None]
        + wage_year[None, :]
        + config.att_wage * treated
        + rng.normal(0.0, config.wage_error_sd, size=(n, n_years))
    )
    hires = rng.poisson(config.hire_rate * np.exp(log_employment))
    rate = config.baseline_tax_rate - config.tax_cut * treated

    cohort = flags["cohort"].to_numpy()
    frame = pd.DataFrame({
        "firm_id": flags["firm_id"].to_numpy(),
        "year": flags["year"].to_numpy(),
        "sector_1d": np.repeat(sectors["sector_1d"].to_numpy(), n_years),
        "sector_5d": np.repeat(sectors["sector_5d"].to_numpy(), n_years),
        "sector_7d": np.repeat(sectors["sector_7d"].to_numpy(), n_years),
        "state": np.repeat(state, n_years),
        "cluster": np.repeat(cluster_key(sectors["sector_5d"].to_numpy(), state), n_years),
        "cohort": cohort,
        "eligible_ever": (cohort != NEVER).astype(int),
        "eligible_now": flags["eligible_now"].to_numpy(),
        "first_treated_year": flags["first_treated_year"].to_numpy(),
        "treated_now": flags["treated_now"].to_numpy(),
        "size_class": np.repeat(sizes, n_years),
        "firm_fe": np.repeat(log_size, n_years),
        "log_employment": log_employment.ravel(),
        "log_avg_wage": log_avg_wage.ravel(),
        "hires": hires.ravel(),
        "payroll_tax_rate": rate.ravel(),
        "log_labor_cost": (log_avg_wage + np.log1p(rate)).ravel(),
    })

    att_by_size = {s: config.att_for(s) for s in SIZE_CLASSES}
    ever = flags.groupby("firm_id", sort=True)["treated_now"].max().to_numpy().astype(bool)
    pooled = float(att[ever].mean()) if ever.any() else config.att_employment
    truth = {
        "att_employment": pooled,
        "att_employment_by_size": att_by_size,
        "att_wage": config.att_wage,
        "take_up_prob": config.p_take,
        "ncm_prob": config.p_ncm,
        "first_stage_dlog_cost": first_stage_dlog_cost(config.baseline_tax_rate, config.tax_cut),
        "serial_corr_rho": config.serial_corr_rho if config.error == AR1 else 0.0,
        "baseline_tax_rate": config.baseline_tax_rate,
        "confounding": tree.config.confounding,
        "trend_shift": tree.config.trend_shift if tree.config.confounding else 0.0,
    }
    logger.info(f"Firm panel: {n} firms x {n_years} years, {int(ever.sum())} ever treated")
    return frame[FIRM_COLUMNS], truth
