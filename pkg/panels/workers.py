# panels/workers.py
"""
Synthetic worker-year panel linked to a firm panel.

Workers are tied to the employer they had before the reform; treatment and
eligibility follow that base employer even after a move. Net earnings carry
a worker effect, the current employer's wage level and an effect profile by
years since the base employer was first treated.
"""

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from config.exceptions import ConfigurationError
from panels.firms import BASE_EARNINGS
from panels.sectors import NEVER, REFORM_YEAR

logger = logging.getLogger(__name__)

LEADER = "leader"
OPERATIONAL = "operational"
MIN_TENURE = 3

WORKER_COLUMNS = [
    "worker_id",
    "year",
    "firm_id",
    "firm_id_base",
    "sector_1d_base",
    "cluster_base",
    "cohort_base",
    "eligible_now",
    "base_first_treated_year",
    "treated_now",
    "occupation_class",
    "tenure_pre",
    "worker_fe",
    "net_earnings",
    "gross_earnings",
    "log_net_earnings",
]


def tenure_years(first_year, last_year):
    """Years with the same employer, both ends included."""
    return np.asarray(last_year) - np.asarray(first_year) + 1


def meets_tenure_rule(first_year, last_year, min_tenure=MIN_TENURE):
    return tenure_years(first_year, last_year) >= min_tenure


@dataclass(frozen=True)
class WorkerPanelConfig:
    workers_per_firm: float = 3.0
    base_first_year: int = 2008
    base_last_year: int = REFORM_YEAR - 1
    min_tenure: int = MIN_TENURE
    mover_rate: float = 0.05
    leader_share: float = 0.1
    leader_premium: float = 0.5
    worker_fe_sd: float = 0.4
    error_sd: float = 0.1
    # effect on log net earnings k = 0, 1, ... years after the base employer's
    # first treated year; the last entry holds for later years
    att_net_earnings: list = field(default_factory=lambda: [0.0, 0.0, 0.02, 0.04])

    def __post_init__(self):
        if self.workers_per_firm <= 0:
            raise ConfigurationError("workers_per_firm must be > 0", key="workers_per_firm")
        if not (self.base_first_year <= self.base_last_year < REFORM_YEAR):
            raise ConfigurationError(f"base period must end before {REFORM_YEAR}", key="base_last_year")
        if self.min_tenure < 1:
            raise ConfigurationError("min_tenure must be >= 1", key="min_tenure")
        for name in ("mover_rate", "leader_share"):
            if not (0.0 <= getattr(self, name) <= 1.0):
                raise ConfigurationError(f"{name} must lie in [0, 1]", key=name)
        if self.worker_fe_sd < 0 or self.error_sd < 0:
            raise ConfigurationError("standard deviations must be >= 0", key="error_sd")
        if not self.att_net_earnings:
            raise ConfigurationError("att_net_earnings needs at least one horizon", key="att_net_earnings")
        object.__setattr__(self, "att_net_earnings", [float(v) for v in self.att_net_earnings])

    def att_at(self, k):
        """Effect at event times k (array); zero before treatment."""
        profile = np.asarray(self.att_net_earnings)
        k = np.asarray(k)
        return np.where(k >= 0, profile[np.clip(k, 0, profile.size - 1)], 0.0)

    def to_dict(self):
        return asdict(self)


def _firm_grid(firms, column):
    """(n_firms, n_years) array of a firm-year column; the panel must be balanced."""
    table = firms.pivot(index="firm_id", columns="year", values=column)
    if table.isna().any().any():
        raise ConfigurationError("the firm panel must be balanced", key="firms")
    return table.to_numpy()


def generate_worker_panel(firms, config=None, seed=0):
    """Worker-year table in WORKER_COLUMNS order and the effect profile it carries."""
    config = config or WorkerPanelConfig()
    rng = np.random.default_rng(seed)

    firm_ids = np.sort(firms["firm_id"].unique())
    years = np.sort(firms["year"].unique())
    if years[0] > config.base_first_year or years[-1] < REFORM_YEAR:
        raise ConfigurationError("the firm panel does not cover the base period and the reform", key="firms")
    rate = _firm_grid(firms, "payroll_tax_rate")
    wage = _firm_grid(firms, "log_avg_wage")
    statics = firms.drop_duplicates("firm_id").set_index("firm_id").loc[firm_ids]

    per_firm = rng.poisson(config.workers_per_firm, size=firm_ids.size)
    base_index = np.repeat(np.arange(firm_ids.size), per_firm)
    start = rng.integers(config.base_first_year, config.base_last_year + 1, size=base_index.size)
    tenure = tenure_years(start, config.base_last_year)
    keep = tenure >= config.min_tenure
    base_index, start, tenure = base_index[keep], start[keep], tenure[keep]
    n = base_index.size
    if n == 0:
        raise ConfigurationError("no worker passes the tenure rule", key="min_tenure")

    worker_fe = rng.normal(0.0, config.worker_fe_sd, size=n)
    leader = rng.random(n) < config.leader_share

    # employer index per worker and year; moves happen only after the base period
    current = np.tile(base_index[:, None], (1, years.size))
    for t in range(years.size):
        if years[t] <= config.base_last_year:
            continue
        moves = rng.random(n) < config.mover_rate
        current[:, t] = np.where(moves, rng.integers(0, firm_ids.size, size=n), current[:, t - 1])
    noise = rng.normal(0.0, config.error_sd, size=(n, years.size))

    observed = years[None, :] >= start[:, None]
    rows, cols = np.nonzero(observed)
    year = years[cols]
    firm_now = current[rows, cols]
    base = base_index[rows]
    cohort_base = statics["cohort"].to_numpy()[base]
    first_treated = statics["first_treated_year"].to_numpy()[base]
    treated_now = ((first_treated != NEVER) & (year >= first_treated)).astype(int)
    k = np.where(first_treated != NEVER, year - first_treated, -1)

    log_net = (
        math.log(BASE_EARNINGS)
        + worker_fe[rows]
        + (wage[firm_now, cols] - math.log(BASE_EARNINGS))
        + config.leader_premium * leader[rows]
        + config.att_at(k) * (first_treated != NEVER)
        + noise[rows, cols]
    )
    net = np.exp(log_net)
    gross = net * (1.0 + rate[firm_now, cols])

    frame = pd.DataFrame({
        "worker_id": rows + 1,
        "year": year,
        "firm_id": firm_ids[firm_now],
        "firm_id_base": firm_ids[base],
        "sector_1d_base": statics["sector_1d"].to_numpy()[base],
        "cluster_base": statics["cluster"].to_numpy()[base],
        "cohort_base": cohort_base,
        "eligible_now": ((cohort_base != NEVER) & (year >= cohort_base)).astype(int),
        "base_first_treated_year": first_treated,
        "treated_now": treated_now,
        "occupation_class": np.where(leader[rows], LEADER, OPERATIONAL),
        "tenure_pre": tenure[rows],
        "worker_fe": worker_fe[rows],
        "net_earnings": net,
        "gross_earnings": gross,
        "log_net_earnings": log_net,
    })
    truth = {
        "att_net_earnings": {str(i): v for i, v in enumerate(config.att_net_earnings)},
        "mover_rate": config.mover_rate,
        "min_tenure": config.min_tenure,
    }
    logger.info(f"Worker panel: {n} workers, {len(frame)} worker-years")
    return frame[WORKER_COLUMNS], truth
