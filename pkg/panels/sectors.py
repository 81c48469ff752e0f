# panels/sectors.py
"""
Sector hierarchy and eligibility cohorts.

Codes nest by construction: sector_5d = sector_1d * 1000 + i and
sector_7d = sector_5d * 100 + j, so every 7-digit code carries its ancestors.
Eligibility is decided per 7-digit sector.
"""

from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd

from config.exceptions import ConfigurationError

COHORT_YEARS = (2012, 2013, 2014)
NEVER = 0
REFORM_YEAR = COHORT_YEARS[0]
MAX_5D_PER_1D = 999
MAX_7D_PER_5D = 99


@dataclass(frozen=True)
class SectorTreeConfig:
    sectors_1d: int = 3
    sectors_5d: int = 10
    sectors_7d: int = 30
    states: int = 27
    eligible_share: float = 0.3
    cohort_years: tuple = COHORT_YEARS
    # eligible sectors get a pre-reform trend of trend_shift per year when set
    confounding: bool = False
    trend_shift: float = 0.0

    def __post_init__(self):
        for name in ("sectors_1d", "sectors_5d", "sectors_7d", "states"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {getattr(self, name)}", key=name)
        if self.sectors_5d < self.sectors_1d:
            raise ConfigurationError("sectors_5d must be >= sectors_1d", key="sectors_5d")
        if self.sectors_7d < self.sectors_5d:
            raise ConfigurationError("sectors_7d must be >= sectors_5d", key="sectors_7d")
        if -(-self.sectors_5d // self.sectors_1d) > MAX_5D_PER_1D:
            raise ConfigurationError(f"at most {MAX_5D_PER_1D} 5-digit sectors per 1-digit sector", key="sectors_5d")
        if -(-self.sectors_7d // self.sectors_5d) > MAX_7D_PER_5D:
            raise ConfigurationError(f"at most {MAX_7D_PER_5D} 7-digit sectors per 5-digit sector", key="sectors_7d")
        if self.states > 99:
            raise ConfigurationError("states must be <= 99", key="states")
        if not (0.0 <= self.eligible_share <= 1.0):
            raise ConfigurationError(f"eligible_share must lie in [0, 1], got {self.eligible_share}", key="eligible_share")
        years = tuple(int(y) for y in self.cohort_years)
        if not years or list(years) != sorted(set(years)) or years[0] <= 2008:
            raise ConfigurationError("cohort_years must be increasing years after 2008", key="cohort_years")
        object.__setattr__(self, "cohort_years", years)

    def to_dict(self):
        data = asdict(self)
        data["cohort_years"] = list(self.cohort_years)
        return data


@dataclass(frozen=True)
class SectorTree:
    """One row per 7-digit sector: sector_7d, sector_5d, sector_1d, cohort, trend."""

    frame: pd.DataFrame
    states: tuple
    config: SectorTreeConfig

    @property
    def codes(self):
        return self.frame["sector_7d"].to_numpy()

    def cohorts(self):
        return dict(zip(self.frame["sector_7d"], self.frame["cohort"]))

    @property
    def eligible(self):
        return self.frame[self.frame["cohort"] != NEVER]

    def lookup(self, sector_7d):
        """Rows of the tree for an array of 7-digit codes, in that order."""
        indexed = self.frame.set_index("sector_7d")
        return indexed.loc[np.asarray(sector_7d)].reset_index()


def cluster_key(sector_5d, state):
    """The 5-digit-sector-by-state cluster as one integer."""
    return np.asarray(sector_5d) * 100 + np.asarray(state)


def generate_sector_tree(config=None, seed=0):
    """
    Hierarchy of sectors with an eligibility cohort per 7-digit code.

    Cohorts are drawn independently of anything sector outcomes depend on.
    With config.confounding, eligible sectors carry a pre-reform trend.
    """
    config = config or SectorTreeConfig()
    rng = np.random.default_rng(seed)

    parent_1d = np.arange(config.sectors_5d) % config.sectors_1d + 1
    rank_5d = np.arange(config.sectors_5d) // config.sectors_1d + 1
    codes_5d = parent_1d * 1000 + rank_5d

    parent_5d = codes_5d[np.arange(config.sectors_7d) % config.sectors_5d]
    rank_7d = np.arange(config.sectors_7d) // config.sectors_5d + 1
    codes_7d = parent_5d * 100 + rank_7d

    eligible = rng.random(config.sectors_7d) < config.eligible_share
    cohort_draw = rng.integers(0, len(config.cohort_years), size=config.sectors_7d)
    cohort = np.where(eligible, np.asarray(config.cohort_years)[cohort_draw], NEVER)
    trend = np.where(eligible & config.confounding, config.trend_shift, 0.0)

    frame = pd.DataFrame({
        "sector_7d": codes_7d,
        "sector_5d": parent_5d,
        "sector_1d": parent_5d // 1000,
        "cohort": cohort,
        "trend": trend,
    })
    return SectorTree(frame=frame, states=tuple(range(1, config.states + 1)), config=config)
