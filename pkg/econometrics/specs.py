# econometrics/specs.py
"""
Regression specifications and the report every estimator returns.

Fixed-effect keys are column names; "a:b" is the interaction of columns a
and b (for example "sector_1d:year").
"""

import math
from dataclasses import asdict, dataclass, field

from config.exceptions import ConfigurationError

EVENT_WINDOW = (-4, 3)
REFERENCE_PERIOD = -1


def event_column(prefix, k):
    """Name of the event-time indicator prefix at relative year k, e.g. D_k-2, D_k3."""
    return f"{prefix}_k{k}"


def event_times(window=EVENT_WINDOW):
    lo, hi = window
    return [k for k in range(lo, hi + 1) if k != REFERENCE_PERIOD]


@dataclass(frozen=True)
class RegressionSpec:
    outcome: str
    endogenous: tuple = ()
    instruments: tuple = ()
    controls: tuple = ()
    fixed_effects: tuple = ()
    cluster: str | None = None
    # column -> required value (or list of values); rows outside are dropped
    subsample: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("endogenous", "instruments", "controls", "fixed_effects"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not self.outcome:
            raise ConfigurationError("outcome is required", key="outcome")
        if len(self.instruments) < len(self.endogenous):
            raise ConfigurationError(
                f"order condition fails: {len(self.instruments)} instruments for {len(self.endogenous)} endogenous",
                key="instruments",
            )
        if self.instruments and not self.endogenous:
            raise ConfigurationError("instruments given without endogenous regressors", key="instruments")
        names = (self.outcome, *self.endogenous, *self.controls)
        # an endogenous column may instrument itself
        excluded = [z for z in self.instruments if z not in self.endogenous]
        repeated = len(set(names)) != len(names) or len(set(self.instruments)) != len(self.instruments)
        if repeated or set(excluded) & set(names):
            raise ConfigurationError("a column appears twice in the specification", key="controls")
        for prefix in ("D", "L", "Z"):
            if event_column(prefix, REFERENCE_PERIOD) in names:
                raise ConfigurationError("the reference period k = -1 cannot be a regressor", key="endogenous")

    @property
    def regressors(self):
        """Second-stage columns: endogenous first, then exogenous controls."""
        return (*self.endogenous, *self.controls)

    @property
    def is_iv(self):
        return bool(self.instruments)

    def columns(self):
        fe_columns = [c for key in self.fixed_effects for c in key.split(":")]
        extra = [self.cluster] if self.cluster else []
        ordered = [self.outcome, *self.endogenous, *self.instruments, *self.controls, *fe_columns, *extra, *self.subsample]
        return list(dict.fromkeys(ordered))

    def to_dict(self):
        data = asdict(self)
        for name in ("endogenous", "instruments", "controls", "fixed_effects"):
            data[name] = list(data[name])
        return data


@dataclass
class Coefficient:
    coef: float
    se: float

    @property
    def t(self):
        if self.se > 0:
            return self.coef / self.se
        return math.copysign(math.inf, self.coef) if self.coef != 0 else 0.0

    def ci(self, z=1.96):
        return self.coef - z * self.se, self.coef + z * self.se


@dataclass
class EstimateReport:
    method: str
    spec: RegressionSpec
    coefficients: dict
    n_obs: int
    n_clusters: int
    fe_iterations: int = 0
    r2: float | None = None
    first_stage: dict = field(default_factory=dict)
    first_stage_F: dict = field(default_factory=dict)
    event_profile: dict = field(default_factory=dict)
    dropped: list = field(default_factory=list)
    singletons_dropped: int = 0
    dof_k: int = 0
    flags: list = field(default_factory=list)

    def __getitem__(self, name):
        return self.coefficients[name]

    def coef(self, name):
        return self.coefficients[name].coef

    def se(self, name):
        return self.coefficients[name].se

    def as_dict(self):
        def pack(coefs):
            return {k: {"coef": v.coef, "se": v.se, "t": v.t} for k, v in coefs.items()}

        return {
            "method": self.method,
            "spec": self.spec.to_dict(),
            "coefficients": pack(self.coefficients),
            "n_obs": self.n_obs,
            "n_clusters": self.n_clusters,
            "fe_iterations": self.fe_iterations,
            "r2": self.r2,
            "first_stage": {endog: pack(coefs) for endog, coefs in self.first_stage.items()},
            "first_stage_F": dict(self.first_stage_F),
            "event_profile": {str(k): {"beta": c.coef, "se": c.se} for k, c in self.event_profile.items()},
            "dropped": list(self.dropped),
            "singletons_dropped": self.singletons_dropped,
            "dof_k": self.dof_k,
            "flags": list(self.flags),
        }
