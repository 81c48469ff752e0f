"""
Structural primitives of the monopsony + CES + constant-elasticity-demand economy.
"""

import copy
import math
from dataclasses import asdict, dataclass, fields, replace

from config.exceptions import ConfigurationError

MARKUP = "markup"
PRICE_TAKING = "price_taking"
MARKET_MODE_CHOICES = (
    (MARKUP, "Markup (Cournot reduced form)"),
    (PRICE_TAKING, "Price taking"),
)

SHARE_SUM_TOL = 1e-9


@dataclass(frozen=True)
class TaxPolicy:
    """Labor-cost wedge and revenue tax faced by one block of firms."""

    theta: float = 1.0
    tau_rev: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.theta) or self.theta < 1.0:
            raise ConfigurationError(f"theta must be >= 1, got {self.theta}", key="theta")
        if not (0.0 <= self.tau_rev < 1.0):
            raise ConfigurationError(f"tau_rev must lie in [0, 1), got {self.tau_rev}", key="tau_rev")


@dataclass(frozen=True)
class EconomyParams:
    s_L: float = 0.5
    s_K: float = 0.5
    rho: float = 0.0
    eps: float = 2.78
    eta: float = 2.0
    tau_rev: float = 0.0
    theta: float = 1.3178
    m: float = 1.0
    w0: float = 1.0
    r: float = 1.0
    A: float = 1.0
    market_mode: str = MARKUP
    # price_taking only: fixed output price instead of clearing on the demand curve
    price: float | None = None
    # labor wedge of the control block; None means same as theta
    theta_control: float | None = None

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "market_mode" or value is None:
                continue
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ConfigurationError(f"{f.name} must be a finite number, got {value!r}", key=f.name)

        if self.s_L <= 0 or self.s_K <= 0:
            raise ConfigurationError("s_L and s_K must be positive", key="s_L" if self.s_L <= 0 else "s_K")
        if abs(self.s_L + self.s_K - 1.0) > SHARE_SUM_TOL:
            raise ConfigurationError(f"s_L + s_K must equal 1, got {self.s_L + self.s_K}", key="s_K")
        if self.rho >= 1:
            raise ConfigurationError(f"rho must be < 1, got {self.rho}", key="rho")
        if self.eps <= 0:
            raise ConfigurationError(f"eps must be > 0, got {self.eps}", key="eps")
        if self.eta < 0:
            raise ConfigurationError(f"eta must be >= 0, got {self.eta}", key="eta")
        if not (0.0 <= self.tau_rev < 1.0):
            raise ConfigurationError(f"tau_rev must lie in [0, 1), got {self.tau_rev}", key="tau_rev")
        if self.theta < 1:
            raise ConfigurationError(f"theta must be >= 1, got {self.theta}", key="theta")
        if self.theta_control is not None and self.theta_control < 1:
            raise ConfigurationError(f"theta_control must be >= 1, got {self.theta_control}", key="theta_control")
        if not (0.0 <= self.m <= 1.0):
            raise ConfigurationError(f"m must lie in [0, 1], got {self.m}", key="m")
        for name in ("w0", "r", "A"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be > 0", key=name)

        if self.market_mode not in (MARKUP, PRICE_TAKING):
            raise ConfigurationError(
                f"market_mode must be one of {MARKUP!r}, {PRICE_TAKING!r}, got {self.market_mode!r}",
                key="market_mode",
            )
        if self.market_mode == MARKUP and self.eta <= 1:
            raise ConfigurationError(
                f"markup mode needs eta > 1 for an interior optimum, got {self.eta}; use price_taking",
                key="eta",
            )
        if self.price is not None:
            if self.market_mode != PRICE_TAKING:
                raise ConfigurationError("price is only meaningful in price_taking mode", key="price")
            if self.price <= 0:
                raise ConfigurationError(f"price must be > 0, got {self.price}", key="price")

    @property
    def is_cobb_douglas(self):
        from economy.technology import COBB_DOUGLAS_TOL

        return abs(self.rho) < COBB_DOUGLAS_TOL

    @property
    def markup_factor(self):
        """mu in mu * p = marginal cost / (1 - tau); 1 under price taking."""
        if self.market_mode == MARKUP:
            return 1.0 - 1.0 / self.eta
        return 1.0

    @property
    def sigma_KL(self):
        return 1.0 / (1.0 - self.rho)

    def treated_policy(self):
        return TaxPolicy(theta=self.theta, tau_rev=self.tau_rev)

    def control_policy(self):
        theta = self.theta if self.theta_control is None else self.theta_control
        return TaxPolicy(theta=theta, tau_rev=0.0)

    def with_updates(self, **changes):
        """Validated copy."""
        return replace(self, **changes)

    def perturbed(self, **changes):
        """
        Copy with changes applied and range checks skipped.

        Finite differences step slightly outside the admissible set (theta = 1
        shocked downwards is a small subsidy); the model is well defined there.
        """
        clone = copy.copy(self)
        for name, value in changes.items():
            if not hasattr(clone, name):
                raise ConfigurationError(f"unknown parameter {name!r}", key=name)
            object.__setattr__(clone, name, value)
        return clone

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigurationError(f"unknown economy parameter {key!r}", key=key)
        return cls(**data)
