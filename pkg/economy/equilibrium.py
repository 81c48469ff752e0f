"""
Firm and industry equilibria.

Cost minimization is solved in x = log(L/K): with K eliminated through
the output constraint, the labor first-order condition

    log(theta w0 (1 + 1/eps) / r) + log(L) / eps = log(s_L / s_K) + (rho - 1) x

is strictly increasing in x with slope at least 1 - rho, so one
bracketed root find pins down the input mix for any Q.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from config.exceptions import ConfigurationError, SolverError
from economy.params import MARKUP, TaxPolicy
from economy.rootfinding import solve_monotone
from economy.technology import labor_output_elasticity, log_output_per_capital

logger = logging.getLogger(__name__)

INDUSTRY_TOL = 1e-12
INDUSTRY_MAX_ITER = 500
INITIAL_DAMPING = 0.5
MIN_DAMPING = 0.05


class InputMix(NamedTuple):
    """Cost-minimizing inputs for a given output and the marginal cost there."""

    L: float
    K: float
    marginal_cost: float


@dataclass(frozen=True)
class FirmEquilibrium:
    L: float
    K: float
    Q: float
    w: float
    p: float
    marginal_cost: float
    revenue: float
    profit: float
    cost: float
    labor_cost_share: float
    capital_cost_share: float
    markdown: float
    wage_bill: float
    theta: float
    tau_rev: float

    def as_dict(self):
        data = asdict(self)
        data["lambda"] = data.pop("marginal_cost")
        return data


@dataclass(frozen=True)
class IndustryEquilibrium:
    treated: FirmEquilibrium
    control: FirmEquilibrium
    aggregate_Q: float
    p_index: float
    m: float
    iterations: int
    foc_residual: float
    trace: tuple = field(default=(), repr=False, compare=False)

    def as_dict(self):
        return {
            "treated": self.treated.as_dict(),
            "control": self.control.as_dict(),
            "aggregate_Q": self.aggregate_Q,
            "p_index": self.p_index,
            "m": self.m,
            "iterations": self.iterations,
            "foc_residual": self.foc_residual,
        }


def _log_ratio(log_Q, params, theta):
    """x = log(L/K) solving the labor first-order condition at output exp(log_Q)."""
    s_L, s_K, rho, eps = params.s_L, params.s_K, params.rho, params.eps
    constant = math.log(theta * params.w0 * (1.0 + 1.0 / eps) / params.r) - math.log(s_L / s_K)

    def foc(x):
        log_L = x + log_Q - log_output_per_capital(x, s_L, s_K, rho)
        return constant + log_L / eps + (1.0 - rho) * x

    # |foc'| >= 1 - rho, so the root lies within |foc(0)| / (1 - rho) of zero
    reach = abs(foc(0.0)) / (1.0 - rho) * 1.001 + 1e-9
    return solve_monotone(foc, -reach, reach, increasing=True, label="cost minimization")


def _log_marginal_cost(x, params):
    a = log_output_per_capital(x, params.s_L, params.s_K, params.rho)
    return math.log(params.r) - math.log(params.s_K) + (params.rho - 1.0) * a


def _log_inputs(log_Q, params, theta):
    x = _log_ratio(log_Q, params, theta)
    log_K = log_Q - log_output_per_capital(x, params.s_L, params.s_K, params.rho)
    return x, x + log_K, log_K


def cost_minimize(Q, params, theta=None):
    """Cost-minimizing (L, K) for output Q and the marginal cost there."""
    if not Q > 0 or not math.isfinite(Q):
        raise SolverError("cost minimization needs a positive finite output", Q=Q)
    theta = params.theta if theta is None else theta
    x, log_L, log_K = _log_inputs(math.log(Q), params, theta)
    return InputMix(math.exp(log_L), math.exp(log_K), math.exp(_log_marginal_cost(x, params)))


def total_cost(L, K, params, theta=None):
    theta = params.theta if theta is None else theta
    return theta * params.w0 * L ** (1.0 + 1.0 / params.eps) + params.r * K


def _firm_at(log_Q, price, params, policy):
    x, log_L, log_K = _log_inputs(log_Q, params, policy.theta)
    L, K, Q = math.exp(log_L), math.exp(log_K), math.exp(log_Q)
    w = params.w0 * math.exp(log_L / params.eps)
    wage_bill = w * L
    labor_cost = policy.theta * wage_bill
    capital_cost = params.r * K
    cost = labor_cost + capital_cost
    revenue = price * Q
    return FirmEquilibrium(
        L=L,
        K=K,
        Q=Q,
        w=w,
        p=price,
        marginal_cost=math.exp(_log_marginal_cost(x, params)),
        revenue=revenue,
        profit=(1.0 - policy.tau_rev) * revenue - cost,
        cost=cost,
        labor_cost_share=labor_cost / cost,
        capital_cost_share=capital_cost / cost,
        markdown=1.0 / params.eps,
        wage_bill=wage_bill,
        theta=policy.theta,
        tau_rev=policy.tau_rev,
    )


def _demand_log_price(log_Q, params):
    return math.log(params.A) - log_Q / params.eta


def profit_maximize(params):
    """
    Single-firm optimum.

    markup:        (1 - tau) p(Q) (1 - 1/eta) = lambda(Q), p(Q) = A Q^(-1/eta)
    price_taking:  (1 - tau) p = lambda(Q), with p fixed at params.price or
                   read off the demand curve (market clearing).
    """
    if params.market_mode == MARKUP and params.eta <= 1:
        raise ConfigurationError(f"markup mode needs eta > 1, got {params.eta}", key="eta")

    policy = params.treated_policy()
    log_net = math.log1p(-policy.tau_rev)

    if params.price is not None:
        log_price = math.log(params.price)

        def excess(log_Q):
            x = _log_ratio(log_Q, params, policy.theta)
            return _log_marginal_cost(x, params) - log_net - log_price

        log_Q = solve_monotone(excess, -1.0, 1.0, increasing=True, label="price-taking output")
        return _firm_at(log_Q, params.price, params, policy)

    if params.eta == 0:
        # perfectly inelastic demand: quantity pinned at one, price set by marginal cost
        x = _log_ratio(0.0, params, policy.theta)
        price = math.exp(_log_marginal_cost(x, params) - log_net)
        return _firm_at(0.0, price, params, policy)

    log_mu = math.log(params.markup_factor)

    def excess(log_Q):
        x = _log_ratio(log_Q, params, policy.theta)
        return _log_marginal_cost(x, params) - log_net - log_mu - _demand_log_price(log_Q, params)

    log_Q = solve_monotone(excess, -1.0, 1.0, increasing=True, label="profit maximization")
    return _firm_at(log_Q, math.exp(_demand_log_price(log_Q, params)), params, policy)


def _log_weighted_cost(log_Q, params, treated, control):
    """log of m lambda_T / (1 - tau_T) + (1 - m) lambda_C / (1 - tau_C) at common per-firm output."""
    terms = []
    for weight, policy in ((params.m, treated), (1.0 - params.m, control)):
        if weight <= 0:
            continue
        x = _log_ratio(log_Q, params, policy.theta)
        terms.append(math.log(weight) + _log_marginal_cost(x, params) - math.log1p(-policy.tau_rev))
    return float(np.logaddexp.reduce(terms))


def industry_equilibrium(params, treated_policy=None, control_policy=None, tol=INDUSTRY_TOL, max_iter=INDUSTRY_MAX_ITER):
    """
    Common-price equilibrium of a treated share m and a control share 1 - m.

    Both blocks produce the per-firm output q read off the common demand
    curve p_index = A q^(-1/eta); the share-weighted first-order condition
    mu p_index = m lambda_T(q)/(1 - tau_T) + (1 - m) lambda_C(q)/(1 - tau_C)
    is solved by damped iteration on log p_index, with the damping set from
    a secant estimate of the slope of the update map.
    """
    treated = treated_policy or params.treated_policy()
    control = control_policy or params.control_policy()
    if not isinstance(treated, TaxPolicy) or not isinstance(control, TaxPolicy):
        raise ConfigurationError("policies must be TaxPolicy instances", key="policy")
    if params.market_mode == MARKUP and params.eta <= 1:
        raise ConfigurationError(f"markup mode needs eta > 1, got {params.eta}", key="eta")

    log_mu = math.log(params.markup_factor)

    if params.price is not None:
        log_price = math.log(params.price)
        log_Q = solve_monotone(
            lambda lq: _log_weighted_cost(lq, params, treated, control) - log_mu - log_price,
            -1.0,
            1.0,
            increasing=True,
            label="industry output at fixed price",
        )
        return _assemble(params, treated, control, log_Q, params.price, iterations=0, trace=())

    def per_firm_log_Q(log_p):
        if params.eta == 0:
            return 0.0
        return -params.eta * (log_p - math.log(params.A))

    def update(log_p):
        return _log_weighted_cost(per_firm_log_Q(log_p), params, treated, control) - log_mu

    log_p = math.log(params.A)
    target = update(log_p)
    damping = INITIAL_DAMPING
    previous = None
    trace = []

    for iteration in range(1, max_iter + 1):
        if previous is not None and log_p != previous[0]:
            slope = (target - previous[1]) / (log_p - previous[0])
            damping = 1.0 / (1.0 - slope) if slope < 1.0 - 1e-12 else MIN_DAMPING
            damping = min(1.0, max(MIN_DAMPING, damping))
        step = damping * (target - log_p)
        trace.append({"iteration": iteration, "p_index": math.exp(log_p), "target": math.exp(target), "damping": damping})

        previous = (log_p, target)
        log_p = log_p + step
        if not math.isfinite(log_p):
            raise SolverError("industry equilibrium diverged", iterations=iteration, trace=tuple(trace))
        if abs(step) < tol:
            log_Q = per_firm_log_Q(log_p)
            return _assemble(params, treated, control, log_Q, math.exp(log_p), iteration, tuple(trace))
        target = update(log_p)

    raise SolverError(
        "industry equilibrium did not converge",
        iterations=max_iter,
        last_step=trace[-1] if trace else None,
        trace=tuple(trace),
    )


def _assemble(params, treated, control, log_Q, price, iterations, trace):
    treated_firm = _firm_at(log_Q, price, params, treated)
    control_firm = _firm_at(log_Q, price, params, control)
    m = params.m
    weighted_cost = m * treated_firm.marginal_cost / (1.0 - treated.tau_rev) + (1.0 - m) * control_firm.marginal_cost / (
        1.0 - control.tau_rev
    )
    mu_p = params.markup_factor * price
    residual = (mu_p - weighted_cost) / mu_p
    if iterations:
        logger.debug("industry equilibrium converged in %d iterations, p_index=%.12g", iterations, price)
    return IndustryEquilibrium(
        treated=treated_firm,
        control=control_firm,
        aggregate_Q=m * treated_firm.Q + (1.0 - m) * control_firm.Q,
        p_index=price,
        m=m,
        iterations=iterations,
        foc_residual=residual,
        trace=trace,
    )


def treated_equilibrium(params):
    """The treated firm's allocation: single firm when m = 1, treated block otherwise."""
    if params.m >= 1.0:
        return profit_maximize(params)
    return industry_equilibrium(params).treated


def labor_foc_gap(eq, params):
    """Relative gap between theta w0 (1 + 1/eps) L^(1/eps) and lambda * df/dL."""
    x = math.log(eq.L) - math.log(eq.K)
    mpl = labor_output_elasticity(x, params.s_L, params.s_K, params.rho) * eq.Q / eq.L
    marginal_labor_cost = eq.theta * params.w0 * (1.0 + 1.0 / params.eps) * eq.L ** (1.0 / params.eps)
    return abs(marginal_labor_cost - eq.marginal_cost * mpl) / marginal_labor_cost
