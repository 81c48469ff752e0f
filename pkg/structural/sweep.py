# structural/sweep.py
"""
How the substitution elasticity implied by an employment effect depends on
the assumed labor-supply and output-demand elasticities.

For every (eps, eta) cell the employment equation beta_L = eps_L_theta * phi1
is solved for rho with the revenue-tax term switched off, and the answer is
reported as sigma_KL = 1 / (1 - rho).
"""

import logging
import math

import numpy as np
import pandas as pd

from config.exceptions import DomainError, SolverError
from economy.elasticities import FD_STEP, map_ordered, numeric_elasticities
from economy.equilibrium import treated_equilibrium
from economy.params import MARKUP, PRICE_TAKING, EconomyParams
from economy.rootfinding import solve_bracketed

logger = logging.getLogger(__name__)

RHO_BRACKET = (-20.0, 0.99)
COMPETITIVE_EPS = 1e6
DEFAULT_EPS_GRID = (1.0, 2.78, 5.0, 10.0, 25.0, 100.0)
DEFAULT_ETA_GRID = tuple(float(v) for v in np.linspace(0.11, 3.5, 12))
DEFAULT_BETA_L = 0.0944
DEFAULT_PHI1 = -0.133

COLUMNS = [
    "eps",
    "eta",
    "market_mode",
    "rho_hat",
    "sigma_hat",
    "feasible",
    "sigma_competitive",
    "relative_bias",
]


def market_mode_for(eta):
    return MARKUP if eta > 1 else PRICE_TAKING


def _cell_params(base, eps, eta):
    return base.with_updates(eps=eps, eta=eta, market_mode=market_mode_for(eta), price=None)


def _root_in_rho(residual, label):
    """Root of residual(rho) on RHO_BRACKET, or None when it has no sign change there."""
    lo, hi = RHO_BRACKET
    try:
        f_lo, f_hi = residual(lo), residual(hi)
    except (SolverError, DomainError) as exc:
        logger.warning(f"{label}: model unsolvable at the bracket ends ({exc})")
        return None
    if not (math.isfinite(f_lo) and math.isfinite(f_hi)) or f_lo * f_hi > 0:
        return None
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    try:
        return solve_bracketed(residual, lo, hi, label=label)
    except SolverError as exc:
        logger.warning(f"{label}: {exc}")
        return None


def implied_rho(beta_L, phi1, params, step=FD_STEP):
    """rho solving beta_L = eps_L_theta(rho) * phi1 at params, or None."""

    def residual(rho):
        return numeric_elasticities(params.with_updates(rho=rho), "theta", step=step)["L"] * phi1 - beta_L

    return _root_in_rho(residual, f"sweep cell eps={params.eps:g} eta={params.eta:g}")


def competitive_sigma(beta_L, phi1, eta, base=None):
    """
    sigma from beta_L / phi1 = -s_K * sigma - s_L * eta, the flat-labor-supply
    response, with the cost shares (s_L, s_K) measured in the competitive
    equilibrium at the same rho. None when no rho in range satisfies it.
    """
    if phi1 == 0:
        raise DomainError("phi1 must be non-zero")
    base = base or EconomyParams()
    target = beta_L / phi1
    params = _cell_params(base, COMPETITIVE_EPS, eta)

    def residual(rho):
        eq = treated_equilibrium(params.with_updates(rho=rho))
        return -eq.capital_cost_share / (1.0 - rho) - eq.labor_cost_share * eta - target

    rho = _root_in_rho(residual, f"competitive inversion eta={eta:g}")
    return None if rho is None else 1.0 / (1.0 - rho)


def _cell_task(args):
    beta_L, phi1, base, eps, eta, step = args
    params = _cell_params(base, eps, eta)
    rho = implied_rho(beta_L, phi1, params, step=step)
    return {
        "eps": eps,
        "eta": eta,
        "market_mode": params.market_mode,
        "rho_hat": rho,
        "sigma_hat": None if rho is None else 1.0 / (1.0 - rho),
        "feasible": rho is not None,
    }


def _competitive_task(args):
    beta_L, phi1, base, eta = args
    return competitive_sigma(beta_L, phi1, eta, base)


def sigma_sensitivity_sweep(
    beta_L=DEFAULT_BETA_L,
    eps_grid=DEFAULT_EPS_GRID,
    eta_grid=DEFAULT_ETA_GRID,
    phi1=DEFAULT_PHI1,
    *,
    base=None,
    step=FD_STEP,
    workers=1,
):
    """
    Table of implied sigma_KL over the (eps, eta) grid, eps-major in grid order.

    The competitive inversion is appended as rows with eps = inf, and each
    cell carries its relative bias against it. Cells with no admissible rho
    are kept and flagged infeasible.
    """
    if phi1 == 0:
        raise DomainError("phi1 must be non-zero")
    if not eps_grid or not eta_grid:
        raise DomainError("eps_grid and eta_grid must be non-empty")
    for eps in eps_grid:
        if not eps > 0:
            raise DomainError(f"eps grid values must be > 0, got {eps}")
    for eta in eta_grid:
        if not eta > 0:
            raise DomainError(f"eta grid values must be > 0, got {eta}")
    base = base or EconomyParams()

    tasks = [(beta_L, phi1, base, float(eps), float(eta), step) for eps in eps_grid for eta in eta_grid]
    rows = map_ordered(_cell_task, tasks, workers)
    competitive = map_ordered(_competitive_task, [(beta_L, phi1, base, float(eta)) for eta in eta_grid], workers)
    by_eta = dict(zip((float(eta) for eta in eta_grid), competitive))

    for row in rows:
        reference = by_eta[row["eta"]]
        row["sigma_competitive"] = reference
        if row["feasible"] and reference:
            row["relative_bias"] = (row["sigma_hat"] - reference) / reference
        else:
            row["relative_bias"] = None
    for eta, sigma in by_eta.items():
        rows.append({
            "eps": math.inf,
            "eta": eta,
            "market_mode": market_mode_for(eta),
            "rho_hat": None if sigma is None else 1.0 - 1.0 / sigma,
            "sigma_hat": sigma,
            "feasible": sigma is not None,
            "sigma_competitive": sigma,
            "relative_bias": 0.0 if sigma is not None else None,
        })

    infeasible = [row for row in rows if not row["feasible"]]
    for row in infeasible:
        logger.warning(f"No admissible rho for eps={row['eps']:g} eta={row['eta']:g}; cell left empty")
    logger.info(f"Sigma sweep: {len(rows) - len(infeasible)}/{len(rows)} feasible cells")
    return pd.DataFrame(rows, columns=COLUMNS)
