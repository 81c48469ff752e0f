# econometrics/postprocess.py
"""Turning regression coefficients into elasticities and labeled ratios."""

import logging
import math

from config.exceptions import DomainError
from econometrics.event_study import pooled_did
from panels.firms import BASELINE_TAX_RATE, TAX_CUT, first_stage_dlog_cost

logger = logging.getLogger(__name__)

# legal labor-cost wedges of treated and control firms
TREATED_COST_RATE = 0.12
CONTROL_COST_RATE = 0.31


def elasticity_postprocess(beta_outcome, dlog_cost):
    """beta_outcome / dlog_cost, e.g. an employment effect per unit change in log(1 + tax)."""
    if dlog_cost == 0 or not math.isfinite(dlog_cost):
        raise DomainError(f"labor-cost change must be finite and nonzero, got {dlog_cost}")
    return beta_outcome / dlog_cost


def statutory_dlog(treated_rate=TREATED_COST_RATE, control_rate=CONTROL_COST_RATE):
    return math.log1p(treated_rate) - math.log1p(control_rate)


def labor_cost_first_stage(panel, subsample=None):
    """
    Statutory and estimated changes in log labor cost for treated firms.

    The two are reported side by side; the gap between them is not
    reconciled.
    """
    did = pooled_did(panel, outcome="log_labor_cost", level="firm", subsample=subsample)
    estimated = did.iv["treated_now"]
    rates = panel["payroll_tax_rate"]
    panel_statutory = math.log1p(float(rates.min())) - math.log1p(float(rates.max()))
    result = {
        "statutory_dlog": statutory_dlog(),
        "panel_statutory_dlog": panel_statutory,
        "default_statutory_dlog": first_stage_dlog_cost(BASELINE_TAX_RATE, TAX_CUT),
        "iv_dlog": estimated.coef,
        "iv_se": estimated.se,
        "discrepancy": estimated.coef - statutory_dlog(),
    }
    logger.info(
        f"Log labor cost: statutory {result['statutory_dlog']:.4f}, estimated {estimated.coef:.4f} "
        f"(se {estimated.se:.4f})"
    )
    return result


def labor_market_ratios(beta_employment, beta_net, beta_gross):
    """
    Employment effect over the net and the gross earnings effect.

    Convenience ratios for inspection only; None where a denominator is 0.
    """
    def ratio(num, den):
        return num / den if den else None

    return {
        "employment_over_net_earnings": ratio(beta_employment, beta_net),
        "employment_over_gross_earnings": ratio(beta_employment, beta_gross),
    }
