# econometrics/balance.py
"""
Balance checks: does eligibility load on firm characteristics?

The baseline regresses eligible_ever on pre-reform covariates (plus an
intercept) across firm-years; the two-way variant regresses eligible_now on
the covariates with firm and year fixed effects over the whole panel.
"""

import logging
from dataclasses import dataclass

from econometrics.matching import MATCH_VARIABLES
from econometrics.regression import ols
from econometrics.specs import RegressionSpec
from panels.sectors import REFORM_YEAR

logger = logging.getLogger(__name__)


@dataclass
class BalanceReport:
    baseline: object
    twfe: object

    def as_dict(self):
        return {"baseline": self.baseline.as_dict(), "twfe": self.twfe.as_dict()}

    def imbalanced(self, z=1.96):
        """Covariates with |t| >= z in either regression."""
        found = set()
        for report in (self.baseline, self.twfe):
            found |= {name for name, c in report.coefficients.items() if name != "const" and abs(c.t) >= z}
        return sorted(found)


def balance_check(panel, covariates=MATCH_VARIABLES, cluster="cluster", reform_year=REFORM_YEAR):
    covariates = tuple(covariates)
    pre = panel[panel["year"] < reform_year]
    baseline = ols(RegressionSpec(outcome="eligible_ever", controls=covariates, cluster=cluster), pre)
    baseline.method = "balance_baseline"
    twfe = ols(
        RegressionSpec(outcome="eligible_now", controls=covariates, fixed_effects=("firm_id", "year"), cluster=cluster),
        panel,
    )
    twfe.method = "balance_twfe"
    result = BalanceReport(baseline=baseline, twfe=twfe)
    flagged = result.imbalanced()
    if flagged:
        logger.info(f"Balance check: significant covariates {flagged}")
    return result
