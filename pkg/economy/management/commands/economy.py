import logging

import numpy as np
import pandas as pd
from django.conf import settings

from config.serializers import validate_config
from economy.elasticities import (
    NUMERIC,
    competitive_limit_elasticities,
    elasticity_grid,
    implied_terms,
    numeric_elasticities,
    random_valid_params,
    reform_grid,
)
from economy.equilibrium import industry_equilibrium, profit_maximize, treated_equilibrium
from economy.params import MARKUP, PRICE_TAKING
from economy.serializers import (
    ElasticityConfigSerializer,
    ElasticityReportSerializer,
    EconomyParamsSerializer,
    FirmEquilibriumSerializer,
    IndustryEquilibriumSerializer,
    LimitsConfigSerializer,
    ReformEffectSerializer,
    SolveConfigSerializer,
    params_from,
)
from runs.command import IncidenceCommand

logger = logging.getLogger(__name__)


class Command(IncidenceCommand):
    help = "Solve the firm economy and compute tax elasticities (solve | elasticities | limits)."
    command_name = "economy"
    actions = ("solve", "elasticities", "limits")

    def handle_solve(self, ctx, options):
        data = validate_config(SolveConfigSerializer, ctx.raw_config)
        params = params_from(data["params"])

        eq = profit_maximize(params)
        firm = FirmEquilibriumSerializer(eq).data
        ctx.writer.write_json("equilibrium.json", {"params": params.to_dict(), "equilibrium": firm})
        ctx.writer.write_csv("equilibrium.csv", pd.DataFrame([firm]))

        if data["industry"] or params.m < 1.0:
            industry = industry_equilibrium(params)
            ctx.writer.write_json("industry.json", IndustryEquilibriumSerializer(industry).data)
            logger.info(f"Industry equilibrium: p_index={industry.p_index:.6g} after {industry.iterations} iterations")

        logger.info(f"Firm equilibrium: L={eq.L:.6g} K={eq.K:.6g} Q={eq.Q:.6g} p={eq.p:.6g}")
        return {"params": params.to_dict(), "industry": data["industry"]}

    def handle_elasticities(self, ctx, options):
        raw = dict(ctx.raw_config)
        if "step" not in raw:
            raw["step"] = settings.INCIDENCE["FD_STEP"]
        data = validate_config(ElasticityConfigSerializer, raw)
        base = params_from(data["params"])

        points = [base]
        for override in data["grid"]:
            merged = {**base.to_dict(), **override}
            points.append(params_from(validate_config(EconomyParamsSerializer, merged)))
        if data["random_points"]:
            points += random_valid_params(np.random.default_rng(ctx.seed), data["random_points"], base=base)

        reports = elasticity_grid(points, method=data["method"], step=data["step"], workers=ctx.workers)
        effects = [None] * len(points)
        if data["method"] == NUMERIC:
            effects = reform_grid(
                points, data["phi1"], data["phi2"], step=data["step"], source=data["source"], workers=ctx.workers
            )

        rows, payload = [], []
        for report, effect in zip(reports, effects):
            row = report.flat_row()
            entry = {"report": ElasticityReportSerializer(report).data}
            if effect is not None:
                row.update(beta_L=effect.beta_L, beta_K=effect.beta_K, beta_R=effect.beta_R)
                entry["reform_effect"] = ReformEffectSerializer(effect).data
            rows.append(row)
            payload.append(entry)
        if data["method"] == NUMERIC:
            payload[0]["implied_terms"] = implied_terms(base, step=data["step"])

        ctx.writer.write_json("elasticities.json", payload)
        ctx.writer.write_csv("elasticities.csv", pd.DataFrame(rows))
        return {
            **{k: v for k, v in data.items() if k not in ("params", "grid")},
            "params": base.to_dict(),
            "grid": [dict(o) for o in data["grid"]],
        }

    def handle_limits(self, ctx, options):
        data = validate_config(LimitsConfigSerializer, ctx.raw_config)
        base = params_from(data["params"])
        step = settings.INCIDENCE["FD_STEP"]

        rows = []
        for rho in data["rho_grid"]:
            for eta in data["eta_grid"]:
                mode = MARKUP if eta > 1 else PRICE_TAKING
                params = base.with_updates(eps=data["eps"], rho=rho, eta=eta, market_mode=mode, price=None)
                eq = treated_equilibrium(params)
                numeric = numeric_elasticities(params, "theta", step=step)
                limit_L, limit_K = competitive_limit_elasticities(
                    eq.labor_cost_share, eq.capital_cost_share, rho, eta
                )
                rows.append({
                    "rho": rho,
                    "eta": eta,
                    "eps": data["eps"],
                    "market_mode": mode,
                    "cost_share_L": eq.labor_cost_share,
                    "eps_L_theta": numeric["L"],
                    "eps_L_theta_inf": limit_L,
                    "eps_K_theta": numeric["K"],
                    "eps_K_theta_inf": limit_K,
                    "rel_gap_L": _relative_gap(numeric["L"], limit_L),
                    "rel_gap_K": _relative_gap(numeric["K"], limit_K),
                })

        frame = pd.DataFrame(rows)
        ctx.writer.write_csv("limits.csv", frame)
        ctx.writer.write_json("limits.json", {
            "max_rel_gap_L": float(frame["rel_gap_L"].max()),
            "max_rel_gap_K": float(frame["rel_gap_K"].max()),
            "rows": rows,
        })
        return {**data, "params": base.to_dict()}


def _relative_gap(value, reference):
    if reference == 0:
        return abs(value)
    return abs(value - reference) / abs(reference)
