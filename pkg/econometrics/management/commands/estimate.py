import logging

import pandas as pd

from config.exceptions import ConfigurationError
from config.serializers import validate_config
from econometrics.balance import balance_check
from econometrics.event_study import event_frame, event_study, panel_level, pooled_did, post_period_mean
from econometrics.matching import matching_did
from econometrics.postprocess import elasticity_postprocess, labor_cost_first_stage, statutory_dlog
from econometrics.serializers import (
    BalanceConfigSerializer,
    DidConfigSerializer,
    EventStudyConfigSerializer,
    MatchDidConfigSerializer,
)
from panels.io import read_panel
from runs.command import IncidenceCommand
from runs.plotting import event_study_svg

logger = logging.getLogger(__name__)

DEFAULT_OUTCOMES = {"firm": ["log_employment", "log_avg_wage"], "worker": ["log_net_earnings"]}
EMPLOYMENT = "log_employment"


class Command(IncidenceCommand):
    help = "Estimate treatment effects on a generated panel (did | event-study | match-did | balance)."
    command_name = "estimate"
    actions = ("did", "event-study", "match-did", "balance")

    def add_action_arguments(self, parser):
        parser.add_argument("--input", dest="input_dir", default=None, help="Panel directory from `panel generate`")

    def extra_argv(self, options):
        return ["--input", options["input_dir"]] if options.get("input_dir") else []

    def _load(self, ctx, options, data):
        directory = options.get("input_dir") or data.get("input")
        if not directory:
            raise ConfigurationError("no panel directory given (--input or config 'input')", key="input")
        dataset = read_panel(directory, with_workers=data["level"] == "worker")
        if data["level"] == "worker" and dataset.workers is None:
            raise ConfigurationError(f"{directory} has no worker panel", key="input")
        if dataset.truth:
            ctx.manifest["truth"] = dataset.truth
        panel = dataset.workers if data["level"] == "worker" else dataset.firms
        return str(directory), panel

    def handle_did(self, ctx, options):
        data = validate_config(DidConfigSerializer, ctx.raw_config)
        directory, panel = self._load(ctx, options, data)
        outcomes = data.get("outcomes") or DEFAULT_OUTCOMES[data["level"]]
        treated = panel_level(data["level"]).treated

        results = {}
        for outcome in outcomes:
            results[outcome] = pooled_did(panel, outcome, data["level"], data["subsample"]).as_dict()
        payload = {"level": data["level"], "outcomes": results}

        if data["level"] == "firm" and data["labor_cost"]:
            cost = labor_cost_first_stage(panel, data["subsample"])
            payload["labor_cost"] = cost
            if EMPLOYMENT in results:
                beta = results[EMPLOYMENT]["iv"]["coefficients"][treated]["coef"]
                payload["employment_elasticity"] = {
                    "estimated_cost_change": elasticity_postprocess(beta, cost["iv_dlog"]),
                    "statutory_cost_change": elasticity_postprocess(beta, statutory_dlog()),
                }
        ctx.writer.write_json("did.json", payload)
        ctx.writer.write_csv("did.csv", pd.DataFrame([
            {
                "outcome": outcome,
                "pi": r["pi"],
                "delta": r["delta"],
                "iv": r["iv"]["coefficients"][treated]["coef"],
                "iv_se": r["iv"]["coefficients"][treated]["se"],
                "wald_ratio": r["wald_ratio"],
                "n_obs": r["iv"]["n_obs"],
                "n_clusters": r["iv"]["n_clusters"],
            }
            for outcome, r in results.items()
        ]))
        return {**data, "input": directory, "outcomes": outcomes}

    def handle_event_study(self, ctx, options):
        data = validate_config(EventStudyConfigSerializer, ctx.raw_config)
        directory, panel = self._load(ctx, options, data)
        report = event_study(
            panel,
            level=data["level"],
            outcome=data.get("outcome"),
            window=tuple(data["window"]),
            endpoints=data["endpoints"],
            subsample=data["subsample"],
        )
        frame = event_frame(report)
        ctx.writer.write_json("event_study.json", {**report.as_dict(), "post_period_mean": post_period_mean(report)})
        ctx.writer.write_csv("event_study.csv", frame)
        outcome = report.spec.outcome
        ctx.writer.write_svg("event_study.svg", event_study_svg(frame, title=f"Event study: {outcome}", ylabel=outcome))
        return {**data, "input": directory, "outcome": outcome}

    def handle_match_did(self, ctx, options):
        data = validate_config(MatchDidConfigSerializer, ctx.raw_config)
        directory, panel = self._load(ctx, options, data)
        result = matching_did(
            panel,
            outcome=data["outcome"],
            variables=tuple(data["variables"]),
            placebo=data["placebo"],
            placebo_share=data["placebo_share"],
            seed=ctx.seed,
        )
        ctx.writer.write_json("matching.json", result.as_dict())
        ctx.writer.write_csv("matched_pairs.csv", result.pairs)
        return {**data, "input": directory}

    def handle_balance(self, ctx, options):
        data = validate_config(BalanceConfigSerializer, ctx.raw_config)
        directory, panel = self._load(ctx, options, data)
        result = balance_check(panel, covariates=data["covariates"])
        ctx.writer.write_json("balance.json", {**result.as_dict(), "imbalanced": result.imbalanced()})
        return {**data, "input": directory}
