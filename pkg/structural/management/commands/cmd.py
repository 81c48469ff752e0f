import logging

import numpy as np
import pandas as pd

from config.serializers import validate_config
from economy.params import MARKUP
from economy.serializers import params_from
from runs.command import IncidenceCommand
from runs.plotting import sweep_svg
from structural.estimation import ParamBox, cmd_estimate
from structural.moments import MomentVector, model_moments, simulate_moments
from structural.serializers import CmdFitConfigSerializer, CmdResultSerializer, CmdSweepConfigSerializer
from structural.sweep import sigma_sensitivity_sweep

logger = logging.getLogger(__name__)

# moment standard deviation, relative to the moment, used to weight noiseless moments
WEIGHT_SCALE = 0.01
VARIANCE_FLOOR = 1e-12


def scaled_vcov(beta, scale):
    return np.diag(np.maximum((scale * np.abs(beta)) ** 2, VARIANCE_FLOOR))


def relative_errors(result, truth):
    return {
        name: abs(getattr(result, f"{name}_hat") - truth[name]) / abs(truth[name])
        if truth[name] != 0
        else abs(getattr(result, f"{name}_hat"))
        for name in ("eps", "eta", "rho")
    }


class Command(IncidenceCommand):
    help = "Minimum-distance fit of (eps, eta, rho) and the sigma_KL sensitivity sweep (fit | sweep)."
    command_name = "cmd"
    actions = ("fit", "sweep")

    def handle_fit(self, ctx, options):
        data = validate_config(CmdFitConfigSerializer, ctx.raw_config)
        base = params_from(data["params"])
        box = ParamBox(**{k: tuple(v) for k, v in data["box"].items()})
        phi1, phi2 = data["phi1"], data["phi2"]
        identity = np.eye(3) if data["weight"] == "identity" else None

        if "moments" in data:
            draws = [MomentVector.from_dict(data["moments"])]
            truth = None
        else:
            truth = dict(data["truth"])
            truth_params = base.with_updates(market_mode=MARKUP, price=None, **truth)
            beta = model_moments(truth_params, phi1, phi2)
            rng = np.random.default_rng(ctx.seed)
            if data["noise"] > 0:
                vcov = scaled_vcov(beta, data["noise"])
                draws = [simulate_moments(truth_params, phi1, phi2, vcov, rng) for _ in range(data["replications"])]
            else:
                vcov = scaled_vcov(beta, WEIGHT_SCALE)
                draws = [MomentVector(beta_L=beta[0], beta_K=beta[1], beta_R=beta[2], vcov=vcov)]
            ctx.manifest["truth"] = truth

        estimates, start_rows, rep_rows = [], [], []
        for index, moments in enumerate(draws):
            result = cmd_estimate(
                moments,
                phi1,
                phi2,
                box,
                base=base,
                starts=data["starts"],
                seed=ctx.seed + index,
                workers=ctx.workers,
                weight=identity,
            )
            entry = {"replication": index, "moments": moments.to_dict(), "result": CmdResultSerializer(result).data}
            row = {"replication": index, **CmdResultSerializer(result).data}
            if truth is not None:
                errors = relative_errors(result, truth)
                entry["relative_error"] = errors
                row.update({f"rel_err_{k}": v for k, v in errors.items()})
            estimates.append(entry)
            rep_rows.append(row)
            start_rows += [{"replication": index, **s} for s in result.starts]

        payload = {"estimates": estimates, "truth": truth}
        if truth is not None:
            frame = pd.DataFrame(rep_rows)
            payload["median_relative_error"] = {
                k: float(frame[f"rel_err_{k}"].median()) for k in ("eps", "eta", "rho")
            }
            ctx.writer.write_csv("replications.csv", frame)
            logger.info(f"Median relative errors over {len(draws)} replication(s): {payload['median_relative_error']}")
        ctx.writer.write_json("cmd_result.json", payload)
        ctx.writer.write_csv("starts.csv", pd.DataFrame(start_rows))
        return {
            **{k: v for k, v in data.items() if k not in ("params", "moments", "truth", "box")},
            "params": base.to_dict(),
            "box": box.to_dict(),
            "moments": dict(data["moments"]) if "moments" in data else None,
            "truth": truth,
        }

    def handle_sweep(self, ctx, options):
        data = validate_config(CmdSweepConfigSerializer, ctx.raw_config)
        base = params_from(data["params"])
        table = sigma_sensitivity_sweep(
            data["beta_L"],
            data["eps_grid"],
            data["eta_grid"],
            data["phi1"],
            base=base,
            workers=ctx.workers,
        )
        ctx.writer.write_csv("sweep.csv", table)
        ctx.writer.write_svg("sweep.svg", sweep_svg(table))
        ctx.writer.write_json("sweep.json", {
            "feasible_cells": int(table["feasible"].sum()),
            "cells": int(len(table)),
            "rows": table.to_dict(orient="records"),
        })
        return {**data, "params": base.to_dict()}
