"""
Static SVG charts: event-study coefficients and the substitution-elasticity sweep.
"""

import io
import math

import matplotlib

matplotlib.use("Agg")

from matplotlib import rcParams  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

# stable element ids, so identical data renders identical bytes
rcParams["svg.hashsalt"] = "incidence"
rcParams["svg.fonttype"] = "none"

Z_95 = 1.96


def _to_svg(fig):
    buffer = io.StringIO()
    fig.savefig(buffer, format="svg", bbox_inches="tight", metadata={"Date": None})
    return buffer.getvalue()


def event_study_svg(frame, title="Event study", ylabel="Coefficient"):
    """
    Coefficients by event time with +/- 1.96 SE whiskers.

    frame has columns k, beta, se; k = -1 is drawn at zero as the reference.
    """
    rows = frame.sort_values("k")
    ks = [int(k) for k in rows["k"]]
    betas = [float(b) for b in rows["beta"]]
    whiskers = [Z_95 * float(s) if math.isfinite(float(s)) else 0.0 for s in rows["se"]]

    fig = Figure(figsize=(6.4, 4.0))
    ax = fig.add_subplot(1, 1, 1)
    ax.errorbar(ks, betas, yerr=whiskers, fmt="o", color="#2c3e50", capsize=3, linewidth=1.2)
    ax.scatter([-1], [0.0], color="#c0392b", marker="D", zorder=5, label="Reference (k = -1)")
    ax.axhline(0.0, color="gray", linewidth=0.8)
    ax.axvline(-0.5, color="gray", linestyle="--", linewidth=1)
    ax.set_xlabel("Years relative to eligibility (k)")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(loc="upper left", fontsize=8)
    return _to_svg(fig)


def sweep_svg(frame):
    """
    One line per eps value, x = eta, y = sigma_hat; infeasible cells leave gaps.

    Rows with eps = inf hold the flat-labor-supply inversion, drawn in black.
    """
    finite = frame["eps"].map(lambda e: math.isfinite(float(e)))
    competitive = frame[~finite]
    frame = frame[finite]
    fig = Figure(figsize=(6.4, 4.4))
    ax = fig.add_subplot(1, 1, 1)
    for eps, group in frame.groupby("eps", sort=True):
        group = group.sort_values("eta")
        sigma = [float(s) if bool(f) else math.nan for s, f in zip(group["sigma_hat"], group["feasible"])]
        ax.plot(list(group["eta"]), sigma, marker="o", markersize=3, linewidth=1.3, label=f"eps = {eps:g}")
    if len(competitive):
        competitive = competitive.sort_values("eta")
        ax.plot(
            list(competitive["eta"]),
            [float(s) if bool(f) else math.nan for s, f in zip(competitive["sigma_hat"], competitive["feasible"])],
            color="black",
            linewidth=1.8,
            label="competitive",
        )
    ax.set_xlabel("Output demand elasticity (eta)")
    ax.set_ylabel("Implied sigma_KL")
    ax.set_title("Sensitivity of sigma_KL to eta and eps")
    ax.legend(fontsize=8)
    return _to_svg(fig)
