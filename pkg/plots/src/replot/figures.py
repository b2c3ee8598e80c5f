"""The four figure kinds, one builder each.

Every builder takes validated rows and returns a matplotlib Figure with a
fixed size; nothing here recomputes statistics, columns are drawn as-is.
"""

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "replot"

import matplotlib.pyplot as plt

from .schema import SchemaError, column, finite

FIGSIZE = (6.4, 4.0)
DPI = 150

# The spectrum's largest eigenvalue is the generator count (self-loop
# included); the near-top band of interest starts at 46/50 of it.
TOP_FRACTION = 46 / 50


def _sorted_by(rows, key):
    return sorted(rows, key=lambda row: row[key])


def replicability_figure(rows):
    rows = _sorted_by(rows, "n")
    ns = column(rows, "n")
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.fill_between(ns, column(rows, "rho_lo"), column(rows, "rho_hi"),
                    alpha=0.25, linewidth=0, label="95% CI")
    ax.plot(ns, column(rows, "rho_hat"), marker="o", label="observed rate")
    ax.set_xscale("log")
    ax.set_xlabel("sample size n")
    ax.set_ylabel("disagreement rate")
    ax.set_title("Replication disagreement vs sample size")
    ax.legend()
    return fig


def error_figure(rows):
    rows = _sorted_by(rows, "n")
    ns = column(rows, "n")
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(ns, column(rows, "mean_err"), marker="o", label="mean error")
    ax.plot(ns, column(rows, "median_err"), marker="s", label="median error")
    ax.plot(ns, column(rows, "err_rate"), linestyle="--",
            label="error > epsilon rate")
    ax.set_xscale("log")
    ax.set_xlabel("sample size n")
    ax.set_ylabel("error")
    ax.set_title("Learner error vs sample size")
    ax.legend()
    return fig


def spectrum_figure(rows):
    values = finite(column(rows, "eigenvalue"))
    if not values:
        raise SchemaError("spectrum has no finite eigenvalues")
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.hist(values, bins=40)
    threshold = TOP_FRACTION * max(values)
    ax.axvline(threshold, color="C3", linestyle="--",
               label=f"46/50 of top = {threshold:g}")
    ax.set_xlabel("eigenvalue")
    ax.set_ylabel("multiplicity")
    ax.set_title("Walk-operator spectrum")
    ax.legend()
    return fig


def shells_figure(rows):
    rows = _sorted_by(rows, "t")
    ts = column(rows, "t")
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.bar(ts, column(rows, "count"), width=0.8, label="shell size")
    ax.plot(ts, column(rows, "cumulative"), drawstyle="steps-mid",
            color="C1", marker=".", label="ball size")
    ax.set_xlabel("radius t")
    ax.set_ylabel("points")
    ax.set_title("Wrap-ball shell profile")
    ax.legend()
    return fig


def save_figure(fig, out_path):
    """Write the figure; SVG output carries no date so bytes are stable."""
    if out_path.endswith(".svg"):
        fig.savefig(out_path, dpi=DPI, metadata={"Date": None})
    else:
        fig.savefig(out_path, dpi=DPI)
    plt.close(fig)
