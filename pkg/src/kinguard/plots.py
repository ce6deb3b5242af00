"""Figure rendering for experiment outputs.

Each experiment's report path writes a PNG next to its CSV/NDJSON files.
The functions take the same aggregated rows the CSV writer receives, so a
figure can always be regenerated from the delimited output alone.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_EPS_ORDER = {"3": 0, "4": 1, "5": 2, "inf": 3}


def _eps_key(label: str) -> float:
    return math.inf if label == "inf" else float(label)


def _eps_legend(label: str) -> str:
    return "no noise" if label == "inf" else f"eps={label}"


def plot_kinship(rows: list[dict], path: str) -> None:
    """Recall and accuracy versus panel size, one line per privacy budget."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6), sharex=True)
    eps_labels = sorted({r["epsilon"] for r in rows}, key=_eps_key)
    for metric, ax in zip(("recall", "accuracy"), axes):
        for eps in eps_labels:
            pts = sorted((r["m"], r[metric]) for r in rows if r["epsilon"] == eps)
            ax.plot([p[0] for p in pts], [p[1] for p in pts],
                    marker="o", label=_eps_legend(eps))
        ax.set_xlabel("panel size m")
        ax.set_ylabel(f"degree {metric}")
        ax.set_ylim(0, 1.05)
        ax.grid(True, alpha=0.3)
    axes[0].legend(fontsize=8)
    fig.suptitle("Kinship recovery vs panel size and privacy budget")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_unshuffle(rows: list[dict], path: str) -> None:
    """Attack accuracy versus synthetic-sample count, per defense setting."""
    fig, ax = plt.subplots(figsize=(6, 4))
    combos = sorted(
        {(r["strategy"], r["epsilon"], r["i_prime"]) for r in rows},
        key=lambda c: (c[0], _eps_key(c[1]), c[2]),
    )
    styles = {"random": "-", "close-maf": "--"}
    for strategy, eps, scale in combos:
        pts = sorted(
            (r["n_prime"], r["accuracy"]) for r in rows
            if (r["strategy"], r["epsilon"], r["i_prime"]) == (strategy, eps, scale)
        )
        label = f"{strategy}, {_eps_legend(eps)}"
        if scale != "m":
            label += ", extra candidates"
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                styles.get(strategy, "-"), marker="o", markersize=3, label=label)
    ax.set_xlabel("synthetic samples n'")
    ax.set_ylabel("un-shuffling accuracy")
    ax.set_ylim(-0.02, 1.05)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    ax.set_title("Un-shuffling attack vs defenses")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_membership(rows: list[dict], path: str) -> None:
    """Inference power versus un-shuffling level, with the LRT baseline."""
    fig, ax = plt.subplots(figsize=(6, 4))
    eps_labels = sorted({r["epsilon"] for r in rows}, key=_eps_key)
    for eps in eps_labels:
        pts = sorted((r["level"], r["power"]) for r in rows if r["epsilon"] == eps)
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                marker="o", label=_eps_legend(eps))
    baseline = rows[0].get("lrt_power")
    if baseline is not None:
        ax.axhline(baseline, color="k", linestyle=":",
                   label=f"aggregate-release LRT ({baseline:.2f})")
    ax.set_xlabel("un-shuffling level")
    ax.set_ylabel("membership inference power")
    ax.set_ylim(-0.02, 1.05)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    ax.set_title("Membership inference power vs un-shuffling quality")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
