"""Plots rendered next to the delimited run outputs."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def save_accuracy_figure(report, outdir):
    """Per-session accuracy for both splits, one point per session."""
    ts = [s.t for s in report.sessions]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ts, [s.acc_test for s in report.sessions], "o-", label="test")
    ax.plot(ts, [s.acc_train for s in report.sessions], "s--", label="train")
    ax.set_xlabel("session")
    ax.set_ylabel("accuracy over seen classes")
    ax.set_ylim(0.0, 1.05)
    ax.set_xticks(ts)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    path = os.path.join(outdir, "accuracy.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_diagnostics_figure(report, outdir, split="test"):
    """Collapse diagnostics per session: prototype alignment cosines on the
    left axis pair, the within/between variability ratio on the right."""
    ts = [s.t for s in report.sessions]
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))

    ax = axes[0]
    for scope, style in (("each", "o-"), ("acc", "s--"), ("base", "^:")):
        ax.plot(
            ts,
            [s.diag[split][scope]["cross"] for s in report.sessions],
            style,
            label=f"cross ({scope})",
        )
    ax.plot(
        ts,
        [s.diag[split]["acc"]["self"] for s in report.sessions],
        "d-",
        color="black",
        label="self (acc)",
    )
    ax.set_xlabel("session")
    ax.set_ylabel("mean cosine to prototypes")
    ax.set_xticks(ts)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)

    ax = axes[1]
    for scope, style in (("each", "o-"), ("acc", "s--"), ("base", "^:")):
        ax.plot(
            ts,
            [s.diag[split][scope]["trace"] for s in report.sessions],
            style,
            label=scope,
        )
    ax.set_xlabel("session")
    ax.set_ylabel("within/between trace ratio")
    ax.set_yscale("log")
    ax.set_xticks(ts)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)

    fig.tight_layout()
    path = os.path.join(outdir, "diagnostics.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_run_figures(report, outdir):
    return [
        save_accuracy_figure(report, outdir),
        save_diagnostics_figure(report, outdir),
    ]
