"""Run reports and their serialized forms.

A run produces one SessionMetrics per session; the CSV writers emit one row
per session for each split with the accuracy and the collapse diagnostics on
the current-session scope (``each``) and the accumulated scope (``acc``).
The JSON summary carries the averaged accuracy, the performance drop, and the
per-session rows.  Float formatting is fixed at 17 significant digits so that
repeated runs compare byte for byte.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .metrics import average_incremental_accuracy

CSV_HEADER = (
    "t,A_t,avg_cross_cos_each,avg_cross_cos_acc,avg_self_cos_each,"
    "avg_self_cos_acc,trace_ratio_each,trace_ratio_acc"
)


@dataclass
class SessionMetrics:
    t: int
    mode: str
    classes: tuple
    acc_train: float
    acc_test: float
    # diag[split][scope] -> {"cross": .., "self": .., "trace": ..};
    # scopes are "each" (this session), "acc" (all so far), "base" (session 0)
    diag: dict
    final_align_loss: float
    align_curve: list = field(default_factory=list)


@dataclass
class RunReport:
    sessions: list
    final_test_features: np.ndarray = None
    final_test_labels: np.ndarray = None

    @property
    def average_accuracy(self):
        return average_incremental_accuracy(s.acc_test for s in self.sessions)

    @property
    def performance_drop(self):
        return self.sessions[0].acc_test - self.sessions[-1].acc_test


def _fmt(v):
    return f"{float(v):.17g}"


def _csv_rows(report, split):
    acc_key = "acc_train" if split == "train" else "acc_test"
    lines = [CSV_HEADER]
    for s in report.sessions:
        d = s.diag[split]
        lines.append(
            ",".join(
                [
                    str(s.t),
                    _fmt(getattr(s, acc_key)),
                    _fmt(d["each"]["cross"]),
                    _fmt(d["acc"]["cross"]),
                    _fmt(d["each"]["self"]),
                    _fmt(d["acc"]["self"]),
                    _fmt(d["each"]["trace"]),
                    _fmt(d["acc"]["trace"]),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def write_metrics_csv(report, outdir):
    paths = []
    for split in ("train", "test"):
        path = os.path.join(outdir, f"metrics_{split}.csv")
        with open(path, "w") as fh:
            fh.write(_csv_rows(report, split))
        paths.append(path)
    return paths


def summary_dict(report):
    return {
        "A": report.average_accuracy,
        "PD": report.performance_drop,
        "per_session": [
            {
                "t": s.t,
                "mode": s.mode,
                "classes": list(s.classes),
                "A_t": s.acc_test,
                "A_t_train": s.acc_train,
                "diag": s.diag,
                "final_align_loss": s.final_align_loss,
            }
            for s in report.sessions
        ],
    }


def write_summary_json(report, path):
    with open(path, "w") as fh:
        json.dump(summary_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
