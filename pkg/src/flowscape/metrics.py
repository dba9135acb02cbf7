"""Detection-quality metrics over confusion counts, plus the window-level
scoring harness that builds those counts from an event log and a label
sidecar."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

METRIC_NAMES = ("recall", "precision", "f_measure", "accuracy", "tnr", "fpr", "fnr")

# window is "detected" when any event outside these categories fired
BENIGN_CATEGORIES = {"NORMAL_BIRD"}


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn
        )


def _ratio(num: int, den: int) -> Optional[float]:
    return None if den == 0 else num / den


def score(c: ConfusionCounts) -> dict:
    """All seven metrics; zero-denominator metrics come back as None."""
    recall = _ratio(c.tp, c.tp + c.fn)
    precision = _ratio(c.tp, c.tp + c.fp)
    if recall is None or precision is None or precision + recall == 0:
        f_measure = None
    else:
        f_measure = 2 * (precision * recall) / (precision + recall)
    return {
        "recall": recall,
        "precision": precision,
        "f_measure": f_measure,
        "accuracy": _ratio(c.tp + c.tn, c.tp + c.tn + c.fp + c.fn),
        "tnr": _ratio(c.tn, c.tn + c.fp),
        "fpr": _ratio(c.fp, c.fp + c.tn),
        "fnr": _ratio(c.fn, c.fn + c.tp),
    }


def format_percent(value: Optional[float]) -> str:
    return "undefined" if value is None else f"{value * 100:.2f}%"


def format_table(metrics: dict) -> str:
    labels = {
        "recall": "Recall", "precision": "Precision", "f_measure": "F-measure",
        "accuracy": "Accuracy", "tnr": "TNR", "fpr": "FPR", "fnr": "FNR",
    }
    width = max(len(v) for v in labels.values())
    return "\n".join(
        f"{labels[name]:<{width}}  {format_percent(metrics[name])}" for name in METRIC_NAMES
    )


# ---------------------------------------------------------------------------
# Window scoring against generator label sidecars

def detected_windows(events_path: str) -> tuple[set, set]:
    """(all windows seen, windows with a non-benign event) from an event log."""
    seen = set()
    flagged = set()
    with open(events_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            record = json.loads(line)
            seen.add(record["window"])
            if record["category"] not in BENIGN_CATEGORIES:
                flagged.add(record["window"])
    return seen, flagged


def score_run(events_path: str, labels_path: str) -> ConfusionCounts:
    """Confusion counts for one replay: label sidecar vs event log.

    Every labelled window counts; windows the engine emitted beyond the
    labelled range score as negatives.
    """
    with open(labels_path, "r", encoding="utf-8") as fh:
        labels = json.load(fh)
    attack_windows = {w["index"] for w in labels["windows"] if w["attack"]}
    labelled = {w["index"] for w in labels["windows"]}
    seen, flagged = detected_windows(events_path)
    tp = tn = fp = fn = 0
    for window in sorted(labelled | seen):
        positive = window in attack_windows
        hit = window in flagged
        if positive and hit:
            tp += 1
        elif positive:
            fn += 1
        elif hit:
            fp += 1
        else:
            tn += 1
    return ConfusionCounts(tp, tn, fp, fn)
