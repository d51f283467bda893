"""Binary-classification metrics: mean BCE, AUROC, and average precision.

All three are implemented directly on rank statistics / running sums rather
than delegated to a stats library, so the test suite can pin them against
brute-force oracles. Metrics that are undefined for a label vector (AUROC
with a single class, AP with no positives) return ``None``, which report
writers render as the literal ``n/a``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .timeseries import Dataset, aggregate_targets

PROB_CLAMP = 1e-7


def _as_pairs(predictions, labels) -> tuple[np.ndarray, np.ndarray]:
    preds = np.asarray(predictions, dtype=np.float64)
    labs = np.asarray(labels)
    if preds.ndim != 1 or labs.ndim != 1 or preds.shape != labs.shape:
        raise ShapeError(
            f"predictions {preds.shape} and labels {labs.shape} must be equal-length vectors"
        )
    if preds.size == 0:
        raise ShapeError("need at least one (prediction, label) pair")
    return preds, labs.astype(np.int64)


def mean_bce(predictions, labels) -> float:
    """Mean binary cross-entropy with probabilities clamped away from {0, 1}."""
    preds, labs = _as_pairs(predictions, labels)
    p = np.clip(preds, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(-np.mean(labs * np.log(p) + (1 - labs) * np.log1p(-p)))


def auroc(predictions, labels) -> float | None:
    """Probability that a random positive outranks a random negative (ties 1/2).

    Computed from tie-averaged ranks in O(N log N); returns None when either
    class is absent.
    """
    preds, labs = _as_pairs(predictions, labels)
    n_pos = int(labs.sum())
    n_neg = labs.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    order = np.argsort(preds, kind="mergesort")
    sorted_preds = preds[order]
    starts = np.empty(preds.size, dtype=bool)
    starts[0] = True
    starts[1:] = sorted_preds[1:] != sorted_preds[:-1]
    group = np.cumsum(starts) - 1
    first = np.flatnonzero(starts)
    counts = np.diff(np.append(first, preds.size))
    avg_rank = first + (counts + 1) / 2.0  # 1-based average rank per tie group
    ranks = np.empty(preds.size)
    ranks[order] = avg_rank[group]
    pos_rank_sum = ranks[labs == 1].sum()
    return float((pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def average_precision(predictions, labels) -> float | None:
    """Area under the precision-recall curve via the descending-rank step sum.

    Tied scores are processed as one block with precision taken after the
    whole block, so the result is independent of input order. Returns None
    when there are no positives.
    """
    preds, labs = _as_pairs(predictions, labels)
    n_pos = int(labs.sum())
    if n_pos == 0:
        return None
    order = np.argsort(-preds, kind="mergesort")
    sorted_preds = preds[order]
    sorted_labs = labs[order]
    # last index of each tie block
    ends = np.flatnonzero(
        np.append(sorted_preds[1:] != sorted_preds[:-1], True)
    )
    tp = np.cumsum(sorted_labs)[ends].astype(np.float64)
    seen = (ends + 1).astype(np.float64)
    precision = tp / seen
    recall = tp / n_pos
    delta_recall = np.diff(recall, prepend=0.0)
    return float(np.sum(delta_recall * precision))


@dataclass(frozen=True)
class MetricsReport:
    """Evaluation result for one (room, window) pair."""

    room_id: str
    window_minutes: int
    bce: float
    auroc: float | None
    avg_precision: float | None


def evaluate(predictions, dataset: Dataset, window: int) -> MetricsReport:
    """Score a prediction sequence against the dataset's windowed targets.

    ``predictions`` must hold one probability per target step, i.e. length
    T-1 for a dataset of T records.
    """
    targets = aggregate_targets(dataset, window)
    preds = np.asarray(predictions, dtype=np.float64)
    if preds.shape != targets.shape:
        raise ShapeError(
            f"got {preds.shape[0] if preds.ndim == 1 else preds.shape} predictions "
            f"for {targets.size} target steps"
        )
    return MetricsReport(
        room_id=dataset.room_id,
        window_minutes=window,
        bce=mean_bce(preds, targets),
        auroc=auroc(preds, targets),
        avg_precision=average_precision(preds, targets),
    )


METRICS_CSV_HEADER = "room,window_minutes,bce,auroc,avg_precision"


def _cell(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.6f}"


def format_metrics_csv(reports) -> str:
    """Render one CSV row per report (the prediction-window sweep table)."""
    lines = [METRICS_CSV_HEADER]
    for r in reports:
        lines.append(
            f"{r.room_id},{r.window_minutes},{_cell(r.bce)},{_cell(r.auroc)},{_cell(r.avg_precision)}"
        )
    return "\n".join(lines) + "\n"
