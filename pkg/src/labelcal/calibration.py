"""Probability truncation calibration.

Summing raw ensemble probabilities over-counts rare labels because many
small nonzero probabilities pile up.  Truncation zeroes probabilities
below ``p_low`` and saturates probabilities above ``p_high`` to 1; the
two thresholds are found by exhaustive grid search minimizing the
label-count error rate on out-of-fold predictions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._util import thread_map
from .core import EnsembleSet, LabelcalError, LabelMatrix, ProbMatrix
from .metrics import (
    DEFAULT_TICK_DIVISOR,
    UndefinedMetricError,
    relative_count_errors,
    tendency_error,
    tendency_series_from_matrix,
)

DEFAULT_GRID_STEP = 0.01
DEFAULT_LOW_RANGE = (0.0, 0.5)
DEFAULT_HIGH_RANGE = (0.5, 1.0)


@dataclass(frozen=True)
class Thresholds:
    """The truncation pair; probabilities strictly below ``p_low`` become 0,
    strictly above ``p_high`` become 1."""

    p_low: float
    p_high: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_low <= 1.0 or not 0.0 <= self.p_high <= 1.0:
            raise LabelcalError(f"thresholds must lie in [0, 1], got {self}")
        if self.p_low > self.p_high:
            raise LabelcalError(f"p_low must be <= p_high, got {self}")


def truncate_values(
    values: np.ndarray, p_low: float, p_high: float
) -> np.ndarray:
    """Truncation on a plain array; boundary values are left unchanged."""
    return np.where(values < p_low, 0.0, np.where(values > p_high, 1.0, values))


def truncate(probs: ProbMatrix, thresholds: Thresholds) -> ProbMatrix:
    """Zero out entries below p_low, saturate entries above p_high to 1."""
    return ProbMatrix(
        probs.labels, truncate_values(probs.values, thresholds.p_low, thresholds.p_high)
    )


def threshold_at_half(probs: ProbMatrix) -> ProbMatrix:
    """The usual binary-classification baseline: p <= 0.5 -> 0, p > 0.5 -> 1."""
    return ProbMatrix(probs.labels, np.where(probs.values > 0.5, 1.0, 0.0))


def out_of_fold(ensemble: EnsembleSet, fold_of: np.ndarray) -> ProbMatrix:
    """Row i of the result is the prediction of the fold model whose
    held-out evaluation fold contains item i."""
    fold_of = np.asarray(fold_of, dtype=np.int64)
    first = ensemble.members[0]
    if fold_of.size != first.n_items:
        raise LabelcalError(
            f"{fold_of.size} fold ids for {first.n_items} prediction rows"
        )
    by_fold = {fid: m for fid, m in zip(ensemble.fold_ids, ensemble.members)}
    missing = set(np.unique(fold_of)) - set(by_fold)
    if missing:
        raise LabelcalError(f"no ensemble member for folds {sorted(missing)}")
    values = np.empty_like(first.values)
    for fid, member in by_fold.items():
        rows = fold_of == fid
        values[rows] = member.values[rows]
    return ProbMatrix(first.labels, values)


def threshold_grid(
    low_range: tuple[float, float] = DEFAULT_LOW_RANGE,
    high_range: tuple[float, float] = DEFAULT_HIGH_RANGE,
    step: float = DEFAULT_GRID_STEP,
) -> tuple[np.ndarray, np.ndarray]:
    """Grid values low_start + i*step (resp. high); inclusive of endpoints."""
    if step <= 0:
        raise LabelcalError(f"grid step must be > 0, got {step}")

    def axis(lo: float, hi: float) -> np.ndarray:
        if not 0.0 <= lo <= hi <= 1.0:
            raise LabelcalError(f"invalid threshold range ({lo}, {hi})")
        count = int(np.floor((hi - lo) / step + 1e-9)) + 1
        return lo + step * np.arange(count)

    return axis(*low_range), axis(*high_range)


def _mean_count_error(
    values: np.ndarray, true_counts: np.ndarray, p_low: float, p_high: float
) -> float:
    sums = truncate_values(values, p_low, p_high).sum(axis=0)
    errors = relative_count_errors(sums, true_counts)
    return float(np.nanmean(errors))


def grid_search_thresholds(
    oof_probs: ProbMatrix,
    truth: LabelMatrix,
    grid_step: float = DEFAULT_GRID_STEP,
    low_range: tuple[float, float] = DEFAULT_LOW_RANGE,
    high_range: tuple[float, float] = DEFAULT_HIGH_RANGE,
    threads: int | None = 1,
) -> tuple[Thresholds, float]:
    """Exhaustive grid search minimizing the label-count error rate.

    Ties are broken by the smallest p_low, then the smallest p_high.
    ``oof_probs`` should be out-of-fold predictions (see
    ``out_of_fold``), matching how the error is defined.
    """
    if oof_probs.values.shape != truth.values.shape:
        raise LabelcalError(
            f"probability matrix {oof_probs.values.shape} does not match "
            f"annotation matrix {truth.values.shape}"
        )
    lows, highs = threshold_grid(low_range, high_range, grid_step)
    pairs = [(lo, hi) for lo in lows for hi in highs if lo <= hi]
    if not pairs:
        raise LabelcalError("empty threshold grid")
    true_counts = truth.values.sum(axis=0).astype(np.float64)
    if not (true_counts > 0).any():
        raise UndefinedMetricError("every label has zero true count")
    values = oof_probs.values

    def evaluate(indexed_pair: tuple[int, tuple[float, float]]):
        idx, (lo, hi) = indexed_pair
        return _mean_count_error(values, true_counts, lo, hi), idx

    results = thread_map(evaluate, list(enumerate(pairs)), threads)
    error, idx = min(results)
    lo, hi = pairs[idx]
    return Thresholds(float(lo), float(hi)), float(error)


# ---------------------------------------------------------------------------
# Report tables: error rates by frequency-ranked label blocks
# ---------------------------------------------------------------------------


def frequency_blocks(
    truth: LabelMatrix, n_blocks: int = 4
) -> list[tuple[str, np.ndarray]]:
    """Label column indices grouped into blocks by decreasing frequency.

    Returns (rank-range name, column indices) pairs, e.g. ("1-10", ...);
    blocks are as even as possible.  The table builders append the
    cumulated all-labels row themselves.
    """
    counts = truth.values.sum(axis=0)
    order = np.argsort(-counts, kind="stable")
    blocks = []
    start = 1
    for part in np.array_split(order, min(n_blocks, order.size)):
        if part.size == 0:
            continue
        blocks.append((f"{start}-{start + part.size - 1}", part))
        start += part.size
    return blocks


def _treatments(thresholds: Thresholds) -> list[tuple[str, Thresholds | None]]:
    return [
        ("no_truncation", None),
        ("low_only", Thresholds(thresholds.p_low, 1.0)),
        ("low_and_high", thresholds),
    ]


def count_error_table(
    oof_probs: ProbMatrix, truth: LabelMatrix, thresholds: Thresholds
) -> dict:
    """Label-count error rates per frequency block and treatment.

    Rows are frequency-ranked label blocks plus a cumulated row; columns
    are no truncation / low threshold only / both thresholds.
    """
    true_counts = truth.values.sum(axis=0).astype(np.float64)
    rows = frequency_blocks(truth) + [(f"1-{truth.n_labels} (cumulated)", np.arange(truth.n_labels))]
    table = {"thresholds": {"p_low": thresholds.p_low, "p_high": thresholds.p_high}, "rows": []}
    for name, cols in rows:
        row = {"labels": name}
        for treatment, t in _treatments(thresholds):
            if t is None:
                values = oof_probs.values
            else:
                values = truncate_values(oof_probs.values, t.p_low, t.p_high)
            errors = relative_count_errors(values.sum(axis=0), true_counts)[cols]
            row[treatment] = (
                float(np.nanmean(errors)) if not np.all(np.isnan(errors)) else None
            )
        table["rows"].append(row)
    return table


def tendency_error_table(
    oof_probs: ProbMatrix,
    truth: LabelMatrix,
    years: Sequence[int],
    thresholds: Thresholds,
    tick_divisor: float = DEFAULT_TICK_DIVISOR,
) -> dict:
    """Tendency error rates per frequency block and treatment (percent)."""
    truth_series = tendency_series_from_matrix(truth, years, tick_divisor)
    rows = frequency_blocks(truth) + [(f"1-{truth.n_labels} (cumulated)", np.arange(truth.n_labels))]
    table = {"thresholds": {"p_low": thresholds.p_low, "p_high": thresholds.p_high}, "rows": []}
    for name, cols in rows:
        names = [truth.labels[j] for j in cols]
        row = {"labels": name}
        for treatment, t in _treatments(thresholds):
            matrix = oof_probs if t is None else truncate(oof_probs, t)
            pred_series = tendency_series_from_matrix(matrix, years, tick_divisor)
            row[treatment] = tendency_error(
                {n: pred_series[n] for n in names},
                {n: truth_series[n] for n in names},
            )
        table["rows"].append(row)
    return table
