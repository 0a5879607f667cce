"""Shared data model: probability/annotation matrices, ensembles, file I/O.

Matrices are stored as CSV with a label-name header row.  Values are
written with 17 significant digits so that a load -> save -> load cycle
is bit-identical.  Text corpora are JSON-lines records with ``id`` and
``text`` fields.
"""

from __future__ import annotations

import csv
import io
import json
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

# Probabilities this far outside [0, 1] are treated as float round-trip
# noise and clamped; anything larger is a data error.
RANGE_TOLERANCE = 1e-9


class LabelcalError(Exception):
    """Base class for data and usage errors raised by this package."""


class MatrixFormatError(LabelcalError, ValueError):
    """Malformed matrix file (bad header, bad value, bad shape)."""


class MalformedNumberError(MatrixFormatError):
    pass


class ValueRangeError(MatrixFormatError):
    pass


class RaggedRowError(MatrixFormatError):
    pass


class DuplicateLabelError(MatrixFormatError):
    pass


def _check_labels(labels: Sequence[str]) -> tuple[str, ...]:
    labels = tuple(str(name) for name in labels)
    for i, name in enumerate(labels):
        if not name:
            raise DuplicateLabelError(f"empty label name at column {i + 1}")
    seen: dict[str, int] = {}
    for i, name in enumerate(labels):
        if name in seen:
            raise DuplicateLabelError(
                f"duplicate label name {name!r} at columns {seen[name] + 1} and {i + 1}"
            )
        seen[name] = i
    return labels


@dataclass(frozen=True)
class ProbMatrix:
    """N x L matrix of prediction probabilities in [0, 1].

    Rows are items, columns are named labels.  Immutable after
    construction; the underlying array is marked read-only.
    """

    labels: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        labels = _check_labels(self.labels)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise MatrixFormatError(f"expected a 2-D array, got shape {values.shape}")
        if values.shape[1] != len(labels):
            raise RaggedRowError(
                f"matrix has {values.shape[1]} columns but {len(labels)} labels"
            )
        if not np.all(np.isfinite(values)):
            i, j = np.argwhere(~np.isfinite(values))[0]
            raise MalformedNumberError(
                f"non-finite value at row {i + 1}, column {labels[j]!r}"
            )
        low = values < 0.0
        high = values > 1.0
        if low.any() or high.any():
            bad = (values < -RANGE_TOLERANCE) | (values > 1.0 + RANGE_TOLERANCE)
            if bad.any():
                i, j = np.argwhere(bad)[0]
                raise ValueRangeError(
                    f"value {values[i, j]!r} outside [0, 1] at row {i + 1}, "
                    f"column {labels[j]!r}"
                )
            values = np.clip(values, 0.0, 1.0)
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "values", values)

    @property
    def n_items(self) -> int:
        return self.values.shape[0]

    @property
    def n_labels(self) -> int:
        return self.values.shape[1]

    def column(self, label: str) -> np.ndarray:
        return self.values[:, self.labels.index(label)]


@dataclass(frozen=True)
class LabelMatrix:
    """N x L binary annotation matrix.

    ``kind`` is ``"multilabel"`` (any number of labels per row) or
    ``"multiclass"`` (exactly one label per row; a one-hot matrix).
    """

    labels: tuple[str, ...]
    values: np.ndarray
    kind: str = "multilabel"

    def __post_init__(self) -> None:
        if self.kind not in ("multilabel", "multiclass"):
            raise MatrixFormatError(f"unknown label matrix kind {self.kind!r}")
        labels = _check_labels(self.labels)
        values = np.asarray(self.values)
        if values.ndim != 2:
            raise MatrixFormatError(f"expected a 2-D array, got shape {values.shape}")
        if values.shape[1] != len(labels):
            raise RaggedRowError(
                f"matrix has {values.shape[1]} columns but {len(labels)} labels"
            )
        as_float = values.astype(np.float64)
        bad = (as_float != 0.0) & (as_float != 1.0)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise ValueRangeError(
                f"annotation entry {values[i, j]!r} is not 0 or 1 at row {i + 1}, "
                f"column {labels[j]!r}"
            )
        values = as_float.astype(np.int8)
        if self.kind == "multiclass":
            sums = values.sum(axis=1)
            off = np.nonzero(sums != 1)[0]
            if off.size:
                raise ValueRangeError(
                    f"multiclass row {off[0] + 1} has {sums[off[0]]} labels set, expected 1"
                )
        values.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "values", values)

    @property
    def n_items(self) -> int:
        return self.values.shape[0]

    @property
    def n_labels(self) -> int:
        return self.values.shape[1]

    def class_indices(self) -> np.ndarray:
        """Class index per row (multiclass view)."""
        if self.kind != "multiclass":
            raise LabelcalError("class_indices is only defined for multiclass matrices")
        return np.argmax(self.values, axis=1)

    @staticmethod
    def from_class_indices(
        classes: Sequence[int], labels: Sequence[str] | None = None
    ) -> "LabelMatrix":
        classes = np.asarray(classes, dtype=np.int64)
        k = int(classes.max()) + 1 if classes.size else 0
        if labels is None:
            labels = tuple(f"class_{j}" for j in range(k))
        values = np.zeros((classes.size, len(labels)), dtype=np.int8)
        values[np.arange(classes.size), classes] = 1
        return LabelMatrix(tuple(labels), values, kind="multiclass")


@dataclass(frozen=True)
class EnsembleSet:
    """Predictions of the per-fold models, all on the same items and labels."""

    members: tuple[ProbMatrix, ...]
    fold_ids: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        members = tuple(self.members)
        if not members:
            raise LabelcalError("ensemble needs at least one member")
        first = members[0]
        for m, member in enumerate(members[1:], start=1):
            if member.values.shape != first.values.shape or member.labels != first.labels:
                raise MatrixFormatError(
                    f"ensemble member {m} has shape {member.values.shape} / labels "
                    f"{member.labels}, expected {first.values.shape} / {first.labels}"
                )
        fold_ids = tuple(self.fold_ids) or tuple(range(len(members)))
        if len(fold_ids) != len(members):
            raise LabelcalError(
                f"{len(fold_ids)} fold ids for {len(members)} ensemble members"
            )
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "fold_ids", fold_ids)


def ensemble_average(ensemble: EnsembleSet) -> ProbMatrix:
    """Entrywise arithmetic mean of the ensemble members."""
    stack = np.stack([m.values for m in ensemble.members])
    return ProbMatrix(ensemble.members[0].labels, stack.mean(axis=0))


def concat_labels(*matrices: ProbMatrix) -> ProbMatrix:
    """Column-concatenate predictions over the same items.

    Joins label sets (e.g. separate content and context ensembles) into
    one matrix; label names must stay unique across the inputs.
    """
    if not matrices:
        raise LabelcalError("concat_labels needs at least one matrix")
    rows = {m.n_items for m in matrices}
    if len(rows) != 1:
        raise MatrixFormatError(f"row counts differ: {sorted(rows)}")
    labels = tuple(name for m in matrices for name in m.labels)
    return ProbMatrix(labels, np.hstack([m.values for m in matrices]))


# ---------------------------------------------------------------------------
# Matrix file I/O
# ---------------------------------------------------------------------------


def _parse_rows(text: str, what: str) -> tuple[tuple[str, ...], np.ndarray]:
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row]
    if not rows:
        raise MatrixFormatError(f"{what}: missing header row")
    labels = _check_labels(rows[0])
    n_cols = len(labels)
    data = np.empty((len(rows) - 1, n_cols), dtype=np.float64)
    for r, row in enumerate(rows[1:], start=1):
        if len(row) != n_cols:
            raise RaggedRowError(
                f"{what}: row {r} has {len(row)} fields, expected {n_cols}"
            )
        for c, cell in enumerate(row):
            try:
                data[r - 1, c] = float(cell)
            except ValueError:
                raise MalformedNumberError(
                    f"{what}: malformed number {cell!r} at row {r}, "
                    f"column {labels[c]!r}"
                ) from None
    return labels, data


def load_prob_matrix(path: str) -> ProbMatrix:
    """Read a probability matrix from a CSV file with a label header."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        labels, data = _parse_rows(fh.read(), str(path))
    try:
        return ProbMatrix(labels, data)
    except MatrixFormatError as exc:
        raise type(exc)(f"{path}: {exc}") from None


def load_label_matrix(path: str, kind: str = "multilabel") -> LabelMatrix:
    """Read a binary annotation matrix from a CSV file with a label header."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        labels, data = _parse_rows(fh.read(), str(path))
    try:
        return LabelMatrix(labels, data, kind=kind)
    except MatrixFormatError as exc:
        raise type(exc)(f"{path}: {exc}") from None


def format_matrix(labels: Sequence[str], values: np.ndarray) -> str:
    """Render a matrix as CSV text with 17-significant-digit values."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(labels)
    for row in np.asarray(values):
        writer.writerow(["%.17g" % v for v in row])
    return out.getvalue()


def save_prob_matrix(matrix: ProbMatrix, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_matrix(matrix.labels, matrix.values))


def save_label_matrix(matrix: LabelMatrix, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_matrix(matrix.labels, matrix.values))


# ---------------------------------------------------------------------------
# Text corpora
# ---------------------------------------------------------------------------


def load_texts(path: str) -> list[dict]:
    """Read a JSON-lines corpus; every record needs ``id`` and ``text``."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LabelcalError(f"{path}: invalid JSON on line {n}: {exc}") from None
            if not isinstance(record, dict) or "id" not in record or "text" not in record:
                raise LabelcalError(f"{path}: line {n} lacks 'id' or 'text' field")
            records.append(record)
    return records


def save_texts(records: Iterable[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def substring_filter(
    texts: Sequence[str], needle: str, case_fold: bool = False
) -> list[int]:
    """Indices of texts containing ``needle`` as a contiguous substring.

    Text and needle are NFC-normalized before matching; with
    ``case_fold`` both sides are additionally case-folded.  The default
    is an exact match on the literal needle.
    """
    if not needle:
        raise LabelcalError("substring_filter needs a non-empty needle")
    needle = unicodedata.normalize("NFC", needle)
    if case_fold:
        needle = needle.casefold()
    hits = []
    for i, text in enumerate(texts):
        hay = unicodedata.normalize("NFC", text)
        if case_fold:
            hay = hay.casefold()
        if needle in hay:
            hits.append(i)
    return hits
