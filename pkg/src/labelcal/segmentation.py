"""OCR post-processing: word-box parsing, paragraph assembly, paragraph
type classification, cross-page paragraph merging, and quote matching.

Input is the standard 12-column word-box table (level, page_num,
block_num, par_num, line_num, word_num, left, top, width, height, conf,
text).  Paragraph classes come from density clustering on character-size
statistics; page-boundary merges use the two typographic cues - the last
line reaching the right margin and the next page's first line not being
indented.
"""

from __future__ import annotations

import re
import warnings
from collections import Counter
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .core import LabelcalError

TSV_COLUMNS = (
    "level", "page_num", "block_num", "par_num", "line_num", "word_num",
    "left", "top", "width", "height", "conf", "text",
)
RIGHT_TOL_CHAR_WIDTHS = 1.5
INDENT_TOL_CHAR_WIDTHS = 1.0
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class OcrFormatError(LabelcalError):
    """Malformed OCR word-box table."""


@dataclass(frozen=True)
class OcrToken:
    """One OCR word box."""

    page: int
    block: int
    paragraph: int
    line: int
    word: int
    left: int
    top: int
    width: int
    height: int
    confidence: float
    text: str

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise OcrFormatError(
                f"token {self.text!r} has non-positive box {self.width}x{self.height}"
            )
        if min(self.page, self.block, self.paragraph, self.line, self.word) < 0:
            raise OcrFormatError(f"token {self.text!r} has a negative index")

    @property
    def right(self) -> int:
        return self.left + self.width


@dataclass(frozen=True)
class LineBox:
    """One text line: the bounding box of its word boxes."""

    page: int
    left: int
    top: int
    right: int
    bottom: int
    text: str


@dataclass(frozen=True)
class ParagraphRecord:
    """An assembled paragraph with layout statistics.

    ``char_height`` is the character-count-weighted median word-box
    height, ``char_width`` the mean per-character width.
    """

    record_id: str
    first_page: int
    last_page: int
    lines: tuple[LineBox, ...]
    text: str
    cls: str = "body"
    char_height: float = 0.0
    char_width: float = 0.0

    def __post_init__(self) -> None:
        if self.first_page > self.last_page:
            raise LabelcalError(
                f"paragraph {self.record_id}: page span "
                f"{self.first_page}..{self.last_page} decreasing"
            )
        if self.text != " ".join(line.text for line in self.lines):
            raise LabelcalError(
                f"paragraph {self.record_id}: text does not equal its lines joined by spaces"
            )

    @property
    def left_margin(self) -> int:
        return min(line.left for line in self.lines)

    @property
    def right_extent(self) -> int:
        return max(line.right for line in self.lines)

    def to_json(self) -> dict:
        return {
            "id": self.record_id,
            "first_page": self.first_page,
            "last_page": self.last_page,
            "class": self.cls,
            "text": self.text,
            "char_height": self.char_height,
            "char_width": self.char_width,
            "lines": [
                {
                    "page": l.page, "left": l.left, "top": l.top,
                    "right": l.right, "bottom": l.bottom, "text": l.text,
                }
                for l in self.lines
            ],
        }


def parse_ocr_tsv(text: str) -> list[OcrToken]:
    """Parse the word-box table; rows with empty text are skipped."""
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise OcrFormatError("missing header row")
    header = lines[0].rstrip("\n").split("\t")
    index: dict[str, int] = {}
    for name in TSV_COLUMNS:
        if name not in header:
            raise OcrFormatError(f"missing column {name!r} in header")
        index[name] = header.index(name)

    tokens = []
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) == len(header) - 1 and index["text"] == len(header) - 1:
            fields.append("")  # trailing tab swallowed by the writer
        if len(fields) != len(header):
            raise OcrFormatError(
                f"line {n}: {len(fields)} fields, expected {len(header)}"
            )
        word_text = fields[index["text"]]
        if not word_text.strip():
            continue

        def intfield(name: str) -> int:
            raw = fields[index[name]]
            try:
                return int(raw)
            except ValueError:
                raise OcrFormatError(
                    f"line {n}: non-numeric {name} field {raw!r}"
                ) from None

        try:
            conf = float(fields[index["conf"]])
        except ValueError:
            raise OcrFormatError(
                f"line {n}: non-numeric conf field {fields[index['conf']]!r}"
            ) from None
        try:
            tokens.append(
                OcrToken(
                    page=intfield("page_num"),
                    block=intfield("block_num"),
                    paragraph=intfield("par_num"),
                    line=intfield("line_num"),
                    word=intfield("word_num"),
                    left=intfield("left"),
                    top=intfield("top"),
                    width=intfield("width"),
                    height=intfield("height"),
                    confidence=conf,
                    text=word_text,
                )
            )
        except OcrFormatError as exc:
            raise OcrFormatError(f"line {n}: {exc}") from None
    return tokens


def paragraphs_from_tokens(tokens: Iterable[OcrToken]) -> list[ParagraphRecord]:
    """Group word boxes into per-page paragraphs with layout statistics."""
    by_par: dict[tuple[int, int, int], list[OcrToken]] = {}
    for token in tokens:
        by_par.setdefault((token.page, token.block, token.paragraph), []).append(token)

    records = []
    for key in sorted(by_par):
        page, block, par = key
        words = sorted(by_par[key], key=lambda t: (t.line, t.word))
        lines: list[LineBox] = []
        for line_id in sorted({w.line for w in words}):
            in_line = [w for w in words if w.line == line_id]
            lines.append(
                LineBox(
                    page=page,
                    left=min(w.left for w in in_line),
                    top=min(w.top for w in in_line),
                    right=max(w.right for w in in_line),
                    bottom=max(w.top + w.height for w in in_line),
                    text=" ".join(w.text for w in in_line),
                )
            )
        heights = np.repeat([w.height for w in words], [len(w.text) for w in words])
        n_chars = sum(len(w.text) for w in words)
        records.append(
            ParagraphRecord(
                record_id=f"p{page:04d}_b{block:03d}_p{par:03d}",
                first_page=page,
                last_page=page,
                lines=tuple(lines),
                text=" ".join(line.text for line in lines),
                char_height=float(np.median(heights)),
                char_width=sum(w.width for w in words) / n_chars,
            )
        )
    return records


# ---------------------------------------------------------------------------
# DBSCAN
# ---------------------------------------------------------------------------


def dbscan(points: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Density-based clustering; returns cluster ids with -1 for noise.

    A core point has at least ``min_pts`` neighbors within ``eps``
    (inclusive, counting itself).  Clusters are the connected components
    of the core points, numbered by first-visited order over ascending
    point index; border points join the cluster of their nearest core
    neighbor, which makes the partition independent of point order.
    """
    if eps <= 0:
        raise LabelcalError(f"eps must be > 0, got {eps}")
    if min_pts < 1:
        raise LabelcalError(f"min_pts must be >= 1, got {min_pts}")
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    m = points.shape[0]
    labels = np.full(m, -1, dtype=np.int64)
    if m == 0:
        return labels

    delta = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((delta**2).sum(axis=2))
    within = dist <= eps
    core = within.sum(axis=1) >= min_pts

    cluster = 0
    for start in range(m):
        if not core[start] or labels[start] != -1:
            continue
        queue = [start]
        labels[start] = cluster
        while queue:
            current = queue.pop()
            for neighbor in np.nonzero(within[current] & core)[0]:
                if labels[neighbor] == -1:
                    labels[neighbor] = cluster
                    queue.append(neighbor)
        cluster += 1

    border = ~core
    for i in np.nonzero(border)[0]:
        reachable = np.nonzero(within[i] & core)[0]
        if reachable.size:
            labels[i] = labels[reachable[np.argmin(dist[i, reachable])]]
    return labels


def _k_distance_eps(features: np.ndarray, min_pts: int) -> float:
    """k-distance heuristic: eps at the largest jump of sorted k-distances."""
    m = features.shape[0]
    k = min(min_pts, m) - 1  # distance to the min_pts'th point counting itself
    delta = features[:, None, :] - features[None, :, :]
    dist = np.sort(np.sqrt((delta**2).sum(axis=2)), axis=1)
    kd = np.sort(dist[:, k] if k >= 0 else np.zeros(m))
    if kd.size < 2 or kd[-1] == 0.0:
        return 1.0
    gaps = np.diff(kd)
    j = int(np.argmax(gaps))
    if gaps[j] == 0.0:
        return float(kd[-1]) * 1.001
    return float((kd[j] + kd[j + 1]) / 2.0)


def classify_paragraphs(
    paragraphs: Sequence[ParagraphRecord],
    eps: float | None = None,
    min_pts: int = 3,
) -> list[str]:
    """Paragraph classes from clustering (char height, char width).

    The cluster with the largest total text mass is the body; remaining
    clusters become footnote (smaller char height than the body) or
    heading (larger), extra clusters get numbered auxiliary names, and
    DBSCAN noise maps to "noise".
    """
    if not paragraphs:
        raise LabelcalError("classify_paragraphs needs at least one paragraph")
    features = np.array([[p.char_height, p.char_width] for p in paragraphs])
    std = features.std(axis=0)
    std[std == 0.0] = 1.0
    features = (features - features.mean(axis=0)) / std
    if eps is None:
        eps = _k_distance_eps(features, min_pts)
    ids = dbscan(features, eps, min_pts)

    clusters = [c for c in np.unique(ids) if c != -1]
    mass = {
        c: sum(len(p.text) for p, i in zip(paragraphs, ids) if i == c)
        for c in clusters
    }
    heights = {
        c: float(np.median([p.char_height for p, i in zip(paragraphs, ids) if i == c]))
        for c in clusters
    }
    names: dict[int, str] = {}
    if clusters:
        by_mass = sorted(clusters, key=lambda c: (-mass[c], c))
        body = by_mass[0]
        names[body] = "body"
        footnote_pool = [c for c in by_mass[1:] if heights[c] < heights[body]]
        heading_pool = [c for c in by_mass[1:] if heights[c] > heights[body]]
        if footnote_pool:
            names[footnote_pool[0]] = "footnote"
        if heading_pool:
            names[heading_pool[0]] = "heading"
        aux = 1
        for c in by_mass[1:]:
            if c not in names:
                names[c] = f"aux{aux}"
                aux += 1
    return ["noise" if i == -1 else names[i] for i in ids]


def with_classes(
    paragraphs: Sequence[ParagraphRecord], classes: Sequence[str]
) -> list[ParagraphRecord]:
    return [replace(p, cls=c) for p, c in zip(paragraphs, classes)]


# ---------------------------------------------------------------------------
# Cross-page merging
# ---------------------------------------------------------------------------


def body_margins(paragraphs: Sequence[ParagraphRecord]) -> tuple[float, float] | None:
    """Page body margins: modal (2px-binned) line left edge, 95th
    percentile of line right edges.  None when the page has no body."""
    lines = [l for p in paragraphs if p.cls == "body" for l in p.lines]
    if not lines:
        return None
    lefts = np.array([l.left for l in lines], dtype=np.float64)
    bins = np.floor(lefts / 2.0).astype(np.int64)
    modal = min(
        np.unique(bins), key=lambda b: (-(bins == b).sum(), b)
    )
    left = float(lefts[bins == modal].mean())
    right = float(np.percentile([l.right for l in lines], 95))
    return left, right


def _join(a: ParagraphRecord, b: ParagraphRecord) -> ParagraphRecord:
    chars_a, chars_b = len(a.text), len(b.text)
    total = max(chars_a + chars_b, 1)
    return ParagraphRecord(
        record_id=a.record_id,
        first_page=a.first_page,
        last_page=b.last_page,
        lines=a.lines + b.lines,
        text=a.text + " " + b.text,
        cls="body",
        char_height=(a.char_height * chars_a + b.char_height * chars_b) / total,
        char_width=(a.char_width * chars_a + b.char_width * chars_b) / total,
    )


def merge_decision(
    last: ParagraphRecord,
    first: ParagraphRecord,
    left_page_margins: tuple[float, float],
    right_page_margins: tuple[float, float],
    mode: str = "conjunctive",
) -> bool:
    """Should the page-final paragraph continue into the page-initial one?

    Cue (a): the final line reaches the body right margin (within 1.5
    mean char widths).  Cue (b): the next page's first line is not
    indented beyond the body left margin by more than 1 mean char width.
    Both paragraphs must be body class; "conjunctive" needs both cues,
    "disjunctive" accepts either.
    """
    if last.cls != "body" or first.cls != "body":
        return False
    _, right_margin = left_page_margins
    left_margin, _ = right_page_margins
    reaches_right = (
        last.lines[-1].right >= right_margin - RIGHT_TOL_CHAR_WIDTHS * last.char_width
    )
    not_indented = (
        first.lines[0].left <= left_margin + INDENT_TOL_CHAR_WIDTHS * first.char_width
    )
    if mode == "conjunctive":
        return reaches_right and not_indented
    if mode == "disjunctive":
        return reaches_right or not_indented
    raise LabelcalError(f"unknown merge mode {mode!r}")


def merge_cross_page(
    pages: Sequence[Sequence[ParagraphRecord]], mode: str = "conjunctive"
) -> list[ParagraphRecord]:
    """Merge paragraphs across consecutive page boundaries.

    One rule application joins at most one boundary, but chains are
    allowed: a paragraph can span three pages via two merges.  Pages
    without body paragraphs are passed through with a warning and never
    merged across.
    """
    merged: list[ParagraphRecord] = []
    margins: list[tuple[float, float] | None] = []
    for n, page in enumerate(pages):
        m = body_margins(page)
        if m is None:
            warnings.warn(f"page index {n}: no body paragraphs, not merging across")
        margins.append(m)

    for n, page in enumerate(pages):
        page = list(page)
        if (
            n > 0
            and page
            and merged
            and margins[n - 1] is not None
            and margins[n] is not None
            and merged[-1].last_page == pages[n - 1][-1].last_page
            and merge_decision(merged[-1], page[0], margins[n - 1], margins[n], mode)
        ):
            merged[-1] = _join(merged[-1], page.pop(0))
        merged.extend(page)
    return merged


# ---------------------------------------------------------------------------
# Quote matching
# ---------------------------------------------------------------------------


def bow_tokens(text: str) -> list[str]:
    """Lowercased maximal alphanumeric runs."""
    return [t.lower() for t in _TOKEN_RE.findall(text)]


def bow_match(quote: str, paragraphs: Sequence[str]) -> tuple[int, float]:
    """Best paragraph for a quote under bag-of-words cosine distance.

    Distance is 1 - cosine similarity of token-count vectors; ties go to
    the lowest index.  A paragraph with no tokens is at distance 1.
    """
    if not paragraphs:
        raise LabelcalError("bow_match needs at least one paragraph")
    quote_counts = Counter(bow_tokens(quote))
    if not quote_counts:
        raise LabelcalError("quote contains no alphanumeric tokens")
    q_norm = np.sqrt(sum(v * v for v in quote_counts.values()))

    best_index, best_distance = 0, np.inf
    for i, text in enumerate(paragraphs):
        counts = Counter(bow_tokens(text))
        norm = np.sqrt(sum(v * v for v in counts.values()))
        if norm == 0.0:
            distance = 1.0
        else:
            dot = sum(quote_counts[t] * c for t, c in counts.items())
            distance = max(0.0, 1.0 - dot / (q_norm * norm))
        if distance < best_distance:
            best_index, best_distance = i, distance
    return best_index, float(best_distance)
