"""Dense similarity matrices between two entity sets, and their text format."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ParseError


@dataclass(frozen=True)
class SimilarityMatrix:
    """Scores between ``row_ids`` (KG1 entities) and ``col_ids`` (KG2 entities).

    Larger is more similar. ``provenance`` names the component that produced it.
    """

    scores: np.ndarray
    row_ids: tuple = ()
    col_ids: tuple = ()
    provenance: str = "unknown"
    _row_pos: dict = field(default=None, repr=False, compare=False)
    _col_pos: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.ndim != 2:
            raise ValueError("scores must be a 2-D array")
        if not np.all(np.isfinite(scores)):
            raise ValueError("similarity scores must be finite")
        rows = tuple(self.row_ids) if self.row_ids else tuple(range(scores.shape[0]))
        cols = tuple(self.col_ids) if self.col_ids else tuple(range(scores.shape[1]))
        if len(rows) != scores.shape[0] or len(cols) != scores.shape[1]:
            raise ValueError(
                f"id lists ({len(rows)}, {len(cols)}) do not match scores shape {scores.shape}"
            )
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "row_ids", rows)
        object.__setattr__(self, "col_ids", cols)
        object.__setattr__(self, "_row_pos", {r: i for i, r in enumerate(rows)})
        object.__setattr__(self, "_col_pos", {c: j for j, c in enumerate(cols)})

    @property
    def shape(self):
        return self.scores.shape

    def row_position(self, entity) -> int:
        return self._row_pos[entity]

    def col_position(self, entity) -> int:
        return self._col_pos[entity]

    def restrict(self, rows: Sequence, cols: Sequence) -> "SimilarityMatrix":
        """Sub-matrix over the given row and column ids (in the given order)."""
        ri = [self._row_pos[r] for r in rows]
        ci = [self._col_pos[c] for c in cols]
        return SimilarityMatrix(self.scores[np.ix_(ri, ci)], tuple(rows), tuple(cols), self.provenance)

    def with_scores(self, scores: np.ndarray, provenance: str | None = None) -> "SimilarityMatrix":
        return SimilarityMatrix(scores, self.row_ids, self.col_ids, provenance or self.provenance)

    @property
    def T(self) -> "SimilarityMatrix":
        return SimilarityMatrix(self.scores.T, self.col_ids, self.row_ids, self.provenance)


def write_similarity(path: str, sm) -> None:
    """Write ``rows cols`` then row-major values with 17 significant digits."""
    scores = sm.scores if isinstance(sm, SimilarityMatrix) else np.asarray(sm, dtype=np.float64)
    rows, cols = scores.shape
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{rows} {cols}\n")
        for row in scores:
            fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def read_similarity(path: str) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    lines = text.split("\n")
    header = lines[0].split() if lines else []
    if len(header) != 2:
        raise ParseError("header must be 'rows cols'", path=path, line=1)
    try:
        rows, cols = int(header[0]), int(header[1])
    except ValueError:
        raise ParseError("header must contain two integers", path=path, line=1) from None
    if rows < 0 or cols < 0:
        raise ParseError("negative matrix dimension", path=path, line=1)
    tokens = "\n".join(lines[1:]).split()
    if len(tokens) != rows * cols:
        raise ParseError(f"header announces {rows}x{cols} = {rows * cols} values, found {len(tokens)}", path=path)
    try:
        values = np.array([float(t) for t in tokens], dtype=np.float64)
    except ValueError:
        raise ParseError("non-numeric matrix entry", path=path) from None
    if not np.all(np.isfinite(values)):
        raise ParseError("matrix contains non-finite values", path=path)
    return values.reshape(rows, cols)
