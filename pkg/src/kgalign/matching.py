"""Decision procedures on similarity matrices.

CSLS hub correction, the mutual-argmax reciprocity filter, greedy best-match
ranking and an optimal one-to-one assignment used as a reference.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

from .simmat import SimilarityMatrix

SOURCES = ("reciprocal-factual", "reciprocal-structural", "bipartite")

Matrix = Union[SimilarityMatrix, np.ndarray]


@dataclass(frozen=True, order=True)
class MatchPair:
    e1: object
    e2: object
    source: str = "bipartite"
    cycle: int = 0


def _as_sm(sm: Matrix) -> SimilarityMatrix:
    if isinstance(sm, SimilarityMatrix):
        return sm
    return SimilarityMatrix(np.asarray(sm, dtype=np.float64))


def _topk_mean(scores: np.ndarray, k: int, axis: int) -> np.ndarray:
    n = scores.shape[axis]
    part = np.partition(scores, n - k, axis=axis)
    top = part[n - k :, :] if axis == 0 else part[:, n - k :]
    return top.mean(axis=axis)


def csls_adjust(sm: Matrix, k: int = 2):
    """Cross-domain similarity local scaling.

    ``out[i, j] = 2 * s[i, j] - r1[i] - r2[j]`` where ``r1[i]`` is the mean of
    the ``k`` largest scores in row ``i`` and ``r2[j]`` the same for column
    ``j``. The candidate itself is part of its own neighborhood.

    Returns the same kind of object that was passed in.
    """
    wrapped = isinstance(sm, SimilarityMatrix)
    scores = sm.scores if wrapped else np.asarray(sm, dtype=np.float64)
    rows, cols = scores.shape
    if not isinstance(k, (int, np.integer)) or k < 1 or k > min(rows, cols):
        raise ValueError(f"csls k must be in [1, {min(rows, cols)}], got {k}")
    r1 = _topk_mean(scores, k, axis=1)
    r2 = _topk_mean(scores, k, axis=0)
    out = 2.0 * scores - r1[:, None] - r2[None, :]
    if wrapped:
        return sm.with_scores(out)
    return out


def reciprocity_filter(sm: Matrix, source: str = "reciprocal", cycle: int = 0) -> list[MatchPair]:
    """Pairs whose row and column are each other's argmax.

    Ties resolve to the lowest index, so the result is deterministic and
    injective on both sides. Pairs come back in row order.
    """
    sm = _as_sm(sm)
    scores = sm.scores
    if scores.size == 0:
        return []
    top_col = np.argmax(scores, axis=1)
    top_row = np.argmax(scores, axis=0)
    out = []
    for i, j in enumerate(top_col):
        if top_row[j] == i:
            out.append(MatchPair(sm.row_ids[i], sm.col_ids[j], source, cycle))
    return out


@dataclass(frozen=True)
class BestMatchResult:
    rankings: dict
    assignment: dict


def best_match(
    sm: Matrix,
    exclude_e1: Iterable = (),
    exclude_e2: Iterable = (),
    top_k: Optional[int] = None,
    chunk: int = 1024,
) -> BestMatchResult:
    """Rank candidates per remaining row and take the top one.

    Each row is ranked independently (many-to-one assignments allowed), by
    descending score with ties kept in column order. ``top_k`` truncates the
    stored rankings; the assignment is unaffected.
    """
    sm = _as_sm(sm)
    ex1, ex2 = set(exclude_e1), set(exclude_e2)
    row_idx = [i for i, r in enumerate(sm.row_ids) if r not in ex1]
    col_idx = np.array([j for j, c in enumerate(sm.col_ids) if c not in ex2], dtype=np.int64)
    col_ids = np.array(sm.col_ids, dtype=object)
    rankings, assignment = {}, {}
    for start in range(0, len(row_idx), chunk):
        block_rows = row_idx[start : start + chunk]
        if len(col_idx) == 0:
            for i in block_rows:
                rankings[sm.row_ids[i]] = []
            continue
        block = sm.scores[np.ix_(block_rows, col_idx)]
        order = np.argsort(-block, axis=1, kind="stable")
        if top_k is not None:
            order = order[:, :top_k]
        for r, i in enumerate(block_rows):
            ranked = col_ids[col_idx[order[r]]].tolist()
            rankings[sm.row_ids[i]] = ranked
            assignment[sm.row_ids[i]] = ranked[0]
    return BestMatchResult(rankings, assignment)


def hungarian_assign(sm: Matrix) -> tuple[list[tuple], float]:
    """Maximum-total one-to-one assignment (rectangular matrices allowed).

    Returns the matched ``(row_id, col_id)`` pairs and their total score.
    """
    sm = _as_sm(sm)
    rows, cols = linear_sum_assignment(sm.scores, maximize=True)
    pairs = [(sm.row_ids[i], sm.col_ids[j]) for i, j in zip(rows, cols)]
    return pairs, float(sm.scores[rows, cols].sum())
