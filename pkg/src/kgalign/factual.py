"""Attention-based factual component.

Every attribute type of a KG has a trainable embedding (one table per KG, no
weight sharing). For an entity with attribute triples ``(e, a_i, u_i)`` the
query rows are the embeddings of the ``a_i``, the keys are all attribute-type
embeddings of that KG, and each triple's weight is the softmax entry of its
own type, renormalized over the entity's triples. The entity vector is the
weighted sum of the (frozen) literal embeddings. Training minimises the
margin-based contrastive loss over matched and corrupted pairs.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist

from .encoder import DEFAULT_DIM, VectorTable, encode
from .errors import KGAlignError, TrainingError
from .kg import KnowledgeGraph
from .simmat import SimilarityMatrix
from .training import EarlyStopping, batches, hits1_from_scores

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


class NoFactualEvidence(KGAlignError):
    """The entity has no attribute triples."""


@dataclass(frozen=True)
class FactualConfig:
    alpha: float = 0.8
    lambda_margin: float = 3.0
    learning_rate: float = 5e-5
    batch_size: int = 24
    negatives_per_positive: int = 2
    truncation_fraction: float = 0.1
    max_epochs: int = 200
    min_epochs: int = 5
    patience: int = 3
    eval_every: int = 5

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.lambda_margin <= 0:
            raise ValueError("lambda_margin must be positive")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.batch_size < 1 or self.eval_every < 1 or self.max_epochs < 0:
            raise ValueError("batch_size, eval_every must be >= 1 and max_epochs >= 0")


@dataclass
class FactualParams:
    """Trainable attribute-type tables for both KGs plus frozen literal vectors."""

    attr_type_embeds_kg1: np.ndarray
    attr_type_embeds_kg2: np.ndarray
    attributes_kg1: tuple
    attributes_kg2: tuple
    literals: tuple
    value_embeds: np.ndarray
    _literal_index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self._literal_index = {v: i for i, v in enumerate(self.literals)}

    @property
    def dim(self) -> int:
        return self.value_embeds.shape[1]

    def type_embeds(self, kg_index: int) -> np.ndarray:
        return self.attr_type_embeds_kg1 if kg_index == 1 else self.attr_type_embeds_kg2

    def value_vector(self, literal: str) -> np.ndarray:
        return self.value_embeds[self._literal_index[literal]]

    def copy(self) -> "FactualParams":
        return replace(
            self,
            attr_type_embeds_kg1=self.attr_type_embeds_kg1.copy(),
            attr_type_embeds_kg2=self.attr_type_embeds_kg2.copy(),
        )


def init_factual_params(
    kg1: KnowledgeGraph,
    kg2: KnowledgeGraph,
    dim: int = DEFAULT_DIM,
    table: Optional[VectorTable] = None,
) -> FactualParams:
    """Attribute types start from their encoded labels; literals are encoded once."""
    literals = tuple(sorted(kg1.literals | kg2.literals))
    values = np.zeros((len(literals), dim))
    for i, lit in enumerate(literals):
        values[i] = encode(lit, table, dim)
    p1 = np.array([encode(a, table, dim) for a in kg1.attributes]).reshape(len(kg1.attributes), dim)
    p2 = np.array([encode(a, table, dim) for a in kg2.attributes]).reshape(len(kg2.attributes), dim)
    return FactualParams(p1, p2, kg1.attributes, kg2.attributes, literals, values)


# -- attention ---------------------------------------------------------------


def _softmax_rows(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


def type_attention(type_embeds: np.ndarray) -> np.ndarray:
    """Row-softmax of ``P P^T / sqrt(d)``: row ``c`` is the attention of a query of type ``c``."""
    d = type_embeds.shape[1]
    return _softmax_rows(type_embeds @ type_embeds.T / math.sqrt(d))


def attention_weights_for_types(type_embeds: np.ndarray, type_indices: Sequence[int]) -> np.ndarray:
    """Per-triple weights for an entity whose triples have ``type_indices``."""
    type_indices = np.asarray(type_indices, dtype=np.int64)
    if type_indices.size == 0:
        raise NoFactualEvidence("entity has no attribute triples")
    d = type_embeds.shape[1]
    q = type_embeds[type_indices]
    w = _softmax_rows(q @ type_embeds.T / math.sqrt(d))
    diag = w[np.arange(len(type_indices)), type_indices]
    return diag / diag.sum()


def attention_weights(entity: str, kg: KnowledgeGraph, params: FactualParams, kg_index: int) -> np.ndarray:
    """Weights of ``entity``'s attribute triples, in ``kg.attribute_triples_of`` order."""
    triples = kg.attribute_triples_of(entity)
    types = [kg.attribute_index[a] for _, a, _ in triples]
    return attention_weights_for_types(params.type_embeds(kg_index), types)


def entity_embedding(weights: Sequence[float], value_embeds: np.ndarray, dim: Optional[int] = None) -> np.ndarray:
    """Weighted sum of the entity's literal vectors; zero vector without evidence."""
    weights = np.asarray(weights, dtype=np.float64)
    value_embeds = np.asarray(value_embeds, dtype=np.float64)
    if weights.size == 0:
        if dim is None:
            dim = value_embeds.shape[1] if value_embeds.ndim == 2 else 0
        return np.zeros(dim)
    if value_embeds.ndim != 2 or value_embeds.shape[0] != weights.size:
        raise ValueError(f"{weights.size} weights for {value_embeds.shape[0]} value vectors")
    return weights @ value_embeds


# -- vectorised forward / backward over a whole KG --------------------------


class _AttrView:
    """Index arrays describing one KG's attribute triples."""

    def __init__(self, kg: KnowledgeGraph, params: FactualParams):
        self.n = len(kg.entities)
        triples = kg.attribute_triples
        self.ent = np.fromiter((kg.entity_index[h] for h, _, _ in triples), np.int64, len(triples))
        self.typ = np.fromiter((kg.attribute_index[a] for _, a, _ in triples), np.int64, len(triples))
        self.lit = np.fromiter((params._literal_index[v] for _, _, v in triples), np.int64, len(triples))
        self.has_evidence = np.bincount(self.ent, minlength=self.n) > 0


class _Forward:
    __slots__ = ("W", "diag", "w", "s", "a", "E")


def _forward(view: _AttrView, P: np.ndarray, U: np.ndarray) -> _Forward:
    f = _Forward()
    f.W = type_attention(P) if P.shape[0] else np.zeros((0, 0))
    f.diag = np.diagonal(f.W).copy()
    f.w = f.diag[view.typ]
    f.s = np.bincount(view.ent, weights=f.w, minlength=view.n)
    safe = np.where(f.s > 0, f.s, 1.0)
    f.a = f.w / safe[view.ent]
    agg = sp.csr_matrix((f.a, (view.ent, view.lit)), shape=(view.n, U.shape[0]))
    f.E = np.asarray(agg @ U)
    return f


def _backward(view: _AttrView, P: np.ndarray, U: np.ndarray, f: _Forward, dE: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. ``P`` given the gradient w.r.t. the entity matrix."""
    active = np.flatnonzero(np.any(dE != 0.0, axis=1))
    grad = np.zeros_like(P)
    if active.size == 0 or P.shape[0] == 0:
        return grad
    mask = np.isin(view.ent, active)
    ent, typ, lit = view.ent[mask], view.typ[mask], view.lit[mask]
    a = f.a[mask]
    gamma = np.einsum("td,td->t", dE[ent], U[lit])
    mean_gamma = np.bincount(ent, weights=a * gamma, minlength=view.n)
    s = f.s[ent]
    dw = (gamma - mean_gamma[ent]) / s
    d_diag = np.bincount(typ, weights=dw, minlength=P.shape[0])
    coef = d_diag * f.diag
    dS = coef[:, None] * (np.eye(P.shape[0]) - f.W)
    grad = (dS + dS.T) @ P / math.sqrt(P.shape[1])
    return grad


def factual_embeddings(params: FactualParams, kg1: KnowledgeGraph, kg2: KnowledgeGraph):
    """Entity matrices for both KGs and their evidence masks."""
    v1, v2 = _AttrView(kg1, params), _AttrView(kg2, params)
    f1 = _forward(v1, params.attr_type_embeds_kg1, params.value_embeds)
    f2 = _forward(v2, params.attr_type_embeds_kg2, params.value_embeds)
    return f1.E, f2.E, v1.has_evidence, v2.has_evidence


# -- loss ----------------------------------------------------------------------


def contrastive_loss(pos_dist, neg_dist, cfg: FactualConfig = FactualConfig()) -> float:
    """``(1 - alpha) * sum(d_pos) + alpha * sum(max(0, lambda - d_neg))``."""
    pos = np.asarray(pos_dist, dtype=np.float64)
    neg = np.asarray(neg_dist, dtype=np.float64)
    return float(
        (1.0 - cfg.alpha) * pos.sum() + cfg.alpha * np.maximum(0.0, cfg.lambda_margin - neg).sum()
    )


def _pair_loss_grad(E1, E2, pos, neg, alpha, margin):
    """Loss and gradients w.r.t. E1, E2 for index pairs ``pos`` and ``neg`` (k x 2)."""
    dE1 = np.zeros_like(E1)
    dE2 = np.zeros_like(E2)
    loss = 0.0
    for pairs, is_pos in ((pos, True), (neg, False)):
        if len(pairs) == 0:
            continue
        i, j = pairs[:, 0], pairs[:, 1]
        diff = E1[i] - E2[j]
        d = np.sqrt(np.einsum("kd,kd->k", diff, diff))
        if is_pos:
            loss += (1.0 - alpha) * d.sum()
            coef = np.full_like(d, 1.0 - alpha)
        else:
            slack = margin - d
            loss += alpha * np.maximum(0.0, slack).sum()
            coef = np.where(slack > 0, -alpha, 0.0)
        unit = np.divide(diff, d[:, None], out=np.zeros_like(diff), where=d[:, None] > 0)
        g = coef[:, None] * unit
        np.add.at(dE1, i, g)
        np.add.at(dE2, j, -g)
    return loss, dE1, dE2


def factual_loss_and_grad(
    params: FactualParams,
    kg1: KnowledgeGraph,
    kg2: KnowledgeGraph,
    pos: np.ndarray,
    neg: np.ndarray,
    cfg: FactualConfig = FactualConfig(),
    views=None,
):
    """Contrastive loss over index pairs and its gradient w.r.t. both type tables."""
    v1, v2 = views or (_AttrView(kg1, params), _AttrView(kg2, params))
    U = params.value_embeds
    P1, P2 = params.attr_type_embeds_kg1, params.attr_type_embeds_kg2
    f1, f2 = _forward(v1, P1, U), _forward(v2, P2, U)
    pos = np.asarray(pos, dtype=np.int64).reshape(-1, 2)
    neg = np.asarray(neg, dtype=np.int64).reshape(-1, 2)
    loss, dE1, dE2 = _pair_loss_grad(f1.E, f2.E, pos, neg, cfg.alpha, cfg.lambda_margin)
    return loss, _backward(v1, P1, U, f1, dE1), _backward(v2, P2, U, f2, dE2)


# -- negative sampling ---------------------------------------------------------


def _truncated_windows(E, anchors, exclude, size, chunk=512):
    """For each anchor row, the ``size`` nearest rows of ``E`` outside ``exclude[k]``."""
    n = E.shape[0]
    out = []
    for start in range(0, len(anchors), chunk):
        block = anchors[start : start + chunk]
        D = cdist(E[block], E)
        for r, k in enumerate(range(start, start + len(block))):
            row = D[r]
            row[list(exclude[k])] = np.inf
            feasible = n - len(exclude[k])
            m = min(size, feasible)
            if m <= 0:
                out.append(np.empty(0, dtype=np.int64))
                continue
            idx = np.argpartition(row, m - 1)[:m] if m < n else np.arange(n)
            idx = idx[np.isfinite(row[idx])]
            out.append(np.sort(idx))
    return out


def sample_negatives(
    positives: np.ndarray,
    emb1: np.ndarray,
    emb2: np.ndarray,
    cfg: FactualConfig = FactualConfig(),
    rng_seed=0,
    gold: Optional[Iterable[tuple[int, int]]] = None,
) -> np.ndarray:
    """Truncated negative sampling over index pairs.

    Negative ``k`` of a positive ``(i, j)`` corrupts the KG2 side when ``k``
    is even and the KG1 side when odd. The replacement is drawn uniformly
    from the ``ceil(truncation_fraction * |E|)`` entities nearest to the one
    being replaced, never forming a gold pair. Returns ``(n_pos * k, 2)``.
    """
    positives = np.asarray(positives, dtype=np.int64).reshape(-1, 2)
    k = cfg.negatives_per_positive
    if len(positives) == 0 or k == 0:
        return np.empty((0, 2), dtype=np.int64)
    n1, n2 = emb1.shape[0], emb2.shape[0]
    if n1 < 2 or n2 < 2:
        raise ValueError("negative sampling needs at least 2 entities per side")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    gold_pairs = {(int(i), int(j)) for i, j in positives}
    if gold is not None:
        gold_pairs |= {(int(i), int(j)) for i, j in gold}
    partners_of_1: dict[int, set] = {}
    partners_of_2: dict[int, set] = {}
    for i, j in gold_pairs:
        partners_of_1.setdefault(i, set()).add(j)
        partners_of_2.setdefault(j, set()).add(i)

    want = math.ceil(k / 2)
    size1 = max(math.ceil(cfg.truncation_fraction * n1), want)
    size2 = max(math.ceil(cfg.truncation_fraction * n2), want)
    if size1 > math.ceil(cfg.truncation_fraction * n1) or size2 > math.ceil(cfg.truncation_fraction * n2):
        logger.info("truncation window widened to %d / %d to fit %d negatives", size1, size2, k)

    # corrupt KG2 side: neighbors of e2 in KG2, excluding every gold partner of e1
    ex2 = [partners_of_1[int(i)] | {int(j)} for i, j in positives]
    win2 = _truncated_windows(emb2, positives[:, 1], ex2, size2)
    ex1 = [partners_of_2[int(j)] | {int(i)} for i, j in positives]
    win1 = _truncated_windows(emb1, positives[:, 0], ex1, size1)

    out = []
    for p, (i, j) in enumerate(positives):
        for r in range(k):
            if r % 2 == 0:
                window = win2[p]
                if window.size == 0:
                    continue
                out.append((i, int(window[rng.integers(window.size)])))
            else:
                window = win1[p]
                if window.size == 0:
                    continue
                out.append((int(window[rng.integers(window.size)]), j))
    return np.array(out, dtype=np.int64).reshape(-1, 2)


# -- training ------------------------------------------------------------------


def _index_pairs(pairs, kg1, kg2):
    return np.array([(kg1.entity_index[a], kg2.entity_index[b]) for a, b in pairs], dtype=np.int64).reshape(-1, 2)


def _val_hits1(E1, E2, val_idx):
    if len(val_idx) == 0:
        return 0.0
    scores = -cdist(E1[val_idx[:, 0]], E2[val_idx[:, 1]])
    return hits1_from_scores(scores)


@dataclass
class FactualTrainResult:
    params: FactualParams
    best_val_hits1: float
    epochs: int
    history: list = field(default_factory=list)


def train_factual(
    train: Sequence[tuple[str, str]],
    val: Sequence[tuple[str, str]],
    kg1: KnowledgeGraph,
    kg2: KnowledgeGraph,
    params: FactualParams,
    cfg: FactualConfig = FactualConfig(),
    rng_seed: int = 0,
    gold_pool: Optional[Iterable[tuple[str, str]]] = None,
) -> FactualTrainResult:
    """Mini-batch gradient descent on the contrastive loss with early stopping.

    Negatives are resampled every epoch from the current embeddings. Val H@1
    is measured before training and every ``eval_every`` epochs; the returned
    parameters are those of the best reading.
    """
    if len(train) == 0 or len(val) == 0:
        raise ValueError("train_factual needs nonempty train and val sets")
    rng = np.random.default_rng(rng_seed)
    params = params.copy()
    views = (_AttrView(kg1, params), _AttrView(kg2, params))
    train_idx = _index_pairs(train, kg1, kg2)
    val_idx = _index_pairs(val, kg1, kg2)
    gold_idx = _index_pairs(gold_pool, kg1, kg2) if gold_pool is not None else train_idx
    U = params.value_embeds

    def embed():
        return (
            _forward(views[0], params.attr_type_embeds_kg1, U).E,
            _forward(views[1], params.attr_type_embeds_kg2, U).E,
        )

    stopper = EarlyStopping(cfg.patience, cfg.min_epochs)
    E1, E2 = embed()
    stopper.update(_val_hits1(E1, E2, val_idx), 0)
    best = params.copy()
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        E1, E2 = embed()
        neg_all = sample_negatives(train_idx, E1, E2, cfg, rng, gold=gold_idx)
        k = cfg.negatives_per_positive
        per_pos = neg_all.reshape(len(train_idx), -1, 2) if len(neg_all) == len(train_idx) * k else None
        epoch_loss = 0.0
        for batch in batches(len(train_idx), cfg.batch_size, rng):
            pos = train_idx[batch]
            if per_pos is not None:
                neg = per_pos[batch].reshape(-1, 2)
            else:
                keep = np.isin(neg_all[:, 0], pos[:, 0]) | np.isin(neg_all[:, 1], pos[:, 1])
                neg = neg_all[keep]
            loss, g1, g2 = factual_loss_and_grad(params, kg1, kg2, pos, neg, cfg, views)
            if not np.isfinite(loss) or not (np.all(np.isfinite(g1)) and np.all(np.isfinite(g2))):
                raise TrainingError(
                    f"factual loss became non-finite at epoch {epoch} "
                    f"(learning_rate={cfg.learning_rate}); try a smaller learning rate"
                )
            params.attr_type_embeds_kg1 -= cfg.learning_rate * g1
            params.attr_type_embeds_kg2 -= cfg.learning_rate * g2
            epoch_loss += loss
        if epoch % cfg.eval_every == 0 or epoch == cfg.max_epochs:
            E1, E2 = embed()
            h1 = _val_hits1(E1, E2, val_idx)
            logger.debug("factual epoch %d loss %.4f val H@1 %.4f", epoch, epoch_loss, h1)
            if stopper.update(h1, epoch):
                best = params.copy()
            if stopper.should_stop(epoch):
                break
    return FactualTrainResult(best, stopper.best, epoch, stopper.history)


def factual_similarity(
    params: FactualParams,
    kg1: KnowledgeGraph,
    kg2: KnowledgeGraph,
    rows: Optional[Sequence[str]] = None,
    cols: Optional[Sequence[str]] = None,
) -> SimilarityMatrix:
    """Negated Euclidean distances between entity embeddings."""
    E1, E2, _, _ = factual_embeddings(params, kg1, kg2)
    rows = tuple(kg1.entities) if rows is None else tuple(rows)
    cols = tuple(kg2.entities) if cols is None else tuple(cols)
    ri = [kg1.entity_index[e] for e in rows]
    ci = [kg2.entity_index[e] for e in cols]
    scores = -cdist(E1[ri], E2[ci]) if ri and ci else np.zeros((len(ri), len(ci)))
    return SimilarityMatrix(scores, rows, cols, "factual")


def factual_evidence(kg: KnowledgeGraph) -> frozenset:
    """Entities that have at least one attribute triple."""
    return frozenset(h for h, _, _ in kg.attribute_triples)


# -- checkpoints ---------------------------------------------------------------


def save_factual_params(path: str, params: FactualParams) -> None:
    header = np.array(
        [CHECKPOINT_VERSION, params.dim, len(params.attributes_kg1), len(params.attributes_kg2)], dtype=np.int64
    )
    with open(path, "wb") as fh:
        np.savez(
            fh,
            header=header,
            attr_type_embeds_kg1=params.attr_type_embeds_kg1,
            attr_type_embeds_kg2=params.attr_type_embeds_kg2,
            attributes_kg1=np.array(params.attributes_kg1, dtype=str),
            attributes_kg2=np.array(params.attributes_kg2, dtype=str),
            literals=np.array(params.literals, dtype=str),
            value_embeds=params.value_embeds,
        )


def load_factual_params(path: str) -> FactualParams:
    with np.load(path, allow_pickle=False) as data:
        version, dim, n1, n2 = (int(x) for x in data["header"])
        if version != CHECKPOINT_VERSION:
            raise KGAlignError(f"unsupported factual checkpoint version {version}")
        params = FactualParams(
            data["attr_type_embeds_kg1"].reshape(n1, dim),
            data["attr_type_embeds_kg2"].reshape(n2, dim),
            tuple(data["attributes_kg1"].tolist()),
            tuple(data["attributes_kg2"].tolist()),
            tuple(data["literals"].tolist()),
            data["value_embeds"].reshape(-1, dim),
        )
    return params
