"""Plug-in structural components.

Any object with ``train``, ``similarity`` and ``evidence`` methods can drive
the co-training loop. Two reference models are provided, a translational
triple model and a mean-aggregation graph network, plus ``ExternalModel``
which serves a similarity matrix computed elsewhere.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence, runtime_checkable

import numpy as np
import scipy.sparse as sp

from .errors import KGAlignError, TrainingError
from .factual import FactualConfig, _pair_loss_grad, sample_negatives
from .kg import KnowledgeGraph
from .simmat import SimilarityMatrix, read_similarity, write_similarity
from .training import EarlyStopping, hits1_from_scores

logger = logging.getLogger(__name__)

VARIANTS = ("translational", "neighbor-agg", "external")


@dataclass(frozen=True)
class StructuralConfig:
    variant: str = "neighbor-agg"
    embed_dim: int = 100
    layers: int = 2
    dropout: float = 0.3
    learning_rate: float = 0.005
    max_epochs: int = 1200
    min_epochs: int = 10
    patience: int = 3
    eval_every: int = 50
    margin: float = 3.0
    alpha: float = 0.8
    negatives_per_positive: int = 2
    truncation_fraction: float = 0.1
    external_path: Optional[str] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown structural variant {self.variant!r}")
        if self.embed_dim < 1 or self.layers < 0 or self.max_epochs < 0 or self.eval_every < 1:
            raise ValueError("embed_dim/eval_every must be positive, layers/max_epochs nonnegative")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.variant == "external" and not self.external_path:
            raise ValueError("external variant needs external_path")


@runtime_checkable
class StructuralModel(Protocol):
    def train(self, train, val, kg1, kg2, init=None): ...

    def similarity(self, kg1, kg2, rows=None, cols=None) -> SimilarityMatrix: ...

    def evidence(self, kg: KnowledgeGraph, kg_index: int) -> frozenset: ...


def translational_score(h, r, t) -> float:
    """``-||h + r - t||``; zero when the triple is exactly satisfied."""
    h, r, t = (np.asarray(x, dtype=np.float64) for x in (h, r, t))
    if not h.shape == r.shape == t.shape:
        raise ValueError("h, r and t must have equal dimensions")
    return -float(np.linalg.norm(h + r - t))


def cosine_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity; rows with zero norm score 0 everywhere."""
    na = np.linalg.norm(A, axis=1, keepdims=True)
    nb = np.linalg.norm(B, axis=1, keepdims=True)
    An = np.divide(A, na, out=np.zeros_like(A, dtype=np.float64), where=na > 0)
    Bn = np.divide(B, nb, out=np.zeros_like(B, dtype=np.float64), where=nb > 0)
    return An @ Bn.T


class _Joint:
    """Both KGs as one node set; KG2 entity ``j`` is node ``n1 + j``.

    Entities of a training pair share one parameter row.
    """

    def __init__(self, kg1: KnowledgeGraph, kg2: KnowledgeGraph, train: Sequence[tuple[str, str]]):
        self.kg1, self.kg2 = kg1, kg2
        self.n1, self.n2 = len(kg1.entities), len(kg2.entities)
        self.n = self.n1 + self.n2
        self.row_of = np.arange(self.n)
        for a, b in train:
            self.row_of[self.n1 + kg2.entity_index[b]] = kg1.entity_index[a]

    def pairs(self, pairs) -> np.ndarray:
        return np.array(
            [(self.kg1.entity_index[a], self.kg2.entity_index[b]) for a, b in pairs], dtype=np.int64
        ).reshape(-1, 2)

    def mean_adjacency(self) -> sp.csr_matrix:
        """Row-normalized adjacency with self-loops (mean over closed neighborhoods)."""
        A = sp.block_diag([self.kg1.adjacency(), self.kg2.adjacency()], format="csr")
        A = A + sp.identity(self.n, format="csr")
        deg = np.asarray(A.sum(axis=1)).ravel()
        return sp.diags(1.0 / deg) @ A


def _init_table(n, dim, init, rng):
    if init is None:
        return rng.uniform(-0.01, 0.01, size=(n, dim))
    init = np.asarray(init, dtype=np.float64)
    if init.shape != (n, dim):
        raise ValueError(f"init must have shape {(n, dim)}, got {init.shape}")
    return init.copy()


def _val_hits1(Z1, Z2, val_idx):
    if len(val_idx) == 0:
        return 0.0
    return hits1_from_scores(cosine_matrix(Z1[val_idx[:, 0]], Z2[val_idx[:, 1]]))


class _TrainedMixin:
    best_val_hits1: float = 0.0
    epochs: int = 0
    history: list

    def _embeddings(self):
        raise NotImplementedError

    def similarity(self, kg1, kg2, rows=None, cols=None) -> SimilarityMatrix:
        Z1, Z2 = self._embeddings()
        rows = tuple(kg1.entities) if rows is None else tuple(rows)
        cols = tuple(kg2.entities) if cols is None else tuple(cols)
        ri = [kg1.entity_index[e] for e in rows]
        ci = [kg2.entity_index[e] for e in cols]
        return SimilarityMatrix(cosine_matrix(Z1[ri], Z2[ci]), rows, cols, "structural")

    def evidence(self, kg: KnowledgeGraph, kg_index: int) -> frozenset:
        if getattr(self, "_init_given", False):
            return frozenset(kg.entities)
        return frozenset(e for e, d in zip(kg.entities, kg.degree) if d > 0)

    def _informative(self, pairs, kg1, kg2, init):
        """Pairs whose entities both carry structural evidence.

        Without relation triples (and without an initial vector) an entity's
        embedding is its random start, so such pairs only add noise.
        """
        pairs = list(pairs)
        if init is not None:
            return pairs
        keep = [(a, b) for a, b in pairs if kg1.degree[kg1.entity_index[a]] > 0 and kg2.degree[kg2.entity_index[b]] > 0]
        if len(keep) < len(pairs):
            logger.debug("structural: %d of %d pairs lack relation triples, skipped", len(pairs) - len(keep), len(pairs))
        return keep or pairs


class NeighborAggModel(_TrainedMixin):
    """Mean-neighbor aggregation: ``H_l = tanh(Â H_{l-1} W_l)``.

    The output vector concatenates ``H_0 .. H_L``; training uses the same
    contrastive objective as the factual component on the output vectors.
    """

    def __init__(self, cfg: StructuralConfig = StructuralConfig(), rng_seed: int = 0):
        self.cfg = cfg
        self.rng_seed = rng_seed
        self.history = []

    def setup(self, kg1, kg2, train, init=None):
        self.joint = _Joint(kg1, kg2, train)
        self.A = self.joint.mean_adjacency()
        rng = np.random.default_rng(self.rng_seed)
        self._init_given = init is not None
        self.X = _init_table(self.joint.n, self.cfg.embed_dim, init, rng)
        self.Ws = [np.eye(self.cfg.embed_dim) for _ in range(self.cfg.layers)]
        self._rng = rng
        return self

    def forward(self, X=None, Ws=None, drop_mask=None):
        X = self.X if X is None else X
        Ws = self.Ws if Ws is None else Ws
        H = X[self.joint.row_of]
        if drop_mask is not None:
            H = H * drop_mask
        hs = [H]
        for W in Ws:
            H = np.tanh(self.A @ (H @ W))
            hs.append(H)
        return hs

    def loss_and_grad(self, pos, neg, X=None, Ws=None, drop_mask=None):
        """Contrastive loss on output vectors and gradients w.r.t. ``X`` and each ``W``."""
        X = self.X if X is None else X
        Ws = self.Ws if Ws is None else Ws
        hs = self.forward(X, Ws, drop_mask)
        Z = np.concatenate(hs, axis=1)
        n1 = self.joint.n1
        loss, d1, d2 = _pair_loss_grad(Z[:n1], Z[n1:], pos, neg, self.cfg.alpha, self.cfg.margin)
        dZ = np.vstack([d1, d2])
        d = self.cfg.embed_dim
        dHs = [dZ[:, l * d : (l + 1) * d].copy() for l in range(len(hs))]
        dWs = [None] * len(Ws)
        AT = self.A.T.tocsr()
        for l in range(len(Ws), 0, -1):
            dM = dHs[l] * (1.0 - hs[l] ** 2)
            AH = self.A @ hs[l - 1]
            dWs[l - 1] = AH.T @ dM
            dHs[l - 1] += (AT @ dM) @ Ws[l - 1].T
        dH0 = dHs[0] if drop_mask is None else dHs[0] * drop_mask
        dX = np.zeros_like(X)
        np.add.at(dX, self.joint.row_of, dH0)
        return loss, dX, dWs

    def _embeddings(self):
        Z = np.concatenate(self.forward(), axis=1)
        return Z[: self.joint.n1], Z[self.joint.n1 :]

    def train(self, train, val, kg1, kg2, init=None):
        cfg = self.cfg
        train = self._informative(train, kg1, kg2, init)
        val = self._informative(val, kg1, kg2, init)
        self.setup(kg1, kg2, train, init)
        rng = self._rng
        train_idx = self.joint.pairs(train)
        val_idx = self.joint.pairs(val)
        neg_cfg = FactualConfig(
            negatives_per_positive=cfg.negatives_per_positive, truncation_fraction=cfg.truncation_fraction
        )
        stopper = EarlyStopping(cfg.patience, cfg.min_epochs)
        stopper.update(_val_hits1(*self._embeddings(), val_idx), 0)
        best = (self.X.copy(), [W.copy() for W in self.Ws])
        epoch = 0
        for epoch in range(1, cfg.max_epochs + 1):
            Z1, Z2 = self._embeddings()
            neg = sample_negatives(train_idx, Z1, Z2, neg_cfg, rng)
            mask = None
            if cfg.dropout > 0:
                keep = rng.random((self.joint.n, cfg.embed_dim)) >= cfg.dropout
                mask = keep / (1.0 - cfg.dropout)
            loss, dX, dWs = self.loss_and_grad(train_idx, neg, drop_mask=mask)
            if not np.isfinite(loss) or not np.all(np.isfinite(dX)):
                raise TrainingError(
                    f"structural loss became non-finite at epoch {epoch} "
                    f"(learning_rate={cfg.learning_rate}); try a smaller learning rate"
                )
            self.X -= cfg.learning_rate * dX
            for W, dW in zip(self.Ws, dWs):
                W -= cfg.learning_rate * dW
            if epoch % cfg.eval_every == 0 or epoch == cfg.max_epochs:
                h1 = _val_hits1(*self._embeddings(), val_idx)
                logger.debug("neighbor-agg epoch %d loss %.4f val H@1 %.4f", epoch, loss, h1)
                if stopper.update(h1, epoch):
                    best = (self.X.copy(), [W.copy() for W in self.Ws])
                if stopper.should_stop(epoch):
                    break
        self.X, self.Ws = best
        self.best_val_hits1, self.epochs, self.history = stopper.best, epoch, stopper.history
        return self


class TranslationalModel(_TrainedMixin):
    """Translational embeddings trained with a margin ranking loss over triples.

    Relations of the two KGs are kept apart; entities of training pairs share
    a vector, which is what ties the two embedding spaces together.
    """

    def __init__(self, cfg: StructuralConfig = StructuralConfig(variant="translational"), rng_seed: int = 0):
        self.cfg = cfg
        self.rng_seed = rng_seed
        self.history = []

    def setup(self, kg1, kg2, train, init=None):
        self.joint = _Joint(kg1, kg2, train)
        rng = np.random.default_rng(self.rng_seed)
        self._init_given = init is not None
        self.X = _init_table(self.joint.n, self.cfg.embed_dim, init, rng)
        rels = [("1", r) for r in sorted(kg1.relations)] + [("2", r) for r in sorted(kg2.relations)]
        rel_index = {r: i for i, r in enumerate(rels)}
        self.R = rng.uniform(-0.01, 0.01, size=(len(rels), self.cfg.embed_dim))
        trip = []
        for h, r, t in kg1.relation_triples:
            trip.append((kg1.entity_index[h], rel_index[("1", r)], kg1.entity_index[t]))
        n1 = self.joint.n1
        for h, r, t in kg2.relation_triples:
            trip.append((n1 + kg2.entity_index[h], rel_index[("2", r)], n1 + kg2.entity_index[t]))
        self.triples = np.array(trip, dtype=np.int64).reshape(-1, 3)
        self._rng = rng
        return self

    def corrupt(self, rng):
        """Replace head or tail (coin flip) with a random entity of the same KG."""
        n1, n = self.joint.n1, self.joint.n
        trip = self.triples.copy()
        if len(trip) == 0:
            return trip
        in_kg2 = trip[:, 0] >= n1
        lo = np.where(in_kg2, n1, 0)
        hi = np.where(in_kg2, n, n1)
        repl = lo + (rng.random(len(trip)) * (hi - lo)).astype(np.int64)
        side = rng.random(len(trip)) < 0.5
        trip[side, 0] = repl[side]
        trip[~side, 2] = repl[~side]
        return trip

    def loss_and_grad(self, pos, neg, X=None, R=None):
        """Margin ranking loss ``sum max(0, margin + d(pos) - d(neg))`` and gradients."""
        X = self.X if X is None else X
        R = self.R if R is None else R
        E = X[self.joint.row_of]
        dE = np.zeros_like(E)
        dR = np.zeros_like(R)
        if len(pos) == 0:
            return 0.0, np.zeros_like(X), dR

        def dist(trip):
            diff = E[trip[:, 0]] + R[trip[:, 1]] - E[trip[:, 2]]
            d = np.linalg.norm(diff, axis=1)
            unit = np.divide(diff, d[:, None], out=np.zeros_like(diff), where=d[:, None] > 0)
            return d, unit

        dp, up = dist(pos)
        dn, un = dist(neg)
        slack = self.cfg.margin + dp - dn
        active = slack > 0
        loss = float(slack[active].sum())
        a = active.astype(np.float64)[:, None]
        for trip, unit, sign in ((pos, up, 1.0), (neg, un, -1.0)):
            g = sign * a * unit
            np.add.at(dE, trip[:, 0], g)
            np.add.at(dE, trip[:, 2], -g)
            np.add.at(dR, trip[:, 1], g)
        dX = np.zeros_like(X)
        np.add.at(dX, self.joint.row_of, dE)
        return loss, dX, dR

    def _embeddings(self):
        E = self.X[self.joint.row_of]
        return E[: self.joint.n1], E[self.joint.n1 :]

    def train(self, train, val, kg1, kg2, init=None):
        cfg = self.cfg
        val = self._informative(val, kg1, kg2, init)
        self.setup(kg1, kg2, train, init)
        rng = self._rng
        val_idx = self.joint.pairs(val)
        stopper = EarlyStopping(cfg.patience, cfg.min_epochs)
        stopper.update(_val_hits1(*self._embeddings(), val_idx), 0)
        best = (self.X.copy(), self.R.copy())
        epoch = 0
        for epoch in range(1, cfg.max_epochs + 1):
            neg = self.corrupt(rng)
            loss, dX, dR = self.loss_and_grad(self.triples, neg)
            if not np.isfinite(loss):
                raise TrainingError(
                    f"translational loss became non-finite at epoch {epoch} "
                    f"(learning_rate={cfg.learning_rate}); try a smaller learning rate"
                )
            self.X -= cfg.learning_rate * dX
            self.R -= cfg.learning_rate * dR
            norms = np.linalg.norm(self.X, axis=1, keepdims=True)
            np.divide(self.X, np.maximum(norms, 1.0), out=self.X)
            if epoch % cfg.eval_every == 0 or epoch == cfg.max_epochs:
                h1 = _val_hits1(*self._embeddings(), val_idx)
                if stopper.update(h1, epoch):
                    best = (self.X.copy(), self.R.copy())
                if stopper.should_stop(epoch):
                    break
        self.X, self.R = best
        self.best_val_hits1, self.epochs, self.history = stopper.best, epoch, stopper.history
        return self


class ExternalModel:
    """Serves a precomputed full ``|E1| x |E2|`` similarity matrix from a file."""

    def __init__(self, path: str):
        self.path = path
        self.best_val_hits1 = float("nan")
        self.epochs = 0
        self.history = []
        self._sm = None

    def train(self, train, val, kg1, kg2, init=None):
        self._sm = import_similarity(self.path, kg1, kg2)
        if len(val):
            sub = self._sm.restrict([a for a, _ in val], [b for _, b in val])
            self.best_val_hits1 = hits1_from_scores(sub.scores)
        return self

    def similarity(self, kg1, kg2, rows=None, cols=None) -> SimilarityMatrix:
        if self._sm is None:
            self._sm = import_similarity(self.path, kg1, kg2)
        rows = tuple(kg1.entities) if rows is None else tuple(rows)
        cols = tuple(kg2.entities) if cols is None else tuple(cols)
        return self._sm.restrict(rows, cols)

    def evidence(self, kg: KnowledgeGraph, kg_index: int) -> frozenset:
        return frozenset(kg.entities)


def make_structural_model(cfg: StructuralConfig, rng_seed: int = 0):
    if cfg.variant == "neighbor-agg":
        return NeighborAggModel(cfg, rng_seed)
    if cfg.variant == "translational":
        return TranslationalModel(cfg, rng_seed)
    return ExternalModel(cfg.external_path)


def train_structural(train, val, kg1, kg2, init=None, cfg: StructuralConfig = StructuralConfig(), rng_seed: int = 0):
    """Build the configured structural model and fit it on the seed pairs."""
    if len(train) == 0 or len(val) == 0:
        raise ValueError("train_structural needs nonempty train and val sets")
    return make_structural_model(cfg, rng_seed).train(train, val, kg1, kg2, init)


def structural_similarity(model, kg1, kg2, rows=None, cols=None) -> SimilarityMatrix:
    return model.similarity(kg1, kg2, rows, cols)


def import_similarity(path: str, kg1: Optional[KnowledgeGraph] = None, kg2: Optional[KnowledgeGraph] = None) -> SimilarityMatrix:
    """Read a ``rows cols`` + row-major text matrix; rows/cols follow KG entity order."""
    scores = read_similarity(path)
    if kg1 is not None and kg2 is not None:
        expected = (len(kg1.entities), len(kg2.entities))
        if scores.shape != expected:
            raise KGAlignError(f"imported matrix is {scores.shape[0]}x{scores.shape[1]}, KGs need {expected[0]}x{expected[1]}")
        return SimilarityMatrix(scores, kg1.entities, kg2.entities, "external")
    return SimilarityMatrix(scores, provenance="external")


def export_similarity(path: str, sm) -> None:
    write_similarity(path, sm)
