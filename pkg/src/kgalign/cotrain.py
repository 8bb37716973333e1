"""Semi-supervised co-training of the factual and structural components.

Each cycle trains the components in turn on the seed training pairs plus all
reciprocal matches harvested so far. A component's similarity matrix over the
still-unmatched test entities is CSLS-adjusted and passed through the
reciprocity filter; the surviving pairs become training data for the next
component and are final matches. Entities left over at the end get the
best-match suggestion of the component that ran last.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .encoder import DEFAULT_DIM, VectorTable
from .factual import (
    FactualConfig,
    factual_evidence,
    factual_similarity,
    init_factual_params,
    train_factual,
)
from .kg import KnowledgeGraph, SeedAlignment
from .matching import MatchPair, best_match, csls_adjust, reciprocity_filter
from .simmat import SimilarityMatrix
from .structural import StructuralConfig, make_structural_model

logger = logging.getLogger(__name__)

ORDERS = {
    "factual-first": ("factual", "structural"),
    "structural-first": ("structural", "factual"),
    "factual-only": ("factual",),
    "structural-only": ("structural",),
}


@dataclass(frozen=True)
class CotrainConfig:
    max_cycles: int = 4
    order: str = "factual-first"
    csls_k: int = 2
    stop_when_no_new_pairs: bool = True

    def __post_init__(self):
        if self.max_cycles < 1:
            raise ValueError("max_cycles must be >= 1")
        if self.order not in ORDERS:
            raise ValueError(f"order must be one of {sorted(ORDERS)}")
        if self.csls_k < 0:
            raise ValueError("csls_k must be >= 0 (0 disables CSLS)")


@dataclass
class MatchResult:
    reciprocal: list
    bipartite: list
    per_cycle_counts: list
    final_similarity: Optional[SimilarityMatrix]
    rankings: dict = field(default_factory=dict)
    trainings: list = field(default_factory=list)
    per_cycle_hits1: list = field(default_factory=list)

    @property
    def matches(self) -> list:
        return list(self.reciprocal) + list(self.bipartite)

    def as_dict(self) -> dict:
        """e1 -> e2 over all returned matches."""
        return {p.e1: p.e2 for p in self.matches}


def harvest_reciprocal(
    sm: SimilarityMatrix,
    already_matched: Iterable = (),
    test_scope: Optional[tuple[Iterable, Iterable]] = None,
    evidence: Optional[tuple[Iterable, Iterable]] = None,
    source: str = "reciprocal",
    cycle: int = 0,
) -> list:
    """Reciprocal pairs among unmatched (and, if given, in-scope and evidenced) entities.

    The matrix is first restricted to eligible rows and columns, so an
    excluded entity can never be anybody's top candidate.
    """
    matched = [(p.e1, p.e2) if isinstance(p, MatchPair) else tuple(p) for p in already_matched]
    taken1 = {a for a, _ in matched}
    taken2 = {b for _, b in matched}
    rows = [r for r in sm.row_ids if r not in taken1]
    cols = [c for c in sm.col_ids if c not in taken2]
    if test_scope is not None:
        s1, s2 = set(test_scope[0]), set(test_scope[1])
        rows = [r for r in rows if r in s1]
        cols = [c for c in cols if c in s2]
    if evidence is not None:
        ev1, ev2 = set(evidence[0]), set(evidence[1])
        rows = [r for r in rows if r in ev1]
        cols = [c for c in cols if c in ev2]
    if not rows or not cols:
        return []
    return reciprocity_filter(sm.restrict(rows, cols), source, cycle)


def _dedup(items):
    return list(dict.fromkeys(items))


def _hits1(reciprocal, bipartite_assign, gold):
    if not gold:
        return 0.0
    pred = {p.e1: p.e2 for p in reciprocal}
    pred.update({k: v for k, v in bipartite_assign.items() if k not in pred})
    return sum(pred.get(a) == b for a, b in gold.items()) / len(gold)


def run_cotraining(
    kg1: KnowledgeGraph,
    kg2: KnowledgeGraph,
    seed: SeedAlignment,
    fcfg: FactualConfig = FactualConfig(),
    scfg: StructuralConfig = StructuralConfig(),
    ccfg: CotrainConfig = CotrainConfig(),
    rng_seed: int = 0,
    table: Optional[VectorTable] = None,
    dim: int = DEFAULT_DIM,
    structural_init: Optional[np.ndarray] = None,
    top_k: Optional[int] = None,
) -> MatchResult:
    """Run the co-training loop and return reciprocal plus best-match pairs."""
    if not seed.train:
        raise ValueError("run_cotraining needs at least one training pair")
    test_rows = _dedup(a for a, _ in seed.test)
    test_cols = _dedup(b for _, b in seed.test)
    gold_test = dict(seed.test)
    params0 = init_factual_params(kg1, kg2, dim, table)
    fev = (factual_evidence(kg1), factual_evidence(kg2))

    reciprocal: list = []
    taken1: set = set()
    taken2: set = set()
    per_cycle_counts: list = []
    per_cycle_hits1: list = []
    trainings: list = []
    last_sm: Optional[SimilarityMatrix] = None
    components = ORDERS[ccfg.order]

    for cycle in range(1, ccfg.max_cycles + 1):
        counts = {}
        for comp_id, comp in enumerate(components):
            train_pairs = list(seed.train) + [(p.e1, p.e2) for p in reciprocal]
            if not train_pairs:
                raise ValueError("training set is empty")
            rows = [r for r in test_rows if r not in taken1]
            cols = [c for c in test_cols if c not in taken2]
            sub_seed = rng_seed * 7919 + cycle * 10 + comp_id
            if comp == "factual":
                res = train_factual(train_pairs, seed.val, kg1, kg2, params0, fcfg, sub_seed)
                sm = factual_similarity(res.params, kg1, kg2, rows, cols)
                evidence = fev
                epochs, val_h1 = res.epochs, res.best_val_hits1
            else:
                model = make_structural_model(scfg, sub_seed)
                model.train(train_pairs, seed.val, kg1, kg2, structural_init)
                sm = model.similarity(kg1, kg2, rows, cols)
                evidence = (model.evidence(kg1, 1), model.evidence(kg2, 2))
                epochs, val_h1 = model.epochs, model.best_val_hits1
            if ccfg.csls_k and min(sm.shape) >= ccfg.csls_k:
                sm = csls_adjust(sm, ccfg.csls_k)
            new = harvest_reciprocal(
                sm, [(p.e1, p.e2) for p in reciprocal], evidence=evidence,
                source=f"reciprocal-{comp}", cycle=cycle,
            )
            for p in new:
                taken1.add(p.e1)
                taken2.add(p.e2)
            reciprocal.extend(new)
            counts[comp] = len(new)
            trainings.append(
                {
                    "cycle": cycle,
                    "component": comp,
                    "train_size": len(train_pairs),
                    "epochs": int(epochs),
                    "best_val_hits1": float(val_h1),
                    "new_pairs": len(new),
                }
            )
            logger.info("cycle %d %s: %d new reciprocal pairs (val H@1 %.3f)", cycle, comp, len(new), val_h1)
            last_sm = sm
        per_cycle_counts.append(counts)
        interim = best_match(last_sm, taken1, taken2, top_k=1).assignment if last_sm is not None else {}
        per_cycle_hits1.append(_hits1(reciprocal, interim, gold_test))
        if ccfg.stop_when_no_new_pairs and all(v == 0 for v in counts.values()):
            break

    bm = best_match(last_sm, taken1, taken2, top_k=top_k)
    final_cycle = len(per_cycle_counts)
    bipartite = [MatchPair(e1, e2, "bipartite", final_cycle) for e1, e2 in bm.assignment.items()]
    return MatchResult(
        reciprocal=reciprocal,
        bipartite=bipartite,
        per_cycle_counts=per_cycle_counts,
        final_similarity=last_sm,
        rankings=bm.rankings,
        trainings=trainings,
        per_cycle_hits1=per_cycle_hits1,
    )


# alias under the method's published name
run_hybea = run_cotraining
