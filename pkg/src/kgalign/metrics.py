"""Evaluation measures and dataset heterogeneity metrics."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .kg import KnowledgeGraph

logger = logging.getLogger(__name__)

DEFAULT_NAME_ATTRIBUTES = (
    "name",
    "label",
    "rdfs:label",
    "skos:prefLabel",
    "foaf:name",
    "http://www.w3.org/2000/01/rdf-schema#label",
    "http://www.w3.org/2004/02/skos/core#prefLabel",
    "http://xmlns.com/foaf/0.1/name",
)


# -- ranking measures ------------------------------------------------------------


def gold_ranks(rankings: Mapping, gold: Mapping, reciprocal: Optional[Mapping] = None) -> list:
    """1-based rank of each gold target, or ``None`` for a miss.

    An entity decided by the reciprocity filter ranks its match first: rank 1
    if that match is gold, a miss otherwise.
    """
    reciprocal = reciprocal or {}
    ranks = []
    missing = 0
    for e1, e2 in gold.items():
        if e1 in reciprocal:
            ranks.append(1 if reciprocal[e1] == e2 else None)
            continue
        ranking = rankings.get(e1)
        if ranking is None:
            missing += 1
            ranks.append(None)
            continue
        try:
            ranks.append(list(ranking).index(e2) + 1)
        except ValueError:
            ranks.append(None)
    if missing:
        logger.info("%d gold entities have no ranking; counted as misses", missing)
    return ranks


def hits_at_k(rankings: Mapping, gold: Mapping, k: int, reciprocal: Optional[Mapping] = None) -> float:
    """Fraction of gold pairs whose target is ranked within the top ``k``."""
    if not gold:
        return 0.0
    ranks = gold_ranks(rankings, gold, reciprocal)
    return sum(r is not None and r <= k for r in ranks) / len(ranks)


def mrr(rankings: Mapping, gold: Mapping, reciprocal: Optional[Mapping] = None) -> float:
    """Mean reciprocal rank of the gold targets (misses contribute 0)."""
    if not gold:
        return 0.0
    ranks = gold_ranks(rankings, gold, reciprocal)
    return sum(1.0 / r for r in ranks if r is not None) / len(ranks)


# -- reciprocity filter quality ----------------------------------------------------


def _prf(correct: int, harvested: int, test_size: int) -> dict:
    precision = correct / harvested if harvested else 1.0
    recall = correct / test_size if test_size else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return {
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "correct": correct,
        "harvested": harvested,
        "zero_support": harvested == 0,
    }


def cumulative_prf(harvests: Mapping, gold, test_size: int, order: Optional[Sequence[str]] = None) -> dict:
    """Cumulative precision / recall / F1 of each component's reciprocal pairs.

    ``harvests`` maps component name to either a flat list of pairs or a list
    of per-cycle lists. With no harvest, precision is reported as 1.0 and
    ``zero_support`` is set. The second component in ``order`` also gets
    ``max_recall = 1 - recall(first component)``.
    """
    gold_set = {tuple(p) for p in (gold.items() if isinstance(gold, Mapping) else gold)}
    order = list(order) if order is not None else list(harvests)
    report = {}
    for comp in order:
        cycles = list(harvests.get(comp, []))
        if cycles and not isinstance(cycles[0], (list, set, frozenset)):
            cycles = [cycles]
        flat = [_pair(p) for cyc in cycles for p in cyc]
        correct = sum(p in gold_set for p in flat)
        entry = _prf(correct, len(flat), test_size)
        entry["max_recall"] = 1.0
        entry["per_cycle"] = [
            _prf(sum(_pair(p) in gold_set for p in cyc), len(cyc), test_size) for cyc in cycles
        ]
        report[comp] = entry
    if len(order) >= 2:
        report[order[1]]["max_recall"] = 1.0 - report[order[0]]["recall"]
    return report


def _pair(p):
    if hasattr(p, "e1"):
        return (p.e1, p.e2)
    return tuple(p)


@dataclass
class EvalReport:
    hits: dict
    mrr: float
    cumulative: dict = field(default_factory=dict)

    def flat(self) -> dict:
        """``h1, h10, mrr`` plus ``pr/re/f1`` per component."""
        out = {f"h{k}": v for k, v in sorted(self.hits.items())}
        out["mrr"] = self.mrr
        for comp, entry in self.cumulative.items():
            out[f"pr_{comp}"] = entry["precision"]
            out[f"re_{comp}"] = entry["recall"]
            out[f"f1_{comp}"] = entry["f1"]
        return out


def evaluate(result, gold_test: Mapping, ks=(1, 10), order: Optional[Sequence[str]] = None) -> EvalReport:
    """Score a co-training result against the gold test pairs."""
    gold = dict(gold_test)
    reciprocal = {p.e1: p.e2 for p in result.reciprocal}
    rankings = dict(result.rankings)
    hits = {k: hits_at_k(rankings, gold, k, reciprocal) for k in ks}
    by_comp: dict = {}
    for p in result.reciprocal:
        comp = p.source.replace("reciprocal-", "")
        by_comp.setdefault(comp, {}).setdefault(p.cycle, []).append(p)
    if order is None:
        order = [t["component"] for t in result.trainings[:2]] or list(by_comp)
        order = list(dict.fromkeys(order))
    harvests = {c: [by_comp.get(c, {})[k] for k in sorted(by_comp.get(c, {}))] for c in order}
    cumulative = cumulative_prf(harvests, gold, len(gold), order)
    return EvalReport(hits, mrr(rankings, gold, reciprocal), cumulative)


# -- significance ------------------------------------------------------------------


def critical_distance(q_alpha: float, k: int, n: int) -> float:
    """Critical difference ``q_alpha * sqrt(k (k + 1) / (6 n))`` of mean ranks."""
    return q_alpha * math.sqrt(k * (k + 1) / (6.0 * n))


def average_ranks(scores: Mapping[str, Mapping[str, float]]) -> dict:
    """Mean rank per method over datasets (1 = best score; ties share the mean rank)."""
    methods = list(scores)
    if not methods:
        return {}
    datasets = list(dict.fromkeys(d for m in methods for d in scores[m]))
    table = np.empty((len(methods), len(datasets)))
    for i, m in enumerate(methods):
        for j, d in enumerate(datasets):
            if d not in scores[m] or scores[m][d] is None:
                raise ValueError(f"missing score for method {m!r} on dataset {d!r}")
            table[i, j] = scores[m][d]
    ranks = np.column_stack([rankdata(-table[:, j], method="average") for j in range(len(datasets))])
    return {m: float(ranks[i].mean()) for i, m in enumerate(methods)}


# -- heterogeneity -----------------------------------------------------------------


def levenshtein_distance(a: str, b: str) -> int:
    """Unit-cost edit distance over code points (two-row dynamic programme)."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def lev_index(a: str, b: str) -> float:
    """``(|a| + |b| - lev(a, b)) / (|a| + |b|)``; two empty strings score 1."""
    total = len(a) + len(b)
    if total == 0:
        return 1.0
    return (total - levenshtein_distance(a, b)) / total


def _check_matches(matches):
    matches = [tuple(p) for p in matches]
    if not matches:
        raise ValueError("at least one matched pair is required")
    return matches


def jaccard_matched_neighbors(kg1: KnowledgeGraph, kg2: KnowledgeGraph, matches) -> float:
    """Mean Jaccard overlap of aligned neighborhoods over the matched pairs."""
    matches = _check_matches(matches)
    partner: dict = {}
    for a, b in matches:
        partner.setdefault(a, set()).add(b)
    total = 0.0
    for u, v in matches:
        nu, nv = kg1.neighbors(u), kg2.neighbors(v)
        shared = sum(len(partner.get(x, set()) & nv) for x in nu)
        denom = len(nu) + len(nv) - shared
        total += shared / denom if denom > 0 else 0.0
    return total / len(matches)


def ldmad(kg1: KnowledgeGraph, kg2: KnowledgeGraph, matches) -> float:
    """Mean absolute difference of neighborhood sizes over the matched pairs."""
    matches = _check_matches(matches)
    return sum(abs(len(kg1.neighbors(u)) - len(kg2.neighbors(v))) for u, v in matches) / len(matches)


def _is_name_attribute(attr: str, name_attrs: Iterable[str]) -> bool:
    for n in name_attrs:
        if attr == n or attr.endswith("/" + n) or attr.endswith("#" + n):
            return True
    return False


def entity_names(kg: KnowledgeGraph, name_attrs: Iterable[str] = DEFAULT_NAME_ATTRIBUTES) -> dict:
    """Entity -> list of name literals under the configured name attributes."""
    name_attrs = tuple(name_attrs)
    names: dict = {}
    for e, a, v in kg.attribute_triples:
        if _is_name_attribute(a, name_attrs):
            names.setdefault(e, []).append(v)
    return names


def lev_names(kg1, kg2, matches, name_attrs=DEFAULT_NAME_ATTRIBUTES) -> float:
    """Mean best name similarity over matched pairs where both sides are named (NaN if none)."""
    n1, n2 = entity_names(kg1, name_attrs), entity_names(kg2, name_attrs)
    scores = [
        max(lev_index(a, b) for a in n1[u] for b in n2[v]) for u, v in matches if u in n1 and v in n2
    ]
    return float(np.mean(scores)) if scores else float("nan")


def lev_attributes(kg1, kg2, matches) -> float:
    """Greedy literal similarity: each literal of ``u`` takes its best match among ``v``'s."""
    scores = []
    for u, v in matches:
        lu = [lit for _, _, lit in kg1.attribute_triples_of(u)]
        lv = [lit for _, _, lit in kg2.attribute_triples_of(v)]
        if not lu or not lv:
            continue
        scores.append(float(np.mean([max(lev_index(a, b) for b in lv) for a in lu])))
    return float(np.mean(scores)) if scores else float("nan")


@dataclass
class HeterogeneityReport:
    jaccard: float
    ldmad: float
    mean_degree_1: float
    mean_degree_2: float
    lev_names: float
    lev_attrs: float
    nameless_1: int = 0
    nameless_2: int = 0

    COLUMNS = ("jaccard", "ldmad", "mean_degree_1", "mean_degree_2", "lev_names", "lev_attrs")

    def as_dict(self) -> dict:
        return {c: getattr(self, c) for c in self.COLUMNS + ("nameless_1", "nameless_2")}


def heterogeneity_report(kg1, kg2, matches, name_attrs=DEFAULT_NAME_ATTRIBUTES) -> HeterogeneityReport:
    matches = _check_matches(matches)
    n1, n2 = entity_names(kg1, name_attrs), entity_names(kg2, name_attrs)
    return HeterogeneityReport(
        jaccard=jaccard_matched_neighbors(kg1, kg2, matches),
        ldmad=ldmad(kg1, kg2, matches),
        mean_degree_1=2.0 * len(kg1.relation_triples) / max(len(kg1.entities), 1),
        mean_degree_2=2.0 * len(kg2.relation_triples) / max(len(kg2.entities), 1),
        lev_names=lev_names(kg1, kg2, matches, name_attrs),
        lev_attrs=lev_attributes(kg1, kg2, matches),
        nameless_1=sum(e not in n1 for e in kg1.entities),
        nameless_2=sum(e not in n2 for e in kg2.entities),
    )
