"""Knowledge graphs, seed alignments and OpenEA-format ingestion."""
from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import DatasetFormatError, ParseError, ReferentialError

logger = logging.getLogger(__name__)

Triple = tuple[str, str, str]
Pair = tuple[str, str]

DATASET_FILES = (
    "rel_triples_1",
    "rel_triples_2",
    "attr_triples_1",
    "attr_triples_2",
    "ent_links",
)


def _ordered_unique(items: Iterable[str]) -> tuple[str, ...]:
    return tuple(dict.fromkeys(items))


class KnowledgeGraph:
    """A knowledge graph ``(E, R, A, L, X, Y)``.

    Entities and attributes keep first-appearance order so that every index
    derived from them is reproducible. The object is treated as immutable
    once built.
    """

    def __init__(
        self,
        relation_triples: Iterable[Triple] = (),
        attribute_triples: Iterable[Triple] = (),
        entities: Iterable[str] = (),
    ):
        self.relation_triples: tuple[Triple, ...] = tuple(tuple(t) for t in relation_triples)
        self.attribute_triples: tuple[Triple, ...] = tuple(tuple(t) for t in attribute_triples)
        for t in self.relation_triples + self.attribute_triples:
            if len(t) != 3:
                raise ValueError(f"triple must have 3 fields, got {t!r}")

        order = list(entities)
        for h, _, t in self.relation_triples:
            order.append(h)
            order.append(t)
        order.extend(h for h, _, _ in self.attribute_triples)
        self.entities: tuple[str, ...] = _ordered_unique(order)
        self.entity_index: dict[str, int] = {e: i for i, e in enumerate(self.entities)}

        self.relations = frozenset(r for _, r, _ in self.relation_triples)
        self.attributes: tuple[str, ...] = _ordered_unique(a for _, a, _ in self.attribute_triples)
        self.attribute_index: dict[str, int] = {a: i for i, a in enumerate(self.attributes)}
        self.literals = frozenset(v for _, _, v in self.attribute_triples)

        neigh: list[set[int]] = [set() for _ in self.entities]
        degree = np.zeros(len(self.entities), dtype=np.int64)
        for h, _, t in self.relation_triples:
            hi, ti = self.entity_index[h], self.entity_index[t]
            degree[hi] += 1
            degree[ti] += 1
            if hi != ti:
                neigh[hi].add(ti)
                neigh[ti].add(hi)
        self._neighbors = tuple(frozenset(s) for s in neigh)
        self.degree = degree
        self.degree.flags.writeable = False

        attrs_of: list[list[int]] = [[] for _ in self.entities]
        for k, (h, _, _) in enumerate(self.attribute_triples):
            attrs_of[self.entity_index[h]].append(k)
        self._attr_triples_of = tuple(tuple(x) for x in attrs_of)

    def __len__(self):
        return len(self.entities)

    def __repr__(self):
        return (
            f"KnowledgeGraph(|E|={len(self.entities)}, |R|={len(self.relations)}, "
            f"|A|={len(self.attributes)}, |X|={len(self.relation_triples)}, "
            f"|Y|={len(self.attribute_triples)})"
        )

    def __eq__(self, other):
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return (
            set(self.entities) == set(other.entities)
            and set(self.relation_triples) == set(other.relation_triples)
            and set(self.attribute_triples) == set(other.attribute_triples)
        )

    __hash__ = None

    def neighbors(self, entity: str) -> frozenset[str]:
        """Undirected neighborhood of ``entity`` (self-loops excluded)."""
        return frozenset(self.entities[j] for j in self._neighbors[self.entity_index[entity]])

    def neighbor_indices(self, index: int) -> frozenset[int]:
        return self._neighbors[index]

    def attribute_triples_of(self, entity: str) -> list[Triple]:
        return [self.attribute_triples[k] for k in self._attr_triples_of[self.entity_index[entity]]]

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency over entity indices, no self-loops."""
        n = len(self.entities)
        rows = [i for i, s in enumerate(self._neighbors) for _ in s]
        cols = [j for s in self._neighbors for j in s]
        data = np.ones(len(rows))
        return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


@dataclass(frozen=True)
class SeedAlignment:
    """Gold matches with a train/validation/test partition."""

    matches: tuple[Pair, ...]
    train: tuple[Pair, ...] = ()
    val: tuple[Pair, ...] = ()
    test: tuple[Pair, ...] = ()

    def __post_init__(self):
        for name in ("matches", "train", "val", "test"):
            object.__setattr__(self, name, tuple(tuple(p) for p in getattr(self, name)))

    @property
    def is_split(self) -> bool:
        return bool(self.train or self.val or self.test)

    def check_against(self, kg1: KnowledgeGraph, kg2: KnowledgeGraph) -> None:
        for e1, e2 in self.matches:
            if e1 not in kg1.entity_index:
                raise ReferentialError(f"aligned entity {e1!r} is absent from KG1")
            if e2 not in kg2.entity_index:
                raise ReferentialError(f"aligned entity {e2!r} is absent from KG2")


@dataclass(frozen=True)
class GraphStats:
    max_cs: float
    wcc_r: float
    mean_degree: float
    num_wcc: int
    num_entities: int = field(default=0)


def _read_tsv(path: str, arity: int) -> list[tuple[str, ...]]:
    if not os.path.isfile(path):
        raise DatasetFormatError(f"missing dataset file: {os.path.basename(path)} ({path})")
    rows = []
    with open(path, encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.endswith("\n"):
                line = line[:-1]
            fields = line.split("\t")
            if len(fields) != arity:
                raise ParseError(
                    f"expected {arity} tab-separated fields, found {len(fields)}",
                    path=path,
                    line=lineno,
                )
            rows.append(tuple(fields))
    return rows


def load_openea_dataset(directory: str) -> tuple[KnowledgeGraph, KnowledgeGraph, SeedAlignment]:
    """Load two KGs and their gold links from an OpenEA-style directory.

    Expects ``rel_triples_1``, ``rel_triples_2``, ``attr_triples_1``,
    ``attr_triples_2`` and ``ent_links``. The returned alignment is unsplit.
    """
    for name in DATASET_FILES:
        if not os.path.isfile(os.path.join(directory, name)):
            raise DatasetFormatError(f"missing dataset file: {name} (in {directory})")
    rel1 = _read_tsv(os.path.join(directory, "rel_triples_1"), 3)
    rel2 = _read_tsv(os.path.join(directory, "rel_triples_2"), 3)
    att1 = _read_tsv(os.path.join(directory, "attr_triples_1"), 3)
    att2 = _read_tsv(os.path.join(directory, "attr_triples_2"), 3)
    links = _read_tsv(os.path.join(directory, "ent_links"), 2)
    kg1 = KnowledgeGraph(rel1, att1)
    kg2 = KnowledgeGraph(rel2, att2)
    alignment = SeedAlignment(matches=tuple(links))
    alignment.check_against(kg1, kg2)
    logger.info("loaded %s / %s with %d links", kg1, kg2, len(links))
    return kg1, kg2, alignment


def _write_tsv(path: str, rows: Iterable[Sequence[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write("\t".join(row) + "\n")


def save_openea_dataset(
    directory: str, kg1: KnowledgeGraph, kg2: KnowledgeGraph, alignment: SeedAlignment
) -> None:
    """Write the five OpenEA files; inverse of :func:`load_openea_dataset`."""
    os.makedirs(directory, exist_ok=True)
    _write_tsv(os.path.join(directory, "rel_triples_1"), kg1.relation_triples)
    _write_tsv(os.path.join(directory, "rel_triples_2"), kg2.relation_triples)
    _write_tsv(os.path.join(directory, "attr_triples_1"), kg1.attribute_triples)
    _write_tsv(os.path.join(directory, "attr_triples_2"), kg2.attribute_triples)
    _write_tsv(os.path.join(directory, "ent_links"), alignment.matches)


def split_seed(
    alignment: SeedAlignment, train_frac: float = 0.2, val_frac: float = 0.1, rng_seed: int = 0
) -> SeedAlignment:
    """Shuffle the gold matches under ``rng_seed`` and slice train/val/test.

    Split sizes are ``floor(frac * |M|)``; the remainder goes to test.
    """
    if not (0.0 <= train_frac <= 1.0 and 0.0 <= val_frac <= 1.0):
        raise ValueError("split fractions must lie in [0, 1]")
    if train_frac + val_frac > 1.0 + 1e-12:
        raise ValueError("train_frac + val_frac must not exceed 1")
    matches = alignment.matches
    n = len(matches)
    # guard against 0.29 * 100 == 28.999999999999996
    n_train = int(math.floor(train_frac * n + 1e-9))
    n_val = int(math.floor(val_frac * n + 1e-9))
    n_val = min(n_val, n - n_train)
    order = np.random.default_rng(rng_seed).permutation(n)
    shuffled = [matches[i] for i in order]
    return SeedAlignment(
        matches=matches,
        train=tuple(shuffled[:n_train]),
        val=tuple(shuffled[n_train : n_train + n_val]),
        test=tuple(shuffled[n_train + n_val :]),
    )


def graph_stats(kg: KnowledgeGraph) -> GraphStats:
    """Weakly-connected-component statistics over the relation triples."""
    n = len(kg.entities)
    if n == 0:
        raise ValueError("graph_stats needs at least one entity")
    num_wcc, labels = connected_components(kg.adjacency(), directed=False)
    sizes = np.bincount(labels)
    return GraphStats(
        max_cs=float(sizes.max()) / n,
        wcc_r=num_wcc / n,
        mean_degree=2.0 * len(kg.relation_triples) / n,
        num_wcc=int(num_wcc),
        num_entities=n,
    )
