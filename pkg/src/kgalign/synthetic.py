"""Synthetic KG pairs with controlled factual and structural evidence.

Gold pairs come in two groups. "Attribute" pairs share (lightly perturbed)
literal values but no aligned neighborhood; "structure" pairs carry no
attributes but sit in isomorphic copies of one random graph. Each group is
therefore separable by exactly one kind of evidence.
"""
from __future__ import annotations

import string

import numpy as np

from .kg import KnowledgeGraph, SeedAlignment

_SYLLABLES = [c + v for c in "bcdfghklmnprstvz" for v in "aeiou"]


def _word(rng, lo=2, hi=4):
    return "".join(rng.choice(_SYLLABLES) for _ in range(rng.integers(lo, hi + 1)))


def _typo(text, rng):
    i = int(rng.integers(len(text)))
    return text[:i] + rng.choice(list(string.ascii_lowercase)) + text[i + 1 :]


def hybrid_fixture(
    n_pairs: int = 200,
    attribute_fraction: float = 0.5,
    mean_degree: float = 6.0,
    noise_edges: float = 0.0,
    typo_rate: float = 0.3,
    seed: int = 0,
):
    """Build ``(kg1, kg2, alignment, groups)``.

    ``groups`` maps each KG1 entity of a gold pair to ``"attribute"`` or
    ``"structure"``. ``noise_edges`` adds that many random relation triples
    per attribute entity, drawn independently in each KG, so those entities
    look structurally informative without being so.
    """
    rng = np.random.default_rng(seed)
    n_attr = int(round(attribute_fraction * n_pairs))
    kinds = ["attribute"] * n_attr + ["structure"] * (n_pairs - n_attr)
    rng.shuffle(kinds)
    left = [f"http://kg1.example/e{k}" for k in range(n_pairs)]
    ids2 = rng.permutation(n_pairs) + 1000
    right = [f"http://kg2.example/Q{ids2[k]}" for k in range(n_pairs)]

    attr1, attr2 = [], []
    names = set()
    for k in range(n_pairs):
        if kinds[k] != "attribute":
            continue
        name = _word(rng).capitalize() + " " + _word(rng).capitalize()
        while name in names:
            name = _word(rng).capitalize() + " " + _word(rng).capitalize()
        names.add(name)
        date = f"{rng.integers(1800, 2000)}-{rng.integers(1, 13):02d}-{rng.integers(1, 29):02d}"
        place = _word(rng, 2, 3).capitalize()
        attr1 += [(left[k], "name", name), (left[k], "birthDate", date), (left[k], "birthPlace", place)]
        name2 = _typo(name, rng) if rng.random() < typo_rate else name
        attr2 += [(right[k], "P1476", name2), (right[k], "P569", date), (right[k], "P19", place)]

    struct = [k for k in range(n_pairs) if kinds[k] == "structure"]
    rel1 = [f"rel{r}" for r in range(4)]
    rel2 = [f"P{100 + r}" for r in range(4)]
    edges = set()
    if len(struct) > 1:
        # spanning path keeps the structure group connected
        order = rng.permutation(struct)
        for a, b in zip(order[:-1], order[1:]):
            edges.add((int(a), int(b)))
        target = int(mean_degree * len(struct) / 2)
        while len(edges) < target:
            a, b = rng.choice(struct, size=2, replace=False)
            if (int(b), int(a)) not in edges:
                edges.add((int(a), int(b)))
    rel_triples1, rel_triples2 = [], []
    for a, b in sorted(edges):
        r = int(rng.integers(len(rel1)))
        rel_triples1.append((left[a], rel1[r], left[b]))
        rel_triples2.append((right[a], rel2[r], right[b]))

    attr_ids = [k for k in range(n_pairs) if kinds[k] == "attribute"]
    if noise_edges > 0 and len(attr_ids) > 1:
        pool = list(range(n_pairs))
        for names_, rels, triples in ((left, rel1, rel_triples1), (right, rel2, rel_triples2)):
            for k in attr_ids:
                for _ in range(int(noise_edges)):
                    other = int(rng.choice(pool))
                    if other != k:
                        triples.append((names_[k], rels[int(rng.integers(len(rels)))], names_[other]))

    # KG2 entity order is shuffled so that index order carries no signal
    order2 = rng.permutation(n_pairs)
    kg1 = KnowledgeGraph(rel_triples1, attr1, entities=left)
    kg2 = KnowledgeGraph(rel_triples2, attr2, entities=[right[k] for k in order2])
    alignment = SeedAlignment(matches=tuple(zip(left, right)))
    groups = {left[k]: kinds[k] for k in range(n_pairs)}
    return kg1, kg2, alignment, groups
