"""
Turning a similarity matrix into matches
========================================

A small walk through the three decision rules: hub correction, the
mutual-argmax filter and per-row best match, with the optimal one-to-one
assignment alongside for comparison.
"""

import numpy as np

from kgalign.matching import best_match, csls_adjust, hungarian_assign, reciprocity_filter
from kgalign.simmat import SimilarityMatrix

# Three source entities, three candidates. Candidate "Q2" is a hub: it looks
# fairly similar to everything.
sm = SimilarityMatrix(
    np.array(
        [
            [0.80, 0.10, 0.85],
            [0.20, 0.70, 0.75],
            [0.10, 0.20, 0.90],
        ]
    ),
    row_ids=("Paris", "Lyon", "Nice"),
    col_ids=("Q1", "Q3", "Q2"),
)
print("raw scores\n", sm.scores)

# Plain best match sends everybody to the hub.
print("best match on raw scores:", best_match(sm).assignment)

# CSLS subtracts each row's and each column's mean top-k score, which
# penalises hubs.
adjusted = csls_adjust(sm, k=2)
print("\nCSLS-adjusted scores\n", adjusted.scores.round(3))
print("best match after CSLS:", best_match(adjusted).assignment)

# The reciprocity filter only keeps pairs that pick each other.
for pair in reciprocity_filter(adjusted):
    print("reciprocal:", pair.e1, "<->", pair.e2)

# For reference, the optimal one-to-one assignment on the raw scores.
pairs, total = hungarian_assign(sm)
print("\nHungarian assignment:", pairs, "total", round(total, 3))
