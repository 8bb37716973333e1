"""
Which facts describe an entity?
===============================

Each attribute type gets a trainable vector. Self-attention over those
vectors decides how much each of an entity's facts contributes to its
embedding. Here the type vectors are set by hand so the numbers can be
checked by hand.
"""

import math

import numpy as np

from kgalign.factual import attention_weights_for_types, entity_embedding, type_attention

# Two attribute types in a 4-dimensional space: "name" and "birthDate".
P = np.array(
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
    ]
)
W = type_attention(P)
print("type-to-type attention\n", W.round(4))
print("check: e^0.5 / (e^0.5 + 1) =", round(math.exp(0.5) / (math.exp(0.5) + 1), 4))

# An entity with a name and a birth date: each fact is weighted by how much
# its type attends to itself, then renormalised.
w = attention_weights_for_types(P, [0, 1])
print("weights for (name, birthDate):", w.round(4))

# Give "name" a longer vector: it now attends to itself more strongly.
P[0] *= 3
print("after stretching the name vector:", attention_weights_for_types(P, [0, 1]).round(4))

# The entity vector is the weighted sum of its literal vectors.
values = np.array([[1.0, 0.0], [0.0, 1.0]])
print("entity embedding:", entity_embedding(w, values).round(4))
