"""Literal and label embeddings.

Vectors come either from a precomputed text table (word2vec text layout, e.g.
exported sentence-encoder outputs) or from a deterministic hashed character
3-gram encoder used as a fallback.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional

import numpy as np

from .errors import ParseError

DEFAULT_DIM = 768

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF
# distinct offset basis for the sign hash
_SIGN_OFFSET = _FNV_OFFSET ^ 0x9E3779B97F4A7C15


def fnv1a_64(data: bytes, offset: int = _FNV_OFFSET) -> int:
    h = offset
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace(" ", "\\s")


def _unescape(token: str) -> str:
    out = []
    i = 0
    while i < len(token):
        c = token[i]
        if c == "\\" and i + 1 < len(token):
            nxt = token[i + 1]
            if nxt == "s":
                out.append(" ")
                i += 2
                continue
            if nxt == "\\":
                out.append("\\")
                i += 2
                continue
        out.append(c)
        i += 1
    return "".join(out)


@dataclass(frozen=True)
class VectorTable:
    dim: int
    entries: dict

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        for k, v in self.entries.items():
            if v.shape != (self.dim,):
                raise ValueError(f"vector for {k!r} has shape {v.shape}, expected ({self.dim},)")

    def __contains__(self, text):
        return text in self.entries

    def __len__(self):
        return len(self.entries)


def load_vectors(path: str) -> VectorTable:
    """Read a word2vec-style text file (``N d`` header, one row per key).

    Spaces inside keys are written as ``\\s`` and backslashes as ``\\\\``.
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError("missing header line 'N d'", path=path, line=1)
    header = lines[0].split()
    if len(header) != 2:
        raise ParseError("header must be 'N d'", path=path, line=1)
    try:
        n, dim = int(header[0]), int(header[1])
    except ValueError:
        raise ParseError("header must contain two integers", path=path, line=1) from None
    if dim < 1 or n < 0:
        raise ParseError("header values out of range", path=path, line=1)
    if len(lines) - 1 != n:
        raise ParseError(f"header announces {n} rows, found {len(lines) - 1}", path=path, line=1)
    entries = {}
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(" ")
        if len(parts) != dim + 1:
            raise ParseError(f"expected key and {dim} floats, found {len(parts) - 1} values", path=path, line=lineno)
        key = _unescape(parts[0])
        if key in entries:
            raise ParseError(f"duplicate key {key!r}", path=path, line=lineno)
        try:
            vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
        except ValueError:
            raise ParseError("non-numeric vector component", path=path, line=lineno) from None
        entries[key] = vec
    return VectorTable(dim=dim, entries=entries)


def save_vectors(path: str, table: VectorTable) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(table.entries)} {table.dim}\n")
        for key, vec in table.entries.items():
            fh.write(_escape(key) + " " + " ".join(repr(float(x)) for x in vec) + "\n")


@lru_cache(maxsize=None)
def _gram_slot(gram: str, dim: int) -> tuple[int, float]:
    data = gram.encode("utf-8")
    bucket = fnv1a_64(data) % dim
    sign = 1.0 if fnv1a_64(data, _SIGN_OFFSET) & 1 == 0 else -1.0
    return bucket, sign


def hash_ngram_encode(text: str, dim: int = DEFAULT_DIM) -> np.ndarray:
    """Signed feature hashing of lowercased character 3-grams (unnormalized).

    The text is padded with one boundary marker on each side so that short
    strings still yield at least one gram. Empty text gives the zero vector.
    """
    if dim < 8:
        raise ValueError("hash_ngram_encode needs dim >= 8")
    vec = np.zeros(dim)
    if not text:
        return vec
    padded = "\x02" + text.lower() + "\x03"
    for i in range(len(padded) - 2):
        bucket, sign = _gram_slot(padded[i : i + 3], dim)
        vec[bucket] += sign
    return vec


def _normalize(vec: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        return np.zeros_like(vec, dtype=np.float64)
    return vec / norm


def encode(text: str, table: Optional[VectorTable] = None, dim: int = DEFAULT_DIM) -> np.ndarray:
    """L2-normalized embedding of ``text``; table lookup first, hashing otherwise."""
    if table is not None:
        if table.dim != dim:
            raise ValueError(f"dim {dim} does not match vector table dim {table.dim}")
        vec = table.entries.get(text)
        if vec is not None:
            return _normalize(np.asarray(vec, dtype=np.float64))
    return _normalize(hash_ngram_encode(text, dim))


def encode_many(texts: Iterable[str], table: Optional[VectorTable] = None, dim: int = DEFAULT_DIM) -> np.ndarray:
    texts = list(texts)
    out = np.zeros((len(texts), dim))
    for i, t in enumerate(texts):
        out[i] = encode(t, table, dim)
    return out
