"""Whitespace tokenizer, hashed vocabulary and the toy window encoder.

The encoder maps token ids to vectors with one embedding lookup followed by a
3-token window mixer::

    h_i = tanh(W @ [e_{i-1}; e_i; e_{i+1}] + b)

with zero vectors outside the segment. ``W`` is split into three ``d x d``
blocks and each block is folded into the embedding table once
(``P_k = E @ W_k.T``), so encoding is a gather plus three masked adds. Every
output element is computed by the same sequence of floating point operations
whatever the batch layout, which makes batched and unbatched encoding
bit-identical.
"""
from __future__ import annotations

import string
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .domain import Document

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

_PUNCT = frozenset(string.punctuation)


# -- tokenization ------------------------------------------------------------

def tokenize(text: str, doc_id: str = "") -> Document:
    """Split on whitespace, then peel leading/trailing ASCII punctuation.

    Every peeled punctuation character becomes its own token.
    """
    tokens: list[str] = []
    offsets: list[tuple[int, int]] = []
    n = len(text)
    i = 0
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace():
            j += 1
        a, b = i, j
        lead = []
        while a < b and text[a] in _PUNCT:
            lead.append((a, a + 1))
            a += 1
        trail = []
        while b > a and text[b - 1] in _PUNCT:
            trail.append((b - 1, b))
            b -= 1
        pieces = lead + ([(a, b)] if b > a else []) + trail[::-1]
        for s, e in pieces:
            tokens.append(text[s:e])
            offsets.append((s, e))
        i = j
    return Document(doc_id, text, tuple(tokens), tuple(offsets))


def token_id(token: str, V: int) -> int:
    """FNV-1a 64-bit hash of the UTF-8 bytes, reduced modulo ``V``."""
    if V <= 0:
        raise ValueError("V must be positive")
    h = FNV_OFFSET
    for byte in token.encode("utf-8"):
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h % V


# -- PRNG --------------------------------------------------------------------

def _splitmix64(state: int):
    while True:
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        yield z ^ (z >> 31)


class Xoshiro256:
    """xoshiro256** seeded through splitmix64."""

    def __init__(self, seed: int):
        sm = _splitmix64(seed & _MASK64)
        self.s = [next(sm) for _ in range(4)]

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s
        x = (s1 * 5) & _MASK64
        r = ((((x << 7) | (x >> 57)) & _MASK64) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
        self.s = [s0, s1, s2, s3]
        return r

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        """Row-major fill; each draw uses the top 53 bits."""
        n = int(np.prod(shape, dtype=np.int64))
        s0, s1, s2, s3 = self.s
        out = np.empty(n, dtype=np.float64)
        scale = 2.0 ** -53
        for k in range(n):
            x = (s1 * 5) & _MASK64
            r = ((((x << 7) | (x >> 57)) & _MASK64) * 9) & _MASK64
            t = (s1 << 17) & _MASK64
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
            out[k] = (r >> 11) * scale
        self.s = [s0, s1, s2, s3]
        return (low + (high - low) * out).reshape(shape)


# -- parameters --------------------------------------------------------------

@dataclass(eq=False)
class EncoderParams:
    embedding: np.ndarray  # V x d
    mix_weights: np.ndarray  # d x 3d
    mix_bias: np.ndarray  # d
    seed: int = 0

    def __post_init__(self):
        V, d = self.embedding.shape
        if self.mix_weights.shape != (d, 3 * d) or self.mix_bias.shape != (d,):
            raise ValueError("encoder parameter shapes are inconsistent")

    @property
    def V(self) -> int:
        return self.embedding.shape[0]

    @property
    def d(self) -> int:
        return self.embedding.shape[1]

    @cached_property
    def tables(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Embedding folded through the left, centre and right mixer blocks."""
        return project_tables(self.embedding, self.mix_weights)


def project_tables(embedding: np.ndarray, mix_weights: np.ndarray):
    d = embedding.shape[1]
    return tuple(embedding @ mix_weights[:, k * d:(k + 1) * d].T for k in range(3))


def init_encoder(seed: int, V: int = 4096, d: int = 32) -> EncoderParams:
    if V <= 0 or d <= 0:
        raise ValueError("V and d must be positive")
    rng = Xoshiro256(seed)
    emb = rng.uniform(-0.1, 0.1, (V, d))
    mix = rng.uniform(-0.1, 0.1, (d, 3 * d))
    bias = rng.uniform(-0.1, 0.1, (d,))
    return EncoderParams(emb, mix, bias, seed)


# -- segmentation ------------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    doc_id: str
    segment_index: int
    token_ids: tuple[int, ...]
    is_leftover: bool
    offset: int = field(default=0, compare=False)  # position of the first token in the document

    def __len__(self) -> int:
        return len(self.token_ids)


def document_ids(doc: Document, V: int) -> tuple[int, ...]:
    return tuple(token_id(t, V) for t in doc.tokens)


def segment_document(doc: Document, M: int, V: int = 4096, ids=None) -> list[Segment]:
    """Non-overlapping cover: full segments of ``M`` then one shorter leftover."""
    if M < 1:
        raise ValueError("M must be >= 1")
    if ids is None:
        ids = document_ids(doc, V)
    T = len(ids)
    segs = []
    for k, start in enumerate(range(0, T, M)):
        chunk = tuple(ids[start:start + M])
        segs.append(Segment(doc.doc_id, k, chunk, len(chunk) < M, start))
    return segs


# -- encoding ----------------------------------------------------------------

def _grid_masks(lengths: np.ndarray, width: int):
    col = np.arange(width)[None, :]
    lengths = np.asarray(lengths)[:, None]
    valid = col < lengths
    left_ok = valid & (col >= 1)
    right_ok = (col + 1) < lengths
    return valid, left_ok, right_ok


def encode_grid_with_tables(tables, bias, ids: np.ndarray, lengths) -> np.ndarray:
    """Encode a padded ``(rows, width)`` grid of token ids.

    Positions at or beyond a row's length are padding: they neither receive
    output (zeros) nor feed context to their neighbours.
    """
    left, centre, right = tables
    ids = np.asarray(ids, dtype=np.int64)
    rows, width = ids.shape
    valid, left_ok, right_ok = _grid_masks(lengths, width)
    acc = centre[ids]
    if width > 1:
        np.add(acc[:, 1:], left[ids[:, :-1]], out=acc[:, 1:], where=left_ok[:, 1:, None])
        np.add(acc[:, :-1], right[ids[:, 1:]], out=acc[:, :-1], where=right_ok[:, :-1, None])
    acc += bias
    h = np.tanh(acc)
    h[~valid] = 0.0
    return h


def encode_grid(p: EncoderParams, ids: np.ndarray, lengths) -> np.ndarray:
    return encode_grid_with_tables(p.tables, p.mix_bias, ids, lengths)


def encode_segment(p: EncoderParams, seg: Segment) -> np.ndarray:
    """Vectors for one segment, shape ``(len(seg), d)``."""
    if len(seg) < 1:
        raise ValueError("cannot encode an empty segment")
    ids = np.asarray(seg.token_ids, dtype=np.int64)[None, :]
    return encode_grid(p, ids, [len(seg)])[0]


def encode_grid_backward(p_embedding, p_mix, ids, lengths, h, grad_h):
    """Gradients of the grid encoder w.r.t. (embedding, mix_weights, mix_bias).

    Only embedding rows of ids present in the grid receive gradient.
    """
    ids = np.asarray(ids, dtype=np.int64)
    V, d = p_embedding.shape
    rows, width = ids.shape
    valid, left_ok, right_ok = _grid_masks(lengths, width)
    g_acc = grad_h * (1.0 - h * h)
    g_acc[~valid] = 0.0
    g_bias = g_acc.sum(axis=(0, 1))
    used, local = np.unique(ids[valid], return_inverse=True)
    slot = np.zeros(V, dtype=np.int64)
    slot[used] = np.arange(len(used))
    g_tables = np.zeros((3, len(used), d))
    np.add.at(g_tables[1], local, g_acc[valid])
    if width > 1:
        m = left_ok[:, 1:]
        np.add.at(g_tables[0], slot[ids[:, :-1][m]], g_acc[:, 1:][m])
        m = right_ok[:, :-1]
        np.add.at(g_tables[2], slot[ids[:, 1:][m]], g_acc[:, :-1][m])
    emb_used = p_embedding[used]
    g_emb = np.zeros_like(p_embedding)
    g_mix = np.zeros_like(p_mix)
    g_used = np.zeros((len(used), d))
    for k in range(3):
        g_mix[:, k * d:(k + 1) * d] = g_tables[k].T @ emb_used
        g_used += g_tables[k] @ p_mix[:, k * d:(k + 1) * d]
    g_emb[used] = g_used
    return g_emb, g_mix, g_bias
