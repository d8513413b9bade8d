"""Dynamic document grouping and the vanilla / leftover batch layouts.

A group of documents is split into segments of at most ``M`` tokens. The
vanilla layout pads every document to ``K_max`` segments of ``M`` slots. The
leftover layout puts all full segments in one unpadded batch and all leftover
segments in a second batch padded only to the longest leftover of the group.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .domain import Document
from .encoder import EncoderParams, Segment, document_ids, encode_grid, segment_document

VANILLA = "vanilla"
LEFTOVER = "leftover"
SCHEMES = (VANILLA, LEFTOVER)


class PlanMismatchError(ValueError):
    pass


@dataclass
class Batch:
    """One padded ``(rows, width)`` grid. ``None`` rows are all padding."""

    rows: list[tuple[int, Segment] | None]
    width: int
    kind: str  # "grid", "full" or "leftover"

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.rows), self.width)

    def lengths(self) -> np.ndarray:
        return np.array([0 if r is None else len(r[1]) for r in self.rows], dtype=np.int64)

    def ids(self) -> np.ndarray:
        grid = np.zeros(self.shape, dtype=np.int64)
        for i, r in enumerate(self.rows):
            if r is not None:
                grid[i, :len(r[1])] = r[1].token_ids
        return grid

    @property
    def real_tokens(self) -> int:
        return int(self.lengths().sum())

    @property
    def padding_tokens(self) -> int:
        return len(self.rows) * self.width - self.real_tokens


@dataclass
class BatchPlan:
    scheme: str
    doc_ids: list[str]
    doc_lengths: list[int]
    batches: list[Batch]
    grid_shape: tuple[int, ...] = ()
    segments: list[list[Segment]] = field(default_factory=list, repr=False)

    @property
    def real_tokens(self) -> int:
        return sum(b.real_tokens for b in self.batches)

    @property
    def padding_tokens(self) -> int:
        return sum(b.padding_tokens for b in self.batches)

    @property
    def full_batch(self) -> Batch | None:
        return next((b for b in self.batches if b.kind == "full"), None)

    @property
    def leftover_batch(self) -> Batch | None:
        return next((b for b in self.batches if b.kind == "leftover"), None)


@dataclass
class PaddingReport:
    scheme: str
    documents: int
    real_tokens: int
    padded_tokens: int

    @property
    def padded_fraction(self) -> float:
        total = self.real_tokens + self.padded_tokens
        return self.padded_tokens / total if total else 0.0

    def to_json(self) -> dict:
        return {
            "scheme": self.scheme,
            "documents": self.documents,
            "real_tokens": self.real_tokens,
            "padded_tokens": self.padded_tokens,
            "padded_fraction": self.padded_fraction,
        }


def plan_dynamic_groups(docs: Sequence[Document], max_tokens_in_batch: int) -> list[list[Document]]:
    """Longest-first greedy fill under a real-token budget; documents are never split."""
    if max_tokens_in_batch < 1:
        raise ValueError("max_tokens_in_batch must be >= 1")
    ordered = sorted(docs, key=lambda d: (-len(d), d.doc_id))
    groups: list[list[Document]] = []
    current: list[Document] = []
    used = 0
    for doc in ordered:
        if current and used + len(doc) > max_tokens_in_batch:
            groups.append(current)
            current, used = [], 0
        current.append(doc)
        used += len(doc)
    if current:
        groups.append(current)
    return groups


def _segments(group, M, V, ids_cache):
    out = []
    for doc in group:
        ids = ids_cache.get(doc.doc_id) if ids_cache is not None else None
        if ids is None:
            ids = document_ids(doc, V)
            if ids_cache is not None:
                ids_cache[doc.doc_id] = ids
        out.append(segment_document(doc, M, ids=ids))
    return out


def plan_vanilla(group: Sequence[Document], M: int, V: int = 4096, ids_cache=None) -> BatchPlan:
    if M < 1:
        raise ValueError("M must be >= 1")
    segs = _segments(group, M, V, ids_cache)
    k_max = max((len(s) for s in segs), default=0)
    rows: list[tuple[int, Segment] | None] = []
    for i, doc_segs in enumerate(segs):
        rows.extend((i, s) for s in doc_segs)
        rows.extend([None] * (k_max - len(doc_segs)))
    batches = [Batch(rows, M, "grid")] if rows else []
    return BatchPlan(VANILLA, [d.doc_id for d in group], [len(d) for d in group], batches,
                     (len(group), k_max, M), segs)


def plan_leftover(group: Sequence[Document], M: int, V: int = 4096, ids_cache=None) -> BatchPlan:
    if M < 1:
        raise ValueError("M must be >= 1")
    segs = _segments(group, M, V, ids_cache)
    full = [(i, s) for i, doc_segs in enumerate(segs) for s in doc_segs if not s.is_leftover]
    left = [(i, s) for i, doc_segs in enumerate(segs) for s in doc_segs if s.is_leftover]
    batches = []
    if full:
        batches.append(Batch(full, M, "full"))
    if left:
        batches.append(Batch(left, max(len(s) for _, s in left), "leftover"))
    return BatchPlan(LEFTOVER, [d.doc_id for d in group], [len(d) for d in group], batches,
                     (), segs)


def make_plan(group, M, scheme, V=4096, ids_cache=None) -> BatchPlan:
    if scheme == VANILLA:
        return plan_vanilla(group, M, V, ids_cache)
    if scheme == LEFTOVER:
        return plan_leftover(group, M, V, ids_cache)
    raise ValueError(f"unknown scheme {scheme!r}")


def group_padding(lengths: Sequence[int], M: int, scheme: str) -> int:
    """Padded slots of one group under ``scheme``, from token counts alone."""
    if not lengths:
        return 0
    if scheme == VANILLA:
        k_max = max(-(-T // M) for T in lengths)
        return len(lengths) * k_max * M - sum(lengths)
    if scheme == LEFTOVER:
        left = [T % M for T in lengths if T % M]
        return len(left) * max(left) - sum(left) if left else 0
    raise ValueError(f"unknown scheme {scheme!r}")


def padding_report(corpus: Sequence[Document], M: int, budget: int, scheme: str) -> PaddingReport:
    """Padding over all dynamic groups of ``corpus``; items only need ``len`` and ``doc_id``."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    real = padded = 0
    for group in plan_dynamic_groups(corpus, budget):
        lengths = [len(d) for d in group]
        real += sum(lengths)
        padded += group_padding(lengths, M, scheme)
    return PaddingReport(scheme, len(corpus), real, padded)


def encode_plan(params: EncoderParams, plan: BatchPlan) -> list[np.ndarray]:
    """Run the encoder once per batch of the plan."""
    return [encode_grid(params, b.ids(), b.lengths()) for b in plan.batches]


def reassemble(encoded: Sequence[np.ndarray], plan: BatchPlan, dim: int | None = None) -> list[np.ndarray]:
    """Per-document token vectors in plan document order, padding dropped.

    ``dim`` sets the width of empty documents when the plan has no batches.
    """
    if len(encoded) != len(plan.batches):
        raise PlanMismatchError(f"{len(encoded)} outputs for {len(plan.batches)} batches")
    pieces: list[dict[int, np.ndarray]] = [{} for _ in plan.doc_ids]
    d = dim
    for out, batch in zip(encoded, plan.batches):
        if out.shape[:2] != batch.shape:
            raise PlanMismatchError(f"output shape {out.shape[:2]} does not match batch {batch.shape}")
        d = out.shape[2]
        for r, row in enumerate(batch.rows):
            if row is not None:
                i, seg = row
                pieces[i][seg.segment_index] = out[r, :len(seg)]
    docs = []
    for i, T in enumerate(plan.doc_lengths):
        parts = [pieces[i][k] for k in sorted(pieces[i])]
        vecs = np.concatenate(parts, axis=0) if parts else np.zeros((0, d or 0))
        if vecs.shape[0] != T:
            raise PlanMismatchError(f"document {plan.doc_ids[i]} reassembled to {vecs.shape[0]} of {T} tokens")
        docs.append(vecs)
    return docs


def reassemble_grad(grads: Sequence[np.ndarray], plan: BatchPlan, encoded_shapes) -> list[np.ndarray]:
    """Scatter per-document gradients back onto the batch grids (inverse of ``reassemble``)."""
    out = [np.zeros(s) for s in encoded_shapes]
    for g_out, batch in zip(out, plan.batches):
        for r, row in enumerate(batch.rows):
            if row is not None:
                i, seg = row
                g_out[r, :len(seg)] = grads[i][seg.offset:seg.offset + len(seg)]
    return out
