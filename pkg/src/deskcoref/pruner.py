"""Span enumeration and top-``ceil(lambda * T)`` mention pruning."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import Span


@dataclass(frozen=True)
class PruneConfig:
    lam: float = 0.25
    max_span_width: int = 10
    max_antecedents: int | None = None

    def __post_init__(self):
        if not 0.0 < self.lam <= 1.0:
            raise ValueError("lambda must lie in (0, 1]")
        if self.max_span_width < 1:
            raise ValueError("max_span_width must be >= 1")
        if self.max_antecedents is not None and self.max_antecedents < 1:
            raise ValueError("max_antecedents must be >= 1")


@dataclass(frozen=True)
class ScoredSpans:
    spans: tuple[Span, ...]
    mention_scores: tuple[float, ...]

    def __post_init__(self):
        if len(self.spans) != len(self.mention_scores):
            raise ValueError("spans and scores are not aligned")
        if len(set(self.spans)) != len(self.spans):
            raise ValueError("duplicate spans")

    def __len__(self) -> int:
        return len(self.spans)


def span_arrays(T: int, W: int) -> tuple[np.ndarray, np.ndarray]:
    """Starts and ends of every span of width <= W, in antecedent order."""
    if T <= 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    starts = np.repeat(np.arange(T), W)
    ends = starts + np.tile(np.arange(W), T)
    keep = ends < T
    return starts[keep], ends[keep]


def enumerate_spans(T: int, W: int) -> list[Span]:
    if T < 0 or W < 1:
        raise ValueError("need T >= 0 and W >= 1")
    starts, ends = span_arrays(T, W)
    return [Span(int(s), int(e)) for s, e in zip(starts, ends)]


def lambda_count(T: int, lam: float) -> int:
    # rounding guard: 0.07 * 100 must give 7, not 8
    return math.ceil(round(lam * T, 9))


def keep_count(T: int, lam: float, n_spans: int) -> int:
    return min(lambda_count(T, lam), n_spans)


def top_k_indices(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` highest scores, earlier index winning ties, sorted ascending.

    Assumes ``scores`` is indexed in antecedent order.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if k <= 0:
        return np.zeros(0, dtype=np.int64)
    order = np.lexsort((np.arange(len(scores)), -scores))
    return np.sort(order[:k])


def prune(scored: ScoredSpans, T: int, cfg: PruneConfig) -> ScoredSpans:
    order = sorted(range(len(scored)), key=lambda i: scored.spans[i])
    spans = [scored.spans[i] for i in order]
    scores = np.array([scored.mention_scores[i] for i in order], dtype=np.float64)
    idx = top_k_indices(scores, keep_count(T, cfg.lam, len(spans)))
    return ScoredSpans(tuple(spans[i] for i in idx), tuple(float(scores[i]) for i in idx))


def candidate_pairs_count(T: int, lam: float) -> int:
    """Antecedent comparisons among the ``ceil(lambda * T)`` kept spans."""
    if T < 0:
        raise ValueError("T must be >= 0")
    k = lambda_count(T, lam)
    return k * (k - 1) // 2
