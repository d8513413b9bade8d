"""Best-antecedent linking, clustering and the within-cluster score audit."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .domain import ClusterSet, CorefResult, Document, Span, span_precedes, to_char_span
from .pruner import ScoredSpans

PairScore = Callable[[Span, Span], float]


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1


@dataclass(frozen=True)
class LinkDecision:
    query: Span
    antecedent: Span | None
    score: float


@dataclass(frozen=True)
class TransitivityReport:
    clusters_examined: int = 0
    within_cluster_pairs: int = 0
    negative_pairs: int = 0

    @property
    def negative_fraction(self) -> float:
        return self.negative_pairs / self.within_cluster_pairs if self.within_cluster_pairs else 0.0

    def to_json(self) -> dict:
        return {
            "clusters_examined": self.clusters_examined,
            "within_cluster_pairs": self.within_cluster_pairs,
            "negative_pairs": self.negative_pairs,
            "negative_fraction": self.negative_fraction,
        }

    def __add__(self, other: "TransitivityReport") -> "TransitivityReport":
        return TransitivityReport(self.clusters_examined + other.clusters_examined,
                                  self.within_cluster_pairs + other.within_cluster_pairs,
                                  self.negative_pairs + other.negative_pairs)


def score_matrix(spans: Sequence[Span], F: PairScore | np.ndarray) -> np.ndarray:
    if isinstance(F, np.ndarray):
        return F
    k = len(spans)
    mat = np.zeros((k, k))
    for j in range(k):
        for i in range(j):
            mat[i, j] = F(spans[i], spans[j])
    return mat


def best_links(spans: Sequence[Span], F: PairScore | np.ndarray,
               max_antecedents: int | None = None) -> list[LinkDecision]:
    """Argmax antecedent per query; the null antecedent scores 0 and wins ties."""
    mat = score_matrix(spans, F)
    links = []
    for j, q in enumerate(spans):
        lo = 0 if max_antecedents is None else max(0, j - max_antecedents)
        best, best_score = None, 0.0
        for i in range(lo, j):
            s = mat[i, j]
            if s > best_score:
                best, best_score = i, s
        links.append(LinkDecision(q, None if best is None else spans[best], float(best_score)))
    return links


def clusters_from_links(spans: Sequence[Span], links: Sequence[LinkDecision]) -> ClusterSet:
    index = {s: i for i, s in enumerate(spans)}
    uf = UnionFind(len(spans))
    for link in links:
        if link.antecedent is not None:
            uf.union(index[link.antecedent], index[link.query])
    groups: dict[int, list[Span]] = {}
    for i, s in enumerate(spans):
        groups.setdefault(uf.find(i), []).append(s)
    return ClusterSet.from_lists([g for g in groups.values() if len(g) > 1])


def decode_clusters(pruned: ScoredSpans | Sequence[Span], F: PairScore | np.ndarray,
                    max_antecedents: int | None = None) -> ClusterSet:
    spans = list(pruned.spans if isinstance(pruned, ScoredSpans) else pruned)
    if any(not span_precedes(a, b) for a, b in zip(spans, spans[1:])):
        raise ValueError("pruned spans must be sorted in antecedent order")
    return clusters_from_links(spans, best_links(spans, F, max_antecedents))


def transitivity_report(clusters: ClusterSet, F: PairScore) -> TransitivityReport:
    """Count within-cluster ordered pairs whose score is not positive."""
    pairs = negative = 0
    for cluster in clusters:
        spans = sorted(cluster)
        for j, q in enumerate(spans):
            for c in spans[:j]:
                pairs += 1
                if F(c, q) <= 0.0:
                    negative += 1
    return TransitivityReport(len(clusters), pairs, negative)


def build_result(doc: Document, clusters: ClusterSet, pruned: ScoredSpans | Sequence[Span],
                 F: PairScore) -> CorefResult:
    spans = list(pruned.spans if isinstance(pruned, ScoredSpans) else pruned)
    char_to_span = {to_char_span(doc, s): s for s in spans}
    clusters_char, clusters_text, clusters_tokens = [], [], []
    for cluster in clusters:
        chars = [to_char_span(doc, s) for s in cluster]
        clusters_char.append(chars)
        clusters_text.append([doc.text[a:b] for a, b in chars])
        clusters_tokens.append([s.as_tuple() for s in cluster])
    return CorefResult(doc.doc_id, clusters_char, clusters_text, clusters_tokens,
                       _char_to_span=char_to_span, _score=F)
