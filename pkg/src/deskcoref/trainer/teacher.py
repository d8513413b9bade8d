"""Teachers that label unlabeled documents, and corpus annotation."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from ..domain import ClusterSet, Document, Span, read_jsonl
from ..model import ModelParams, encode_documents, predict, score_document
from ..pruner import keep_count
from .gradients import SoftTarget

log = logging.getLogger(__name__)

TEACHER_MAX_TOKENS = 4096


class TeacherOracle(Protocol):
    def annotate(self, doc: Document) -> ClusterSet: ...


def capitalized_runs(tokens: Sequence[str], max_width: int | None = None) -> list[Span]:
    """Maximal runs of alphabetic tokens starting with an upper-case letter."""
    runs = []
    i, n = 0, len(tokens)
    while i < n:
        if tokens[i].isalpha() and tokens[i][0].isupper():
            j = i
            while j + 1 < n and tokens[j + 1].isalpha() and tokens[j + 1][0].isupper():
                j += 1
            if max_width is None or j - i + 1 <= max_width:
                runs.append(Span(i, j))
            i = j + 1
        else:
            i += 1
    return runs


@dataclass
class StringMatchTeacher:
    """Clusters capitalised name runs whose token strings match exactly.

    Its pair logits are ``+margin`` for matching strings and ``-margin``
    otherwise; its kept spans are the name runs first, then single tokens
    in document order.
    """

    margin: float = 5.0
    max_width: int | None = None

    def annotate(self, doc: Document) -> ClusterSet:
        groups: dict[tuple[str, ...], list[Span]] = {}
        for s in capitalized_runs(doc.tokens, self.max_width):
            groups.setdefault(doc.tokens[s.start:s.end + 1], []).append(s)
        return ClusterSet.from_lists([g for g in groups.values() if len(g) > 1])

    def soft_target(self, doc: Document, lam: float, max_span_width: int) -> SoftTarget:
        T = len(doc)
        names = capitalized_runs(doc.tokens, max_span_width)
        n_candidates = sum(min(max_span_width, T - i) for i in range(T))
        k = keep_count(T, lam, n_candidates)
        chosen = names[:k]
        taken = set(chosen)
        for i in range(T):
            if len(chosen) >= k:
                break
            s = Span(i, i)
            if s not in taken:
                chosen.append(s)
        spans = tuple(sorted(chosen))
        text = [doc.tokens[s.start:s.end + 1] for s in spans]
        is_name = np.array([s in set(names) for s in spans])
        same = np.array([[a == b for b in text] for a in text]) & is_name[:, None] & is_name[None, :]
        logits = np.where(same, self.margin, -self.margin)
        return SoftTarget(spans, np.triu(logits, 1))


@dataclass
class FileTeacher:
    """Annotations read from a corpus-format JSONL file, keyed by ``doc_id``."""

    path: str
    _clusters: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        for doc in read_jsonl(self.path):
            self._clusters[doc.doc_id] = doc.gold_clusters or ClusterSet()

    def annotate(self, doc: Document) -> ClusterSet:
        return self._clusters[doc.doc_id]


@dataclass
class ModelTeacher:
    """A trained model used as teacher; supplies clusters, kept spans and logits."""

    model: ModelParams
    M: int = 64

    def annotate(self, doc: Document) -> ClusterSet:
        res = predict(self.model, [doc], self.M)[0]
        return ClusterSet.from_lists(res.clusters_tokens)

    def soft_target(self, doc: Document, lam: float, max_span_width: int) -> SoftTarget:
        h = encode_documents(self.model, [doc], self.M)[doc.doc_id]
        sc = score_document(self.model, h)
        return SoftTarget(tuple(sc.pruned_spans), np.triu(sc.F, 1))


@dataclass
class AnnotationReport:
    annotated: int = 0
    skipped_too_long: int = 0
    failed: int = 0
    failures: list[str] = field(default_factory=list)


def annotate_with_teacher(teacher: TeacherOracle, corpus: Sequence[Document],
                          max_tokens: int = TEACHER_MAX_TOKENS) -> tuple[list[Document], AnnotationReport]:
    """Replace each document's clusters with the teacher's; skip over-long or failing documents."""
    out, report = [], AnnotationReport()
    for doc in corpus:
        if len(doc) > max_tokens:
            report.skipped_too_long += 1
            continue
        try:
            clusters = teacher.annotate(doc)
            out.append(doc.with_clusters(clusters))
        except Exception as exc:  # teacher failures never abort annotation
            log.warning("teacher failed on %s: %s", doc.doc_id, exc)
            report.failed += 1
            report.failures.append(doc.doc_id)
            continue
        report.annotated += 1
    return out, report


def soft_targets_for(teacher, corpus: Sequence[Document], lam: float, max_span_width: int) -> dict[str, SoftTarget]:
    if not hasattr(teacher, "soft_target"):
        raise ValueError(f"{type(teacher).__name__} provides no pair logits for soft distillation")
    return {d.doc_id: teacher.soft_target(d, lam, max_span_width) for d in corpus if len(d)}
