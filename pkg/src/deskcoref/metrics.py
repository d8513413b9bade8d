"""MUC, B-cubed and CEAF-phi4 coreference scores.

Each metric is computed as a numerator/denominator pair for precision and for
recall so that corpus scores can be micro-averaged the way the CoNLL
reference scorer does. ``0/0`` is scored as 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

Clusters = Sequence[Iterable[Hashable]]


def _div(a: float, b: float) -> float:
    return a / b if b else 0.0


@dataclass(frozen=True)
class MetricTriple:
    precision: float
    recall: float

    @property
    def f1(self) -> float:
        return _div(2 * self.precision * self.recall, self.precision + self.recall)

    def to_json(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass(frozen=True)
class Counts:
    """Precision and recall as summable fractions."""

    p_num: float = 0.0
    p_den: float = 0.0
    r_num: float = 0.0
    r_den: float = 0.0

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(self.p_num + other.p_num, self.p_den + other.p_den,
                      self.r_num + other.r_num, self.r_den + other.r_den)

    def triple(self) -> MetricTriple:
        return MetricTriple(_div(self.p_num, self.p_den), _div(self.r_num, self.r_den))


def _sets(clusters: Clusters) -> list[frozenset]:
    return [frozenset(c) for c in clusters if len(frozenset(c))]


def _muc_side(key: list[frozenset], response: list[frozenset]) -> tuple[float, float]:
    where = {m: i for i, r in enumerate(response) for m in r}
    num = den = 0
    for k in key:
        parts = {where.get(m, ("alone", m)) for m in k}
        num += len(k) - len(parts)
        den += len(k) - 1
    return num, den


def muc_counts(key: Clusters, response: Clusters) -> Counts:
    K, R = _sets(key), _sets(response)
    r_num, r_den = _muc_side(K, R)
    p_num, p_den = _muc_side(R, K)
    return Counts(p_num, p_den, r_num, r_den)


def _b3_side(key: list[frozenset], response: list[frozenset]) -> tuple[float, float]:
    num = 0.0
    for k in key:
        for r in response:
            overlap = len(k & r)
            if overlap:
                num += overlap * overlap / len(k)
    return num, float(sum(len(k) for k in key))


def b_cubed_counts(key: Clusters, response: Clusters) -> Counts:
    K, R = _sets(key), _sets(response)
    r_num, r_den = _b3_side(K, R)
    p_num, p_den = _b3_side(R, K)
    return Counts(p_num, p_den, r_num, r_den)


def phi4(k: frozenset, r: frozenset) -> float:
    return 2.0 * len(k & r) / (len(k) + len(r))


def ceaf_alignment(key: Clusters, response: Clusters) -> float:
    """Total phi4 similarity of the best one-to-one cluster alignment."""
    K, R = _sets(key), _sets(response)
    if not K or not R:
        return 0.0
    sim = np.array([[phi4(k, r) for r in R] for k in K])
    rows, cols = linear_sum_assignment(sim, maximize=True)
    return float(sim[rows, cols].sum())


def ceaf_phi4_counts(key: Clusters, response: Clusters) -> Counts:
    total = ceaf_alignment(key, response)
    return Counts(total, len(_sets(response)), total, len(_sets(key)))


def muc(key: Clusters, response: Clusters) -> MetricTriple:
    return muc_counts(key, response).triple()


def b_cubed(key: Clusters, response: Clusters) -> MetricTriple:
    return b_cubed_counts(key, response).triple()


def ceaf_phi4(key: Clusters, response: Clusters) -> MetricTriple:
    return ceaf_phi4_counts(key, response).triple()


def avg_f1(muc_t: MetricTriple, b3_t: MetricTriple, ceaf_t: MetricTriple) -> float:
    return (muc_t.f1 + b3_t.f1 + ceaf_t.f1) / 3.0


METRICS = {"muc": muc_counts, "b3": b_cubed_counts, "ceaf_phi4": ceaf_phi4_counts}


@dataclass
class CorpusScorer:
    """Micro-averaged corpus scores; feed one document at a time."""

    def __post_init__(self):
        self.totals = {name: Counts() for name in METRICS}
        self.per_doc: list[dict] = []

    def add(self, key: Clusters, response: Clusters, doc_id: str | None = None) -> dict:
        doc = {}
        for name, fn in METRICS.items():
            c = fn(key, response)
            self.totals[name] = self.totals[name] + c
            doc[name] = c.triple()
        self.per_doc.append({"doc_id": doc_id, **doc})
        return doc

    def triples(self) -> dict[str, MetricTriple]:
        return {name: c.triple() for name, c in self.totals.items()}

    @property
    def avg_f1(self) -> float:
        t = self.triples()
        return avg_f1(t["muc"], t["b3"], t["ceaf_phi4"])

    def report(self, per_document: bool = True) -> dict:
        t = self.triples()
        out = {name: t[name].to_json() for name in METRICS}
        out["avg_f1"] = self.avg_f1
        if per_document:
            docs = []
            for d in self.per_doc:
                entry = {"doc_id": d["doc_id"]}
                entry.update({name: d[name].to_json() for name in METRICS})
                entry["avg_f1"] = avg_f1(d["muc"], d["b3"], d["ceaf_phi4"])
                docs.append(entry)
            out["documents"] = docs
        return out
