"""Core data types shared across the package.

Token spans are inclusive ``(start, end)`` token indices. Character spans are
end-exclusive ``(char_start, char_end)`` offsets into the original text.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator


class FormatError(ValueError):
    """Malformed corpus record or model file."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, order=True)
class Span:
    start: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.end < self.start:
            raise ValueError(f"invalid span ({self.start}, {self.end})")

    @property
    def width(self) -> int:
        return self.end - self.start + 1

    def as_tuple(self) -> tuple[int, int]:
        return (self.start, self.end)


def span_precedes(c: Span, q: Span) -> bool:
    """Antecedent order: earlier start first, then earlier end."""
    return c.start < q.start or (c.start == q.start and c.end < q.end)


@dataclass(frozen=True)
class ClusterSet:
    """Disjoint clusters of spans; each cluster stored as a sorted tuple."""

    clusters: tuple[tuple[Span, ...], ...] = ()

    def __post_init__(self):
        seen: set[Span] = set()
        for cluster in self.clusters:
            for span in cluster:
                if span in seen:
                    raise ValueError(f"span {span.as_tuple()} appears in more than one cluster")
                seen.add(span)

    @classmethod
    def from_lists(cls, clusters: Iterable[Iterable], allow_singletons: bool = False) -> "ClusterSet":
        out = []
        for cluster in clusters:
            spans = sorted({s if isinstance(s, Span) else Span(int(s[0]), int(s[1])) for s in cluster})
            if not spans:
                continue
            if len(spans) < 2 and not allow_singletons:
                raise ValueError(f"singleton cluster {spans[0].as_tuple()} rejected")
            out.append(tuple(spans))
        out.sort(key=lambda c: c[0])
        return cls(tuple(out))

    def __len__(self) -> int:
        return len(self.clusters)

    def __iter__(self) -> Iterator[tuple[Span, ...]]:
        return iter(self.clusters)

    def mentions(self) -> set[Span]:
        return {s for c in self.clusters for s in c}

    def cluster_of(self) -> dict[Span, int]:
        return {s: i for i, c in enumerate(self.clusters) for s in c}

    def to_lists(self) -> list[list[list[int]]]:
        return [[[s.start, s.end] for s in c] for c in self.clusters]


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    tokens: tuple[str, ...]
    token_char_offsets: tuple[tuple[int, int], ...]
    gold_clusters: ClusterSet | None = None

    def __post_init__(self):
        if len(self.tokens) != len(self.token_char_offsets):
            raise ValueError("tokens and token_char_offsets differ in length")
        prev_end = 0
        for tok, (a, b) in zip(self.tokens, self.token_char_offsets):
            if a < prev_end or b <= a:
                raise ValueError(f"offsets ({a}, {b}) not increasing or empty")
            if self.text[a:b] != tok:
                raise ValueError(f"token {tok!r} does not match text[{a}:{b}]")
            prev_end = b
        if self.gold_clusters is not None:
            T = len(self.tokens)
            for s in self.gold_clusters.mentions():
                if s.end >= T:
                    raise ValueError(f"gold span {s.as_tuple()} outside document of {T} tokens")

    def __len__(self) -> int:
        return len(self.tokens)

    def with_clusters(self, clusters: ClusterSet | None) -> "Document":
        return Document(self.doc_id, self.text, self.tokens, self.token_char_offsets, clusters)


def to_char_span(doc: Document, s: Span) -> tuple[int, int]:
    if s.end >= len(doc.tokens):
        raise IndexError(f"span {s.as_tuple()} outside document of {len(doc.tokens)} tokens")
    return (doc.token_char_offsets[s.start][0], doc.token_char_offsets[s.end][1])


@dataclass
class CorefResult:
    doc_id: str
    clusters_char: list[list[tuple[int, int]]]
    clusters_text: list[list[str]]
    clusters_tokens: list[list[tuple[int, int]]] = field(default_factory=list)
    _char_to_span: dict[tuple[int, int], Span] = field(default_factory=dict, repr=False)
    _score: Callable[[Span, Span], float] | None = field(default=None, repr=False)

    def get_clusters(self, as_strings: bool = True):
        return self.clusters_text if as_strings else self.clusters_char

    def get_logit(self, span_i: tuple[int, int], span_j: tuple[int, int]) -> float:
        """Pair score for two pruned spans given as character spans.

        The pair is reordered so the earlier span acts as the antecedent.
        """
        try:
            a = self._char_to_span[tuple(span_i)]
            b = self._char_to_span[tuple(span_j)]
        except KeyError as exc:
            raise KeyError(f"span {exc.args[0]} is not among the scored spans") from None
        if a == b:
            raise ValueError("a span cannot be its own antecedent")
        if self._score is None:
            raise KeyError("result carries no pair scores")
        c, q = (a, b) if span_precedes(a, b) else (b, a)
        return self._score(c, q)

    def to_json(self, include_tokens: bool = False) -> dict:
        out = {
            "doc_id": self.doc_id,
            "clusters_char": [[list(s) for s in c] for c in self.clusters_char],
            "clusters_text": self.clusters_text,
        }
        if include_tokens:
            out["clusters_tokens"] = [[list(s) for s in c] for c in self.clusters_tokens]
        return out


# -- JSONL corpus ------------------------------------------------------------

def document_from_record(rec: dict, allow_singletons: bool = False, line: int | None = None) -> Document:
    try:
        doc_id = str(rec["doc_id"])
        text = rec["text"]
        if "tokens" in rec:
            tokens = tuple(rec["tokens"])
            offsets = tuple((int(a), int(b)) for a, b in rec["token_char_offsets"])
        else:
            from .encoder import tokenize

            d = tokenize(text)
            tokens, offsets = d.tokens, d.token_char_offsets
        clusters = None
        if rec.get("clusters") is not None:
            clusters = ClusterSet.from_lists(rec["clusters"], allow_singletons=allow_singletons)
        return Document(doc_id, text, tokens, offsets, clusters)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad corpus record: {exc}", line) from None


def document_to_record(doc: Document) -> dict:
    rec = {
        "doc_id": doc.doc_id,
        "text": doc.text,
        "tokens": list(doc.tokens),
        "token_char_offsets": [list(o) for o in doc.token_char_offsets],
    }
    if doc.gold_clusters is not None:
        rec["clusters"] = doc.gold_clusters.to_lists()
    return rec


def read_jsonl(path, allow_singletons: bool = False) -> list[Document]:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON: {exc.msg}", i) from None
            if not isinstance(rec, dict):
                raise FormatError("record is not an object", i)
            docs.append(document_from_record(rec, allow_singletons, line=i))
    return docs


def write_jsonl(path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")




