"""Full model: encoder + head + pruning settings, its JSON file, and prediction."""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from functools import cached_property
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .batching import LEFTOVER, encode_plan, make_plan, plan_dynamic_groups, reassemble
from .decoder import build_result, decode_clusters
from .domain import CorefResult, Document, FormatError, Span
from .encoder import EncoderParams, init_encoder
from .head import (ANTECEDENT_FIELDS, MENTION_FIELDS, HeadParams, TokenFeatures,
                   antecedent_matrix, init_head, mention_scores, pair_matrix)
from .pruner import PruneConfig, keep_count, span_arrays, top_k_indices

FORMAT_VERSION = 1
ENCODER_FIELDS = ("embedding", "mix_weights", "mix_bias")
PARAM_GROUPS = {
    "encoder": tuple(f"encoder.{n}" for n in ENCODER_FIELDS),
    "mention": tuple(f"head.{n}" for n in MENTION_FIELDS),
    "antecedent": tuple(f"head.{n}" for n in ANTECEDENT_FIELDS),
}


@dataclass(eq=False)
class ModelParams:
    encoder: EncoderParams
    head: HeadParams
    prune: PruneConfig = field(default_factory=PruneConfig)

    @property
    def seed(self) -> int:
        return self.encoder.seed

    def arrays(self) -> dict[str, np.ndarray]:
        out = {f"encoder.{n}": getattr(self.encoder, n) for n in ENCODER_FIELDS}
        out.update({f"head.{n}": a for n, a in self.head.arrays().items()})
        return out

    def replace_arrays(self, arrays: dict[str, np.ndarray]) -> "ModelParams":
        enc = EncoderParams(*(arrays[f"encoder.{n}"] for n in ENCODER_FIELDS), seed=self.encoder.seed)
        head = HeadParams(**{n: arrays[f"head.{n}"] for n in self.head.arrays()})
        return ModelParams(enc, head, self.prune)

    def copy(self) -> "ModelParams":
        return self.replace_arrays({k: v.copy() for k, v in self.arrays().items()})

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "V": self.encoder.V,
            "d": self.encoder.d,
            "proj_dim": self.head.proj_dim,
            "max_span_width": self.prune.max_span_width,
            "lambda": self.prune.lam,
            "max_antecedents": self.prune.max_antecedents,
            "seed": self.seed,
            "matrices": {k: v.tolist() for k, v in self.arrays().items()},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ModelParams":
        try:
            if obj["format_version"] != FORMAT_VERSION:
                raise FormatError(f"unsupported model format_version {obj['format_version']}")
            mats = {k: np.asarray(v, dtype=np.float64) for k, v in obj["matrices"].items()}
            enc = EncoderParams(*(mats[f"encoder.{n}"] for n in ENCODER_FIELDS), seed=int(obj["seed"]))
            head = HeadParams(**{n: mats[f"head.{n}"] for n in MENTION_FIELDS + ANTECEDENT_FIELDS})
            prune = PruneConfig(float(obj["lambda"]), int(obj["max_span_width"]), obj.get("max_antecedents"))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"bad model file: {exc}") from None
        if enc.V != obj["V"] or enc.d != obj["d"] or head.proj_dim != obj["proj_dim"]:
            raise FormatError("model dimensions disagree with the stored matrices")
        return cls(enc, head, prune)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path) -> "ModelParams":
        with open(path, encoding="utf-8") as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise FormatError(f"model file is not JSON: {exc.msg}") from None
        return cls.from_json(obj)


def init_model(seed: int = 0, V: int = 4096, d: int = 32, p: int = 32,
               prune: PruneConfig | None = None) -> ModelParams:
    return ModelParams(init_encoder(seed, V, d), init_head(seed, d, p), prune or PruneConfig())


@dataclass
class DocumentScores:
    """Scores for one document: all candidate spans, the kept subset and their pair matrix."""

    feats: TokenFeatures
    starts: np.ndarray
    ends: np.ndarray
    fm: np.ndarray  # mention score of every candidate span
    keep: np.ndarray  # indices into starts/ends, ascending
    F: np.ndarray  # k x k pair scores, upper triangle meaningful

    @cached_property
    def pruned_spans(self) -> list[Span]:
        return [Span(int(self.starts[i]), int(self.ends[i])) for i in self.keep]

    @cached_property
    def _index(self) -> dict[Span, int]:
        return {s: i for i, s in enumerate(self.pruned_spans)}

    def pair(self, c: Span, q: Span) -> float:
        """``F(c, q)`` for two kept spans."""
        i, j = self._index[c], self._index[q]
        if i >= j:
            raise ValueError(f"{c.as_tuple()} does not precede {q.as_tuple()}")
        return float(self.F[i, j])


def score_document(model: ModelParams, h: np.ndarray, keep_spans: Sequence[Span] | None = None) -> DocumentScores:
    """Score every candidate span, prune to the top ``ceil(lambda T)`` and score pairs.

    ``keep_spans`` overrides pruning (used when a teacher fixes the kept spans).
    """
    T = h.shape[0]
    starts, ends = span_arrays(T, model.prune.max_span_width)
    feats = TokenFeatures(h, model.head)
    fm = mention_scores(feats, starts, ends, model.head)
    if keep_spans is None:
        keep = top_k_indices(fm, keep_count(T, model.prune.lam, len(fm)))
    else:
        W = model.prune.max_span_width
        pos = {(int(s), int(e)): i for i, (s, e) in enumerate(zip(starts, ends))}
        try:
            keep = np.array(sorted(pos[(s.start, s.end)] for s in keep_spans), dtype=np.int64)
        except KeyError as exc:
            raise ValueError(f"kept span {exc.args[0]} is not a candidate (max width {W})") from None
    ks, ke = starts[keep], ends[keep]
    fa = antecedent_matrix(feats, ks, ke, model.head)
    F = pair_matrix(fm[keep], fa)
    return DocumentScores(feats, starts, ends, fm, keep, F)


def encode_documents(model: ModelParams, docs: Sequence[Document], M: int = 64,
                     max_tokens_in_batch: int = 10000, scheme: str = LEFTOVER) -> dict[str, np.ndarray]:
    """Token vectors per ``doc_id``, computed through dynamic groups and the chosen layout."""
    out = {}
    for group in plan_dynamic_groups(docs, max_tokens_in_batch):
        plan = make_plan(group, M, scheme, V=model.encoder.V)
        vecs = reassemble(encode_plan(model.encoder, plan), plan, model.encoder.d)
        out.update(zip(plan.doc_ids, vecs))
    return out


def _predict_one(model: ModelParams, doc: Document, h: np.ndarray) -> CorefResult:
    if len(doc) == 0:
        return build_result(doc, decode_clusters([], np.zeros((0, 0))), [], None)
    scores = score_document(model, h)
    spans = scores.pruned_spans
    clusters = decode_clusters(spans, scores.F, model.prune.max_antecedents)
    return build_result(doc, clusters, spans, scores.pair)


def predict(model: ModelParams, docs: Sequence[Document], M: int = 64,
            max_tokens_in_batch: int = 10000, scheme: str = LEFTOVER,
            workers: int = 1) -> list[CorefResult]:
    """Coreference results in input order.

    With ``workers > 1`` scoring and decoding run in a thread pool; the
    output order and contents do not depend on the pool size.
    """
    ids = [d.doc_id for d in docs]
    if len(set(ids)) != len(ids):
        raise ValueError("doc_id values must be unique")
    vecs = encode_documents(model, docs, M, max_tokens_in_batch, scheme)
    if workers <= 1:
        return [_predict_one(model, doc, vecs[doc.doc_id]) for doc in docs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda doc: _predict_one(model, doc, vecs[doc.doc_id]), docs))
