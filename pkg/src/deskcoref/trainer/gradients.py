"""Reverse-mode gradients of the training losses through head, batch layout and encoder."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..batching import LEFTOVER, make_plan, reassemble, reassemble_grad
from ..domain import Document, Span
from ..encoder import encode_grid_backward, encode_grid_with_tables, project_tables
from ..head import TokenFeatures, head_backward, mention_scores
from ..model import ModelParams, score_document
from ..pruner import span_arrays
from .losses import coref_loss_doc, mention_bce_doc, soft_loss_doc

LOSSES = ("mentions", "coref", "soft")


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class SoftTarget:
    """Teacher-chosen kept spans and the teacher's pair logits over them."""

    spans: tuple[Span, ...]
    logits: np.ndarray  # k x k, upper triangle meaningful


def mention_labels(doc: Document, starts: np.ndarray, ends: np.ndarray) -> tuple[np.ndarray, int]:
    """1 for candidate spans in the document's clusters; also counts out-of-width mentions."""
    labels = np.zeros(len(starts))
    if doc.gold_clusters is None:
        return labels, 0
    pos = {(int(s), int(e)): i for i, (s, e) in enumerate(zip(starts, ends))}
    dropped = 0
    for m in doc.gold_clusters.mentions():
        i = pos.get((m.start, m.end))
        if i is None:
            dropped += 1
        else:
            labels[i] = 1.0
    return labels, dropped


def kept_cluster_ids(doc: Document, spans: Sequence[Span]) -> np.ndarray:
    cluster_of = doc.gold_clusters.cluster_of() if doc.gold_clusters is not None else {}
    return np.array([cluster_of.get(s, -1) for s in spans], dtype=np.int64)


def document_loss(model: ModelParams, doc: Document, h: np.ndarray, loss: str,
                  soft_target: SoftTarget | None = None, tau: float = 1.0):
    """Loss of one document and the head/token-vector gradients.

    Returns ``(loss, head_grads, grad_h)``.
    """
    head = model.head
    if h.shape[0] == 0:
        return 0.0, {k: np.zeros_like(v) for k, v in head.arrays().items()}, np.zeros_like(h)
    if loss == "mentions":
        starts, ends = span_arrays(h.shape[0], model.prune.max_span_width)
        feats = TokenFeatures(h, head)
        fm = mention_scores(feats, starts, ends, head)
        labels, _ = mention_labels(doc, starts, ends)
        value, g_fm = mention_bce_doc(fm, labels)
        g, g_h = head_backward(head, feats, starts, ends, g_fm, [], [], None)
        return value, g, g_h
    if loss == "coref":
        sc = score_document(model, h)
        value, g_F = coref_loss_doc(sc.F, kept_cluster_ids(doc, sc.pruned_spans))
    elif loss == "soft":
        if soft_target is None:
            raise TrainingError(f"no teacher logits for document {doc.doc_id}")
        sc = score_document(model, h, keep_spans=soft_target.spans)
        value, g_F = soft_loss_doc(sc.F, soft_target.logits, tau)
    else:
        raise ValueError(f"unknown loss {loss!r}; expected one of {LOSSES}")
    ks, ke = sc.starts[sc.keep], sc.ends[sc.keep]
    g, g_h = head_backward(head, sc.feats, sc.starts, sc.ends, None, ks, ke, g_F)
    return value, g, g_h


def compute_gradients(model: ModelParams, docs: Sequence[Document], loss: str, M: int = 64,
                      soft_targets: Mapping[str, SoftTarget] | None = None, tau: float = 1.0,
                      ids_cache: dict | None = None) -> tuple[float, dict[str, np.ndarray]]:
    """Mean per-document loss over ``docs`` and its exact gradient for every parameter.

    The documents are encoded together under the leftover layout, exactly as
    in training.
    """
    enc = model.encoder
    plan = make_plan(docs, M, LEFTOVER, V=enc.V, ids_cache=ids_cache)
    tables = project_tables(enc.embedding, enc.mix_weights)
    grids = [(b.ids(), b.lengths()) for b in plan.batches]
    outs = [encode_grid_with_tables(tables, enc.mix_bias, ids, lens) for ids, lens in grids]
    vecs = reassemble(outs, plan, model.encoder.d)

    n = max(len(docs), 1)
    grads = {k: np.zeros_like(v) for k, v in model.arrays().items()}
    total = 0.0
    g_docs = []
    for doc, h in zip(docs, vecs):
        target = soft_targets.get(doc.doc_id) if soft_targets is not None else None
        value, g_head, g_h = document_loss(model, doc, h, loss, target, tau)
        if not np.isfinite(value):
            raise TrainingError(f"non-finite {loss} loss {value} on document {doc.doc_id}")
        total += value
        for name, g in g_head.items():
            grads[f"head.{name}"] += g / n
        g_docs.append(g_h / n)

    g_outs = reassemble_grad(g_docs, plan, [o.shape for o in outs])
    for (ids, lens), out, g_out in zip(grids, outs, g_outs):
        g_emb, g_mix, g_bias = encode_grid_backward(enc.embedding, enc.mix_weights, ids, lens, out, g_out)
        grads["encoder.embedding"] += g_emb
        grads["encoder.mix_weights"] += g_mix
        grads["encoder.mix_bias"] += g_bias
    return total / n, grads


def loss_value(model: ModelParams, docs: Sequence[Document], loss: str, M: int = 64,
               soft_targets: Mapping[str, SoftTarget] | None = None, tau: float = 1.0) -> float:
    """Forward-only loss, matching ``compute_gradients``."""
    return compute_gradients(model, docs, loss, M, soft_targets, tau)[0]
