"""Training objectives and their gradients with respect to the scores.

Scalar helpers mirror the textbook definitions; the ``*_doc`` functions are
the vectorised per-document versions used in training and return
``(loss, grad)`` pairs.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from ..domain import ClusterSet, Span, span_precedes

NULL = None  # the null antecedent in antecedent sets
LOG_FLOOR = 1e-300


class CandidateMismatchError(ValueError):
    pass


def gold_antecedents(q: Span, candidates: Sequence[Span], gold: ClusterSet) -> set:
    """Candidates sharing ``q``'s cluster, or ``{None}`` (the null antecedent)."""
    for c in candidates:
        if not span_precedes(c, q):
            raise ValueError(f"candidate {c.as_tuple()} does not precede {q.as_tuple()}")
    cluster_of = gold.cluster_of()
    cid = cluster_of.get(q)
    if cid is None:
        return {NULL}
    found = {c for c in candidates if cluster_of.get(c) == cid}
    return found or {NULL}


def marginal_nll_loss(distribution: Sequence[float], gold_mask: Sequence[bool]) -> float:
    """``-log`` of the probability mass on the gold outcomes (last entry is null)."""
    p = np.asarray(distribution, dtype=np.float64)
    mask = np.asarray(gold_mask, dtype=bool)
    if not mask.any():
        raise ValueError("gold set is empty")
    return float(-np.log(max(p[mask].sum(), LOG_FLOOR)))


def mention_bce_loss(scores: Sequence[float], labels: Sequence[float]) -> float:
    f = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if f.size == 0:
        return 0.0
    return float(np.mean(np.logaddexp(0.0, f) - y * f))


def _log_softmax(z: np.ndarray) -> np.ndarray:
    return z - logsumexp(z, axis=-1, keepdims=True)


def soft_distill_loss(teacher_logits: Sequence[Sequence[float]], student_logits: Sequence[Sequence[float]],
                      tau: float = 1.0) -> float:
    """Mean over queries of ``H(softmax(t / tau), softmax(s / tau))``.

    Each query's logits list its candidates followed by the null antecedent.
    """
    if len(teacher_logits) != len(student_logits):
        raise CandidateMismatchError("teacher and student cover different queries")
    if not teacher_logits:
        return 0.0
    total = 0.0
    for t, s in zip(teacher_logits, student_logits):
        t = np.asarray(t, dtype=np.float64)
        s = np.asarray(s, dtype=np.float64)
        if t.shape != s.shape:
            raise CandidateMismatchError("teacher and student candidate lists differ")
        pt = np.exp(_log_softmax(t / tau))
        total += -float(pt @ _log_softmax(s / tau))
    return total / len(teacher_logits)


# -- vectorised per-document versions ----------------------------------------

def _query_grid(F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row ``j`` holds ``F[:j, j]`` then the null score 0; invalid slots are masked."""
    k = F.shape[0]
    S = np.zeros((k, k + 1))
    S[:, :k] = F.T
    valid = np.zeros((k, k + 1), dtype=bool)
    valid[:, :k] = np.tri(k, k, -1, dtype=bool)
    valid[:, k] = True
    return S, valid


def coref_loss_doc(F: np.ndarray, cluster_ids: np.ndarray) -> tuple[float, np.ndarray]:
    """Marginal log-likelihood over kept spans, averaged over queries.

    ``cluster_ids[i]`` is the gold cluster of kept span ``i`` or ``-1``.
    Returns the loss and its gradient with respect to ``F``.
    """
    k = F.shape[0]
    if k == 0:
        return 0.0, np.zeros((0, 0))
    S, valid = _query_grid(F)
    cid = np.asarray(cluster_ids)
    gold = np.zeros_like(valid)
    same = (cid[None, :] == cid[:, None]) & (cid[:, None] >= 0)
    gold[:, :k] = same & valid[:, :k]
    gold[:, k] = ~gold[:, :k].any(axis=1)
    Sm = np.where(valid, S, -np.inf)
    log_z = logsumexp(Sm, axis=1)
    log_gold = logsumexp(np.where(gold, S, -np.inf), axis=1)
    loss = float(np.mean(log_z - log_gold))
    P = np.exp(Sm - log_z[:, None])
    Pg = np.where(gold, np.exp(S - log_gold[:, None]), 0.0)
    gS = (P - Pg) / k
    return loss, np.triu(gS[:, :k].T, 1)


def mention_bce_doc(fm: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    n = fm.shape[0]
    if n == 0:
        return 0.0, np.zeros(0)
    loss = float(np.mean(np.logaddexp(0.0, fm) - labels * fm))
    sig = 0.5 * (1.0 + np.tanh(0.5 * fm))
    return loss, (sig - labels) / n


def soft_loss_doc(F: np.ndarray, teacher_F: np.ndarray, tau: float = 1.0) -> tuple[float, np.ndarray]:
    """Soft cross-entropy against teacher pair logits over the same kept spans."""
    if F.shape != teacher_F.shape:
        raise CandidateMismatchError(f"student kept {F.shape[0]} spans, teacher {teacher_F.shape[0]}")
    k = F.shape[0]
    if k == 0:
        return 0.0, np.zeros((0, 0))
    S, valid = _query_grid(F)
    St, _ = _query_grid(teacher_F)
    ls = _log_softmax(np.where(valid, S / tau, -np.inf))
    lt = _log_softmax(np.where(valid, St / tau, -np.inf))
    pt = np.exp(lt)
    ps = np.exp(ls)
    loss = float(np.mean(-np.sum(pt * np.where(valid, ls, 0.0), axis=1)))
    gS = (ps - pt) / (tau * k)
    return loss, np.triu(gS[:, :k].T, 1)
