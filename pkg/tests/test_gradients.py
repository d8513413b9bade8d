"""Backpropagated gradients against central differences of an independent scalar forward pass."""
import numpy as np
import pytest

from deskcoref.domain import ClusterSet
from deskcoref.encoder import segment_document, tokenize
from deskcoref.head import mention_score, pair_score, softmax_with_null
from deskcoref.model import ModelParams, init_model
from deskcoref.pruner import PruneConfig, ScoredSpans, enumerate_spans, prune
from deskcoref.trainer import (SoftTarget, compute_gradients, gold_antecedents, marginal_nll_loss,
                               mention_bce_loss, soft_distill_loss)

M = 8  # several full segments plus a leftover in a 20-token document
TEXT = "Ann met Bob in Rome . Bob liked Ann and Rome . later Ann called Bob from Oslo . ok"
CLUSTERS = [[[0, 0], [8, 8], [13, 13]], [[2, 2], [6, 6], [15, 15]], [[4, 4], [10, 10]]]


def _encode_scalar(model, doc):
    """Per-token window mixer over segments, written without the grid code."""
    enc = model.encoder
    rows = []
    for seg in segment_document(doc, M, V=enc.V):
        E = [enc.embedding[i] for i in seg.token_ids]
        z = np.zeros(enc.d)
        for i in range(len(E)):
            window = np.concatenate([E[i - 1] if i else z, E[i], E[i + 1] if i + 1 < len(E) else z])
            rows.append(np.tanh(enc.mix_weights @ window + enc.mix_bias))
    return np.array(rows)


def _pruned(model, h):
    spans = enumerate_spans(h.shape[0], model.prune.max_span_width)
    scored = ScoredSpans(tuple(spans), tuple(mention_score(h, s, model.head) for s in spans))
    return spans, scored, list(prune(scored, h.shape[0], model.prune).spans)


def scalar_loss(model, doc, loss, target=None):
    h = _encode_scalar(model, doc)
    spans, scored, kept = _pruned(model, h)
    if loss == "mentions":
        gold = doc.gold_clusters.mentions()
        return mention_bce_loss(scored.mention_scores, [float(s in gold) for s in spans])
    if loss == "soft":
        kept = list(target.spans)
    k = len(kept)
    total = 0.0
    t_logits, s_logits = [], []
    for j, q in enumerate(kept):
        scores = [pair_score(h, c, q, model.head) for c in kept[:j]]
        if loss == "coref":
            gold = gold_antecedents(q, kept[:j], doc.gold_clusters)
            mask = [c in gold for c in kept[:j]] + [None in gold]
            total += marginal_nll_loss(softmax_with_null(scores), mask)
        else:
            s_logits.append(scores + [0.0])
            t_logits.append(list(target.logits[:j, j]) + [0.0])
    return total / k if loss == "coref" else soft_distill_loss(t_logits, s_logits)


def _fixture(seed=0):
    base = init_model(seed, V=32, d=4, p=3, prune=PruneConfig(lam=0.5, max_span_width=3))
    rng = np.random.default_rng(seed)
    model = base.replace_arrays({k: rng.normal(scale=0.6, size=v.shape) for k, v in base.arrays().items()})
    doc = tokenize(TEXT, "g").with_clusters(ClusterSet.from_lists(CLUSTERS))
    assert len(doc) == 20
    return model, doc


def _max_relative_error(model, doc, loss, target=None, h=1e-5):
    soft = {doc.doc_id: target} if target is not None else None
    _, grads = compute_gradients(model, [doc], loss, M=M, soft_targets=soft)
    arrays = model.arrays()
    worst = 0.0
    for name, arr in arrays.items():
        for idx in np.ndindex(arr.shape):
            bumped = {k: v.copy() for k, v in arrays.items()}
            bumped[name][idx] += h
            up = scalar_loss(ModelParams.replace_arrays(model, bumped), doc, loss, target)
            bumped[name][idx] -= 2 * h
            down = scalar_loss(ModelParams.replace_arrays(model, bumped), doc, loss, target)
            numeric = (up - down) / (2 * h)
            a = grads[name][idx]
            worst = max(worst, abs(a - numeric) / max(abs(a), abs(numeric), 1e-6))
    return worst


def test_scalar_forward_matches_training_forward():
    model, doc = _fixture()
    for loss in ("mentions", "coref"):
        value, _ = compute_gradients(model, [doc], loss, M=M)
        assert value == pytest.approx(scalar_loss(model, doc, loss), rel=1e-12)


@pytest.mark.parametrize("loss", ["mentions", "coref", "soft"])
def test_gradients_match_finite_differences(loss):
    model, doc = _fixture()
    target = None
    if loss == "soft":
        kept = _pruned(model, _encode_scalar(model, doc))[2]
        logits = np.random.default_rng(9).normal(scale=2.0, size=(len(kept), len(kept)))
        target = SoftTarget(tuple(kept), logits)
    assert _max_relative_error(model, doc, loss, target) <= 1e-4


def test_zero_parameters_are_stationary_for_head_vectors():
    base = init_model(0, V=32, d=4, p=3)
    zero = base.replace_arrays({k: np.zeros_like(v) for k, v in base.arrays().items()})
    # symmetric data: every span labelled, half the spans positive overall
    doc = tokenize("Ann Ann Bob Bob", "z").with_clusters(ClusterSet.from_lists([[[0, 0], [1, 1]], [[2, 2], [3, 3]]]))
    _, grads = compute_gradients(zero, [doc], "mentions")
    for name in ("head.v_s", "head.v_e", "head.B_m"):
        assert not grads[name].any()


def test_null_only_queries_have_no_gradient():
    model, _ = _fixture()
    model = ModelParams(model.encoder, model.head, PruneConfig(lam=0.25, max_span_width=3))
    doc = tokenize("Ann waved", "n").with_clusters(ClusterSet.from_lists([[[0, 0], [1, 1]]]))
    # ceil(0.25 * 2) = 1 kept span: its only antecedent is the null one
    value, grads = compute_gradients(model, [doc], "coref", M=M)
    assert value == 0.0
    assert all(not g.any() for g in grads.values())


def test_batch_gradient_is_mean_of_documents():
    model, doc = _fixture()
    other = tokenize("Bob saw Ann . Ann left .", "o").with_clusters(ClusterSet.from_lists([[[2, 2], [4, 4]]]))
    v_both, g_both = compute_gradients(model, [doc, other], "coref", M=M)
    v1, g1 = compute_gradients(model, [doc], "coref", M=M)
    v2, g2 = compute_gradients(model, [other], "coref", M=M)
    assert v_both == pytest.approx((v1 + v2) / 2, rel=1e-13)
    for k in g_both:
        np.testing.assert_allclose(g_both[k], (g1[k] + g2[k]) / 2, rtol=1e-10, atol=1e-15)
