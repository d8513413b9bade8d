import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deskcoref.domain import ClusterSet, Span
from deskcoref.head import softmax_with_null
from deskcoref.trainer import (coref_loss_doc, gold_antecedents, marginal_nll_loss, mention_bce_doc,
                               mention_bce_loss, soft_distill_loss, soft_loss_doc)
from deskcoref.trainer.losses import CandidateMismatchError

A, Q, Z, B = Span(0, 0), Span(3, 3), Span(6, 6), Span(1, 1)


def _numeric_grad(f, x, eps=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        up, down = x.copy(), x.copy()
        up[idx] += eps
        down[idx] -= eps
        g[idx] = (f(up) - f(down)) / (2 * eps)
    return g


# -- gold antecedents ----------------------------------------------------------------------

def test_gold_antecedents_intersection():
    gold = ClusterSet.from_lists([[[0, 0], [3, 3], [6, 6]]])
    assert gold_antecedents(Q, [A, B], gold) == {A}


def test_gold_antecedents_null_fallbacks():
    gold = ClusterSet.from_lists([[[0, 0], [3, 3]]])
    assert gold_antecedents(B, [A], gold) == {None}
    # the mate of Q was pruned away
    assert gold_antecedents(Q, [B], gold) == {None}
    assert gold_antecedents(A, [], gold) == {None}


def test_gold_antecedents_requires_precedence():
    with pytest.raises(ValueError):
        gold_antecedents(A, [Q], ClusterSet.from_lists([]))


@given(st.lists(st.integers(-1, 3), min_size=1, max_size=10))
def test_targets_never_empty(labels):
    spans = [Span(i, i) for i in range(len(labels))]
    groups = {}
    for s, l in zip(spans, labels):
        if l >= 0:
            groups.setdefault(l, []).append([s.start, s.end])
    gold = ClusterSet.from_lists(list(groups.values()), allow_singletons=True)
    for j, q in enumerate(spans):
        assert gold_antecedents(q, spans[:j], gold)


# -- marginal likelihood -----------------------------------------------------------------------

def test_marginal_nll_examples():
    assert marginal_nll_loss(softmax_with_null([]), [True]) == 0.0
    assert marginal_nll_loss(softmax_with_null([1.0, -2.0]), [True, True, True]) == pytest.approx(0.0, abs=1e-15)
    assert marginal_nll_loss(softmax_with_null([0.0]), [True, False]) == pytest.approx(math.log(2), rel=1e-15)
    with pytest.raises(ValueError):
        marginal_nll_loss([0.5, 0.5], [False, False])


def test_marginal_nll_is_finite_on_vanishing_mass():
    assert np.isfinite(marginal_nll_loss([0.0, 1.0], [True, False]))


@given(st.lists(st.floats(-20, 20), min_size=1, max_size=6), st.data())
def test_marginal_nll_non_negative(scores, data):
    mask = data.draw(st.lists(st.booleans(), min_size=len(scores) + 1, max_size=len(scores) + 1))
    if not any(mask):
        mask[-1] = True
    assert marginal_nll_loss(softmax_with_null(scores), mask) >= 0.0


def _scalar_coref_loss(F, cids):
    """Per-query textbook loss built from the scalar helpers."""
    k = len(cids)
    spans = [Span(i, i) for i in range(k)]
    groups = {}
    for s, c in zip(spans, cids):
        if c >= 0:
            groups.setdefault(c, []).append([s.start, s.end])
    gold = ClusterSet.from_lists(list(groups.values()), allow_singletons=True)
    total = 0.0
    for j in range(k):
        target = gold_antecedents(spans[j], spans[:j], gold)
        mask = [spans[i] in target for i in range(j)] + [None in target]
        total += marginal_nll_loss(softmax_with_null(F[:j, j]), mask)
    return total / k


@given(st.integers(1, 7).flatmap(lambda k: st.tuples(
    st.lists(st.floats(-8, 8), min_size=k * k, max_size=k * k),
    st.lists(st.integers(-1, 2), min_size=k, max_size=k))))
def test_coref_loss_doc_matches_scalar_definition(case):
    values, cids = case
    k = len(cids)
    F = np.array(values).reshape(k, k)
    loss, _ = coref_loss_doc(F, np.array(cids))
    assert loss == pytest.approx(_scalar_coref_loss(F, cids), rel=1e-10, abs=1e-12)


def test_coref_loss_doc_gradient(rng):
    F = rng.normal(size=(6, 6))
    cids = np.array([0, -1, 0, 1, 1, 0])
    _, g = coref_loss_doc(F, cids)
    num = _numeric_grad(lambda x: coref_loss_doc(x, cids)[0], F)
    np.testing.assert_allclose(g, np.triu(num, 1), atol=1e-8)
    assert not np.tril(g).any()


# -- mention BCE -----------------------------------------------------------------------------------

def test_bce_examples():
    assert mention_bce_loss([0.0] * 5, [1, 0, 1, 1, 0]) == pytest.approx(math.log(2), rel=1e-15)
    assert mention_bce_loss([20.0, -20.0, -20.0], [1, 0, 0]) < 1e-8
    f = np.array([0.3, -1.2, 2.0])
    expected = np.mean([math.log1p(math.exp(x)) for x in f])
    assert mention_bce_loss(f, [0, 0, 0]) == pytest.approx(expected, rel=1e-14)
    assert mention_bce_loss([], []) == 0.0


def test_bce_doc_matches_scalar_and_gradient(rng):
    fm = rng.normal(size=9) * 3
    y = (rng.random(9) > 0.5).astype(float)
    loss, g = mention_bce_doc(fm, y)
    assert loss == pytest.approx(mention_bce_loss(fm, y), rel=1e-15)
    np.testing.assert_allclose(g, _numeric_grad(lambda x: mention_bce_doc(x, y)[0], fm), atol=1e-9)


def test_bce_stable_at_extremes():
    assert np.isfinite(mention_bce_loss([800.0, -800.0], [0, 1]))


# -- soft distillation ----------------------------------------------------------------------------

def _entropy(logits):
    p = np.exp(logits - np.max(logits))
    p /= p.sum()
    return float(-(p * np.log(p)).sum())


def test_soft_loss_equal_logits_gives_teacher_entropy():
    t = [[1.0, -0.5, 0.0], [0.0]]
    assert soft_distill_loss(t, t) == pytest.approx((_entropy(np.array(t[0])) + 0.0) / 2, rel=1e-13)


def test_soft_loss_one_hot_teacher():
    s = np.array([0.7, -0.3, 0.0])
    log_ps = s - np.log(np.exp(s).sum())
    assert soft_distill_loss([[50.0, -50.0, -50.0]], [s]) == pytest.approx(-log_ps[0], rel=1e-9)


def test_soft_loss_uniform():
    for k in (1, 3, 6):
        z = [[0.0] * (k + 1)]
        assert soft_distill_loss(z, z) == pytest.approx(math.log(k + 1), rel=1e-14)


def test_soft_loss_mismatch_is_contract_error():
    with pytest.raises(CandidateMismatchError):
        soft_distill_loss([[0.0, 0.0]], [[0.0, 0.0, 0.0]])
    with pytest.raises(CandidateMismatchError):
        soft_loss_doc(np.zeros((2, 2)), np.zeros((3, 3)))


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.lists(st.floats(-5, 5), min_size=3, max_size=3),
       st.floats(0.5, 4.0))
def test_soft_loss_lower_bounded_by_teacher_entropy(t, s, tau):
    bound = soft_distill_loss([t], [t], tau)
    assert soft_distill_loss([t], [s], tau) >= bound - 1e-12


def test_soft_loss_doc_matches_scalar_and_gradient(rng):
    k = 5
    F, Ft = rng.normal(size=(k, k)), rng.normal(size=(k, k))
    for tau in (1.0, 2.5):
        loss, g = soft_loss_doc(F, Ft, tau)
        t = [list(Ft[:j, j]) + [0.0] for j in range(k)]
        s = [list(F[:j, j]) + [0.0] for j in range(k)]
        assert loss == pytest.approx(soft_distill_loss(t, s, tau), rel=1e-12)
        num = _numeric_grad(lambda x: soft_loss_doc(x, Ft, tau)[0], F)
        np.testing.assert_allclose(g, np.triu(num, 1), atol=1e-8)
