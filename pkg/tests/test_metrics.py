import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from deskcoref.metrics import (Counts, CorpusScorer, MetricTriple, avg_f1, b_cubed, ceaf_alignment, ceaf_phi4,
                               muc, phi4)

METRIC_FNS = (muc, b_cubed, ceaf_phi4)


# -- independent oracles ------------------------------------------------------------------

def _oracle_muc_recall(key, response):
    num = den = 0
    for k in key:
        k = set(k)
        partitions = [k & set(r) for r in response if k & set(r)]
        covered = set().union(*partitions) if partitions else set()
        n_parts = len(partitions) + len(k - covered)
        num += len(k) - n_parts
        den += len(k) - 1
    return num / den if den else 0.0


def _oracle_b3_recall(key, response):
    mentions = [(m, set(k)) for k in key for m in k]
    if not mentions:
        return 0.0
    total = 0.0
    for m, k in mentions:
        # a mention absent from the response earns no credit
        r = next((set(r) for r in response if m in r), set())
        total += len(k & r) / len(k)
    return total / len(mentions)


def _oracle_ceaf_total(key, response):
    key, response = [set(k) for k in key], [set(r) for r in response]
    if len(key) > len(response):
        key, response = response, key
    best = 0.0
    for perm in itertools.permutations(range(len(response)), len(key)):
        total = sum(2 * len(key[i] & response[j]) / (len(key[i]) + len(response[j])) for i, j in enumerate(perm))
        best = max(best, total)
    return best


@st.composite
def clusterings(draw, max_mentions=10, max_clusters=6, singletons=False):
    """Disjoint clusters over small integer mention ids."""
    pool = draw(st.lists(st.integers(0, 14), unique=True, max_size=max_mentions))
    labels = draw(st.lists(st.integers(0, max_clusters - 1), min_size=len(pool), max_size=len(pool)))
    groups = {}
    for m, l in zip(pool, labels):
        groups.setdefault(l, []).append(m)
    min_size = 1 if singletons else 2
    return [g for g in groups.values() if len(g) >= min_size]


# -- hand cases ------------------------------------------------------------------------------

@pytest.mark.parametrize("fn", METRIC_FNS)
def test_identity_scores_one(fn):
    key = [["a", "b", "c"], ["d", "e"]]
    t = fn(key, [list(reversed(c)) for c in reversed(key)])
    assert (t.precision, t.recall, t.f1) == (1.0, 1.0, 1.0)


@pytest.mark.parametrize("fn", METRIC_FNS)
def test_empty_response_scores_zero(fn):
    t = fn([["a", "b"]], [])
    assert (t.precision, t.recall, t.f1) == (0.0, 0.0, 0.0)
    t = fn([], [])
    assert (t.precision, t.recall, t.f1) == (0.0, 0.0, 0.0)


def test_muc_partition_example():
    t = muc([["a", "b", "c"]], [["a", "b"]])
    assert t.recall == 0.5 and t.precision == 1.0


def test_b_cubed_merge_example():
    t = b_cubed([["a", "b"], ["c", "d"]], [["a", "b", "c", "d"]])
    assert t.recall == 1.0 and t.precision == 0.5
    assert t.f1 == pytest.approx(2 / 3, rel=1e-15)


def test_b_cubed_disjoint_mentions():
    t = b_cubed([["a", "b"]], [["c", "d"]])
    assert (t.precision, t.recall) == (0.0, 0.0)


def test_ceaf_single_pair_example():
    assert phi4(frozenset("abc"), frozenset("ab")) == pytest.approx(0.8)
    t = ceaf_phi4([["a", "b", "c"]], [["a", "b"]])
    assert t.precision == pytest.approx(0.8) and t.recall == pytest.approx(0.8)


def test_f1_convention():
    assert MetricTriple(0.0, 0.0).f1 == 0.0
    assert MetricTriple(0.5, 1.0).f1 == pytest.approx(2 / 3)


def test_avg_f1_examples():
    one = MetricTriple(1.0, 1.0)
    assert avg_f1(one, one, one) == 1.0

    def t(f):
        return MetricTriple(f, f)  # P = R = f gives F1 = f

    assert round(avg_f1(t(0.853), t(0.781), t(0.753)), 3) == 0.796
    assert avg_f1(t(0.866), t(0.805), t(0.773)) == pytest.approx((0.866 + 0.805 + 0.773) / 3, rel=1e-14)


# -- properties --------------------------------------------------------------------------

@given(clusterings(), clusterings())
def test_against_oracles(key, response):
    assert muc(key, response).recall == pytest.approx(_oracle_muc_recall(key, response), abs=1e-12)
    assert b_cubed(key, response).recall == pytest.approx(_oracle_b3_recall(key, response), abs=1e-12)
    assert ceaf_alignment(key, response) == pytest.approx(_oracle_ceaf_total(key, response), abs=1e-12)


@given(clusterings(singletons=True), clusterings(singletons=True))
def test_ceaf_matches_brute_force_with_singletons(key, response):
    assert ceaf_alignment(key, response) == pytest.approx(_oracle_ceaf_total(key, response), abs=1e-12)


@given(clusterings(), clusterings())
def test_role_symmetry_and_bounds(key, response):
    for fn in METRIC_FNS:
        a, b = fn(key, response), fn(response, key)
        assert a.precision == pytest.approx(b.recall, abs=1e-15)
        assert a.recall == pytest.approx(b.precision, abs=1e-15)
        for v in (a.precision, a.recall, a.f1):
            assert 0.0 <= v <= 1.0 + 1e-12


@given(clusterings(), clusterings(), st.randoms(use_true_random=False))
def test_order_invariance(key, response, rnd):
    def shuffled(cs):
        out = [rnd.sample(c, len(c)) for c in cs]
        rnd.shuffle(out)
        return out

    for fn in METRIC_FNS:
        a, b = fn(key, response), fn(shuffled(key), shuffled(response))
        assert a.precision == pytest.approx(b.precision, abs=1e-12)
        assert a.recall == pytest.approx(b.recall, abs=1e-12)


# -- corpus aggregation ---------------------------------------------------------------------

def test_corpus_is_micro_averaged():
    scorer = CorpusScorer()
    scorer.add([["a", "b", "c"]], [["a", "b"]], "d1")  # MUC R 1/2
    scorer.add([["x", "y"]], [["x", "y"]], "d2")  # MUC R 1/1
    m = scorer.triples()["muc"]
    assert m.recall == pytest.approx(2 / 3)  # (1 + 1) / (2 + 1), not the mean of 0.5 and 1
    report = scorer.report()
    assert [d["doc_id"] for d in report["documents"]] == ["d1", "d2"]
    assert set(report) == {"muc", "b3", "ceaf_phi4", "avg_f1", "documents"}
    assert "documents" not in scorer.report(per_document=False)


def test_counts_add_and_empty():
    c = Counts(1, 2, 3, 4) + Counts(1, 0, 1, 0)
    assert c == Counts(2, 2, 4, 4)
    assert CorpusScorer().avg_f1 == 0.0
