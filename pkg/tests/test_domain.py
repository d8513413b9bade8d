import itertools
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from deskcoref.domain import (ClusterSet, Document, FormatError, Span, document_from_record,
                              document_to_record, read_jsonl, span_precedes, to_char_span, write_jsonl)
from deskcoref.encoder import tokenize

from conftest import API_TEXT


# -- span order ---------------------------------------------------------------

@pytest.mark.parametrize("c, q, expected", [
    ((0, 1), (3, 4), True),
    ((2, 5), (2, 5), False),
    ((2, 3), (2, 5), True),
    ((2, 5), (2, 3), False),
    ((3, 3), (0, 9), False),
])
def test_span_precedes_examples(c, q, expected):
    assert span_precedes(Span(*c), Span(*q)) is expected


def test_span_precedes_is_strict_total_order_on_six_tokens():
    all_spans = [Span(a, b) for a in range(6) for b in range(a, 6)]
    for x in all_spans:
        assert not span_precedes(x, x)
    for x, y in itertools.permutations(all_spans, 2):
        # exactly one direction holds for distinct spans
        assert span_precedes(x, y) != span_precedes(y, x)
    for x, y, z in itertools.permutations(all_spans, 3):
        if span_precedes(x, y) and span_precedes(y, z):
            assert span_precedes(x, z)


def test_span_precedes_matches_tuple_order():
    all_spans = [Span(a, b) for a in range(5) for b in range(a, 5)]
    for x, y in itertools.product(all_spans, repeat=2):
        assert span_precedes(x, y) == (x.as_tuple() < y.as_tuple())


@pytest.mark.parametrize("a, b", [(-1, 0), (3, 2)])
def test_invalid_span_rejected(a, b):
    with pytest.raises(ValueError):
        Span(a, b)


# -- character spans ------------------------------------------------------------

def test_to_char_span_api_listing(api_doc):
    assert to_char_span(api_doc, Span(0, 0)) == (0, 2)
    assert to_char_span(api_doc, Span(8, 10)) == (33, 50)
    assert API_TEXT[33:50] == "our coref package"


def test_to_char_span_single_char_doc():
    doc = tokenize("x")
    assert to_char_span(doc, Span(0, 0)) == (0, 1)


def test_to_char_span_out_of_range(api_doc):
    with pytest.raises(IndexError):
        to_char_span(api_doc, Span(3, len(api_doc)))


@given(st.lists(st.sampled_from(["a", "bb", "C.", "(d", "e,f", "!", "  ", "\t", "\n"]), max_size=15))
def test_char_span_lossless(parts):
    text = " ".join(parts)
    doc = tokenize(text)
    T = len(doc)
    for a in range(T):
        for b in range(a, T):
            s, e = to_char_span(doc, Span(a, b))
            # the character span re-tokenizes to exactly the covered tokens
            assert tokenize(text[s:e]).tokens == doc.tokens[a:b + 1]


# -- clusters and documents ------------------------------------------------------

def test_cluster_set_rejects_overlap():
    with pytest.raises(ValueError):
        ClusterSet.from_lists([[[0, 0], [2, 2]], [[2, 2], [4, 4]]])


def test_cluster_set_rejects_singletons_by_default():
    with pytest.raises(ValueError):
        ClusterSet.from_lists([[[0, 0]]])
    cs = ClusterSet.from_lists([[[0, 0]]], allow_singletons=True)
    assert len(cs) == 1


def test_cluster_set_canonical_order():
    cs = ClusterSet.from_lists([[[5, 5], [3, 3]], [[4, 4], [0, 1]]])
    assert cs.to_lists() == [[[0, 1], [4, 4]], [[3, 3], [5, 5]]]
    assert cs.cluster_of()[Span(5, 5)] == 1
    assert cs.mentions() == {Span(0, 1), Span(4, 4), Span(3, 3), Span(5, 5)}


def test_document_validates_offsets():
    with pytest.raises(ValueError):
        Document("d", "ab cd", ("ab", "cd"), ((0, 2), (2, 5)))
    with pytest.raises(ValueError):
        Document("d", "ab cd", ("ab",), ((0, 2), (3, 5)))
    with pytest.raises(ValueError):
        Document("d", "ab cd", ("cd", "ab"), ((3, 5), (0, 2)))


def test_document_rejects_out_of_range_gold():
    doc = tokenize("a b", "d")
    with pytest.raises(ValueError):
        doc.with_clusters(ClusterSet.from_lists([[[0, 0], [2, 2]]]))


def test_empty_document():
    doc = tokenize("", "empty")
    assert len(doc) == 0 and doc.tokens == ()


# -- JSONL ----------------------------------------------------------------------

def test_jsonl_round_trip(tmp_path, api_doc):
    doc = api_doc.with_clusters(ClusterSet.from_lists([[[0, 0], [8, 8]], [[8, 10], [12, 13]]]))
    path = tmp_path / "c.jsonl"
    write_jsonl(path, [document_to_record(doc), document_to_record(tokenize("x y", "b"))])
    back = read_jsonl(path)
    assert back[0] == doc
    assert back[1].gold_clusters is None


def test_record_without_tokens_is_tokenized():
    doc = document_from_record({"doc_id": "r", "text": "Hi, Ann."})
    assert doc.tokens == ("Hi", ",", "Ann", ".")


def test_malformed_line_names_the_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps({"doc_id": "a", "text": "x"}) + "\n\n{oops\n")
    with pytest.raises(FormatError) as err:
        read_jsonl(path)
    assert err.value.line == 3


def test_bad_record_is_format_error(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps({"doc_id": "a", "text": "x y", "clusters": [[[0, 0], [5, 5]]]}) + "\n")
    with pytest.raises(FormatError) as err:
        read_jsonl(path)
    assert err.value.line == 1
