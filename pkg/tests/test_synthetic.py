import pytest

from deskcoref.synthetic import SyntheticConfig, generate_corpus, split_corpus
from deskcoref.trainer import StringMatchTeacher


def test_corpus_is_deterministic():
    a = generate_corpus(SyntheticConfig(count=5, seed=11))
    b = generate_corpus(SyntheticConfig(count=5, seed=11))
    c = generate_corpus(SyntheticConfig(count=5, seed=12))
    assert [d.text for d in a] == [d.text for d in b]
    assert [d.text for d in a] != [d.text for d in c]
    assert len({d.doc_id for d in a}) == 5


def test_every_document_has_a_teacher_cluster():
    teacher = StringMatchTeacher()
    for doc in generate_corpus(SyntheticConfig(count=40, seed=5, max_sentences=3)):
        assert len(teacher.annotate(doc)) >= 1


@pytest.mark.parametrize("n", [6, 50, 600])
def test_fixed_length_documents(n):
    teacher = StringMatchTeacher()
    for doc in generate_corpus(SyntheticConfig(count=6, seed=2, fixed_tokens=n)):
        assert len(doc) == n
        assert len(teacher.annotate(doc)) >= 1


def test_split_and_validation():
    docs = generate_corpus(SyntheticConfig(count=10, seed=1, max_sentences=3))
    parts = split_corpus(docs, 6, 2, 2)
    assert [len(parts[k]) for k in ("train", "dev", "test")] == [6, 2, 2]
    assert parts["dev"][0] is docs[6]
    with pytest.raises(ValueError):
        split_corpus(docs, 8, 2, 1)
    for bad in (dict(count=-1), dict(min_sentences=0), dict(min_sentences=5, max_sentences=4),
                dict(filler_rate=1.5), dict(fixed_tokens=3)):
        with pytest.raises(ValueError):
            SyntheticConfig(**bad)
