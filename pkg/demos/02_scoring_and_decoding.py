"""
Scoring spans and decoding clusters
===================================

A document is encoded, every span up to the width limit gets a mention
score, the top ceil(lambda * T) spans are kept and each kept span picks its
best-scoring antecedent (or none, which scores 0). Linked spans are merged
into clusters.
"""

import numpy as np

from deskcoref.decoder import decode_clusters, transitivity_report
from deskcoref.domain import Span, to_char_span
from deskcoref.encoder import tokenize
from deskcoref.head import pair_score
from deskcoref.model import encode_documents, init_model, predict, score_document
from deskcoref.pruner import PruneConfig, candidate_pairs_count

text = "We are so happy to see you using our coref package. This package is very fast!"
doc = tokenize(text, "api")
print(len(doc), "tokens:", doc.tokens)

# token spans map back to character spans
print(to_char_span(doc, Span(8, 10)), repr(text[33:50]))

# a fresh model: scores are small and random, so few links survive
model = init_model(seed=1, V=4096, d=32, p=32, prune=PruneConfig(lam=0.4, max_span_width=4))
h = encode_documents(model, [doc])[doc.doc_id]
scores = score_document(model, h)
print("candidates", len(scores.fm), "kept", len(scores.pruned_spans))

# pair scores: mention score of both spans plus the antecedent score
c, q = scores.pruned_spans[0], scores.pruned_spans[1]
print("F(c, q) =", scores.pair(c, q), "=", pair_score(h, c, q, model.head))

# decoding from a hand-made score matrix
spans = [Span(0, 0), Span(8, 8), Span(8, 10), Span(12, 13)]
F = np.full((4, 4), -1.0)
F[0, 1], F[2, 3] = 2.0, 3.0
clusters = decode_clusters(spans, F)
print([[doc.text[slice(*to_char_span(doc, s))] for s in cl] for cl in clusters])

# the result object answers pair scores by character span
res = predict(model, [doc])[0]
print("clusters:", res.get_clusters())
a, b = (to_char_span(doc, s) for s in scores.pruned_spans[:2])
print("get_logit", a, b, res.get_logit(a, b))

# within-cluster audit: how many pair scores inside a cluster are not positive
print(transitivity_report(clusters, lambda c, q: F[spans.index(c), spans.index(q)]).to_json())

# pruning harder cuts comparisons quadratically
print("pairs at 0.40 vs 0.25:", candidate_pairs_count(1000, 0.4) / candidate_pairs_count(1000, 0.25))
