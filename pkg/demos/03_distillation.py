"""
Distilling a string-match teacher
=================================

A synthetic news-like corpus is labelled by a rule-based teacher that links
repeated capitalised names. A small student learns from those labels in
three phases: mention pretraining, full coreference training, then
fine-tuning on a handful of labelled documents. A student trained only on
the small labelled set is the baseline. Takes about a minute.
"""

import logging

from deskcoref.decoder import TransitivityReport, decode_clusters, transitivity_report
from deskcoref.model import encode_documents, init_model, score_document
from deskcoref.synthetic import SyntheticConfig, generate_corpus, split_corpus
from deskcoref.trainer import (DESK_DIMS, StringMatchTeacher, TrainConfig, annotate_with_teacher,
                               distill_pipeline, evaluate_model, train_phases)

logging.basicConfig(level=logging.INFO, format="%(message)s")

docs = generate_corpus(SyntheticConfig(count=600, seed=7))
parts = split_corpus(docs, 500, 50, 50)
print(docs[0].text[:200], "...")

teacher = StringMatchTeacher()
dev, _ = annotate_with_teacher(teacher, parts["dev"])
test, _ = annotate_with_teacher(teacher, parts["test"])
gold, _ = annotate_with_teacher(teacher, parts["train"][:50])
print("teacher clusters in the first test document:", test[0].gold_clusters.to_lists())

cfg = TrainConfig.desk(seed=7)
epochs = {"mentions": 4, "full": 15, "finetune": 3}
student, report = distill_pipeline(teacher, parts["train"], init_model(7, **DESK_DIMS), cfg,
                                   gold=gold, dev=dev, phase_epochs=epochs)
print("dev avg F1 after each phase:", report.dev_avg_f1)

baseline, _ = train_phases(init_model(7, **DESK_DIMS), gold, ("mentions", "full"), cfg, epochs)
for name, model in (("distilled", student), ("gold only", baseline)):
    scorer = evaluate_model(model, test)
    t = scorer.triples()
    print(f"{name:>9}: MUC {t['muc'].f1:.3f}  B3 {t['b3'].f1:.3f}  CEAF {t['ceaf_phi4'].f1:.3f}"
          f"  avg {scorer.avg_f1:.3f}")

# share of negative pair scores inside predicted clusters
vecs = encode_documents(student, test)
total = TransitivityReport()
for d in test:
    sc = score_document(student, vecs[d.doc_id])
    total = total + transitivity_report(decode_clusters(sc.pruned_spans, sc.F), sc.pair)
print("within-cluster pairs", total.within_cluster_pairs, "negative fraction", round(total.negative_fraction, 3))
