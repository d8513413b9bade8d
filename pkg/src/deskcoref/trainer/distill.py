"""Three-phase hard distillation and the soft-distillation variant."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

from ..domain import ClusterSet, Document
from ..metrics import CorpusScorer
from ..model import ModelParams, predict
from .optimize import TrainConfig, optimize
from .teacher import AnnotationReport, TeacherOracle, annotate_with_teacher, soft_targets_for

log = logging.getLogger(__name__)

# Epochs per phase and model widths that reach the desk-scale targets in minutes.
DESK_PHASE_EPOCHS = {"mentions": 4, "full": 15, "finetune": 3}
DESK_DIMS = {"d": 64, "p": 64}


def evaluate_model(model: ModelParams, docs: Sequence[Document], M: int = 64) -> CorpusScorer:
    """Score predictions against each document's ``gold_clusters``."""
    scorer = CorpusScorer()
    for doc, res in zip(docs, predict(model, docs, M)):
        key = doc.gold_clusters or ClusterSet()
        scorer.add(key.clusters, ClusterSet.from_lists(res.clusters_tokens).clusters, doc.doc_id)
    return scorer


@dataclass
class DistillReport:
    annotation: AnnotationReport = field(default_factory=AnnotationReport)
    loss_traces: dict[str, list[float]] = field(default_factory=dict)
    dev_avg_f1: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "annotation": vars(self.annotation),
            "loss_traces": self.loss_traces,
            "dev_avg_f1": self.dev_avg_f1,
        }


def _epochs(cfg: TrainConfig, phase_epochs: dict | None, phase: str) -> TrainConfig:
    if phase_epochs and phase in phase_epochs:
        return replace(cfg, epochs=phase_epochs[phase])
    return cfg


def train_phases(model: ModelParams, corpus: Sequence[Document], phases: Sequence[str], cfg: TrainConfig,
                 phase_epochs: dict | None = None, dev: Sequence[Document] | None = None,
                 report: DistillReport | None = None) -> tuple[ModelParams, DistillReport]:
    report = report or DistillReport()
    for phase in phases:
        pcfg = _epochs(cfg, phase_epochs, phase)
        if pcfg.epochs > 0:
            result = optimize(model, corpus, phase, pcfg)
            model = result.params
            report.loss_traces[phase] = result.loss_trace
        else:
            report.loss_traces[phase] = []
        if dev:
            report.dev_avg_f1[phase] = evaluate_model(model, dev, cfg.M).avg_f1
            log.info("after %s: dev avg F1 %.4f", phase, report.dev_avg_f1[phase])
    return model, report


def distill_pipeline(teacher: TeacherOracle, unlabeled: Sequence[Document], model: ModelParams,
                     cfg: TrainConfig, gold: Sequence[Document] | None = None,
                     dev: Sequence[Document] | None = None,
                     phase_epochs: dict | None = None) -> tuple[ModelParams, DistillReport]:
    """Annotate with the teacher, pretrain mentions, train on teacher clusters, then fine-tune on gold.

    ``phase_epochs`` may override the epoch count of ``mentions``, ``full``
    and ``finetune``.
    """
    report = DistillReport()
    silver, report.annotation = annotate_with_teacher(teacher, unlabeled)
    if silver:
        model, report = train_phases(model, silver, ("mentions", "full"), cfg, phase_epochs, dev, report)
    if gold:
        model, report = train_phases(model, gold, ("finetune",), cfg, phase_epochs, dev, report)
    return model, report


def soft_distill(teacher, corpus: Sequence[Document], model: ModelParams, cfg: TrainConfig,
                 mention_epochs: int | None = None) -> tuple[ModelParams, dict[str, list[float]]]:
    """Soft-target training under the teacher's kept spans.

    The student's mention scorer is first pretrained on the teacher's
    mentions, then the antecedent distribution is trained towards the
    teacher's pair logits.
    """
    traces = {}
    silver, _ = annotate_with_teacher(teacher, corpus)
    if mention_epochs is None or mention_epochs > 0:
        mcfg = cfg if mention_epochs is None else replace(cfg, epochs=mention_epochs)
        res = optimize(model, silver, "mentions", mcfg)
        model, traces["mentions"] = res.params, res.loss_trace
    targets = soft_targets_for(teacher, silver, model.prune.lam, model.prune.max_span_width)
    res = optimize(model, [d for d in silver if d.doc_id in targets], "soft", cfg, soft_targets=targets)
    traces["soft"] = res.loss_trace
    return res.params, traces
