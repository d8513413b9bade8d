"""Desk-scale coreference resolution: a start-to-end span-pair head over a
toy window encoder, hard/soft distillation from a teacher, aggressive mention
pruning, and leftover batching."""

from .batching import (LEFTOVER, VANILLA, BatchPlan, PaddingReport, encode_plan, padding_report,
                       plan_dynamic_groups, plan_leftover, plan_vanilla, reassemble)
from .decoder import TransitivityReport, build_result, decode_clusters, transitivity_report
from .domain import ClusterSet, CorefResult, Document, FormatError, Span, span_precedes, to_char_span
from .encoder import (EncoderParams, Segment, encode_segment, init_encoder, segment_document,
                      token_id, tokenize)
from .head import (HeadParams, antecedent_distribution, antecedent_score, init_head, mention_score,
                   pair_score)
from .metrics import CorpusScorer, MetricTriple, avg_f1, b_cubed, ceaf_phi4, muc
from .model import ModelParams, init_model, predict, score_document
from .pruner import PruneConfig, ScoredSpans, candidate_pairs_count, enumerate_spans, prune

__version__ = "0.1.0"
