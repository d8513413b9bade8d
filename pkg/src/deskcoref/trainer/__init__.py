from .distill import (DESK_DIMS, DESK_PHASE_EPOCHS, DistillReport, distill_pipeline, evaluate_model, soft_distill,
                      train_phases)
from .gradients import LOSSES, SoftTarget, TrainingError, compute_gradients, loss_value
from .losses import (coref_loss_doc, gold_antecedents, marginal_nll_loss, mention_bce_doc,
                     mention_bce_loss, soft_distill_loss, soft_loss_doc)
from .optimize import Adam, TrainConfig, TrainResult, optimize
from .teacher import (AnnotationReport, FileTeacher, ModelTeacher, StringMatchTeacher,
                      annotate_with_teacher, soft_targets_for)
