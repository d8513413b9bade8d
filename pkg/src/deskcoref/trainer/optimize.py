"""Adam with per-group learning rates and the epoch loop."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..batching import plan_dynamic_groups
from ..domain import Document
from ..model import PARAM_GROUPS, ModelParams
from .gradients import SoftTarget, TrainingError, compute_gradients

log = logging.getLogger(__name__)

PHASE_LOSS = {"mentions": "mentions", "full": "coref", "finetune": "coref", "soft": "soft"}
SCHEDULES = ("constant", "linear")


@dataclass
class TrainConfig:
    lr_head: float = 3e-4
    lr_encoder: float = 1e-5
    lr_finetune: float = 1e-5
    epochs: int = 10
    batch_tokens: int = 512
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    tau: float = 1.0
    M: int = 64
    schedule: str = "constant"  # or "linear": decay to zero over the phase
    rate_overrides: dict[str, dict[str, float]] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("lr_head", "lr_encoder", "lr_finetune"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")
        for phase, rates in self.rate_overrides.items():
            if phase not in PHASE_LOSS:
                raise ValueError(f"unknown phase {phase!r} in rate_overrides")
            if any(r < 0 for r in rates.values()) or set(rates) - set(PARAM_GROUPS):
                raise ValueError(f"bad rate override for {phase!r}: {rates}")

    @classmethod
    def desk(cls, **kw) -> "TrainConfig":
        """Rates and schedule that train the toy encoder in minutes on one core."""
        base = dict(
            lr_head=1e-2, lr_encoder=3e-4, lr_finetune=1e-4, epochs=10, schedule="linear",
            rate_overrides={"mentions": {"mention": 1e-2, "encoder": 3e-3, "antecedent": 0.0}},
        )
        base.update(kw)
        return cls(**base)

    def phase_rates(self, phase: str) -> dict[str, float]:
        """Learning rate per parameter group for a training phase."""
        if phase in self.rate_overrides:
            return {g: self.rate_overrides[phase].get(g, 0.0) for g in PARAM_GROUPS}
        if phase == "mentions":
            return {"mention": self.lr_head, "encoder": self.lr_encoder, "antecedent": 0.0}
        if phase in ("full", "soft"):
            return {"antecedent": self.lr_head, "mention": self.lr_encoder, "encoder": self.lr_encoder}
        if phase == "finetune":
            return dict.fromkeys(PARAM_GROUPS, self.lr_finetune)
        raise ValueError(f"unknown phase {phase!r}")


class Adam:
    def __init__(self, params: Mapping[str, np.ndarray], rates: Mapping[str, float],
                 beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = {}
        for group, names in PARAM_GROUPS.items():
            for n in names:
                self.lr[n] = rates.get(group, 0.0)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray],
             scale: float = 1.0) -> dict[str, np.ndarray]:
        """One update; ``scale`` multiplies every group's rate (for schedules)."""
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        out = {}
        for k, p in params.items():
            lr = self.lr[k] * scale
            if self.lr[k] == 0.0:
                out[k] = p
                continue
            g = grads[k]
            self.m[k] = b1 * self.m[k] + (1.0 - b1) * g
            self.v[k] = b2 * self.v[k] + (1.0 - b2) * g * g
            out[k] = p - lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)
        return out


@dataclass
class TrainResult:
    params: ModelParams
    loss_trace: list[float] = field(default_factory=list)


def optimize(model: ModelParams, corpus: Sequence[Document], phase: str, cfg: TrainConfig,
             soft_targets: Mapping[str, SoftTarget] | None = None,
             rates: Mapping[str, float] | None = None) -> TrainResult:
    """Train for ``cfg.epochs`` epochs; returns new parameters and the per-epoch mean loss.

    Batches are the dynamic groups of ``corpus`` under ``cfg.batch_tokens``,
    visited in a seeded shuffled order each epoch and encoded with the
    leftover layout.
    """
    if not corpus:
        raise ValueError("empty training corpus")
    loss = PHASE_LOSS[phase]
    rates = dict(rates) if rates is not None else cfg.phase_rates(phase)
    groups = plan_dynamic_groups(corpus, cfg.batch_tokens)
    rng = np.random.default_rng(cfg.seed)
    params = {k: v.copy() for k, v in model.arrays().items()}
    opt = Adam(params, rates, cfg.beta1, cfg.beta2, cfg.eps)
    ids_cache: dict = {}
    current = model.replace_arrays(params)
    trace = []
    total_steps = cfg.epochs * len(groups)
    step = 0
    for epoch in range(cfg.epochs):
        total, count = 0.0, 0
        for gi in rng.permutation(len(groups)):
            group = groups[gi]
            value, grads = compute_gradients(current, group, loss, cfg.M, soft_targets, cfg.tau, ids_cache)
            if not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise TrainingError(f"non-finite gradient in epoch {epoch}; loss trace so far {trace}")
            scale = 1.0 - step / total_steps if cfg.schedule == "linear" else 1.0
            params = opt.step(params, grads, scale)
            step += 1
            current = model.replace_arrays(params)
            total += value * len(group)
            count += len(group)
        mean = total / count
        if not np.isfinite(mean):
            raise TrainingError(f"loss diverged in epoch {epoch}; loss trace {trace + [mean]}")
        trace.append(mean)
        log.info("phase %s epoch %d loss %.6f", phase, epoch + 1, mean)
    return TrainResult(current, trace)
