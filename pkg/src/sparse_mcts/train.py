"""Supervised training of the policy network with Adam and early stopping."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .gnn import GraphBatch, PolicyModel
from .instances import Instance, LabeledSample

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 1
    max_epochs: int = 60
    patience: int = 15
    val_fraction: float = 0.1
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class Adam:
    def __init__(self, params: dict[str, np.ndarray], lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def split_by_instance(samples: Sequence[LabeledSample], fraction: float, seed: int):
    """Hold out whole instances so validation never sees a training graph."""
    ids = sorted({s.instance for s in samples})
    if len(ids) < 2 or fraction <= 0:
        n_val = 0
    else:
        n_val = min(max(1, round(fraction * len(ids))), len(ids) - 1)
    rng = np.random.default_rng([seed, 7])
    held = set(rng.permutation(ids)[:n_val].tolist()) if n_val else set()
    train = [s for s in samples if s.instance not in held]
    val = [s for s in samples if s.instance in held]
    return train, val


def _items(instances, samples):
    return [(instances[s.instance], s.current_set, s.target) for s in samples]


def evaluate(model: PolicyModel, instances: Sequence[Instance], samples: Sequence[LabeledSample], batch_size: int = 64) -> float:
    """Mean per-sample cross-entropy."""
    if not samples:
        return float("nan")
    total = 0.0
    for i in range(0, len(samples), batch_size):
        chunk = samples[i : i + batch_size]
        total += model.loss(GraphBatch.build(_items(instances, chunk))) * len(chunk)
    return total / len(samples)


def train(
    model: PolicyModel,
    instances: Sequence[Instance],
    samples: Sequence[LabeledSample],
    config: TrainConfig | None = None,
):
    """Minimise the mean per-sample loss; returns ``(best_model, history)``.

    ``history`` holds one dict per epoch with the training loss (averaged over
    the epoch's forward passes) and the validation loss. The returned model is
    the checkpoint with the lowest validation loss, or the lowest training loss
    when there is nothing to validate on.
    """
    config = config or TrainConfig()
    if not samples:
        raise ValueError("no training samples")
    model = model.copy()
    train_set, val_set = split_by_instance(list(samples), config.val_fraction, config.seed)
    opt = Adam(model.params, config.lr, config.beta1, config.beta2, config.eps)
    rng = np.random.default_rng(config.seed)
    best, best_score, stale = model.copy(), np.inf, 0
    history = []
    per_sample = np.zeros(len(train_set))
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train_set))
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            batch = GraphBatch.build(_items(instances, [train_set[i] for i in idx]))
            _, grads, per = model.loss_and_grad(batch)
            per_sample[idx] = per
            opt.step(model.params, grads)
        train_loss = float(per_sample.mean())
        val_loss = evaluate(model, instances, val_set) if val_set else float("nan")
        score = val_loss if val_set else train_loss
        history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        log.info("epoch %d train %.4f val %.4f", epoch, train_loss, val_loss)
        if score < best_score:
            best, best_score, stale = model.copy(), score, 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    best.meta = {**best.meta, "train": asdict(config), "epochs_run": len(history), "best_score": best_score}
    return best, history
