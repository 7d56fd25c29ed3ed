"""Mini-batch SGD training harness for the toy transducer.

Deterministic by construction: seeded shuffling, fixed batch assembly,
fixed parameter-update order.  Feature windows and label contexts are
precomputed once per run since they never change across epochs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from puncnorm.transducer.loss import sample_loss_and_grads
from puncnorm.transducer.model import (
    Architecture,
    LossWeights,
    ModeId,
    TransducerModel,
    _encoder_forward,
    _lattice_from_encoded,
    check_features,
    encoder_windows,
)


@dataclass(frozen=True)
class TrainItem:
    utterance_id: str
    x: np.ndarray
    y_n: Optional[tuple] = None
    y_p: Optional[tuple] = None


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 20
    learning_rate: float = 0.1
    momentum: float = 0.9

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.learning_rate < 0 or not 0.0 <= self.momentum < 1.0:
            raise ValueError("bad optimizer settings")


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, batch: int, last_losses: list):
        super().__init__(
            f"non-finite loss at epoch {epoch}, batch {batch}; "
            f"last finite epoch losses: {last_losses}")
        self.epoch = epoch
        self.batch = batch
        self.last_losses = last_losses


@dataclass
class _Prepared:
    item: TrainItem
    xw: np.ndarray


def _validate_items(items: Sequence[TrainItem], arch: Architecture) -> None:
    if not items:
        raise ValueError("empty training corpus")
    for it in items:
        if arch is Architecture.PUNCTUATED_ONLY and it.y_p is None:
            raise ValueError(f"{it.utterance_id}: punctuated-only training needs y_p")
        if arch is Architecture.TWO_DECODER and (it.y_n is None or it.y_p is None):
            raise ValueError(f"{it.utterance_id}: two-decoder training needs y_n and y_p")
        if arch is Architecture.CONDITIONED and it.y_n is None:
            raise ValueError(f"{it.utterance_id}: conditioned training needs y_n")


def _plain_batches(n: int, batch_size: int, rng) -> list:
    order = rng.permutation(n)
    return [order[i:i + batch_size].tolist() for i in range(0, n, batch_size)]


def _stratified_batches(items: Sequence[TrainItem], batch_size: int, rng) -> list:
    """Batches whose punctuated fraction tracks the corpus fraction (+-1)."""
    punct = [i for i, it in enumerate(items) if it.y_p is not None]
    other = [i for i, it in enumerate(items) if it.y_p is None]
    punct = [punct[j] for j in rng.permutation(len(punct))]
    other = [other[j] for j in rng.permutation(len(other))]
    n, total_p = len(items), len(punct)
    batches = []
    taken_p = taken_o = done = 0
    while done < n:
        size = min(batch_size, n - done)
        done += size
        quota_p = int(total_p * done / n + 0.5) - taken_p
        quota_p = max(0, min(quota_p, size, total_p - taken_p))
        quota_o = size - quota_p
        avail_o = len(other) - taken_o
        if quota_o > avail_o:
            quota_p += quota_o - avail_o
            quota_o = avail_o
        batch = punct[taken_p:taken_p + quota_p] + other[taken_o:taken_o + quota_o]
        taken_p += quota_p
        taken_o += quota_o
        batches.append(batch)
    return batches


def _batch_step(model: TransducerModel, prepared: Sequence[_Prepared],
                batch: Sequence[int], weights: LossWeights):
    """Loss and parameter gradients for one mini-batch."""
    arch = model.config.architecture
    grads: dict = {}
    if arch is Architecture.CONDITIONED:
        punct_in_batch = [i for i in batch if prepared[i].item.y_p is not None]
        w_n = (1.0 - weights.alpha) / len(batch)
        w_p = weights.alpha / len(punct_in_batch) if punct_in_batch else 0.0
        norm_losses, punct_losses = [], []
        for i in batch:
            pr = prepared[i]
            z1, enc = _encoder_forward(pr.xw, model.params)
            fwd = _lattice_from_encoded(model, pr.xw, z1, enc,
                                        pr.item.y_n, ModeId.NORMALIZED)
            norm_losses.append(sample_loss_and_grads(model, fwd, grads, w_n))
            if pr.item.y_p is not None:
                fwd = _lattice_from_encoded(model, pr.xw, z1, enc,
                                            pr.item.y_p, ModeId.PUNCTUATED)
                punct_losses.append(sample_loss_and_grads(model, fwd, grads, w_p))
        loss_n = float(np.mean(norm_losses))
        loss_p = float(np.mean(punct_losses)) if punct_losses else 0.0
        return (1.0 - weights.alpha) * loss_n + weights.alpha * loss_p, grads

    scale = 1.0 / len(batch)
    losses = []
    for i in batch:
        pr = prepared[i]
        z1, enc = _encoder_forward(pr.xw, model.params)
        sample_total = 0.0
        if arch is Architecture.TWO_DECODER:
            for target, mode in ((pr.item.y_n, ModeId.NORMALIZED),
                                 (pr.item.y_p, ModeId.PUNCTUATED)):
                fwd = _lattice_from_encoded(model, pr.xw, z1, enc, target, mode)
                sample_total += sample_loss_and_grads(model, fwd, grads, scale)
        else:
            fwd = _lattice_from_encoded(model, pr.xw, z1, enc, pr.item.y_p, None)
            sample_total = sample_loss_and_grads(model, fwd, grads, scale)
        losses.append(sample_total)
    return float(np.mean(losses)), grads


def train(model: TransducerModel, items: Sequence[TrainItem],
          opt: TrainConfig, w: Optional[LossWeights] = None,
          seed: int = 0):
    """Train in place; returns (model, per-epoch loss log).

    The loss log is a list of {"epoch": int, "loss": float} rows and is
    bit-identical across runs for a fixed seed.
    """
    arch = model.config.architecture
    _validate_items(items, arch)
    weights = w if w is not None else LossWeights()
    rng = np.random.default_rng(seed)
    prepared = [
        _Prepared(it, encoder_windows(check_features(it.x, model.config.input_dim),
                                      model.config))
        for it in items
    ]
    names = sorted(model.params)
    velocity = {name: np.zeros_like(model.params[name]) for name in names}
    log: list = []
    n = len(items)
    for epoch in range(opt.epochs):
        if arch is Architecture.CONDITIONED:
            batches = _stratified_batches(items, opt.batch_size, rng)
        else:
            batches = _plain_batches(n, opt.batch_size, rng)
        weighted = 0.0
        for b, batch in enumerate(batches):
            loss, grads = _batch_step(model, prepared, batch, weights)
            if not math.isfinite(loss):
                raise DivergenceError(epoch, b, [row["loss"] for row in log[-5:]])
            weighted += loss * len(batch)
            for name in names:
                g = grads.get(name)
                v = velocity[name]
                v *= opt.momentum
                if g is not None:
                    v -= opt.learning_rate * g
                model.params[name] += v
        log.append({"epoch": epoch, "loss": weighted / n})
    return model, log
