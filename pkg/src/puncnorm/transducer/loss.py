"""Transducer loss, exact gradients, and the three training objectives.

The lattice recursions marginalize over every monotonic blank-augmented
alignment; the heavy per-cell work runs in the kernel backend.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from puncnorm import _kernels
from puncnorm.transducer.model import (
    Architecture,
    LatticeForward,
    LossWeights,
    ModeId,
    TransducerModel,
    _encoder_forward,
    _lattice_from_encoded,
    build_lattice,
    check_features,
    encoder_windows,
)


def _tokens(target) -> tuple:
    return tuple(int(t) for t in getattr(target, "tokens", target))


def _planes(lattice: np.ndarray, target: tuple, blank_index: int):
    if lattice.ndim != 3:
        raise ValueError("lattice must have shape (T, U+1, vocab)")
    T, U1, V = lattice.shape
    if T < 1:
        raise ValueError("lattice has no encoder frames")
    if U1 != len(target) + 1:
        raise ValueError(f"lattice step dim {U1} != target length {len(target)} + 1")
    if any(not 0 <= t < V for t in target):
        raise ValueError("target index out of vocabulary range")
    if blank_index in target:
        raise ValueError("target must not contain the blank index")
    lattice = np.ascontiguousarray(lattice, dtype=np.float64)
    lp_blank = np.ascontiguousarray(lattice[:, :, blank_index])
    idx = np.arange(U1 - 1)
    lp_y = np.ascontiguousarray(lattice[:, idx, list(target)]) if target \
        else np.zeros((T, 0))
    return lp_blank, lp_y


def rnnt_loss(lattice: np.ndarray, target, blank_index: int = 0) -> float:
    """Negative log-probability of the target under the lattice."""
    target = _tokens(target)
    lp_blank, lp_y = _planes(lattice, target, blank_index)
    return -_kernels.rnnt_loglike(lp_blank, lp_y)


def rnnt_loss_grad(lattice: np.ndarray, target, blank_index: int = 0) -> np.ndarray:
    """Exact gradient of rnnt_loss w.r.t. every lattice log-probability."""
    _, grad = rnnt_loss_and_grad(lattice, target, blank_index)
    return grad


def rnnt_loss_and_grad(lattice: np.ndarray, target, blank_index: int = 0):
    target = _tokens(target)
    lp_blank, lp_y = _planes(lattice, target, blank_index)
    loglike, g_blank, g_y = _kernels.rnnt_grad(lp_blank, lp_y)
    grad = np.zeros_like(lattice)
    grad[:, :, blank_index] = g_blank
    if target:
        grad[:, np.arange(len(target)), list(target)] = g_y
    return -loglike, grad


def lattice_grad_to_logit_grad(lattice: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Pull a log-probability gradient back through the log-softmax."""
    return grad - np.exp(lattice) * grad.sum(axis=-1, keepdims=True)


def _require(model: TransducerModel, arch: Architecture, op: str) -> None:
    if model.config.architecture is not arch:
        raise ValueError(
            f"{op} requires the {arch.value} architecture, "
            f"model is {model.config.architecture.value}")


def loss_punctuated_only(model: TransducerModel, x: np.ndarray, y_p) -> float:
    _require(model, Architecture.PUNCTUATED_ONLY, "loss_punctuated_only")
    fwd = build_lattice(model, x, _tokens(y_p))
    return rnnt_loss(fwd.lattice, fwd.target, model.config.blank_index)


def loss_2decoder(model: TransducerModel, x: np.ndarray, y_n, y_p) -> float:
    """Sum of the normalized and punctuated decoder losses (shared encoder)."""
    _require(model, Architecture.TWO_DECODER, "loss_2decoder")
    if y_n is None or y_p is None:
        raise ValueError("loss_2decoder needs both reference transcripts")
    x = check_features(x, model.config.input_dim)
    xw = encoder_windows(x, model.config)
    z1, enc = _encoder_forward(xw, model.params)
    blank = model.config.blank_index
    total = 0.0
    for target, mode in ((y_n, ModeId.NORMALIZED), (y_p, ModeId.PUNCTUATED)):
        fwd = _lattice_from_encoded(model, xw, z1, enc, _tokens(target), mode)
        total += rnnt_loss(fwd.lattice, fwd.target, blank)
    return total


def loss_conditioned(model: TransducerModel, batch: Sequence,
                     w: LossWeights) -> float:
    """Weighted two-term objective over a partially punctuated batch.

    `batch` holds (x, y_n, y_p_or_None) triples.  The normalized term
    averages over every sample; the punctuated term averages over the
    subset that carries a punctuated reference and contributes nothing
    when that subset is empty.
    """
    _require(model, Architecture.CONDITIONED, "loss_conditioned")
    if not batch:
        raise ValueError("empty batch")
    blank = model.config.blank_index
    norm_losses = []
    punct_losses = []
    for x, y_n, y_p in batch:
        if y_n is None:
            raise ValueError("every sample needs a normalized reference")
        x = check_features(x, model.config.input_dim)
        xw = encoder_windows(x, model.config)
        z1, enc = _encoder_forward(xw, model.params)
        fwd = _lattice_from_encoded(model, xw, z1, enc, _tokens(y_n), ModeId.NORMALIZED)
        norm_losses.append(rnnt_loss(fwd.lattice, fwd.target, blank))
        if y_p is not None:
            fwd = _lattice_from_encoded(model, xw, z1, enc, _tokens(y_p), ModeId.PUNCTUATED)
            punct_losses.append(rnnt_loss(fwd.lattice, fwd.target, blank))
    loss_n = float(np.mean(norm_losses))
    loss_p = float(np.mean(punct_losses)) if punct_losses else 0.0
    return (1.0 - w.alpha) * loss_n + w.alpha * loss_p


def backward_lattice(model: TransducerModel, fwd: LatticeForward,
                     grad_lattice: np.ndarray, grads: dict,
                     scale: float = 1.0) -> None:
    """Accumulate parameter gradients for one lattice evaluation.

    `grad_lattice` is the gradient w.r.t. the lattice log-probabilities;
    contributions are scaled by `scale` and added into `grads` in place.
    """
    p = model.params
    c = model.config
    pf = fwd.prefix
    g_logits = lattice_grad_to_logit_grad(fwd.lattice, grad_lattice)
    if scale != 1.0:
        g_logits = g_logits * scale
    T, U1, V = g_logits.shape
    J = c.joiner_hidden

    flat_h = fwd.h.reshape(-1, J)
    flat_gl = g_logits.reshape(-1, V)
    _acc(grads, f"{pf}.out_w", flat_h.T @ flat_gl)
    _acc(grads, f"{pf}.out_b", flat_gl.sum(axis=0))
    g_h = g_logits @ p[f"{pf}.out_w"].T
    g_hpre = g_h * (1.0 - fwd.h * fwd.h)
    _acc(grads, f"{pf}.join_b", g_hpre.sum(axis=(0, 1)))
    g_je = g_hpre.sum(axis=1)
    g_jp = g_hpre.sum(axis=0)
    _acc(grads, f"{pf}.join_enc", fwd.enc.T @ g_je)
    _acc(grads, f"{pf}.join_pred", fwd.pred.T @ g_jp)
    g_enc = g_je @ p[f"{pf}.join_enc"].T
    g_pred = g_jp @ p[f"{pf}.join_pred"].T

    g_pred_lin = g_pred * (fwd.pred_lin > 0)
    _acc(grads, f"{pf}.pred_w", fwd.emb_flat.T @ g_pred_lin)
    _acc(grads, f"{pf}.pred_b", g_pred_lin.sum(axis=0))
    g_flat = g_pred_lin @ p[f"{pf}.pred_w"].T
    k = c.predictor_context
    ein = g_flat.shape[1] // k
    g_emb = g_flat.reshape(U1, k, ein)
    e = c.token_embed_dim
    ekey = model.embed_key(pf)
    if ekey not in grads:
        grads[ekey] = np.zeros_like(p[ekey])
    np.add.at(grads[ekey], fwd.hist, g_emb[:, :, :e])
    if c.architecture is Architecture.CONDITIONED:
        mkey = f"{pf}.mode_embed"
        if mkey not in grads:
            grads[mkey] = np.zeros_like(p[mkey])
        grads[mkey][fwd.mode.embedding_row] += g_emb[:, :, e:].sum(axis=(0, 1))

    # encoder (shared across decoders)
    g_pre2 = g_enc * (fwd.enc > 0)
    _acc(grads, "enc.w2", fwd.z1.T @ g_pre2)
    _acc(grads, "enc.b2", g_pre2.sum(axis=0))
    g_z1 = g_pre2 @ p["enc.w2"].T
    g_pre1 = g_z1 * (fwd.z1 > 0)
    _acc(grads, "enc.w1", fwd.xw.T @ g_pre1)
    _acc(grads, "enc.b1", g_pre1.sum(axis=0))


def _acc(grads: dict, key: str, value: np.ndarray) -> None:
    if key in grads:
        grads[key] += value
    else:
        grads[key] = value


def sample_loss_and_grads(model: TransducerModel, fwd: LatticeForward,
                          grads: dict, scale: float = 1.0) -> float:
    """Loss for one prepared lattice plus scaled gradient accumulation."""
    loss, grad_lattice = rnnt_loss_and_grad(fwd.lattice, fwd.target,
                                            model.config.blank_index)
    backward_lattice(model, fwd, grad_lattice, grads, scale)
    return loss
