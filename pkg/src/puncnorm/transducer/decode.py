"""Frame-synchronous greedy decoding for either output mode."""

from __future__ import annotations

from typing import Optional

import numpy as np

from puncnorm.transducer.model import (
    Architecture,
    LabelSequence,
    ModeId,
    TransducerModel,
    UnsupportedModeError,
    _joint_forward,
    _predictor_forward,
    check_features,
    encode,
)


def supported_modes(model: TransducerModel) -> tuple:
    if model.config.architecture is Architecture.PUNCTUATED_ONLY:
        return (ModeId.PUNCTUATED,)
    return (ModeId.NORMALIZED, ModeId.PUNCTUATED)


def greedy_decode(model: TransducerModel, x: np.ndarray,
                  mode: Optional[ModeId] = None,
                  max_symbols_per_frame: Optional[int] = None) -> LabelSequence:
    """Emit the argmax label per step, advancing on blank.

    Encoder frames are consumed strictly in order, so the same procedure
    works on a growing feature stream.  The per-frame emission cap bounds
    the inner loop.
    """
    c = model.config
    if c.architecture is Architecture.PUNCTUATED_ONLY:
        if mode not in (None, ModeId.PUNCTUATED):
            raise UnsupportedModeError("punctuated-only model cannot emit normalized output")
        out_mode = ModeId.PUNCTUATED
        predictor_mode = None
    else:
        if mode is None:
            raise UnsupportedModeError(f"{c.architecture.value} model requires an output mode")
        out_mode = mode
        predictor_mode = mode if c.architecture is Architecture.CONDITIONED else None
    prefix = model.decoder_for_mode(
        mode if c.architecture is Architecture.TWO_DECODER else predictor_mode)

    cap = max_symbols_per_frame or c.max_symbols_per_frame
    x = check_features(x, c.input_dim)
    enc = encode(x, model)
    blank = c.blank_index
    k = c.predictor_context

    def pred_state(hist_tail):
        hist = np.asarray([([blank] * k + hist_tail)[-k:]])
        return _predictor_forward(hist, predictor_mode, model, prefix)[2]

    tokens: list = []
    pred = pred_state(tokens)
    for t in range(enc.shape[0]):
        for _ in range(cap):
            _, lattice = _joint_forward(enc[t:t + 1], pred, model, prefix)
            symbol = int(np.argmax(lattice[0, 0]))
            if symbol == blank:
                break
            tokens.append(symbol)
            pred = pred_state(tokens)
    return LabelSequence(tuple(tokens), out_mode)
