"""Desk-scale stateless transducer: encoder, predictor(s), joiner(s).

Features are plain float64 arrays of shape (L, A).  Parameters live in a
flat name -> ndarray dict so training, checkpointing and gradient checks
can treat the model uniformly.

Architecture variants:
  * punctuated-only: one decoder, punctuated output.
  * two-decoder: shared encoder, one full decoder stack per output mode.
  * conditioned: one decoder whose predictor input carries a mode
    embedding, selecting normalized vs punctuated output at decode time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from puncnorm.transducer.vocab import CharVocab

CHECKPOINT_FORMAT_VERSION = 1


class Architecture(Enum):
    PUNCTUATED_ONLY = "punct-only"
    TWO_DECODER = "2dec"
    CONDITIONED = "cond"


class ModeId(Enum):
    NORMALIZED = "norm"
    PUNCTUATED = "punct"

    @property
    def embedding_row(self) -> int:
        return 0 if self is ModeId.NORMALIZED else 1


@dataclass(frozen=True)
class LabelSequence:
    tokens: tuple
    mode: ModeId

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))
        if any(t < 0 for t in self.tokens):
            raise ValueError("negative label index")


@dataclass(frozen=True)
class LossWeights:
    """Tradeoff between the normalized and punctuated loss terms."""

    alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int
    vocab_size: int = 500
    blank_index: int = 0
    token_embed_dim: int = 500
    mode_embed_dim: int = 12
    predictor_context: int = 2
    encoder_hidden: int = 64
    encoder_downsample: int = 2
    encoder_context: int = 4
    joiner_hidden: int = 64
    architecture: Architecture = Architecture.PUNCTUATED_ONLY
    share_token_embedding: bool = False
    max_symbols_per_frame: int = 10

    def __post_init__(self):
        dims = (self.input_dim, self.vocab_size, self.token_embed_dim,
                self.mode_embed_dim, self.predictor_context,
                self.encoder_hidden, self.encoder_downsample,
                self.encoder_context, self.joiner_hidden,
                self.max_symbols_per_frame)
        if any(d < 1 for d in dims):
            raise ValueError("all model dimensions must be >= 1")
        if not 0 <= self.blank_index < self.vocab_size:
            raise ValueError("blank_index out of range")
        if self.share_token_embedding and self.architecture is not Architecture.TWO_DECODER:
            raise ValueError("share_token_embedding only applies to the two-decoder model")

    def to_dict(self) -> dict:
        d = self.__dict__.copy()
        d["architecture"] = self.architecture.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["architecture"] = Architecture(d["architecture"])
        return cls(**d)


@dataclass
class TransducerModel:
    config: ModelConfig
    params: dict
    vocab: Optional[CharVocab] = None

    def decoder_prefixes(self) -> tuple:
        if self.config.architecture is Architecture.TWO_DECODER:
            return ("dec_n", "dec_p")
        return ("dec",)

    def decoder_for_mode(self, mode: Optional[ModeId]) -> str:
        arch = self.config.architecture
        if arch is Architecture.TWO_DECODER:
            if mode is None:
                raise UnsupportedModeError("two-decoder model needs an output mode")
            return "dec_n" if mode is ModeId.NORMALIZED else "dec_p"
        return "dec"

    def embed_key(self, prefix: str) -> str:
        if self.config.share_token_embedding:
            return "embed.shared"
        return f"{prefix}.embed"


class UnsupportedModeError(ValueError):
    """Requested output mode is not available for this architecture."""


def _uniform(rng, fan_in: int, shape) -> np.ndarray:
    s = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-s, s, size=shape)


def init_model(config: ModelConfig, seed: int = 0,
               vocab: Optional[CharVocab] = None) -> TransducerModel:
    """Seeded parameter initialization; deterministic creation order."""
    if vocab is not None and vocab.size != config.vocab_size:
        raise ValueError("vocab size disagrees with config.vocab_size")
    rng = np.random.default_rng(seed)
    c = config
    params: dict = {}
    win = c.encoder_context * c.input_dim
    params["enc.w1"] = _uniform(rng, win, (win, c.encoder_hidden))
    params["enc.b1"] = _uniform(rng, win, (c.encoder_hidden,))
    params["enc.w2"] = _uniform(rng, c.encoder_hidden, (c.encoder_hidden, c.encoder_hidden))
    params["enc.b2"] = _uniform(rng, c.encoder_hidden, (c.encoder_hidden,))

    conditioned = c.architecture is Architecture.CONDITIONED
    pred_in = c.predictor_context * (c.token_embed_dim
                                     + (c.mode_embed_dim if conditioned else 0))
    if c.share_token_embedding:
        params["embed.shared"] = _uniform(rng, c.token_embed_dim,
                                          (c.vocab_size, c.token_embed_dim))
    model = TransducerModel(config=c, params=params, vocab=vocab)
    for prefix in model.decoder_prefixes():
        if not c.share_token_embedding:
            params[f"{prefix}.embed"] = _uniform(rng, c.token_embed_dim,
                                                 (c.vocab_size, c.token_embed_dim))
        if conditioned:
            params[f"{prefix}.mode_embed"] = _uniform(rng, c.mode_embed_dim,
                                                      (2, c.mode_embed_dim))
        w = _uniform(rng, pred_in, (pred_in, c.encoder_hidden))
        # distinct predictor inputs must map to distinct states
        assert np.linalg.matrix_rank(w) == min(w.shape)
        params[f"{prefix}.pred_w"] = w
        params[f"{prefix}.pred_b"] = _uniform(rng, pred_in, (c.encoder_hidden,))
        params[f"{prefix}.join_enc"] = _uniform(rng, c.encoder_hidden,
                                                (c.encoder_hidden, c.joiner_hidden))
        params[f"{prefix}.join_pred"] = _uniform(rng, c.encoder_hidden,
                                                 (c.encoder_hidden, c.joiner_hidden))
        params[f"{prefix}.join_b"] = _uniform(rng, c.encoder_hidden, (c.joiner_hidden,))
        params[f"{prefix}.out_w"] = _uniform(rng, c.joiner_hidden,
                                             (c.joiner_hidden, c.vocab_size))
        params[f"{prefix}.out_b"] = _uniform(rng, c.joiner_hidden, (c.vocab_size,))
    return model


def check_features(x: np.ndarray, input_dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError(f"features must be a nonempty (L, A) matrix, got shape {x.shape}")
    if x.shape[1] != input_dim:
        raise ValueError(f"feature dim {x.shape[1]} != model input dim {input_dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("features contain non-finite values")
    return x


def encoder_windows(x: np.ndarray, config: ModelConfig) -> np.ndarray:
    """Strided causal windows: output frame t sees input frames <= t * downsample."""
    L = x.shape[0]
    ds, ctx = config.encoder_downsample, config.encoder_context
    T = -(-L // ds)  # ceil
    padded = np.vstack([np.zeros((ctx - 1, x.shape[1])), x])
    rows = []
    for t in range(T):
        end = t * ds + ctx  # window [t*ds - ctx + 1, t*ds] in original indexing
        rows.append(padded[end - ctx:end].reshape(-1))
    return np.asarray(rows)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=-1, keepdims=True)
    z = logits - m
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _encoder_forward(xw: np.ndarray, params: dict):
    z1 = np.maximum(xw @ params["enc.w1"] + params["enc.b1"], 0.0)
    enc = np.maximum(z1 @ params["enc.w2"] + params["enc.b2"], 0.0)
    return z1, enc


def encode(x: np.ndarray, model: TransducerModel) -> np.ndarray:
    """Encoder states, shape (ceil(L / downsample), encoder_hidden)."""
    x = check_features(x, model.config.input_dim)
    xw = encoder_windows(x, model.config)
    _, enc = _encoder_forward(xw, model.params)
    return enc


def histories(target: Sequence[int], config: ModelConfig) -> np.ndarray:
    """Last-k label contexts for every prefix of the target, blank-padded."""
    k, blank = config.predictor_context, config.blank_index
    padded = [blank] * k + [int(t) for t in target]
    return np.asarray([padded[u:u + k] for u in range(len(target) + 1)],
                      dtype=np.int64)


def _check_mode(model: TransducerModel, mode: Optional[ModeId]) -> None:
    conditioned = model.config.architecture is Architecture.CONDITIONED
    if conditioned and mode is None:
        raise UnsupportedModeError("conditioned model requires an output mode")
    if not conditioned and mode is not None \
            and model.config.architecture is not Architecture.TWO_DECODER:
        raise UnsupportedModeError(
            f"{model.config.architecture.value} model takes no mode input")


def _predictor_forward(hist: np.ndarray, mode: Optional[ModeId],
                       model: TransducerModel, prefix: str):
    c = model.config
    emb = model.params[model.embed_key(prefix)][hist]  # (n, k, E)
    if c.architecture is Architecture.CONDITIONED:
        row = model.params[f"{prefix}.mode_embed"][mode.embedding_row]
        emb = np.concatenate(
            [emb, np.broadcast_to(row, emb.shape[:2] + (c.mode_embed_dim,))],
            axis=2)
    flat = emb.reshape(hist.shape[0], -1)
    lin = flat @ model.params[f"{prefix}.pred_w"] + model.params[f"{prefix}.pred_b"]
    return flat, lin, np.maximum(lin, 0.0)


def predict(history: Sequence[int], mode: Optional[ModeId],
            model: TransducerModel) -> np.ndarray:
    """Predictor state from the last `predictor_context` emitted labels.

    Shorter histories are blank-padded on the left; longer ones are
    truncated to the last k labels (statelessness).
    """
    _check_mode(model, mode)
    c = model.config
    k, blank = c.predictor_context, c.blank_index
    hist = ([blank] * k + [int(t) for t in history])[-k:]
    prefix = model.decoder_for_mode(mode)
    _, _, pred = _predictor_forward(np.asarray([hist]), mode, model, prefix)
    return pred[0]


def _joint_forward(enc: np.ndarray, pred: np.ndarray,
                   model: TransducerModel, prefix: str):
    p = model.params
    je = enc @ p[f"{prefix}.join_enc"]
    jp = pred @ p[f"{prefix}.join_pred"]
    h = np.tanh(je[:, None, :] + jp[None, :, :] + p[f"{prefix}.join_b"])
    lattice = log_softmax(h @ p[f"{prefix}.out_w"] + p[f"{prefix}.out_b"])
    return h, lattice


def join(enc_state: np.ndarray, pred_state: np.ndarray, model: TransducerModel,
         mode: Optional[ModeId] = None) -> np.ndarray:
    """Normalized log-distribution over the vocabulary (blank included)."""
    if enc_state.shape != (model.config.encoder_hidden,) \
            or pred_state.shape != (model.config.encoder_hidden,):
        raise ValueError("state dimension mismatch")
    prefix = model.decoder_for_mode(mode)
    _, lattice = _joint_forward(enc_state[None, :], pred_state[None, :], model, prefix)
    return lattice[0, 0]


@dataclass
class LatticeForward:
    """Everything the backward pass needs from one lattice evaluation."""

    prefix: str
    mode: Optional[ModeId]
    target: tuple
    xw: np.ndarray
    z1: np.ndarray
    enc: np.ndarray
    hist: np.ndarray
    emb_flat: np.ndarray
    pred_lin: np.ndarray
    pred: np.ndarray
    h: np.ndarray
    lattice: np.ndarray


def _lattice_from_encoded(model, xw, z1, enc, target, mode) -> LatticeForward:
    prefix = model.decoder_for_mode(mode)
    hist = histories(target, model.config)
    emb_flat, pred_lin, pred = _predictor_forward(hist, mode, model, prefix)
    h, lattice = _joint_forward(enc, pred, model, prefix)
    return LatticeForward(prefix, mode, tuple(int(t) for t in target),
                          xw, z1, enc, hist, emb_flat, pred_lin, pred, h, lattice)


def build_lattice(model: TransducerModel, x: np.ndarray,
                  target: Sequence[int],
                  mode: Optional[ModeId] = None) -> LatticeForward:
    """Full forward pass to the (T, U+1, vocab) log-probability lattice."""
    _check_mode(model, mode)
    x = check_features(x, model.config.input_dim)
    xw = encoder_windows(x, model.config)
    z1, enc = _encoder_forward(xw, model.params)
    tokens = getattr(target, "tokens", target)
    return _lattice_from_encoded(model, xw, z1, enc, tokens, mode)


def save_checkpoint(model: TransducerModel, path) -> None:
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": model.config.to_dict(),
        "vocab": list(model.vocab.symbols) if model.vocab is not None else None,
        "params": {
            name: {"shape": list(arr.shape), "data": arr.reshape(-1).tolist()}
            for name, arr in sorted(model.params.items())
        },
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f)


def load_checkpoint(path) -> TransducerModel:
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format version: {version}")
    config = ModelConfig.from_dict(payload["config"])
    params = {
        name: np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        for name, entry in payload["params"].items()
    }
    vocab = None
    if payload.get("vocab") is not None:
        vocab = CharVocab(tuple(payload["vocab"]))
    return TransducerModel(config=config, params=params, vocab=vocab)
