from puncnorm.transducer.decode import greedy_decode, supported_modes
from puncnorm.transducer.loss import (
    lattice_grad_to_logit_grad,
    loss_2decoder,
    loss_conditioned,
    loss_punctuated_only,
    rnnt_loss,
    rnnt_loss_and_grad,
    rnnt_loss_grad,
)
from puncnorm.transducer.model import (
    Architecture,
    CHECKPOINT_FORMAT_VERSION,
    LabelSequence,
    LossWeights,
    ModeId,
    ModelConfig,
    TransducerModel,
    UnsupportedModeError,
    build_lattice,
    encode,
    init_model,
    join,
    load_checkpoint,
    predict,
    save_checkpoint,
)
from puncnorm.transducer.train import (
    DivergenceError,
    TrainConfig,
    TrainItem,
    train,
)
from puncnorm.transducer.vocab import BLANK_SYMBOL, CharVocab

__all__ = [
    "Architecture",
    "BLANK_SYMBOL",
    "CHECKPOINT_FORMAT_VERSION",
    "CharVocab",
    "DivergenceError",
    "LabelSequence",
    "LossWeights",
    "ModeId",
    "ModelConfig",
    "TrainConfig",
    "TrainItem",
    "TransducerModel",
    "UnsupportedModeError",
    "build_lattice",
    "encode",
    "greedy_decode",
    "init_model",
    "join",
    "lattice_grad_to_logit_grad",
    "load_checkpoint",
    "loss_2decoder",
    "loss_conditioned",
    "loss_punctuated_only",
    "predict",
    "rnnt_loss",
    "rnnt_loss_and_grad",
    "rnnt_loss_grad",
    "save_checkpoint",
    "supported_modes",
    "train",
]
