"""Punctuation/case-aware ASR scoring and a dual-output toy transducer."""

__version__ = "0.1.0"

from puncnorm._kernels import BACKEND as KERNEL_BACKEND

__all__ = ["KERNEL_BACKEND", "__version__"]
