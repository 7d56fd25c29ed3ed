"""Numeric kernels with a compiled fast path.

The compiled extension is preferred when present; otherwise the
pure-numpy implementations are used.  `BACKEND` reports which one won.
"""

try:
    from puncnorm._kernels import _core as _impl

    BACKEND = "compiled"
except ImportError:  # pragma: no cover - depends on build environment
    from puncnorm._kernels import pure as _impl

    BACKEND = "python"

rnnt_loglike = _impl.rnnt_loglike
rnnt_grad = _impl.rnnt_grad
levenshtein_align = _impl.levenshtein_align

__all__ = ["BACKEND", "rnnt_loglike", "rnnt_grad", "levenshtein_align"]
