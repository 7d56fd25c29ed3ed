"""Alignment-based scoring: WER plus punctuation/case-aware error rates.

Rates are kept as exact rationals so corpus aggregation and golden files
are bit-stable; callers render percentages at the edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from puncnorm import _kernels
from puncnorm.text import (
    Token,
    TokenKind,
    Transcript,
    ViewKind,
    count_cased_words,
    count_punct,
    project,
)


class AlignOp(Enum):
    MATCH = "match"
    SUB = "sub"
    DEL = "del"
    INS = "ins"


_OP_BY_CODE = [AlignOp.MATCH, AlignOp.SUB, AlignOp.DEL, AlignOp.INS]


@dataclass(frozen=True)
class AlignmentResult:
    substitutions: int
    deletions: int
    insertions: int
    matches: int
    trace: tuple  # of (ref_index | None, hyp_index | None, AlignOp)

    @property
    def total_errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions


def _trace_from_ops(op_codes) -> tuple:
    trace = []
    i = j = 0
    for code in op_codes:
        op = _OP_BY_CODE[code]
        if op is AlignOp.DEL:
            trace.append((i, None, op))
            i += 1
        elif op is AlignOp.INS:
            trace.append((None, j, op))
            j += 1
        else:
            trace.append((i, j, op))
            i += 1
            j += 1
    return tuple(trace)


def _align_generic(ref: Sequence, hyp: Sequence, equal: Callable) -> AlignmentResult:
    n, m = len(ref), len(hyp)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        d[i][0] = i
    for j in range(m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost = 0 if equal(ref[i - 1], hyp[j - 1]) else 1
            d[i][j] = min(d[i - 1][j - 1] + cost, d[i - 1][j] + 1, d[i][j - 1] + 1)
    ops = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and equal(ref[i - 1], hyp[j - 1]) and d[i - 1][j - 1] == d[i][j]:
            ops.append(0)
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and d[i - 1][j - 1] + 1 == d[i][j]:
            ops.append(1)
            i, j = i - 1, j - 1
        elif i > 0 and d[i - 1][j] + 1 == d[i][j]:
            ops.append(2)
            i -= 1
        else:
            ops.append(3)
            j -= 1
    ops.reverse()
    counts = [ops.count(c) for c in range(4)]
    return AlignmentResult(counts[1], counts[2], counts[3], counts[0], _trace_from_ops(ops))


def align(ref: Sequence, hyp: Sequence,
          equality: Optional[Callable] = None) -> AlignmentResult:
    """Minimum-cost alignment with unit substitution/deletion/insertion costs.

    Ties break deterministically: match > sub > del > ins while
    backtracing from the sequence ends.  With the default equality the
    items are interned to ints and the DP runs in the kernel backend.
    """
    if equality is not None:
        return _align_generic(ref, hyp, equality)
    ids: dict = {}
    ref_ids = np.fromiter((ids.setdefault(t, len(ids)) for t in ref),
                          dtype=np.int32, count=len(ref))
    hyp_ids = np.fromiter((ids.setdefault(t, len(ids)) for t in hyp),
                          dtype=np.int32, count=len(hyp))
    matches, subs, dels, ins, ops = _kernels.levenshtein_align(ref_ids, hyp_ids)
    return AlignmentResult(subs, dels, ins, matches, _trace_from_ops(ops))


@dataclass(frozen=True)
class MetricReport:
    """View-level error counts and the derived error rates.

    Rates are exact rationals; a rate is None when its denominator is
    zero.  `negative_rate` flags a (theoretically possible) negative
    punctuation or casing rate instead of clamping it.
    """

    e_pc: int
    e_pnc: int
    e_npc: int
    e_npnc: int
    n_pc: int
    n_npnc: int
    n_p: int
    n_c: int
    wer: Optional[Fraction]
    puncer: Optional[Fraction]
    caseer: Optional[Fraction]
    pcwer: Optional[Fraction]
    negative_rate: bool
    n_utterances: int = 1
    utterance_id: Optional[str] = None

    @classmethod
    def from_counts(cls, e_pc, e_pnc, e_npc, e_npnc, n_pc, n_npnc, n_p, n_c,
                    n_utterances=1, utterance_id=None) -> "MetricReport":
        wer = Fraction(e_npnc, n_npnc) if n_npnc > 0 else None
        pcwer = Fraction(e_pc, n_pc) if n_pc > 0 else None
        puncer = Fraction(e_pnc - e_npnc, n_p) if n_p > 0 else None
        caseer = Fraction(e_npc - e_npnc, n_c) if n_c > 0 else None
        negative = any(r is not None and r < 0 for r in (puncer, caseer))
        return cls(e_pc, e_pnc, e_npc, e_npnc, n_pc, n_npnc, n_p, n_c,
                   wer, puncer, caseer, pcwer, negative, n_utterances, utterance_id)

    def to_json(self) -> dict:
        row = {
            "n_utterances": self.n_utterances,
            "counts": {
                "e_pc": self.e_pc, "e_pnc": self.e_pnc,
                "e_npc": self.e_npc, "e_npnc": self.e_npnc,
                "n_pc": self.n_pc, "n_npnc": self.n_npnc,
                "n_p": self.n_p, "n_c": self.n_c,
            },
            "rates": {name: (None if r is None else float(r))
                      for name, r in self._rates()},
            "rates_pct": {name: (None if r is None else format_percent(r))
                          for name, r in self._rates()},
            "negative_rate": self.negative_rate,
        }
        if self.utterance_id is not None:
            row = {"id": self.utterance_id, **row}
        return row

    def _rates(self):
        return (("wer", self.wer), ("puncer", self.puncer),
                ("caseer", self.caseer), ("pcwer", self.pcwer))


def format_percent(rate: Fraction) -> str:
    """Exact rate -> percentage string with two decimals, e.g. '9.32'."""
    scaled = rate * 10000  # hundredths of a percent
    hundredths = math.floor(scaled)
    if 2 * (scaled - hundredths) >= 1:
        hundredths += 1  # round half up
    sign = "-" if hundredths < 0 else ""
    hundredths = abs(hundredths)
    return f"{sign}{hundredths // 100}.{hundredths % 100:02d}"


def compute_metrics(ref: Transcript, hyp: Transcript,
                    cfg=None) -> MetricReport:
    """Score one utterance on all four views.

    Both transcripts must have been tokenized under the same punctuation
    config; `cfg` is accepted to document that binding but the
    projections themselves do not consult it.
    """
    errors = {}
    for view in ViewKind:
        res = align(project(ref.tokens, view), project(hyp.tokens, view))
        errors[view] = res.total_errors
    ref_pc = project(ref.tokens, ViewKind.PC)
    return MetricReport.from_counts(
        e_pc=errors[ViewKind.PC],
        e_pnc=errors[ViewKind.PNC],
        e_npc=errors[ViewKind.NPC],
        e_npnc=errors[ViewKind.NPNC],
        n_pc=len(ref_pc),
        n_npnc=len(project(ref.tokens, ViewKind.NPNC)),
        n_p=count_punct(ref_pc),
        n_c=count_cased_words(project(ref.tokens, ViewKind.NPC)),
        utterance_id=ref.utterance_id,
    )


def aggregate(reports: Sequence[MetricReport]) -> MetricReport:
    """Corpus report from per-utterance reports: sum counts, re-derive rates."""
    if not reports:
        raise ValueError("nothing to aggregate")
    return MetricReport.from_counts(
        e_pc=sum(r.e_pc for r in reports),
        e_pnc=sum(r.e_pnc for r in reports),
        e_npc=sum(r.e_npc for r in reports),
        e_npnc=sum(r.e_npnc for r in reports),
        n_pc=sum(r.n_pc for r in reports),
        n_npnc=sum(r.n_npnc for r in reports),
        n_p=sum(r.n_p for r in reports),
        n_c=sum(r.n_c for r in reports),
        n_utterances=sum(r.n_utterances for r in reports),
    )


class IdMismatchError(Exception):
    """Reference and hypothesis utterance ids do not line up."""

    def __init__(self, missing_in_hyp=(), missing_in_ref=(), mismatched=()):
        self.missing_in_hyp = sorted(missing_in_hyp)
        self.missing_in_ref = sorted(missing_in_ref)
        self.mismatched = sorted(mismatched)
        parts = []
        if self.missing_in_hyp:
            parts.append(f"missing in hyp: {', '.join(self.missing_in_hyp)}")
        if self.missing_in_ref:
            parts.append(f"missing in ref: {', '.join(self.missing_in_ref)}")
        if self.mismatched:
            parts.append(f"mismatched pairs: {', '.join(self.mismatched)}")
        super().__init__("; ".join(parts) or "utterance id mismatch")


def pair_by_id(refs: Sequence[Transcript], hyps: Sequence[Transcript]) -> list:
    """Match transcripts by utterance id, in reference order."""
    hyp_by_id = {h.utterance_id: h for h in hyps}
    ref_ids = {r.utterance_id for r in refs}
    missing_in_hyp = [r.utterance_id for r in refs if r.utterance_id not in hyp_by_id]
    missing_in_ref = [h.utterance_id for h in hyps if h.utterance_id not in ref_ids]
    if missing_in_hyp or missing_in_ref:
        raise IdMismatchError(missing_in_hyp, missing_in_ref)
    return [(r, hyp_by_id[r.utterance_id]) for r in refs]


def corpus_metrics(pairs: Sequence, cfg=None) -> MetricReport:
    """Aggregate scoring over (ref, hyp) transcript pairs."""
    bad = [f"{r.utterance_id}!={h.utterance_id}"
           for r, h in pairs if r.utterance_id != h.utterance_id]
    if bad:
        raise IdMismatchError(mismatched=bad)
    return aggregate([compute_metrics(r, h, cfg) for r, h in pairs])


@dataclass(frozen=True)
class SignificanceResult:
    statistic: float
    p_value: float
    n_segments: int
    degenerate: bool = False


_STAT_CAP = 1e9

_NUMERATORS = {
    "wer": lambda r: r.e_npnc,
    "pcwer": lambda r: r.e_pc,
    "puncer": lambda r: r.e_pnc - r.e_npnc,
    "caseer": lambda r: r.e_npc - r.e_npnc,
}


def mpssw_test(per_utterance_a: Sequence[MetricReport],
               per_utterance_b: Sequence[MetricReport],
               metric: str) -> SignificanceResult:
    """Matched-pairs segment test on per-utterance numerator error counts.

    Each utterance is one segment; the paired statistic is the mean
    difference of the chosen metric's numerator over its standard error,
    with a two-sided normal p-value.
    """
    key = metric.lower().replace("-", "").replace("_", "")
    if key not in _NUMERATORS:
        raise ValueError(f"unknown metric {metric!r}")
    if len(per_utterance_a) != len(per_utterance_b):
        raise ValueError("systems have different segment counts")
    n = len(per_utterance_a)
    if n < 2:
        raise ValueError("need at least 2 segments")
    bad = [f"{a.utterance_id}!={b.utterance_id}"
           for a, b in zip(per_utterance_a, per_utterance_b)
           if a.utterance_id is not None and b.utterance_id is not None
           and a.utterance_id != b.utterance_id]
    if bad:
        raise IdMismatchError(mismatched=bad)
    numerator = _NUMERATORS[key]
    diffs = [numerator(a) - numerator(b)
             for a, b in zip(per_utterance_a, per_utterance_b)]
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        if mean == 0.0:
            return SignificanceResult(0.0, 1.0, n, degenerate=True)
        stat = math.copysign(_STAT_CAP, mean)
        return SignificanceResult(stat, math.erfc(abs(stat) / math.sqrt(2)), n,
                                  degenerate=True)
    stat = mean / math.sqrt(var / n)
    return SignificanceResult(stat, math.erfc(abs(stat) / math.sqrt(2)), n)


def rtf(inference_seconds, audio_seconds) -> float:
    """Real-time factor: inference time over audio time.

    The division runs on decimal-exact rationals so that e.g. (4.4, 10.0)
    yields exactly 0.44 rather than picking up binary double-rounding.
    """
    inference_seconds = float(inference_seconds)
    audio_seconds = float(audio_seconds)
    if audio_seconds <= 0:
        raise ValueError("audio_seconds must be positive")
    if inference_seconds < 0:
        raise ValueError("inference_seconds must be nonnegative")
    return float(Fraction(repr(inference_seconds)) / Fraction(repr(audio_seconds)))


def format_alignment(ref: Sequence[Token], hyp: Sequence[Token],
                     result: AlignmentResult) -> str:
    """Three-line human-readable alignment (REF / HYP / Eval)."""
    ref_cells, hyp_cells, eval_cells = [], [], []
    for ri, hj, op in result.trace:
        r = ref[ri].surface if ri is not None else ""
        h = hyp[hj].surface if hj is not None else ""
        width = max(len(r), len(h), 1)
        ref_cells.append((r or "*" * width).ljust(width))
        hyp_cells.append((h or "*" * width).ljust(width))
        mark = {"match": " ", "sub": "S", "del": "D", "ins": "I"}[op.value]
        eval_cells.append(mark.ljust(width))
    return (
        "REF:  " + " ".join(ref_cells).rstrip() + "\n"
        "HYP:  " + " ".join(hyp_cells).rstrip() + "\n"
        "Eval: " + " ".join(eval_cells).rstrip()
    )
