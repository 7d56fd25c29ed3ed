"""Punctuation/case-bearing text as token sequences, plus the four views.

A transcript is a sequence of Word and Punct tokens.  Projecting a token
sequence onto a view selectively drops punctuation tokens and/or lowercases
word surfaces; scoring runs on all four projections to isolate word,
punctuation and casing errors.
"""

from __future__ import annotations

import json
import subprocess
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

DEFAULT_MARKS = frozenset({".", ",", "?", "!", ";", ":", '"', "—"})
DEFAULT_INTRA_WORD = frozenset({"'", "-"})


class TokenKind(Enum):
    WORD = "word"
    PUNCT = "punct"


@dataclass(frozen=True)
class Token:
    surface: str
    kind: TokenKind

    def __post_init__(self):
        if not self.surface or any(c.isspace() for c in self.surface):
            raise ValueError(f"bad token surface: {self.surface!r}")


def word(surface: str) -> Token:
    return Token(surface, TokenKind.WORD)


def punct(surface: str) -> Token:
    if len(surface) != 1:
        raise ValueError(f"punctuation token must be a single mark: {surface!r}")
    return Token(surface, TokenKind.PUNCT)


@dataclass(frozen=True)
class PunctuationConfig:
    """Which characters are standalone marks vs. word-internal."""

    marks: frozenset = DEFAULT_MARKS
    intra_word_chars: frozenset = DEFAULT_INTRA_WORD

    def __post_init__(self):
        if any(len(m) != 1 for m in self.marks):
            raise ValueError("punctuation marks must be single characters")
        overlap = self.marks & self.intra_word_chars
        if overlap:
            raise ValueError(f"marks and intra-word characters overlap: {sorted(overlap)}")

    @classmethod
    def from_dict(cls, d: dict) -> "PunctuationConfig":
        return cls(
            marks=frozenset(d.get("marks", DEFAULT_MARKS)),
            intra_word_chars=frozenset(d.get("intra_word_chars", DEFAULT_INTRA_WORD)),
        )

    @classmethod
    def from_json_file(cls, path) -> "PunctuationConfig":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> dict:
        return {
            "marks": sorted(self.marks),
            "intra_word_chars": sorted(self.intra_word_chars),
        }


DEFAULT_CONFIG = PunctuationConfig()


class ViewKind(Enum):
    """The four transcript projections: punctuation x casing presence."""

    PC = "pc"        # punctuated + cased
    PNC = "pnc"      # punctuated, case stripped
    NPC = "npc"      # punctuation stripped, cased
    NPNC = "npnc"    # both stripped (normalized)

    @classmethod
    def parse(cls, name: str) -> "ViewKind":
        key = name.lower().replace("-", "").replace("_", "")
        for v in cls:
            if v.value == key:
                return v
        raise ValueError(f"unknown view {name!r}; expected one of pc, pnc, npc, npnc")


def tokenize(raw: str, cfg: PunctuationConfig = DEFAULT_CONFIG) -> tuple:
    """Split text into Word/Punct tokens.

    Every configured mark becomes its own Punct token wherever it occurs;
    whitespace separates words; intra-word characters (apostrophe, hyphen
    by default) never split a word.
    """
    tokens = []
    for chunk in unicodedata.normalize("NFC", raw).split():
        buf = []
        for ch in chunk:
            if ch in cfg.marks:
                if buf:
                    tokens.append(Token("".join(buf), TokenKind.WORD))
                    buf.clear()
                tokens.append(Token(ch, TokenKind.PUNCT))
            else:
                buf.append(ch)
        if buf:
            tokens.append(Token("".join(buf), TokenKind.WORD))
    return tuple(tokens)


def detokenize(tokens: Iterable[Token]) -> str:
    """Render tokens back to text; punctuation attaches to what precedes it."""
    parts = []
    for tok in tokens:
        if tok.kind is TokenKind.WORD and parts:
            parts.append(" ")
        parts.append(tok.surface)
    return "".join(parts)


def project(tokens: Sequence[Token], view: ViewKind) -> tuple:
    """Project tokens onto one of the four views."""
    if view is ViewKind.PC:
        return tuple(tokens)
    if view is ViewKind.PNC:
        return tuple(
            Token(t.surface.lower(), t.kind) if t.kind is TokenKind.WORD else t
            for t in tokens
        )
    if view is ViewKind.NPC:
        return tuple(t for t in tokens if t.kind is TokenKind.WORD)
    return tuple(
        Token(t.surface.lower(), t.kind)
        for t in tokens
        if t.kind is TokenKind.WORD
    )


@dataclass(frozen=True)
class Transcript:
    utterance_id: str
    tokens: tuple = ()
    audio_seconds: float | None = None

    def __post_init__(self):
        if self.audio_seconds is not None and self.audio_seconds < 0:
            raise ValueError(f"negative audio_seconds for {self.utterance_id!r}")
        object.__setattr__(self, "tokens", tuple(self.tokens))

    @classmethod
    def from_text(cls, utterance_id: str, text: str,
                  cfg: PunctuationConfig = DEFAULT_CONFIG,
                  audio_seconds: float | None = None) -> "Transcript":
        return cls(utterance_id, tokenize(text, cfg), audio_seconds)

    @classmethod
    def from_json(cls, row: dict, cfg: PunctuationConfig = DEFAULT_CONFIG) -> "Transcript":
        return cls.from_text(row["id"], row["text"], cfg, row.get("audio_seconds"))

    def text(self) -> str:
        return detokenize(self.tokens)

    def to_json(self) -> dict:
        row = {"id": self.utterance_id, "text": self.text()}
        if self.audio_seconds is not None:
            row["audio_seconds"] = self.audio_seconds
        return row


def normalize(t: Transcript) -> Transcript:
    """Strip punctuation tokens and casing; keeps id and audio length."""
    return Transcript(t.utterance_id, project(t.tokens, ViewKind.NPNC), t.audio_seconds)


def is_erroneous(t: Transcript) -> bool:
    """All-caps junk detector: true iff every letter is uppercase (and some exist)."""
    letters = [
        c
        for tok in t.tokens
        if tok.kind is TokenKind.WORD
        for c in tok.surface
        if c.isalpha()
    ]
    return bool(letters) and all(c.isupper() for c in letters)


class RestoreError(Exception):
    """A restorer failed on one utterance."""

    def __init__(self, utterance_id: str, cause: Exception):
        super().__init__(f"restoration failed for {utterance_id!r}: {cause}")
        self.utterance_id = utterance_id
        self.cause = cause


class Restorer:
    """Punctuation/case restoration interface: plain text in, plain text out."""

    def restore(self, text: str) -> str:
        raise NotImplementedError


class IdentityRestorer(Restorer):
    def restore(self, text: str) -> str:
        return text


class RuleRestorer(Restorer):
    """Toy baseline: capitalize the first word, end with a period."""

    def restore(self, text: str) -> str:
        if not text:
            return ""
        return text[0].upper() + text[1:] + "."


class CommandRestorer(Restorer):
    """Adapter for an external restoration model run as a subprocess.

    The command receives the normalized text on stdin and must print the
    restored text on stdout.
    """

    def __init__(self, argv: Sequence[str]):
        self.argv = list(argv)

    def restore(self, text: str) -> str:
        proc = subprocess.run(
            self.argv, input=text, capture_output=True, text=True, check=True
        )
        return proc.stdout.rstrip("\n")


def restore(t_norm: Transcript, restorer: Restorer,
            cfg: PunctuationConfig = DEFAULT_CONFIG) -> Transcript:
    """Run a restorer over a normalized transcript.

    Restorer exceptions surface as RestoreError carrying the utterance id.
    """
    for tok in t_norm.tokens:
        if tok.kind is TokenKind.PUNCT or any(c.isupper() for c in tok.surface):
            raise ValueError(
                f"restore() input must be normalized; offending token {tok.surface!r} "
                f"in {t_norm.utterance_id!r}"
            )
    try:
        restored = restorer.restore(t_norm.text())
    except Exception as e:
        raise RestoreError(t_norm.utterance_id, e) from e
    return Transcript(t_norm.utterance_id, tokenize(restored, cfg), t_norm.audio_seconds)


def count_punct(tokens: Sequence[Token]) -> int:
    return sum(1 for t in tokens if t.kind is TokenKind.PUNCT)


def count_cased_words(tokens: Sequence[Token]) -> int:
    """Words carrying at least one uppercase letter."""
    return sum(
        1
        for t in tokens
        if t.kind is TokenKind.WORD and any(c.isupper() for c in t.surface)
    )
