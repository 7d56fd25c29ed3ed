"""Character vocabulary shared by both output modes.

Blank sits at index 0; the remaining symbols are single characters.  One
index space covers lowercase, uppercase, digits, space and punctuation so
a single joiner can serve punctuated and normalized outputs alike.
"""

from __future__ import annotations

import string
from dataclasses import dataclass

from puncnorm.text import DEFAULT_CONFIG, PunctuationConfig

BLANK_SYMBOL = "<blank>"


@dataclass(frozen=True)
class CharVocab:
    symbols: tuple

    def __post_init__(self):
        if not self.symbols or self.symbols[0] != BLANK_SYMBOL:
            raise ValueError("symbol 0 must be the blank")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("duplicate symbols")

    @classmethod
    def character(cls, cfg: PunctuationConfig = DEFAULT_CONFIG) -> "CharVocab":
        chars = (
            set(string.ascii_lowercase)
            | set(string.ascii_uppercase)
            | set(string.digits)
            | set(cfg.marks)
            | set(cfg.intra_word_chars)
            | {" "}
        )
        return cls((BLANK_SYMBOL,) + tuple(sorted(chars)))

    @property
    def size(self) -> int:
        return len(self.symbols)

    @property
    def blank_index(self) -> int:
        return 0

    def index(self, symbol: str) -> int:
        try:
            return self._lookup[symbol]
        except KeyError:
            raise ValueError(f"symbol not in vocabulary: {symbol!r}") from None

    @property
    def _lookup(self) -> dict:
        cached = self.__dict__.get("_lookup_cache")
        if cached is None:
            cached = {s: i for i, s in enumerate(self.symbols)}
            self.__dict__["_lookup_cache"] = cached
        return cached

    def encode(self, text: str) -> tuple:
        return tuple(self.index(c) for c in text)

    def decode(self, ids) -> str:
        out = []
        for i in ids:
            if i == 0:
                raise ValueError("blank index in label sequence")
            out.append(self.symbols[i])
        return "".join(out)
