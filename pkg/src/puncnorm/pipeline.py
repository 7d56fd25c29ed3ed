"""Corpus ingestion, reference derivation, splitting, and toy synthesis.

Corpus rows are JSONL objects:
    {"id": str, "text_punct": str?, "text_norm": str?,
     "features": path?, "audio_seconds": num?, "y_p_source": "auto"?}
At least one text field is required.  Feature paths are resolved relative
to the corpus file; in-memory features export to per-utterance .npy
sidecars.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from puncnorm.text import (
    DEFAULT_CONFIG,
    PunctuationConfig,
    Restorer,
    Transcript,
    is_erroneous,
    normalize,
    restore,
    tokenize,
)
from puncnorm.transducer.train import TrainItem
from puncnorm.transducer.vocab import CharVocab

logger = logging.getLogger(__name__)


class SchemaError(Exception):
    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.line_no = line_no


class PunctSource(Enum):
    ORIGINAL = "original"
    AUTO = "auto"
    ABSENT = "absent"


@dataclass(frozen=True)
class Sample:
    utterance_id: str
    text_norm: Transcript
    text_punct: Optional[Transcript] = None
    y_p_source: PunctSource = PunctSource.ABSENT
    features: object = None  # ndarray, path str, or None
    audio_seconds: Optional[float] = None
    text_punct_original: Optional[Transcript] = None  # side channel, see auto_punctuate

    def __post_init__(self):
        if (self.text_punct is None) != (self.y_p_source is PunctSource.ABSENT):
            raise ValueError(
                f"{self.utterance_id}: y_p_source must be absent exactly when "
                "text_punct is missing")

    def load_features(self) -> np.ndarray:
        if self.features is None:
            raise ValueError(f"{self.utterance_id}: sample has no features")
        if isinstance(self.features, str):
            return np.load(self.features)
        return np.asarray(self.features, dtype=np.float64)


@dataclass(frozen=True)
class Corpus:
    samples: tuple

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        seen = set()
        for s in self.samples:
            if s.utterance_id in seen:
                raise ValueError(f"duplicate utterance id: {s.utterance_id}")
            seen.add(s.utterance_id)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def punctuation_fraction(self) -> float:
        if not self.samples:
            return 0.0
        return sum(1 for s in self.samples if s.text_punct is not None) / len(self.samples)

    def train_items(self, vocab: CharVocab) -> list:
        """Encode texts with the character vocabulary and load features."""
        items = []
        for s in self.samples:
            items.append(TrainItem(
                utterance_id=s.utterance_id,
                x=s.load_features(),
                y_n=vocab.encode(s.text_norm.text()),
                y_p=vocab.encode(s.text_punct.text()) if s.text_punct is not None else None,
            ))
        return items


def ingest(path, cfg: PunctuationConfig = DEFAULT_CONFIG,
           drop_log: Optional[list] = None,
           issues: Optional[list] = None) -> Corpus:
    """Read a corpus JSONL file.

    Fully uppercase rows are dropped (appended to `drop_log` as
    {"id", "reason"} when given).  A normalized reference is derived from
    the punctuated text when only the latter is present; inconsistent
    original pairs are reported to `issues` but kept.
    """
    samples = []
    base = os.path.dirname(os.path.abspath(path))
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as e:
                raise SchemaError(path, line_no, f"invalid JSON: {e}") from None
            if not isinstance(row, dict) or "id" not in row:
                raise SchemaError(path, line_no, "row must be an object with an 'id'")
            utt = str(row["id"])
            raw_punct = row.get("text_punct")
            raw_norm = row.get("text_norm")
            if raw_punct is None and raw_norm is None:
                raise SchemaError(path, line_no,
                                  f"{utt}: need text_punct and/or text_norm")
            audio = row.get("audio_seconds")
            t_punct = None
            if raw_punct is not None:
                t_punct = Transcript(utt, tokenize(raw_punct, cfg), audio)
            if raw_norm is not None:
                t_norm = normalize(Transcript(utt, tokenize(raw_norm, cfg), audio))
            else:
                t_norm = normalize(t_punct)

            check = t_punct if t_punct is not None else t_norm
            if is_erroneous(check):
                entry = {"id": utt, "reason": "fully uppercase"}
                logger.info("dropping %s: %s", utt, entry["reason"])
                if drop_log is not None:
                    drop_log.append(entry)
                continue

            source = PunctSource.ABSENT
            if t_punct is not None:
                source = PunctSource(row.get("y_p_source", "original"))
                if source is PunctSource.ABSENT:
                    raise SchemaError(path, line_no,
                                      f"{utt}: y_p_source 'absent' with text present")
                if raw_norm is not None and source is PunctSource.ORIGINAL:
                    derived = normalize(t_punct).text()
                    if derived != t_norm.text():
                        issue = {"id": utt,
                                 "issue": f"normalize(text_punct)={derived!r} "
                                          f"!= text_norm={t_norm.text()!r}"}
                        logger.warning("%s", issue["issue"])
                        if issues is not None:
                            issues.append(issue)

            feat = row.get("features")
            if feat is not None and not os.path.isabs(feat):
                feat = os.path.join(base, feat)
            samples.append(Sample(utt, t_norm, t_punct, source, feat, audio))
    return Corpus(tuple(samples))


def export(corpus: Corpus, path, features_dir=None) -> None:
    """Write a corpus back to JSONL (ingest's inverse)."""
    if features_dir is not None:
        os.makedirs(features_dir, exist_ok=True)
    base = os.path.dirname(os.path.abspath(path))
    with open(path, "w", encoding="utf-8") as f:
        for s in corpus.samples:
            row: dict = {"id": s.utterance_id}
            if s.text_punct is not None:
                row["text_punct"] = s.text_punct.text()
                if s.y_p_source is PunctSource.AUTO:
                    row["y_p_source"] = "auto"
            row["text_norm"] = s.text_norm.text()
            feat = s.features
            if isinstance(feat, np.ndarray):
                if features_dir is None:
                    raise ValueError(
                        f"{s.utterance_id}: in-memory features need a features_dir")
                fpath = os.path.join(features_dir, f"{s.utterance_id}.npy")
                np.save(fpath, feat)
                row["features"] = os.path.relpath(fpath, base)
            elif feat is not None:
                row["features"] = feat
            if s.audio_seconds is not None:
                row["audio_seconds"] = s.audio_seconds
            f.write(json.dumps(row, ensure_ascii=False) + "\n")


def auto_punctuate(corpus: Corpus, restorer: Restorer,
                   cfg: PunctuationConfig = DEFAULT_CONFIG,
                   errors: Optional[list] = None) -> Corpus:
    """Replace every punctuated reference by the restorer's output.

    Existing punctuated texts move to the `text_punct_original` side
    channel.  Per-utterance restorer failures leave the sample untouched
    and are collected; the call fails only if no utterance succeeds.
    """
    out = []
    n_failed = 0
    for s in corpus.samples:
        try:
            restored = restore(s.text_norm, restorer, cfg)
        except Exception as e:
            n_failed += 1
            logger.warning("auto-punctuation failed for %s: %s", s.utterance_id, e)
            if errors is not None:
                errors.append({"id": s.utterance_id, "error": str(e)})
            out.append(s)
            continue
        out.append(replace(
            s,
            text_punct=restored,
            y_p_source=PunctSource.AUTO,
            text_punct_original=s.text_punct if s.text_punct is not None else None,
        ))
    if corpus.samples and n_failed == len(corpus.samples):
        raise RuntimeError("auto-punctuation failed for every utterance")
    return Corpus(tuple(out))


def split_proportion(corpus: Corpus, p_fraction: float, seed: int) -> Corpus:
    """Keep the punctuated reference for round(p * N) seeded-random samples.

    The rest lose y_p entirely; features, normalized references, ids and
    sample order are untouched.
    """
    if not 0.0 <= p_fraction <= 1.0:
        raise ValueError(f"p_fraction must lie in [0, 1], got {p_fraction}")
    missing = [s.utterance_id for s in corpus.samples if s.text_punct is None]
    if missing:
        raise ValueError(f"samples without y_p cannot be split: {missing[:5]}")
    n = len(corpus.samples)
    n_keep = int(p_fraction * n + 0.5)
    rng = np.random.default_rng(seed)
    keep = set(rng.choice(n, size=n_keep, replace=False).tolist())
    out = []
    for i, s in enumerate(corpus.samples):
        if i in keep:
            out.append(s)
        else:
            out.append(replace(s, text_punct=None, y_p_source=PunctSource.ABSENT,
                               text_punct_original=None))
    return Corpus(tuple(out))


TOY_WORDS = ("sun", "sand", "salt", "sea", "kite", "king", "kelp",
             "moon", "mist", "mud")
TOY_NAMES = ("Sam", "Kim", "Mo")
TOY_TERMINALS = (".", "!", "?")


def synth_toy_corpus(seed: int, n_samples: int,
                     words_range: tuple = (3, 6),
                     noise_sigma: float = 0.1,
                     cfg: PunctuationConfig = DEFAULT_CONFIG,
                     vocab: Optional[CharVocab] = None,
                     frames_per_char: int = 2) -> Corpus:
    """Deterministic random sentences with learnable synthetic features.

    Each character of the punctuated text becomes `frames_per_char`
    one-hot feature frames (dimension = vocabulary size) plus Gaussian
    noise, so the transducer objectives can drive error to near zero at
    desk scale.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    vocab = vocab or CharVocab.character(cfg)
    rng = np.random.default_rng(seed)
    samples = []
    lo, hi = words_range
    for i in range(n_samples):
        n_words = int(rng.integers(lo, hi + 1))
        toks = [TOY_WORDS[int(j)] for j in rng.integers(0, len(TOY_WORDS), n_words)]
        if rng.random() < 0.4:
            pos = int(rng.integers(0, len(toks) + 1))
            toks.insert(pos, TOY_NAMES[int(rng.integers(0, len(TOY_NAMES)))])
        toks[0] = toks[0][0].upper() + toks[0][1:]
        text = " ".join(toks)
        if len(toks) > 2 and rng.random() < 0.5:
            cut = int(rng.integers(1, len(toks) - 1))
            text = " ".join(toks[:cut]) + ", " + " ".join(toks[cut:])
        text += TOY_TERMINALS[int(rng.integers(0, len(TOY_TERMINALS)))]

        utt = f"toy-{i:04d}"
        ids = vocab.encode(text)
        frames = np.zeros((frames_per_char * len(ids), vocab.size))
        for pos, sym in enumerate(ids):
            frames[frames_per_char * pos:frames_per_char * (pos + 1), sym] = 1.0
        frames += rng.normal(0.0, noise_sigma, size=frames.shape)
        audio = round(frames.shape[0] * 0.01, 4)
        t_punct = Transcript(utt, tokenize(text, cfg), audio)
        samples.append(Sample(
            utt, normalize(t_punct), t_punct, PunctSource.ORIGINAL,
            frames, audio))
    return Corpus(tuple(samples))


def read_features_jsonl(path) -> list:
    """Decode-time feature rows: {"id", "frames": [[...]], "audio_seconds"?}."""
    rows = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as e:
                raise SchemaError(path, line_no, f"invalid JSON: {e}") from None
            if "id" not in row or "frames" not in row:
                raise SchemaError(path, line_no, "need 'id' and 'frames'")
            rows.append({
                "id": str(row["id"]),
                "frames": np.asarray(row["frames"], dtype=np.float64),
                "audio_seconds": row.get("audio_seconds"),
            })
    return rows
