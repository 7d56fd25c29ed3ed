"""Command-line front end.

Machine-readable results go to stdout as JSON/JSONL; logs and
human-readable dumps go to stderr.  Exit codes: 0 success, 2 utterance-id
or input-data mismatch, 3 configuration/capability error, 4 training
divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

import puncnorm
from puncnorm import metrics, pipeline, transducer
from puncnorm.metrics import IdMismatchError
from puncnorm.pipeline import SchemaError
from puncnorm.text import (
    CommandRestorer,
    IdentityRestorer,
    PunctuationConfig,
    RestoreError,
    RuleRestorer,
    Transcript,
    ViewKind,
    normalize,
    project,
    restore,
)

EXIT_OK = 0
EXIT_DATA = 2
EXIT_CONFIG = 3
EXIT_DIVERGED = 4

DESK_MODEL_DEFAULTS = {
    "token_embed_dim": 24,
    "mode_embed_dim": 8,
    "encoder_hidden": 64,
    "joiner_hidden": 64,
}


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _read_transcripts(path, cfg) -> list:
    rows = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise SchemaError(path, line_no, f"invalid JSON: {e}") from None
            if "id" not in obj or "text" not in obj:
                raise SchemaError(path, line_no, "need 'id' and 'text'")
            rows.append(Transcript.from_json(obj, cfg))
    return rows


def _load_config(path):
    if path is None:
        return PunctuationConfig(), {}
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    pcfg = PunctuationConfig.from_dict(data.get("punctuation", {}))
    return pcfg, dict(data.get("model", {}))


def cmd_score(args, pcfg, _model_overrides) -> int:
    refs = _read_transcripts(args.ref, pcfg)
    hyps = _read_transcripts(args.hyp, pcfg)
    pairs = metrics.pair_by_id(refs, hyps)
    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            reports = list(pool.map(lambda p: metrics.compute_metrics(*p), pairs))
    else:
        reports = [metrics.compute_metrics(r, h) for r, h in pairs]
    out = {"corpus": metrics.aggregate(reports).to_json()}
    if args.per_utt:
        out["per_utterance"] = [r.to_json() for r in reports]
    if args.dump_align:
        for (ref, hyp), report in zip(pairs, reports):
            for view in ("pc", "pnc", "npc", "npnc"):
                rt = project(ref.tokens, ViewKind.parse(view))
                ht = project(hyp.tokens, ViewKind.parse(view))
                res = metrics.align(rt, ht)
                _log(f"== {ref.utterance_id} [{view}] "
                     f"S={res.substitutions} D={res.deletions} I={res.insertions}")
                _log(metrics.format_alignment(rt, ht, res))
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_align_view(args, pcfg, _model_overrides) -> int:
    refs = _read_transcripts(args.ref, pcfg)
    hyps = _read_transcripts(args.hyp, pcfg)
    view = ViewKind.parse(args.view)
    for ref, hyp in metrics.pair_by_id(refs, hyps):
        rt = project(ref.tokens, view)
        ht = project(hyp.tokens, view)
        res = metrics.align(rt, ht)
        print(f"== {ref.utterance_id} [{args.view}] S={res.substitutions} "
              f"D={res.deletions} I={res.insertions} M={res.matches}")
        print(metrics.format_alignment(rt, ht, res))
    return EXIT_OK


def cmd_normalize(args, pcfg, _model_overrides) -> int:
    for t in _read_transcripts(args.input, pcfg):
        print(json.dumps(normalize(t).to_json(), ensure_ascii=False))
    return EXIT_OK


def _make_restorer(args):
    if args.restorer == "identity":
        return IdentityRestorer()
    if args.restorer == "rule":
        return RuleRestorer()
    if not args.command:
        raise ValueError("--restorer command needs --command")
    return CommandRestorer(args.command)


def cmd_restore(args, pcfg, _model_overrides) -> int:
    restorer = _make_restorer(args)
    for t in _read_transcripts(args.input, pcfg):
        print(json.dumps(restore(t, restorer, pcfg).to_json(), ensure_ascii=False))
    return EXIT_OK


def cmd_split(args, pcfg, _model_overrides) -> int:
    corpus = pipeline.ingest(args.corpus, pcfg)
    out = pipeline.split_proportion(corpus, args.p_fraction, args.seed)
    pipeline.export(out, args.out)
    _log(f"kept y_p for {sum(1 for s in out.samples if s.text_punct is not None)}"
         f"/{len(out)} samples")
    return EXIT_OK


def cmd_synth(args, pcfg, _model_overrides) -> int:
    corpus = pipeline.synth_toy_corpus(
        args.seed, args.n, (args.min_words, args.max_words), args.noise, pcfg)
    features_dir = args.features_dir or (args.out + ".features")
    pipeline.export(corpus, args.out, features_dir=features_dir)
    if args.features_jsonl:
        with open(args.features_jsonl, "w", encoding="utf-8") as f:
            for s in corpus.samples:
                f.write(json.dumps({
                    "id": s.utterance_id,
                    "frames": np.asarray(s.features).tolist(),
                    "audio_seconds": s.audio_seconds,
                }) + "\n")
    _log(f"wrote {len(corpus)} samples to {args.out}")
    return EXIT_OK


def cmd_train(args, pcfg, model_overrides) -> int:
    corpus = pipeline.ingest(args.corpus, pcfg)
    if args.p_fraction < 1.0:
        corpus = pipeline.split_proportion(corpus, args.p_fraction, args.seed)
    vocab = transducer.CharVocab.character(pcfg)
    fields = dict(DESK_MODEL_DEFAULTS)
    fields.update(model_overrides)
    fields.update(
        input_dim=vocab.size,
        vocab_size=vocab.size,
        architecture=transducer.Architecture(args.arch),
    )
    config = transducer.ModelConfig(**fields)
    model = transducer.init_model(config, seed=args.seed, vocab=vocab)
    items = corpus.train_items(vocab)
    opt = transducer.TrainConfig(
        epochs=args.epochs, batch_size=args.batch_size,
        learning_rate=args.lr, momentum=args.momentum)
    weights = transducer.LossWeights(alpha=args.alpha)
    model, log = transducer.train(model, items, opt, weights, seed=args.seed)
    transducer.save_checkpoint(model, args.out)
    if args.loss_log:
        with open(args.loss_log, "w", encoding="utf-8") as f:
            for row in log:
                f.write(json.dumps(row) + "\n")
    _log(f"final epoch loss {log[-1]['loss']:.6f}; checkpoint: {args.out}")
    return EXIT_OK


_MODES = {"norm": transducer.ModeId.NORMALIZED, "punct": transducer.ModeId.PUNCTUATED}


def _decode_modes(model, requested: str):
    if requested == "both":
        wanted = list(_MODES.values())
    else:
        wanted = [_MODES[requested]]
    available = transducer.supported_modes(model)
    unsupported = [m.value for m in wanted if m not in available]
    if unsupported:
        raise transducer.UnsupportedModeError(
            f"{model.config.architecture.value} checkpoint cannot decode "
            f"mode(s): {', '.join(unsupported)}")
    return wanted


def cmd_decode(args, pcfg, _model_overrides) -> int:
    model = transducer.load_checkpoint(args.checkpoint)
    if model.vocab is None:
        raise ValueError("checkpoint has no vocabulary; cannot render text")
    modes = _decode_modes(model, args.mode)
    for row in pipeline.read_features_jsonl(args.features):
        for mode in modes:
            labels = transducer.greedy_decode(model, row["frames"], mode)
            print(json.dumps({
                "id": row["id"],
                "mode": mode.value,
                "text": model.vocab.decode(labels.tokens),
            }, ensure_ascii=False))
    return EXIT_OK


def cmd_rtf_bench(args, pcfg, _model_overrides) -> int:
    model = transducer.load_checkpoint(args.checkpoint)
    rows = pipeline.read_features_jsonl(args.features)
    missing = [r["id"] for r in rows if r["audio_seconds"] is None]
    if missing:
        raise SchemaError(args.features, 0,
                          f"rows without audio_seconds: {', '.join(missing[:5])}")
    mode = (transducer.ModeId.PUNCTUATED
            if transducer.ModeId.PUNCTUATED in transducer.supported_modes(model)
            else transducer.ModeId.NORMALIZED)
    per_utt = []
    total_time = 0.0
    total_audio = 0.0
    for row in rows:  # model stays loaded; utterances processed sequentially
        t0 = time.perf_counter()
        transducer.greedy_decode(model, row["frames"], mode)
        elapsed = time.perf_counter() - t0
        total_time += elapsed
        total_audio += row["audio_seconds"]
        per_utt.append({
            "id": row["id"],
            "inference_seconds": elapsed,
            "audio_seconds": row["audio_seconds"],
            "rtf": metrics.rtf(elapsed, row["audio_seconds"]),
        })
    print(json.dumps({
        "per_utterance": per_utt,
        "total_inference_seconds": total_time,
        "total_audio_seconds": total_audio,
        "rtf": metrics.rtf(total_time, total_audio),
    }, indent=2))
    return EXIT_OK


def cmd_significance(args, pcfg, _model_overrides) -> int:
    refs = _read_transcripts(args.ref, pcfg)
    reports = {}
    for name, path in (("a", args.hyp_a), ("b", args.hyp_b)):
        hyps = _read_transcripts(path, pcfg)
        pairs = metrics.pair_by_id(refs, hyps)
        reports[name] = [metrics.compute_metrics(r, h) for r, h in pairs]
    res = metrics.mpssw_test(reports["a"], reports["b"], args.metric)
    print(json.dumps({
        "metric": args.metric,
        "statistic": res.statistic,
        "p_value": res.p_value,
        "n_segments": res.n_segments,
        "degenerate": res.degenerate,
    }, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="puncnorm",
        description="Punctuation/case-aware ASR scoring and toy dual-mode transducer")
    parser.add_argument(
        "--version", action="version",
        version=f"puncnorm {puncnorm.__version__} "
                f"(checkpoint format {transducer.CHECKPOINT_FORMAT_VERSION})")
    parser.add_argument("--config", help="JSON file with punctuation/model settings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="corpus metrics from ref/hyp JSONL")
    p.add_argument("ref")
    p.add_argument("hyp")
    p.add_argument("--per-utt", action="store_true")
    p.add_argument("--dump-align", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("align-view", help="inspect alignments on one view")
    p.add_argument("ref")
    p.add_argument("hyp")
    p.add_argument("--view", default="pc", choices=["pc", "pnc", "npc", "npnc"])
    p.set_defaults(func=cmd_align_view)

    p = sub.add_parser("normalize", help="strip punctuation and casing")
    p.add_argument("input")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("restore", help="run a punctuation restorer")
    p.add_argument("input")
    p.add_argument("--restorer", default="rule", choices=["identity", "rule", "command"])
    p.add_argument("--command", nargs="+", help="external restorer argv")
    p.set_defaults(func=cmd_restore)

    p = sub.add_parser("split", help="keep y_p for a fraction of samples")
    p.add_argument("corpus")
    p.add_argument("--p-fraction", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("synth", help="generate a toy corpus")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-words", type=int, default=3)
    p.add_argument("--max-words", type=int, default=6)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.add_argument("--features-dir")
    p.add_argument("--features-jsonl", help="also write decode-ready features")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a toy transducer")
    p.add_argument("corpus")
    p.add_argument("--arch", default="cond",
                   choices=[a.value for a in transducer.Architecture])
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--p-fraction", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--batch-size", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.12)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--out", required=True)
    p.add_argument("--loss-log")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("decode", help="greedy decoding from a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("features")
    p.add_argument("--mode", default="both", choices=["norm", "punct", "both"])
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("rtf-bench", help="sequential CPU decoding benchmark")
    p.add_argument("checkpoint")
    p.add_argument("features")
    p.set_defaults(func=cmd_rtf_bench)

    p = sub.add_parser("significance", help="matched-pairs test between two systems")
    p.add_argument("ref")
    p.add_argument("hyp_a")
    p.add_argument("hyp_b")
    p.add_argument("--metric", default="pcwer",
                   choices=["wer", "puncer", "caseer", "pcwer"])
    p.set_defaults(func=cmd_significance)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        pcfg, model_overrides = _load_config(args.config)
    except (OSError, ValueError, KeyError, TypeError) as e:
        _log(f"config error: {e}")
        return EXIT_CONFIG
    try:
        return args.func(args, pcfg, model_overrides)
    except IdMismatchError as e:
        _log(f"id mismatch: {e}")
        return EXIT_DATA
    except (SchemaError, RestoreError) as e:
        _log(f"input error: {e}")
        return EXIT_DATA
    except FileNotFoundError as e:
        _log(f"input error: {e}")
        return EXIT_DATA
    except transducer.DivergenceError as e:
        _log(f"training diverged: {e}")
        return EXIT_DIVERGED
    except (transducer.UnsupportedModeError, ValueError, TypeError) as e:
        _log(f"config error: {e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
