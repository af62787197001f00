"""Command-line entry point for the whole workflow.

Subcommands: build-vocab, stats, train, continue, translate, score,
curve, serve-eval. Option resolution is flags > config file > defaults,
and every run writes a manifest (subcommand, resolved config, seed,
inputs, outputs, version) next to its primary output so a run can be
reproduced exactly.

Exit codes: 0 success, 2 usage, 3 missing input file, 4 invalid
configuration, 5 checkpoint/model error, 6 data error, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import yaml

from . import __version__
from .checkpoint import Checkpoint, load_checkpoint
from .data import corpus_stats, encode_pairs, load_parallel_tokens
from .decoding import LoadedModel, TranslationDictionary, translate_corpus
from .errors import (AlignmentError, CheckpointError, ConfigError, DeskmtError,
                     EnsembleError, VocabularyError)
from .metrics import ScoreReport, learning_curve, tokenize_corpus, write_curve_csv
from .network import ModelConfig, ModelParams
from .training import TrainConfig, continue_train, train_fresh
from .vocab import Vocabulary, build_vocabulary

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_BAD_CONFIG = 4
EXIT_CHECKPOINT = 5
EXIT_DATA = 6
EXIT_OTHER = 1


def _require_file(path: str | Path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such file: {p}")
    return p


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """flags > config file > defaults."""
    resolved = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        loaded = yaml.safe_load(_require_file(config_path).read_text(encoding="utf-8"))
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{config_path}: expected a key-value mapping")
        unknown = set(loaded) - set(defaults)
        if unknown:
            raise ConfigError(f"{config_path}: unknown keys {sorted(unknown)}")
        resolved.update(loaded)
    for key in defaults:
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            resolved[key] = value
    return resolved


def _write_manifest(out_anchor: Path, subcommand: str, resolved: dict,
                    inputs: list, outputs: list):
    manifest = {
        "subcommand": subcommand,
        "version": __version__,
        "seed": resolved.get("seed"),
        "config": {k: (str(v) if isinstance(v, Path) else v) for k, v in resolved.items()},
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
    }
    anchor = out_anchor if out_anchor.is_dir() else out_anchor.parent
    anchor.mkdir(parents=True, exist_ok=True)
    path = anchor / f"{subcommand}-manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


TRAIN_DEFAULTS = {
    "epochs": 5, "lr": 0.1, "clip_norm": 5.0, "batch_size": 64, "seed": 0,
    "checkpoint_every": 1, "vocab_size": 10000, "max_len": 50,
    "embedding_dim": 32, "hidden_dim": 64, "attention_hidden": 64,
    "readout_hidden": 64, "max_decode_len": 60,
}


def _model_config(resolved: dict, src_size: int, tgt_size: int) -> ModelConfig:
    return ModelConfig(
        src_vocab_size=src_size, tgt_vocab_size=tgt_size,
        embedding_dim=resolved["embedding_dim"], hidden_dim=resolved["hidden_dim"],
        attention_hidden=resolved["attention_hidden"],
        readout_hidden=resolved["readout_hidden"],
        max_decode_len=resolved["max_decode_len"])


def _train_config(resolved: dict) -> TrainConfig:
    return TrainConfig(lr=resolved["lr"], clip_norm=resolved["clip_norm"] or None,
                       batch_size=resolved["batch_size"], epochs=resolved["epochs"],
                       seed=resolved["seed"],
                       checkpoint_every=resolved["checkpoint_every"])


def cmd_build_vocab(args) -> int:
    resolved = _resolve(args, {"size": 10000, "seed": None})
    corpus_path = _require_file(args.corpus)
    out = Path(args.out)
    sentences = (line.split() for line in
                 corpus_path.read_text(encoding="utf-8").splitlines())
    vocab = build_vocabulary(sentences, resolved["size"])
    out.parent.mkdir(parents=True, exist_ok=True)
    vocab.save(out)
    print(f"wrote {vocab.size} entries (cutoff {resolved['size']}) to {out}")
    _write_manifest(out, "build-vocab", resolved, [corpus_path], [out])
    return EXIT_OK


def cmd_stats(args) -> int:
    src = _require_file(args.src)
    tgt = _require_file(args.tgt)
    stats = corpus_stats(src, tgt)
    rows = [("sentences", stats.sentence_count),
            ("running words (src)", stats.running_words_src),
            ("running words (tgt)", stats.running_words_tgt),
            ("vocabulary (src)", stats.vocab_size_src),
            ("vocabulary (tgt)", stats.vocab_size_tgt)]
    for label, value in rows:
        print(f"{label:22s} {value:>12,}")
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(stats.__dict__, indent=2) + "\n", encoding="utf-8")
        _write_manifest(out, "stats", {"seed": None}, [src, tgt], [out])
    return EXIT_OK


def _load_corpus(src_path, tgt_path, src_vocab, tgt_vocab, max_len):
    token_pairs = load_parallel_tokens(src_path, tgt_path)
    pairs, skipped = encode_pairs(token_pairs, src_vocab, tgt_vocab, max_len=max_len)
    if skipped:
        print(f"skipped {skipped} over-length or empty pairs", file=sys.stderr)
    return pairs


def cmd_train(args) -> int:
    resolved = _resolve(args, TRAIN_DEFAULTS)
    src = _require_file(args.src)
    tgt = _require_file(args.tgt)
    out_dir = Path(args.out)
    token_pairs = load_parallel_tokens(src, tgt)
    if args.src_vocab and args.tgt_vocab:
        src_vocab = Vocabulary.load(_require_file(args.src_vocab))
        tgt_vocab = Vocabulary.load(_require_file(args.tgt_vocab))
    else:
        src_vocab = build_vocabulary((s for s, _ in token_pairs), resolved["vocab_size"])
        tgt_vocab = build_vocabulary((t for _, t in token_pairs), resolved["vocab_size"])
    pairs, skipped = encode_pairs(token_pairs, src_vocab, tgt_vocab,
                                  max_len=resolved["max_len"])
    if skipped:
        print(f"skipped {skipped} over-length or empty pairs", file=sys.stderr)
    out_dir.mkdir(parents=True, exist_ok=True)
    src_vocab.save(out_dir / "src.vocab")
    tgt_vocab.save(out_dir / "tgt.vocab")
    model_cfg = _model_config(resolved, src_vocab.size, tgt_vocab.size)
    trainer, records = train_fresh(pairs, src_vocab, tgt_vocab, model_cfg,
                                   _train_config(resolved), out_dir=out_dir)
    for r in records:
        print(f"epoch {r.epoch}: mean loss {r.mean_loss:.4f} ({r.wall_seconds:.1f}s)")
    outputs = sorted(out_dir.glob("epoch-*.ckpt")) + [out_dir / "metrics.csv"]
    _write_manifest(out_dir, "train", resolved, [src, tgt], outputs)
    return EXIT_OK


def _migrate_vocab(baseline: Checkpoint, new_src: Vocabulary, new_tgt: Vocabulary,
                   seed: int) -> ModelParams:
    """Carry baseline weights over to rebuilt vocabularies.

    Embedding and projection rows for tokens present in both vocabularies
    are copied; rows for new tokens keep their seeded initialization.
    """
    if (new_src.size != baseline.config.src_vocab_size
            or new_tgt.size != baseline.config.tgt_vocab_size):
        raise ConfigError(
            "rebuilt vocabulary sizes differ from the baseline model "
            f"({new_src.size}/{new_tgt.size} vs {baseline.config.src_vocab_size}"
            f"/{baseline.config.tgt_vocab_size}); use the same cutoff")
    params = ModelParams(baseline.config, seed=seed)
    arrays = {k: v.copy() for k, v in baseline.arrays.items()}
    for name, old_vocab, new_vocab in (("src_emb", baseline.src_vocab, new_src),
                                       ("tgt_emb", baseline.tgt_vocab, new_tgt)):
        fresh = params.store[name].data.copy()
        for idx in range(new_vocab.size):
            token = new_vocab.token_of(idx)
            if token in old_vocab:
                fresh[idx] = baseline.arrays[name][old_vocab.id_of(token)]
        arrays[name] = fresh
    proj_w = params.store["proj_w"].data.copy().T  # (V, hidden) rows by token
    proj_b = params.store["proj_b"].data.copy()
    for idx in range(new_tgt.size):
        token = new_tgt.token_of(idx)
        if token in baseline.tgt_vocab:
            old = baseline.tgt_vocab.id_of(token)
            proj_w[idx] = baseline.arrays["proj_w"].T[old]
            proj_b[idx] = baseline.arrays["proj_b"][old]
    arrays["proj_w"] = proj_w.T.copy()
    arrays["proj_b"] = proj_b
    params.store.load_state(arrays)
    return params


def cmd_continue(args) -> int:
    resolved = _resolve(args, {"epochs": 2, "lr": 0.1, "clip_norm": 5.0,
                               "batch_size": 64, "seed": 0, "checkpoint_every": 1,
                               "max_len": 50})
    baseline_path = _require_file(args.baseline)
    src = _require_file(args.src)
    tgt = _require_file(args.tgt)
    out_dir = Path(args.out)
    baseline = load_checkpoint(baseline_path)
    token_pairs = load_parallel_tokens(src, tgt)
    if args.rebuild_vocab:
        src_vocab = build_vocabulary((s for s, _ in token_pairs),
                                     baseline.src_vocab.cutoff_n)
        tgt_vocab = build_vocabulary((t for _, t in token_pairs),
                                     baseline.tgt_vocab.cutoff_n)
        params = _migrate_vocab(baseline, src_vocab, tgt_vocab, resolved["seed"])
        baseline = Checkpoint.from_params(params, src_vocab, tgt_vocab,
                                          epoch=baseline.epoch,
                                          rng_state=baseline.rng_state,
                                          wall_time=baseline.wall_time)
    pairs, skipped = encode_pairs(token_pairs, baseline.src_vocab, baseline.tgt_vocab,
                                  max_len=resolved["max_len"])
    if skipped:
        print(f"skipped {skipped} over-length or empty pairs", file=sys.stderr)
    cfg = TrainConfig(lr=resolved["lr"], clip_norm=resolved["clip_norm"] or None,
                      batch_size=resolved["batch_size"], epochs=resolved["epochs"],
                      seed=resolved["seed"], checkpoint_every=resolved["checkpoint_every"])
    _, records = continue_train(baseline, pairs, cfg, out_dir=out_dir)
    for r in records:
        print(f"epoch {r.epoch}: mean loss {r.mean_loss:.4f} ({r.wall_seconds:.1f}s)")
    outputs = sorted(out_dir.glob("epoch-*.ckpt")) + [out_dir / "metrics.csv"]
    _write_manifest(out_dir, "continue", resolved, [baseline_path, src, tgt], outputs)
    return EXIT_OK


def cmd_translate(args) -> int:
    resolved = _resolve(args, {"beam": 8, "max_len": None, "combine": "arithmetic",
                               "length_norm": False, "workers": 1, "seed": None})
    model_paths = [_require_file(p) for p in args.models.split(",")]
    input_path = _require_file(args.input)
    output_path = Path(args.output)
    models = [LoadedModel.from_checkpoint(load_checkpoint(p)) for p in model_paths]
    dictionary = (TranslationDictionary.load(_require_file(args.dict))
                  if args.dict else None)
    weights = ([float(w) for w in args.weights.split(",")] if args.weights else None)
    lines = input_path.read_text(encoding="utf-8").splitlines()
    translations, alignments = translate_corpus(
        models, lines, beam=resolved["beam"], max_len=resolved["max_len"],
        dictionary=dictionary, combine=resolved["combine"], weights=weights,
        length_norm=resolved["length_norm"], workers=resolved["workers"])
    output_path.parent.mkdir(parents=True, exist_ok=True)
    output_path.write_text("\n".join(translations) + ("\n" if translations else ""),
                           encoding="utf-8")
    outputs = [output_path]
    if args.alignments:
        align_path = Path(args.alignments)
        align_path.write_text("\n".join(alignments) + ("\n" if alignments else ""),
                              encoding="utf-8")
        outputs.append(align_path)
    _write_manifest(output_path, "translate", resolved,
                    model_paths + [input_path], outputs)
    return EXIT_OK


def cmd_score(args) -> int:
    hyp_path = _require_file(args.hyp)
    ref_path = _require_file(args.ref)
    hyps = tokenize_corpus(hyp_path.read_text(encoding="utf-8").splitlines())
    refs = tokenize_corpus(ref_path.read_text(encoding="utf-8").splitlines())
    report = ScoreReport.from_corpora(hyps, refs, smoothing=args.smooth)
    print(report.one_line())
    if args.csv:
        out = Path(args.csv)
        out.parent.mkdir(parents=True, exist_ok=True)
        header = ("bleu,ter,combined,p1,p2,p3,p4,brevity_penalty,"
                  "insertions,deletions,substitutions,shifts")
        row = [repr(report.bleu), repr(report.ter), repr(report.combined),
               *[repr(p) for p in report.precisions], repr(report.brevity_penalty),
               report.edits.insertions, report.edits.deletions,
               report.edits.substitutions, report.edits.shifts]
        out.write_text(header + "\n" + ",".join(str(x) for x in row) + "\n",
                       encoding="utf-8")
        _write_manifest(out, "score", {"smooth": args.smooth, "seed": None},
                        [hyp_path, ref_path], [out])
    return EXIT_OK


def cmd_curve(args) -> int:
    resolved = _resolve(args, {"beam": 8, "ensemble": False, "smooth": False,
                               "seed": None})
    baseline_path = _require_file(args.baseline)
    epochs_dir = Path(args.epochs_dir)
    if not epochs_dir.is_dir():
        raise FileNotFoundError(f"no such directory: {epochs_dir}")
    ckpt_paths = sorted(epochs_dir.glob("epoch-*.ckpt"))
    if not ckpt_paths:
        raise FileNotFoundError(f"no epoch-*.ckpt files in {epochs_dir}")
    test_sets = {}
    for spec in args.tests:
        try:
            name, paths = spec.split("=", 1)
            src_path, ref_path = paths.split(",")
        except ValueError:
            raise ConfigError(f"--tests expects name=src,ref; got {spec!r}")
        test_sets[name] = (
            _require_file(src_path).read_text(encoding="utf-8").splitlines(),
            _require_file(ref_path).read_text(encoding="utf-8").splitlines())
    baseline = load_checkpoint(baseline_path)
    epoch_ckpts = [load_checkpoint(p) for p in ckpt_paths]
    series = [(c.epoch, c) for c in epoch_ckpts]
    points = learning_curve(baseline, series, test_sets,
                            ensemble=resolved["ensemble"], beam=resolved["beam"],
                            smoothing=resolved["smooth"])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_curve_csv(points, out)
    for p in points:
        print(f"{p.testset} epoch {p.epoch}: BLEU {p.bleu:.1f} TER {p.ter:.1f} "
              f"combined {p.combined:.1f}")
    _write_manifest(out, "curve", resolved,
                    [baseline_path, *ckpt_paths], [out])
    return EXIT_OK


def cmd_serve_eval(args) -> int:
    import uvicorn
    from .evalservice.service import create_app

    data_dir = Path(args.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(data_dir, "serve-eval",
                    {"host": args.host, "port": args.port, "seed": None},
                    [], [data_dir])
    app = create_app(data_dir)
    if args.check:
        print(f"eval service ok; {len(app.state.store.ids())} sessions in {data_dir}")
        return EXIT_OK
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deskmt",
        description="Desk-scale NMT: train, adapt, ensemble-decode, evaluate.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("build-vocab", help="build a frequency-cutoff vocabulary")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int)
    p.add_argument("--config")
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("stats", help="corpus statistics for a parallel corpus")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train a model from scratch")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--src-vocab")
    p.add_argument("--tgt-vocab")
    p.add_argument("--config")
    for flag, typ in (("epochs", int), ("lr", float), ("clip-norm", float),
                      ("batch-size", int), ("seed", int), ("checkpoint-every", int),
                      ("vocab-size", int), ("max-len", int), ("embedding-dim", int),
                      ("hidden-dim", int), ("attention-hidden", int),
                      ("readout-hidden", int), ("max-decode-len", int)):
        p.add_argument(f"--{flag}", type=typ)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("continue",
                       help="continue a baseline checkpoint on in-domain data")
    p.add_argument("--baseline", required=True)
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rebuild-vocab", action="store_true")
    p.add_argument("--config")
    for flag, typ in (("epochs", int), ("lr", float), ("clip-norm", float),
                      ("batch-size", int), ("seed", int), ("checkpoint-every", int),
                      ("max-len", int)):
        p.add_argument(f"--{flag}", type=typ)
    p.set_defaults(func=cmd_continue)

    p = sub.add_parser("translate", help="beam-search decode, optionally ensembled")
    p.add_argument("--models", required=True,
                   help="comma-separated checkpoint paths")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--dict", help="TSV lexicon for UNK replacement")
    p.add_argument("--alignments", help="write per-line attention alignments here")
    p.add_argument("--beam", type=int)
    p.add_argument("--max-len", type=int)
    p.add_argument("--combine", choices=["arithmetic", "geometric"])
    p.add_argument("--weights", help="comma-separated per-model weights")
    p.add_argument("--length-norm", action="store_const", const=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--config")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("score", help="case-sensitive BLEU/TER of a hypothesis file")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--smooth", action="store_true")
    p.add_argument("--csv", help="write a full-precision detail row here")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("curve", help="learning curve over adaptation checkpoints")
    p.add_argument("--baseline", required=True)
    p.add_argument("--epochs-dir", required=True)
    p.add_argument("--tests", nargs="+", required=True,
                   metavar="NAME=SRC,REF")
    p.add_argument("--out", required=True)
    p.add_argument("--ensemble", action="store_const", const=True)
    p.add_argument("--beam", type=int)
    p.add_argument("--smooth", action="store_const", const=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("serve-eval", help="serve the human evaluation API")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8571)
    p.add_argument("--check", action="store_true",
                   help="validate setup and exit without serving")
    p.set_defaults(func=cmd_serve_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except (CheckpointError, EnsembleError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except (AlignmentError, VocabularyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except DeskmtError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
