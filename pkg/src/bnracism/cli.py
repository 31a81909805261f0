"""Command-line entry point: ``bnracism <subcommand> [options]``.

Settings resolve as flags > ``--config`` file > built-in defaults.

Exit codes: 0 ok, 1 unexpected, 2 usage, 3 config, 4 data/schema/input,
5 embedding provider, 6 embedding cache, 7 training divergence,
8 checkpoint, 9 refused (text empty after cleaning), 10 I/O.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Any, Sequence

from .config import PipelineConfig, load_config
from .ensemble import EnsemblePrediction
from .errors import PipelineError
from .models import Architecture
from . import pipeline

log = logging.getLogger("bnracism")

IO_EXIT = 10


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML pipeline config")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="seed for the split and training")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _preprocess_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("cleaning")
    g.add_argument("--no-numbers", dest="numbers", action="store_false", default=None)
    g.add_argument("--no-punct", dest="punctuation", action="store_false", default=None)
    g.add_argument("--no-emoji", dest="emoji", action="store_false", default=None)
    g.add_argument("--no-pos", dest="pos", action="store_false", default=None)
    g.add_argument("--drop-tags", help="comma-separated POS tags to drop, e.g. PRONOUN,CONJUNCTION")
    g.add_argument("--lexicon", help="POS lexicon file (tag<TAB>word per line)")


def _provider_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("embedding")
    g.add_argument("--provider", choices=["bangla-bert", "bangla-bert-base", "sahaj-bert", "stub"])
    g.add_argument("--dim", type=int, help="vector size (required for the stub provider)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bnracism", description="Bengali racist-text detection pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="clean the raw dataset")
    _common(p)
    p.add_argument("--dataset", help="CSV with header text,label")
    _preprocess_flags(p)
    p.add_argument("--keep-empty", action="store_true", default=None, help="keep rows that clean to nothing")

    p = sub.add_parser("embed", help="embed cleaned rows into a cache")
    _common(p)
    _provider_flags(p)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--force", action="store_true", help="re-embed even if a cache exists")

    p = sub.add_parser("train", help="train one classifier head (or all three)")
    _common(p)
    p.add_argument("--model", required=True, choices=[a.value for a in Architecture] + ["all"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--optimizer", choices=["adam", "nadam", "radam"])
    p.add_argument("--sequence-length", type=int)
    p.add_argument("--channel-caches", nargs=3, metavar="CACHE", help="three caches for the MCNN-LSTM channels")

    p = sub.add_parser("evaluate", help="score checkpoints on the test split")
    _common(p)
    p.add_argument("--checkpoints", nargs="+", help="defaults to the three checkpoints under --out")
    p.add_argument("--hard-vote", action="store_true", default=None)
    p.add_argument("--channel-caches", nargs=3, metavar="CACHE")

    p = sub.add_parser("ensemble", help="ensemble predictions for an embedding cache")
    p.add_argument("--checkpoints", nargs=3, required=True, metavar="CKPT")
    p.add_argument("--cache", required=True)
    p.add_argument("--hard-vote", action="store_true")
    p.add_argument("--split", help="split manifest; labels rows with test-partition ids")
    p.add_argument("--output", default="ensemble_predictions.csv")
    p.add_argument("-v", "--verbose", action="count", default=0)

    p = sub.add_parser("predict", help="classify one text")
    _common(p)
    p.add_argument("text")
    p.add_argument("--checkpoints", nargs="+", required=True)
    p.add_argument("--hard-vote", action="store_true", default=None)
    _preprocess_flags(p)
    _provider_flags(p)

    p = sub.add_parser("report", help="combine report files, or run a manifest grid")
    p.add_argument("reports", nargs="*", help="per-model report JSON files")
    p.add_argument("--manifest", help="YAML grid of runs to execute end to end")
    p.add_argument("--out", default="report")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    a = vars(args)
    over: dict[str, Any] = {"out": a.get("out"), "seed": a.get("seed"), "dataset": a.get("dataset")}
    over["hard_vote"] = a.get("hard_vote")
    if a.get("channel_caches"):
        over["mcnn_channel_caches"] = a["channel_caches"]
    pre = {k: a.get(k) for k in ("numbers", "punctuation", "emoji", "pos", "lexicon", "keep_empty")}
    if a.get("drop_tags") is not None:
        pre["drop_tags"] = [t for t in a["drop_tags"].split(",") if t.strip()]
    over["preprocess"] = pre
    emb = {"provider": a.get("provider"), "dim": a.get("dim")}
    tr = {"epochs": a.get("epochs"), "learning_rate": a.get("lr"), "optimizer": a.get("optimizer")}
    if args.command == "embed":
        emb["batch_size"] = a.get("batch_size")
    elif args.command == "train":
        tr["batch_size"] = a.get("batch_size")
    over["embedding"] = emb
    over["train"] = tr
    over["model"] = {"sequence_length": a.get("sequence_length")}
    return over


def _config(args: argparse.Namespace) -> PipelineConfig:
    return load_config(getattr(args, "config", None), _overrides(args))


def _print_prediction(pred) -> None:
    if isinstance(pred, EnsemblePrediction):
        members = " ".join(f"{p:.4f}" for p in pred.member_probabilities)
        print(f"members={members}")
    print(f"probability={pred.probability:.6f} label={pred.label.name}")


def run(args: argparse.Namespace) -> int:
    cmd = args.command
    if cmd == "preprocess":
        print(pipeline.cmd_preprocess(_config(args)))
    elif cmd == "embed":
        print(pipeline.cmd_embed(_config(args), force=args.force))
    elif cmd == "train":
        cfg = _config(args)
        archs = list(Architecture) if args.model == "all" else [Architecture.parse(args.model)]
        for arch in archs:
            print(pipeline.cmd_train(cfg, arch))
    elif cmd == "evaluate":
        cfg = _config(args)
        ckpts = args.checkpoints or [pipeline.checkpoint_path(cfg, a) for a in Architecture]
        pipeline.cmd_evaluate(cfg, ckpts)
        print((cfg.out_dir / "eval" / "table.txt").read_text(encoding="utf-8"), end="")
    elif cmd == "ensemble":
        print(pipeline.cmd_ensemble(args.checkpoints, args.cache, args.output, args.hard_vote, args.split))
    elif cmd == "predict":
        _print_prediction(pipeline.cmd_predict(_config(args), args.checkpoints, args.text))
    elif cmd == "report":
        if args.manifest:
            text, _ = pipeline.run_grid(args.manifest, args.out)
        else:
            text = pipeline.cmd_report(args.reports, args.out)
        print(text, end="")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IO_EXIT


if __name__ == "__main__":
    sys.exit(main())
