"""``neurovox`` command line: one subcommand per pipeline stage.

Settings come from an optional JSON config (``--config``) which command-line
flags override. Exit status: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import pipeline
from .pipeline import ExperimentConfig

log = logging.getLogger("neurovox")


def _common(p: argparse.ArgumentParser, corpus=True, work=True):
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--subject", type=int, help="restrict to one subject id")
    if corpus:
        p.add_argument("--corpus", help="corpus directory (holds manifest.json)")
    if work:
        p.add_argument("--work", help="working directory for features, models and reports")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="neurovox", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic corpus")
    _common(p, corpus=False, work=False)
    p.add_argument("--out", help="output corpus directory")
    p.add_argument("--preset", choices=("desk", "paper-shape", "tiny"))
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--subjects", type=int)

    p = sub.add_parser("extract", help="MFCC, EEG features and KPCA reduction")
    _common(p)
    p.add_argument("--kpca-dim", type=int)
    p.add_argument("--eeg-input", choices=("eeg30", "eeg155"))

    p = sub.add_parser("train", help="train an enhancement model")
    _common(p)
    p.add_argument("--model", choices=("lstm", "gan"), required=True)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--seq-len", type=int)
    p.add_argument("--resume", action="store_true", help="continue from the saved checkpoint")

    p = sub.add_parser("enhance", help="enhance a split and write WAVs")
    _common(p)
    p.add_argument("--model", choices=("lstm", "gan"), required=True)
    p.add_argument("--split", choices=("test", "train"), default="test")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--seq-len", type=int)

    p = sub.add_parser("evaluate", help="score enhanced WAVs against clean references")
    _common(p)
    p.add_argument("--model", choices=("lstm", "gan"), action="append", required=True,
                   help="repeat to evaluate several models and write comparison.csv")
    p.add_argument("--split", choices=("test", "train"), default="test")
    p.add_argument("--pesq-command", help="external PESQ command with {clean} and {degraded}")

    p = sub.add_parser("plot-losses", help="plot training-loss CSVs to PNG (needs matplotlib)")
    _common(p, corpus=False)
    p.add_argument("--model", choices=("lstm", "gan"), required=True)
    p.add_argument("--out", help="PNG path (default: <work>/<model>/losses.png)")
    return parser


def _config(args, parser) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.subject is not None:
        cfg.subject = args.subject
    if getattr(args, "corpus", None):
        cfg.corpus_dir = args.corpus
    if getattr(args, "work", None):
        cfg.work_dir = args.work
    for flag, key in (("preset", "preset"), ("n_train", "n_train"), ("n_test", "n_test"),
                      ("subjects", "subjects"), ("kpca_dim", "kpca_dim"),
                      ("eeg_input", "eeg_input"), ("pesq_command", "pesq_command")):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, key, value)
    model = getattr(args, "model", None)
    if isinstance(model, str):
        over = {k: v for k, v in (("epochs", getattr(args, "epochs", None)),
                                  ("batch_size", getattr(args, "batch", None)),
                                  ("seq_len", getattr(args, "seq_len", None))) if v is not None}
        if over:
            setattr(cfg, model, replace(cfg.train_config(model), **over))
    try:
        cfg.validate()
    except ValueError as exc:
        parser.error(str(exc))
    return cfg


def _require(parser, value, what):
    if value is None:
        parser.error(f"{what} is required (flag or config file)")


def _plot_losses(cfg, model, out):
    import csv

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    names = ["lstm"] if model == "lstm" else ["generator", "discriminator"]
    fig, axes = plt.subplots(len(names), 1, figsize=(7, 3 * len(names)), squeeze=False)
    for ax, name in zip(axes[:, 0], names):
        path = cfg.model_path(model) / pipeline.LOG_FILES[name]
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        ax.plot([float(r["loss"]) for r in rows], lw=0.8)
        ax.set_title(f"{name} loss")
        ax.set_xlabel("batch")
        ax.set_ylabel("loss")
    fig.tight_layout()
    out = Path(out) if out else cfg.model_path(model) / "losses.png"
    fig.savefig(out, dpi=120)
    return out


def run(args, parser) -> None:
    cfg = _config(args, parser)
    cmd = args.command
    if cmd == "synth":
        if args.out:
            cfg.corpus_dir = args.out
        _require(parser, cfg.corpus_dir, "--out")
        manifest = pipeline.run_synth(cfg)
        print(f"wrote {len(manifest.utterances)} utterances to {cfg.corpus_dir}")
        return
    if cmd == "plot-losses":
        _require(parser, cfg.work_dir, "--work")
        print(_plot_losses(cfg, args.model, args.out))
        return
    _require(parser, cfg.corpus_dir, "--corpus")
    _require(parser, cfg.work_dir, "--work")
    if cmd == "extract":
        summary = pipeline.run_extract(cfg)
        print(", ".join(f"{k}={v}" for k, v in summary.items()))
    elif cmd == "train":
        state = pipeline.run_train(cfg, args.model, resume=args.resume)
        print(f"{args.model}: trained to epoch {state.epoch}, checkpoint in "
              f"{cfg.model_path(args.model)}")
    elif cmd == "enhance":
        written = pipeline.run_enhance(cfg, args.model, args.split)
        print(f"wrote {len(written)} enhanced files")
    elif cmd == "evaluate":
        reports = {m: pipeline.run_evaluate(cfg, m, args.split) for m in args.model}
        for name, rep in reports.items():
            means = rep.means()
            print(name, " ".join(f"{k}={v:.4f}" for k, v in means.items()
                                  if isinstance(v, float)))
        if len(reports) > 1:
            print(pipeline.write_comparison(cfg, reports))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    pipeline.apply_thread_cap()
    try:
        run(args, parser)
    except (OSError, ValueError, RuntimeError, FloatingPointError) as exc:
        log.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
