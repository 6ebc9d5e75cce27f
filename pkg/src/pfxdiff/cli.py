"""Command line interface.

Subcommands: gen-data (build a toy dataset), train, sample (print candidates
for one record), eval (metrics plus report files), dump-schedule. Exit codes:
0 success, 1 usage, 2 data/config error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import torch

from .config import RunConfig
from .data import make_toy_dataset, read_features, write_captions_tsv, write_features
from .errors import BadConfig, DataError, NumericError, PfxdiffError
from .metrics import evaluate
from .report import format_report, render_eval_report, render_schedule, render_training_curve
from .schedule import KINDS, make_schedule
from .selection import choose_caption, generate_candidates
from .training import fit, load_state
from .vocab import Vocabulary


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with run configuration")
    parser.add_argument("--embed-dim", type=int)
    parser.add_argument("--model-dim", type=int)
    parser.add_argument("--prefix-len", type=int)
    parser.add_argument("--seq-len", type=int)
    parser.add_argument("--layers", type=int)
    parser.add_argument("--heads", type=int)
    parser.add_argument("--schedule", choices=KINDS)
    parser.add_argument("--timesteps", type=int)
    parser.add_argument("--beta-min", type=float)
    parser.add_argument("--beta-max", type=float)
    parser.add_argument("--steps", type=int)
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--lr", type=float)
    parser.add_argument("--rounding-loss-weight", type=float)
    parser.add_argument("--parameterization", choices=("eps", "x0"))
    parser.add_argument("--embed-init-std", type=float)
    parser.add_argument("--eval-steps", type=int)
    parser.add_argument("--seed", type=int)


def _build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    overrides = {
        key: getattr(args, key, None)
        for key in (
            "embed_dim",
            "model_dim",
            "prefix_len",
            "seq_len",
            "layers",
            "heads",
            "schedule",
            "timesteps",
            "beta_min",
            "beta_max",
            "steps",
            "batch_size",
            "lr",
            "rounding_loss_weight",
            "parameterization",
            "embed_init_std",
            "eval_steps",
            "seed",
        )
    }
    return cfg.with_overrides(**overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pfxdiff", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("gen-data", help="generate a toy scene dataset")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a denoiser on a feature file")
    p.add_argument("--features", help="PFXFEAT1 dataset path")
    p.add_argument("--out", help="output directory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="print candidate captions for one record")
    p.add_argument("--checkpoint", help="model checkpoint path")
    p.add_argument("--features", help="PFXFEAT1 dataset path")
    p.add_argument("--vocab", help="vocabulary file (default: vocab.txt next to the checkpoint)")
    p.add_argument("--id", help="record id (default: first record)")
    p.add_argument("--n", type=int, default=5, help="candidate chains")
    p.add_argument("--eval-steps", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", help="evaluate a checkpoint over a dataset")
    p.add_argument("--checkpoint", help="model checkpoint path")
    p.add_argument("--features", help="PFXFEAT1 dataset path")
    p.add_argument("--vocab", help="vocabulary file (default: vocab.txt next to the checkpoint)")
    p.add_argument("--out", help="directory for report files")
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--eval-steps", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("dump-schedule", help="print or save a schedule as CSV")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--timesteps", type=int, required=True)
    p.add_argument("--beta-min", type=float, default=0.01)
    p.add_argument("--beta-max", type=float, default=0.03)
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--plot", help="optional PNG path for the curves")
    p.set_defaults(func=cmd_dump_schedule)
    return parser


def _require(args: argparse.Namespace, *names: str) -> None:
    for name in names:
        if getattr(args, name, None) in (None, ""):
            raise BadConfig(f"missing required setting: {name}")


def cmd_gen_data(args: argparse.Namespace) -> int:
    _require(args, "count", "out")
    records = make_toy_dataset(args.count, args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_features(out_dir / "features.bin", records)
    write_captions_tsv(out_dir / "captions.tsv", records)
    n_captions = sum(len(r.captions) for r in records)
    print(f"wrote {len(records)} records ({n_captions} captions) to {out_dir}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    _require(args, "features", "out")
    cfg = _build_config(args)
    records = read_features(args.features)
    ckpt = fit(records, cfg.denoiser_config(), cfg.train_config(), args.out)
    out_dir = Path(args.out)
    curve = render_training_curve(out_dir / "train_log.csv", out_dir / "loss_curve.png")
    print(f"checkpoint: {ckpt}")
    print(f"training curve: {curve}")
    return 0


def _load_for_inference(args: argparse.Namespace):
    ckpt_path = Path(args.checkpoint)
    vocab_path = Path(args.vocab) if args.vocab else ckpt_path.parent / "vocab.txt"
    vocab = Vocabulary.load(vocab_path)
    state = load_state(ckpt_path, vocab)
    state.model.eval()
    records = read_features(args.features)
    return state, records


def cmd_sample(args: argparse.Namespace) -> int:
    _require(args, "checkpoint", "features")
    state, records = _load_for_inference(args)
    if args.id is not None:
        matches = [r for r in records if r.id == args.id]
        if not matches:
            raise DataError(f"record id {args.id!r} not in {args.features}")
        record = matches[0]
    else:
        record = records[0]
    with torch.no_grad():
        candidates = generate_candidates(
            state.model, state.emb, state.vocab, record.feat, state.sched,
            args.n, args.eval_steps, args.seed,
            parameterization=state.cfg.parameterization,
        )
    chosen = choose_caption(record.feat, candidates)
    print(f"record {record.id} ({args.n} candidates, {args.eval_steps} steps, seed {args.seed})")
    for idx, cand in enumerate(chosen.candidates):
        marker = "*" if idx == chosen.chosen else " "
        score = "  (skipped)" if cand.score is None else f"{cand.score:+.6f}"
        print(f" {marker} {score}  {cand.caption}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    _require(args, "checkpoint", "features", "out")
    state, records = _load_for_inference(args)
    with torch.no_grad():
        report, results = evaluate(
            state.model, state.emb, state.vocab, records, state.sched,
            n_candidates=args.n, eval_steps=args.eval_steps, seed=args.seed,
            parameterization=state.cfg.parameterization,
        )
    written = render_eval_report(report, results, args.out)
    print(format_report(report))
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_dump_schedule(args: argparse.Namespace) -> int:
    sched = make_schedule(args.kind, args.timesteps, args.beta_min, args.beta_max)
    if args.out is None:
        from .schedule import dump_schedule

        sys.stdout.write(dump_schedule(sched))
        if args.plot:
            render_schedule(sched, Path(args.plot).with_suffix(".csv"), args.plot)
        return 0
    written = render_schedule(sched, args.out, args.plot)
    for path in written:
        print(f"wrote {path}")
    return 0


def _apply_thread_cap() -> None:
    raw = os.environ.get("PFXD_THREADS")
    if raw is None or raw == "":
        return
    try:
        threads = int(raw)
    except ValueError:
        raise BadConfig(f"PFXD_THREADS must be an integer, got {raw!r}")
    if threads < 1:
        raise BadConfig(f"PFXD_THREADS must be >= 1, got {threads}")
    torch.set_num_threads(threads)


def main(argv: list[str] | None = None) -> int:
    try:
        _apply_thread_cap()
        parser = build_parser()
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            parser.error("a subcommand is required")
        return args.func(args)
    except SystemExit as exc:
        if exc.code is None:
            return 0
        return exc.code if isinstance(exc.code, int) else 1
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PfxdiffError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
