"""Command-line entry point: gen, train, eval, bench, inspect, gradcheck.

Exit codes: 0 success, 1 usage error, 2 data/file error, 3 numeric failure
(NaN loss or a failed gradient check). Output files are written to a temp
name and renamed on success, so errors never leave partial artifacts.
"""

from __future__ import annotations

import argparse
import logging
import os
import struct
import sys

import numpy as np

from . import __version__
from .bench import bench as run_bench
from .checkpoint import CHECKPOINT_MAGIC, checkpoint_read, checkpoint_to_bytes
from .data import (SIGSET_MAGIC, DataError, Dataset, atomic_write_bytes,
                   dataset_read, dataset_to_bytes, dataset_write, prepare_features)
from .evaluate import report as build_report
from .gradcheck import run_suite
from .model import FLOP_CONVENTION, DaeModel, ModelConfig, count_flops, count_params
from .numeric import NumericError, RfdaeError, Rng
from .report import PAPER_FLOPS_NOTE, render_figures, render_tables
from .synth import MODULATIONS, ChannelSpec, make_synthetic_dataset
from .train import TrainConfig, split_indices, train

log = logging.getLogger("rfdae")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    # Usage problems exit 1 (argparse's default is 2, which we reserve
    # for data errors).
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_snrs(text: str) -> list[float]:
    """'lo:step:hi' inclusive, a single value, or a comma list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"SNR range must be lo:step:hi, got {text!r}")
        lo, step, hi = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("SNR range step must be positive")
        out = []
        v = lo
        while v <= hi + 1e-9:
            out.append(round(v, 9))
            v += step
        return out
    return [float(p) for p in text.split(",") if p]


def build_parser() -> _Parser:
    p = _Parser(prog="rfdae", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"rfdae {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[], help="write a synthetic SIGSET dataset")
    g.add_argument("--mods", required=True,
                   help=f"comma list of modulations from {','.join(MODULATIONS)}")
    g.add_argument("--snrs", required=True, help="SNR dBs as lo:step:hi or comma list")
    g.add_argument("--per-class", type=int, required=True,
                   help="records per (modulation, SNR) cell")
    g.add_argument("--len", dest="seq_len", type=int, default=128, help="samples per record")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--out", required=True, help="output .sigset path")
    g.add_argument("--sps", type=int, default=8, help="samples per symbol")
    g.add_argument("--rolloff", type=float, default=0.35)
    g.add_argument("--span", type=int, default=8, help="RRC span in symbols")
    g.add_argument("--pulse", choices=("rrc", "rect"), default="rrc")
    g.add_argument("--phase-rot", type=float, default=0.0, help="phase rotation (radians)")
    g.add_argument("--freq-offset", type=float, default=0.0, help="cycles/sample")
    g.add_argument("--timing-offset", type=float, default=0.0, help="fractional samples")

    t = sub.add_parser("train", help="train on a SIGSET dataset")
    t.add_argument("--data", required=True)
    t.add_argument("--checkpoint", required=True, help="output checkpoint path")
    t.add_argument("--log", dest="log_path", help="output training-log TSV path")
    t.add_argument("--epochs", type=int, default=150)
    t.add_argument("--batch-size", type=int, default=128)
    t.add_argument("--lr", type=float, default=0.001)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--lambda", dest="lam", type=float, default=0.1,
                   help="classification-loss weight in [0, 1]")
    t.add_argument("--mask-rate", type=float, default=0.1)
    t.add_argument("--dropout", type=float, default=0.2)
    t.add_argument("--hidden", type=int, default=32)
    t.add_argument("--depth", type=int, default=2)
    t.add_argument("--no-final-relu", action="store_true",
                   help="use identity instead of ReLU before the softmax")
    t.add_argument("--features", choices=("auto", "amp-phase", "raw"), default="auto")
    t.add_argument("--clip", type=float, default=None, help="global L2 gradient clip")
    t.add_argument("--no-input-calibration", action="store_true",
                   help="skip the layer-1 kernel feature-scale calibration")

    e = sub.add_parser("eval", help="evaluate a checkpoint on a SIGSET test split")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out-dir", required=True)
    e.add_argument("--seed", type=int, default=0,
                   help="split seed; must match training for a matching test split")
    e.add_argument("--features", choices=("auto", "amp-phase", "raw"), default="auto")
    e.add_argument("--split", choices=("test", "all"), default="test",
                   help="evaluate the seeded test split or the whole file")
    e.add_argument("--no-figures", action="store_true")

    b = sub.add_parser("bench", help="measure single-example inference throughput")
    b.add_argument("--checkpoint", required=True)
    b.add_argument("--reps", type=int, default=10)
    b.add_argument("--duration", type=float, default=1.0, help="seconds per repetition")
    b.add_argument("--seq-len", type=int, default=None,
                   help="override the sequence length (weights are length-free)")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", help="optional key=value output file")

    i = sub.add_parser("inspect", help="print headers and model accounting")
    i.add_argument("path")

    c = sub.add_parser("gradcheck", help="run the full gradient-check suite")
    c.add_argument("--seeds", type=int, default=10, help="number of seeds")
    c.add_argument("--tolerance", type=float, default=1e-4)
    return p


# -- subcommands ---------------------------------------------------------------


def cmd_gen(args) -> int:
    mods = [m.strip().lower() for m in args.mods.split(",") if m.strip()]
    try:
        snrs = parse_snrs(args.snrs)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    channel = ChannelSpec(phase_rotation=args.phase_rot, freq_offset=args.freq_offset,
                          timing_offset=args.timing_offset)
    try:
        ds = make_synthetic_dataset(mods, snrs, args.per_class, args.seq_len, args.seed,
                                    channel=channel, sps=args.sps, rolloff=args.rolloff,
                                    span=args.span, pulse=args.pulse)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    dataset_write(ds, args.out)
    print(f"wrote {args.out}: {len(ds.records)} records, n={ds.n}, m={ds.m}, "
          f"classes={','.join(ds.class_names)}")
    return EXIT_OK


def _load_features(path: str, mode: str):
    ds = dataset_read(path)
    x = prepare_features(ds, mode)
    return ds, x


def cmd_train(args) -> int:
    ds, x = _load_features(args.data, args.features)
    cfg = ModelConfig(input_features=ds.m, seq_len=ds.n, num_classes=ds.num_classes,
                      hidden=args.hidden, encoder_depth=args.depth,
                      final_relu=not args.no_final_relu, lam=args.lam,
                      mask_rate=args.mask_rate, dropout_rate=args.dropout)
    tcfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
                       seed=args.seed, lam=args.lam, mask_rate=args.mask_rate,
                       dropout_rate=args.dropout, grad_clip=args.clip,
                       input_calibration=not args.no_input_calibration)
    rng = Rng(args.seed)
    model = DaeModel.init(cfg, rng)
    labels, snrs = ds.labels_array(), ds.snrs_array()

    def progress(rec):
        log.info("epoch %d: loss %.6f (recon %.6f, clf %.6f) val_acc %.4f [%.1fs]",
                 rec.epoch, rec.total, rec.recon, rec.clf, rec.val_acc, rec.seconds)

    model, tlog = train(model, x, labels, snrs, tcfg, rng, log_fn=progress)
    atomic_write_bytes(args.checkpoint, checkpoint_to_bytes(model))
    if args.log_path:
        atomic_write_bytes(args.log_path, tlog.to_text().encode())
    best = tlog.records[tlog.best_epoch - 1] if tlog.records else None
    if best:
        print(f"trained {args.epochs} epochs; best epoch {tlog.best_epoch} "
              f"(val_acc {best.val_acc:.4f}); checkpoint: {args.checkpoint}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model, mcfg = checkpoint_read(args.checkpoint)
    ds, x = _load_features(args.data, args.features)
    if ds.n != mcfg.seq_len or ds.m != mcfg.input_features or ds.num_classes != mcfg.num_classes:
        raise DataError(
            f"dataset shape (n={ds.n}, m={ds.m}, K={ds.num_classes}) does not match "
            f"checkpoint (n={mcfg.seq_len}, m={mcfg.input_features}, K={mcfg.num_classes})"
        )
    labels, snrs = ds.labels_array(), ds.snrs_array()
    if args.split == "test":
        _, _, test_idx = split_indices(labels, snrs, (0.5, 0.25, 0.25),
                                       Rng(args.seed).substream("shuffling").substream("split"))
        x, labels, snrs = x[test_idx], labels[test_idx], snrs[test_idx]
    rep = build_report(model, x, labels, snrs, ds.class_names)
    artifacts = render_tables(rep)
    os.makedirs(args.out_dir, exist_ok=True)
    for name, text in artifacts.items():
        atomic_write_bytes(os.path.join(args.out_dir, name), text.encode())
    if not args.no_figures:
        render_figures(rep, args.out_dir)
    print(artifacts["summary.txt"], end="")
    print(f"artifacts written to {args.out_dir}")
    return EXIT_OK


def cmd_bench(args) -> int:
    model, mcfg = checkpoint_read(args.checkpoint)
    if args.seq_len is not None:
        mcfg.seq_len = args.seq_len
    try:
        result = run_bench(model, repetitions=args.reps, duration_per_rep=args.duration,
                           seed=args.seed)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    lines = [
        f"bench.cps_mean={result.classifications_per_second:.3f}",
        f"bench.cps_std={result.std:.3f}",
        f"bench.repetitions={result.repetitions}",
        f"bench.seq_len={result.seq_len}",
        f"bench.batch_mode={result.batch_mode}",
        f"bench.platform={result.platform_descriptor}",
    ]
    text = "\n".join(lines) + "\n"
    if args.out:
        atomic_write_bytes(args.out, text.encode())
    print(text, end="")
    return EXIT_OK


def cmd_inspect(args) -> int:
    try:
        with open(args.path, "rb") as fh:
            head = fh.read(8)
    except FileNotFoundError as exc:
        raise DataError(f"no such file: {args.path}") from exc
    if head == SIGSET_MAGIC:
        ds = dataset_read(args.path)
        snrs = sorted(set(ds.snrs_array().tolist()))
        print(f"SIGSET dataset: {args.path}")
        print(f"records: {len(ds.records)}")
        print(f"n: {ds.n}\nm: {ds.m}\nK: {ds.num_classes}")
        print(f"classes: {','.join(ds.class_names)}")
        print(f"snrs_db: {','.join(str(s) for s in snrs)}")
        cfg = ModelConfig(input_features=ds.m, seq_len=ds.n, num_classes=ds.num_classes)
        print(f"params: {count_params(cfg)}")
        print(f"flops: {count_flops(cfg)}")
        print(f"flop_convention: {FLOP_CONVENTION}")
        return EXIT_OK
    if head == CHECKPOINT_MAGIC:
        model, cfg = checkpoint_read(args.path)
        print(f"RFDAE checkpoint: {args.path}")
        print(f"input_features: {cfg.input_features}\nseq_len: {cfg.seq_len}")
        print(f"hidden: {cfg.hidden}\nencoder_depth: {cfg.encoder_depth}")
        print(f"classifier_widths: {cfg.classifier_widths}")
        print(f"num_classes: {cfg.num_classes}\nfinal_relu: {cfg.final_relu}")
        print(f"lambda: {cfg.lam}\nmask_rate: {cfg.mask_rate}\ndropout_rate: {cfg.dropout_rate}")
        print(f"params: {count_params(cfg)}")
        print(f"flops: {count_flops(cfg)}")
        print(f"flop_convention: {FLOP_CONVENTION}")
        print(f"note: {PAPER_FLOPS_NOTE}")
        print(f"checkpoint_bytes: {os.path.getsize(args.path)}")
        return EXIT_OK
    raise DataError(f"{args.path}: unknown magic {head!r}; not a SIGSET or RFDAE file")


def cmd_gradcheck(args) -> int:
    results = run_suite(n_seeds=args.seeds, tolerance=args.tolerance)
    failed = 0
    for name, rep in results:
        status = "ok" if rep.passed else "FAIL"
        print(f"{status}  {name}: max_rel_err={rep.max_relative_error:.3e} "
              f"(worst: {rep.parameter_name})")
        failed += not rep.passed
    if failed:
        print(f"{failed}/{len(results)} gradient checks failed "
              f"(tolerance {args.tolerance})", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"all {len(results)} gradient checks passed (tolerance {args.tolerance})")
    return EXIT_OK


_COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "inspect": cmd_inspect,
    "gradcheck": cmd_gradcheck,
}


def run(argv=None) -> int:
    logging.basicConfig(
        level=logging.INFO if os.environ.get("RFDAE_VERBOSE", "1") != "0" else logging.WARNING,
        format="%(message)s",
        stream=sys.stderr,
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except NumericError as exc:
        print(f"rfdae: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, FileNotFoundError) as exc:
        print(f"rfdae: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RfdaeError as exc:
        print(f"rfdae: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
