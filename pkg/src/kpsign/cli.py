"""Command-line interface for the whole pipeline.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric
failure (non-finite loss).
"""

from __future__ import annotations

import argparse
import dataclasses
import shutil
import sys
from pathlib import Path

import numpy as np

from . import augment as aug
from . import config as cfgmod
from . import evaluate as ev
from . import model as mdl
from . import report
from . import synthgen
from .augment import AugmentError
from .config import ConfigError
from .kpsq import KpsqError
from .layout import LayoutError, layout_from_preset, preset_for_k
from .manifest import (
    ManifestError,
    entries_for_split,
    load_vocabulary,
    load_windows,
    read_manifest,
    sample_window,
    split_by_signer,
    write_manifest,
)
from .model import ModelError
from .synthgen import SynthError
from .train import NumericError, TrainError, evaluate_split, train_loop
from .windows import WindowError, stack_window

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

_DATA_ERRORS = (
    KpsqError,
    ManifestError,
    LayoutError,
    WindowError,
    ModelError,
    SynthError,
    AugmentError,
    TrainError,
    ConfigError,
    ev.EvalError,
    OSError,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="kpsign", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-synth", help="generate a synthetic keypoint dataset")
    p.add_argument("--config", required=True, help="INI file with a [synth] section")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--oracle", action="store_true", help="also run the nearest-template oracle")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")

    p = sub.add_parser("split", help="assign signer-disjoint train/val/test splits")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ratios", default="0.8,0.1,0.1", help="train,val,test fractions summing to 1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output manifest (default: rewrite in place)")

    p = sub.add_parser("train", help="train a classifier on a dataset directory")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True, help="dataset directory (manifest.tsv, vocab.txt, dataset.ini)")
    p.add_argument("--out", required=True, help="run directory for checkpoint and logs")
    p.add_argument("--threads", type=int, default=1, help="batch-assembly worker threads")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")

    p = sub.add_parser("evaluate", help="compute metrics for a checkpoint on one split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--out", required=True)

    p = sub.add_parser("predict", help="classify one window from a KPSQ file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--kpsq", required=True)
    p.add_argument("--start", type=int, default=0, help="first frame of the window")
    p.add_argument("--topk", type=int, default=5)
    p.add_argument("--vocab", help="vocabulary file (default: vocab.txt next to the checkpoint)")

    p = sub.add_parser("inspect-model", help="parameter count and computational report")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--config")
    group.add_argument("--checkpoint")
    p.add_argument("--out", help="directory for report.txt / report.csv")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")

    p = sub.add_parser("augment-preview", help="render one augmentation before/after")
    p.add_argument("--kpsq", required=True)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--window-len", type=int, default=16)
    p.add_argument("--out", required=True)
    p.add_argument("--layout", help="layout preset (needed for --flip; default inferred from K)")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--shift", nargs=2, type=float, metavar=("DX", "DY"))
    mode.add_argument("--scale", type=float)
    mode.add_argument("--rotate", type=float, metavar="DEGREES")
    mode.add_argument("--flip", action="store_true")

    return parser


def _cmd_make_synth(args) -> int:
    cp = cfgmod.load_config(args.config, args.set)
    scfg = cfgmod.synth_config_from(cp)
    out = Path(args.out)
    entries = synthgen.generate(scfg, out)
    preset = cp.get("synth", "layout", fallback="full").strip()
    cfgmod.write_dataset_info(out, preset, scfg.window_len, echo=cp)
    print(
        f"generated {len(entries)} windows: {scfg.n_classes} classes x "
        f"{scfg.samples_per_class} samples, {scfg.n_signers} signers -> {out}"
    )
    if args.oracle:
        acc = synthgen.oracle_classify(scfg)
        print(f"oracle_accuracy = {acc:.4f}")
    return EXIT_OK


def _cmd_split(args) -> int:
    ratios = tuple(float(r) for r in args.ratios.split(","))
    if len(ratios) != 3:
        raise ManifestError(f"--ratios needs three comma-separated numbers, got {args.ratios!r}")
    entries = read_manifest(args.manifest)
    train, val, test = split_by_signer(entries, ratios, args.seed)
    out = Path(args.out) if args.out else Path(args.manifest)
    write_manifest(out, train + val + test)
    for name, part in (("train", train), ("val", val), ("test", test)):
        signers = sorted({e.signer_id for e in part})
        print(f"{name}: {len(part)} windows, signers {signers}")
    return EXIT_OK


def _cmd_train(args) -> int:
    cp = cfgmod.load_config(args.config, args.set)
    data = Path(args.data)
    layout, window_len = cfgmod.dataset_info(data)
    vocab = load_vocabulary(data / "vocab.txt")
    entries = read_manifest(data / "manifest.tsv", vocab)
    train_entries = entries_for_split(entries, "train")
    val_entries = entries_for_split(entries, "val")
    if not train_entries or not val_entries:
        raise ManifestError("manifest has no train/val assignments; run `kpsign split` first")

    mcfg = cfgmod.model_config_from(cp, k=layout.total(), vocab_size=len(vocab))
    if mcfg.window_len != window_len:
        mcfg = dataclasses.replace(mcfg, window_len=window_len)
    tcfg = cfgmod.train_config_from(cp)

    train_w = load_windows(data, train_entries, vocab, window_len)
    val_w = load_windows(data, val_entries, vocab, window_len)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "train_log.txt"
    log_fh = log_path.open("w", encoding="utf-8")

    def on_epoch(record):
        line = record.log_line()
        print(line, flush=True)
        log_fh.write(line + "\n")
        log_fh.flush()

    try:
        best, history = train_loop(
            mcfg, tcfg, train_w, val_w, layout=layout, on_epoch=on_epoch, threads=args.threads
        )
    finally:
        log_fh.close()

    mdl.save_checkpoint(out / "checkpoint.kpck", mcfg, best)
    shutil.copyfile(data / "vocab.txt", out / "vocab.txt")
    cfgmod.echo_config(cp, out / "config.ini")
    report.write_history_csv(out / "history.csv", history)
    report.save_training_curves(out / "training_curves.svg", history)
    best_epoch = min(history, key=lambda r: r.val_loss)
    print(
        f"done: {len(history)} epochs, best epoch {best_epoch.epoch} "
        f"(val_loss={best_epoch.val_loss:.6f}) -> {out / 'checkpoint.kpck'}"
    )
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    mcfg, params = mdl.load_checkpoint(args.checkpoint)
    data = Path(args.data)
    _, window_len = cfgmod.dataset_info(data)
    vocab = load_vocabulary(data / "vocab.txt")
    entries = read_manifest(data / "manifest.tsv", vocab)
    part = entries_for_split(entries, args.split)
    if not part:
        raise ManifestError(f"manifest has no {args.split!r} entries")
    windows = load_windows(data, part, vocab, window_len)

    loss, logits, labels = evaluate_split(params, mcfg, windows)
    top1 = ev.topk_accuracy(logits, labels, 1)
    top5 = ev.topk_accuracy(logits, labels, min(5, mcfg.vocab_size))
    per_class = ev.per_class_report(logits, labels)

    out = Path(args.out)
    report.write_metrics_csv(out / "metrics.csv", args.split, len(windows), loss, top1, top5)
    report.write_per_class_csv(out / "per_class.csv", per_class)
    report.save_per_class_figure(out / "per_class_accuracy.svg", per_class)
    print(
        f"split={args.split} n_samples={len(windows)} loss={loss:.6f} "
        f"top1={top1:.4f} top5={top5:.4f}"
    )
    return EXIT_OK


def _cmd_predict(args) -> int:
    mcfg, params = mdl.load_checkpoint(args.checkpoint)
    vocab_path = Path(args.vocab) if args.vocab else Path(args.checkpoint).parent / "vocab.txt"
    if not vocab_path.is_file():
        raise ManifestError(f"no vocabulary at {vocab_path}; pass --vocab")
    vocab = load_vocabulary(vocab_path)
    if len(vocab) != mcfg.vocab_size:
        raise ManifestError(
            f"vocabulary size {len(vocab)} != checkpoint vocab_size {mcfg.vocab_size}"
        )

    window = sample_window(args.kpsq, args.start, mcfg.window_len)
    logits = mdl.forward(params, mcfg, stack_window(window, mcfg.window_len))
    probs = np.exp(logits - logits.max())
    probs /= probs.sum()
    k = min(args.topk, mcfg.vocab_size)
    order = np.argsort(-logits, kind="stable")[:k]
    print("rank\tword\tprobability")
    for rank, idx in enumerate(order, start=1):
        print(f"{rank}\t{vocab.word(int(idx))}\t{probs[int(idx)]:.6f}")
    return EXIT_OK


def _cmd_inspect_model(args) -> int:
    if args.checkpoint:
        mcfg, _ = mdl.load_checkpoint(args.checkpoint)
    else:
        cp = cfgmod.load_config(args.config, args.set)
        mcfg = cfgmod.model_config_from(cp)
    rep = ev.computational_report(mcfg)
    print(f"attention_mode = {mcfg.attention_mode}")
    print(f"tokens = {mcfg.token_count} x {mcfg.d_model} (input dim {mcfg.token_input_dim})")
    print(rep.to_text(), end="")
    print(
        f"summary: {rep.parameter_count:,} parameters vs {rep.rgb_reference_count:,} "
        f"for the RGB reference ({rep.parameter_ratio:.3f} ratio)"
    )
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(rep.to_text(), encoding="utf-8")
        (out / "report.csv").write_text(rep.to_csv(), encoding="utf-8")
    return EXIT_OK


def _cmd_augment_preview(args) -> int:
    window = sample_window(args.kpsq, args.start, args.window_len)
    if args.shift is not None:
        title = f"shift ({args.shift[0]:g}, {args.shift[1]:g}) px"
        after = aug.shift(window, args.shift[0], args.shift[1])
    elif args.scale is not None:
        title = f"scale {args.scale:g}"
        after = aug.scale(window, args.scale)
    elif args.rotate is not None:
        title = f"rotate {args.rotate:g} deg"
        after = aug.rotate(window, args.rotate)
    else:
        preset = args.layout or preset_for_k(window.k)
        if preset is None:
            raise LayoutError(
                f"cannot infer a layout preset for K={window.k}; pass --layout"
            )
        title = "horizontal flip"
        after = aug.hflip(window, layout_from_preset(preset))

    out = Path(args.out)
    report.save_window_overlay(out / "preview.svg", window, after, title)
    report.write_overlay_csv(out / "coords.csv", window, after)
    print(f"wrote {out / 'preview.svg'} and {out / 'coords.csv'} ({title})")
    return EXIT_OK


_COMMANDS = {
    "make-synth": _cmd_make_synth,
    "split": _cmd_split,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "predict": _cmd_predict,
    "inspect-model": _cmd_inspect_model,
    "augment-preview": _cmd_augment_preview,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
