"""Command-line surface for the whole pipeline.

Subcommands: simulate, pretrain, zero-shot, finetune, eval. Every run prints
a banner with the seed, a hash of the resolved options and the hash of any
checkpoint read or written, which together pin down every reported number.

Exit codes: 0 success, 1 usage error (bad flags or flag values), 2 data
error (unreadable or malformed files, corrupt checkpoints).

A flat key=value config file can pre-set any flag of a subcommand via
--config; explicit command-line flags win over file values.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys

import numpy as np

from . import formats
from .checkpoint import load_checkpoint, save_checkpoint
from .contrastive import TrainConfig, pretrain
from .datasets import load_eval_dataset, load_pretrain_samples
from .errors import PipelineError
from .graph_encoder import EncoderConfig
from .inference import FinetuneConfig, LabelSet, Model, evaluate, finetune
from .simulate import NoiseParams, simulate_sequence
from .skeleton import body22
from .text_embeddings import TrainableTextEncoder


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as exit code 1, not 2."""

    def error(self, message):
        raise UsageError(message)


def _config_hash(args):
    items = sorted(f"{k}={v}" for k, v in vars(args).items() if k != "func")
    return hashlib.sha256("\n".join(items).encode("utf-8")).hexdigest()[:12]


def _file_hash(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()[:12]


def _banner(command, args, checkpoint_hash="-"):
    print(
        f"run {command}: seed={getattr(args, 'seed', '-')} "
        f"config_hash={_config_hash(args)} checkpoint_hash={checkpoint_hash}"
    )


def _require(condition, message):
    if not condition:
        raise UsageError(message)


def _structure_from(args):
    if getattr(args, "structure", None):
        return formats.read_structure_file(args.structure)
    return body22()


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(args):
    _require(args.fs > 0, "--fs must be positive")
    _require(args.sigma_accel >= 0 and args.sigma_gyro >= 0, "noise sigmas must be >= 0")
    _banner("simulate", args)
    names = sorted(n for n in os.listdir(args.skeleton_dir) if n.endswith(".skel"))
    if not names:
        raise PipelineError(f"no .skel files in {args.skeleton_dir}")
    os.makedirs(args.out, exist_ok=True)
    noise = NoiseParams(sigma_accel=args.sigma_accel, sigma_gyro=args.sigma_gyro)
    for index, name in enumerate(names):
        seq = formats.read_skeleton_file(os.path.join(args.skeleton_dir, name))
        series = simulate_sequence(
            seq,
            noise=noise,
            target_fs=args.fs,
            rng=np.random.default_rng(args.seed ^ index),
            gravity=args.gravity,
        )
        ext = ".tsb" if args.binary else ".ts"
        out_path = os.path.join(args.out, name[: -len(".skel")] + ext)
        formats.write_timeseries_file(out_path, series, binary=args.binary)
        print(f"{name} -> {out_path} (T={series.num_frames} @ {series.sample_rate} Hz)")
    return 0


# ---------------------------------------------------------------------------
# pretrain
# ---------------------------------------------------------------------------


def _encoder_config(args, embed_dim):
    channels = [int(c) for c in args.channels.split(",") if c]
    _require(channels, "--channels needs at least one width")
    blocks, c_in = [], 6
    for c_out in channels:
        blocks.append((c_in, c_out, args.kt))
        c_in = c_out
    return EncoderConfig(blocks=tuple(blocks), partition=args.partition, embedding_dim=embed_dim)


def cmd_pretrain(args):
    _require(args.batch >= 2, "--batch must be >= 2")
    _require(args.epochs >= 0, "--epochs must be >= 0")
    _require(args.lr > 0, "--lr must be positive")
    _require(args.mask_min >= 1, "--mask-min must be >= 1 (joints are 1..V)")
    _require(args.mask_max >= args.mask_min, "--mask-max must be >= --mask-min")
    _require(args.kt % 2 == 1, "--kt must be odd")
    table = formats.read_embedding_file(args.embeddings)
    if args.l2_normalize_text:
        table = table.l2_normalized()
    descriptions = formats.read_description_file(args.desc)
    structure = _structure_from(args)
    noise = NoiseParams(sigma_accel=args.sigma_accel, sigma_gyro=args.sigma_gyro)
    samples = load_pretrain_samples(
        args.data, fs=args.fs, noise=noise, seed=args.seed, gravity=args.gravity
    )
    for s in samples:
        if s.series.num_joints != structure.num_joints:
            raise PipelineError(
                f"{s.seq_id}: {s.series.num_joints} joints in data, skeleton has {structure.num_joints}"
            )
    _require(args.mask_max <= structure.num_joints, "--mask-max exceeds the joint count")
    encoder_cfg = _encoder_config(args, table.dim)
    text = table
    if args.trainable_text:
        text = TrainableTextEncoder.from_table(table, np.random.default_rng(args.seed))
    cfg = TrainConfig(
        batch_size=args.batch,
        epochs=args.epochs,
        lr=args.lr,
        mask_min=args.mask_min,
        mask_max=args.mask_max,
        seed=args.seed,
        rotation_augment=not args.no_rot_aug,
        text_augment=not args.no_text_aug,
        symmetric_loss=args.symmetric_loss,
        deterministic=args.deterministic,
    )
    _banner("pretrain", args)
    metrics_path = args.out + ".metrics.tsv"
    with open(metrics_path, "w", encoding="utf-8") as metrics:

        def on_epoch(epoch, mean_loss, inv_gamma):
            line = f"{epoch}\t{mean_loss!r}\t{inv_gamma!r}"
            print(line)
            metrics.write(line + "\n")

        ckpt = pretrain(samples, descriptions, text, structure, encoder_cfg, cfg, on_epoch=on_epoch)
    save_checkpoint(args.out, ckpt)
    print(f"saved {args.out} checkpoint_hash={_file_hash(args.out)} metrics={metrics_path}")
    return 0


# ---------------------------------------------------------------------------
# zero-shot / finetune / eval
# ---------------------------------------------------------------------------


def _labels_from_embedding_file(path, l2_normalize=False):
    table = formats.read_embedding_file(path)
    if l2_normalize:
        table = table.l2_normalized()
    ids = table.ids()
    names = tuple(table.text(i) for i in ids)
    return LabelSet(names=names, embeddings=table.matrix(ids))


def _print_report(report, report_path=None):
    print(report.as_text())
    if report_path:
        with open(report_path, "w", encoding="utf-8") as fh:
            for key, value in report.as_key_values():
                fh.write(f"{key}\t{value}\n")
        print(f"report written to {report_path}")


def cmd_zero_shot(args):
    ckpt = load_checkpoint(args.model)
    _banner("zero-shot", args, _file_hash(args.model))
    model = Model(ckpt)
    labels = _labels_from_embedding_file(args.labels, args.l2_normalize_text)
    window = args.window if args.window else ckpt.train_window
    dataset = load_eval_dataset(args.manifest, ckpt.structure, ckpt.sample_rate, window=window)
    report = evaluate(model, dataset, labels, mode="zero_shot")
    _print_report(report, args.report)
    return 0


def cmd_finetune(args):
    _require(args.epochs >= 0, "--epochs must be >= 0")
    _require(args.lr > 0, "--lr must be positive")
    _require(args.batch >= 1, "--batch must be >= 1")
    ckpt = load_checkpoint(args.model)
    _banner("finetune", args, _file_hash(args.model))
    model = Model(ckpt)
    window = args.window if args.window else ckpt.train_window
    dataset = load_eval_dataset(args.manifest, ckpt.structure, ckpt.sample_rate, window=window)
    names = tuple(sorted({label for _, label in dataset}))
    if model.label_names is not None:
        names = model.label_names  # keep the existing classifier's class order
    labels = LabelSet(names=names)
    cfg = FinetuneConfig(epochs=args.epochs, lr=args.lr, batch_size=args.batch, seed=args.seed)
    model = finetune(model, dataset, labels, cfg)
    save_checkpoint(args.out, model.to_checkpoint())
    print(f"saved {args.out} checkpoint_hash={_file_hash(args.out)}")
    return 0


def cmd_eval(args):
    ckpt = load_checkpoint(args.model)
    _banner("eval", args, _file_hash(args.model))
    model = Model(ckpt)
    window = args.window if args.window else ckpt.train_window
    dataset = load_eval_dataset(args.manifest, ckpt.structure, ckpt.sample_rate, window=window)
    if ckpt.has_classifier():
        if ckpt.label_names is None:
            raise PipelineError("checkpoint has a classifier but no label names")
        labels = LabelSet(names=ckpt.label_names)
        report = evaluate(model, dataset, labels, mode="finetuned")
    else:
        _require(args.labels, "--labels is required to evaluate a model without a classifier")
        labels = _labels_from_embedding_file(args.labels, args.l2_normalize_text)
        report = evaluate(model, dataset, labels, mode="zero_shot")
    _print_report(report, args.report)
    return 0


# ---------------------------------------------------------------------------
# parser assembly
# ---------------------------------------------------------------------------


def build_parser():
    parser = Parser(prog="imuclr", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key=value file pre-setting any flag")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("simulate", help="synthesize sensor recordings from skeleton files")
    common(p)
    p.add_argument("--skeleton-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fs", type=float, default=20.0)
    p.add_argument("--sigma-accel", type=float, default=0.05)
    p.add_argument("--sigma-gyro", type=float, default=0.005)
    p.add_argument("--gravity", action="store_true")
    p.add_argument("--binary", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pretrain", help="contrastive pre-training against text embeddings")
    common(p)
    p.add_argument("--data", required=True, help="directory of .skel or simulated .ts/.tsb files")
    p.add_argument("--desc", required=True, help="description assignment file")
    p.add_argument("--embeddings", required=True, help="text embedding file")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.0001)
    p.add_argument("--mask-min", type=int, default=1)
    p.add_argument("--mask-max", type=int, default=5)
    p.add_argument("--no-rot-aug", action="store_true")
    p.add_argument("--no-text-aug", action="store_true")
    p.add_argument("--symmetric-loss", action="store_true")
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--fs", type=float, default=20.0)
    p.add_argument("--sigma-accel", type=float, default=0.05)
    p.add_argument("--sigma-gyro", type=float, default=0.005)
    p.add_argument("--gravity", action="store_true")
    p.add_argument("--structure", help="skeleton structure override file")
    p.add_argument("--channels", default="32,64", help="comma-separated block widths")
    p.add_argument("--kt", type=int, default=9, help="temporal kernel size (odd)")
    p.add_argument("--partition", choices=("uniform", "distance"), default="distance")
    p.add_argument("--trainable-text", action="store_true")
    p.add_argument("--l2-normalize-text", action="store_true")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("zero-shot", help="similarity classification against label embeddings")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--labels", required=True, help="label candidate embedding file")
    p.add_argument("--window", type=int, default=0, help="override evaluation window length")
    p.add_argument("--report", help="write metrics to a key-value file")
    p.add_argument("--l2-normalize-text", action="store_true")
    p.set_defaults(func=cmd_zero_shot)

    p = sub.add_parser("finetune", help="attach and train a linear classifier")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=0.0001)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--window", type=int, default=0)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a manifest")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--labels", help="label embeddings (zero-shot models)")
    p.add_argument("--window", type=int, default=0)
    p.add_argument("--report", help="write metrics to a key-value file")
    p.add_argument("--l2-normalize-text", action="store_true")
    p.set_defaults(func=cmd_eval)
    return parser


def _apply_config_file(parser, argv):
    """Pre-set subcommand defaults from --config key=value pairs."""
    if not argv or argv[0].startswith("-") or "--config" not in argv:
        return
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        return  # argparse reports the missing value itself
    values = formats.read_config_file(argv[idx + 1])
    sub_actions = [a for a in parser._actions if isinstance(a, argparse._SubParsersAction)]
    subparser = sub_actions[0].choices.get(argv[0])
    if subparser is None:
        return
    overrides = {}
    for key, raw in values.items():
        dest = key.replace("-", "_")
        action = next((a for a in subparser._actions if a.dest == dest), None)
        if action is None:
            raise UsageError(f"config file sets unknown flag {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            overrides[dest] = raw.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            try:
                overrides[dest] = action.type(raw)
            except ValueError as exc:
                raise UsageError(f"config value {key}={raw!r}: {exc}") from exc
        else:
            overrides[dest] = raw
    subparser.set_defaults(**overrides)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
