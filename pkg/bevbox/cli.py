"""Command line interface

.. code-block:: text

    bevbox gen-synth --out F --count K --seed S
    bevbox ingest-kitti --labels D --velodyne D --calib D --out F
    bevbox split --in F --train F --test F --ratio R --seed S
    bevbox train --train F --val F --out CKPT
    bevbox eval --data F (--ckpt CKPT | --slf CRITERION) --report F
    bevbox ablate --train F --test F --grid SPEC --out DIR --seed S
    bevbox time --ckpt CKPT --data F --batch B --reps N

Every command writes a ``<output>.manifest`` file of ``key=value`` lines
next to its output. Usage errors exit with status 2, failures of the
pipeline with status 1 and one line
``bevbox: error: kind=<ExceptionClass> message=<text>`` on stderr.

"""

import argparse
import datetime
import logging
import math
import os
import sys
from typing import List, Tuple

import attr

from bevbox import harness, utils
from bevbox.__version__ import __version__
from bevbox.dataset import (
    SynthConfig,
    dataset_hash,
    generate_synthetic,
    ingest_kitti,
    read_pbev,
    split_samples,
    write_pbev,
)
from bevbox.network import NetworkConfig, TrainConfig, save_checkpoint
from bevbox.network.checkpoint import load_checkpoint
from bevbox.network.train import train, write_epoch_log
from bevbox.slf import SlfConfig


logger = logging.getLogger(__name__)


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


class Manifest:
    """Key-value record of one run, written next to its output

    """

    def __init__(self, argv: List[str]):
        self.pairs: List[Tuple[str, str]] = [
            ("version", __version__),
            ("command_line", " ".join(argv)),
            ("started", _now()),
        ]

    def add(self, key: str, value) -> None:
        self.pairs.append((key, utils.format_value(value)))
        return

    def add_config(self, config, prefix: str) -> None:
        self.pairs.extend(utils.flatten_config(config, prefix))
        return

    def write(self, output: str) -> str:
        path = output.rstrip("/\\") + ".manifest"
        utils.write_key_values(path, self.pairs + [("finished", _now())])
        logger.debug("Wrote manifest %s", path)
        return path


#
# Argument types
# ~~~~~~~~~~~~~~
#


def existing_file(path: str) -> str:
    if not os.path.isfile(path):
        raise argparse.ArgumentTypeError(f"no such file: {path}")
    return path


def existing_dir(path: str) -> str:
    if not os.path.isdir(path):
        raise argparse.ArgumentTypeError(f"no such directory: {path}")
    return path


def positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError(f"expected on or off, got {text!r}")
    return text == "on"


#
# Commands
# ~~~~~~~~
#


def cmd_gen_synth(args, manifest: Manifest) -> None:
    cfg = SynthConfig(
        class_label=args.class_label,
        mode=args.mode,
        noise_m=args.noise,
        outlier_ratio=args.outliers
    )
    samples = generate_synthetic(cfg, args.count, args.seed)
    write_pbev(args.out, samples)
    manifest.add_config(cfg, "synth.")
    manifest.add("seed", args.seed)
    manifest.add("count", args.count)
    manifest.add("dataset_hash", dataset_hash(samples))
    manifest.add("output", args.out)
    manifest.write(args.out)
    return


def cmd_ingest_kitti(args, manifest: Manifest) -> None:
    samples = ingest_kitti(args.labels, args.velodyne, args.calib, args.min_points)
    write_pbev(args.out, samples)
    for (key, value) in (
            ("labels", args.labels),
            ("velodyne", args.velodyne),
            ("calib", args.calib),
            ("min_points", args.min_points),
            ("count", len(samples)),
            ("dataset_hash", dataset_hash(samples)),
            ("output", args.out),
    ):
        manifest.add(key, value)
    manifest.write(args.out)
    return


def cmd_split(args, manifest: Manifest) -> None:
    samples = read_pbev(args.input)
    split = split_samples(samples, args.ratio, args.seed)
    write_pbev(args.train, split.train)
    write_pbev(args.test, split.test)
    manifest.add("input", args.input)
    manifest.add("input_hash", dataset_hash(samples))
    manifest.add("ratio", args.ratio)
    manifest.add("seed", args.seed)
    manifest.add("train_hash", dataset_hash(split.train))
    manifest.add("test_hash", dataset_hash(split.test))
    manifest.add("outputs", [args.train, args.test])
    manifest.write(args.train)
    manifest.write(args.test)
    return


def _network_config(args) -> NetworkConfig:
    return NetworkConfig(
        angle_mode=args.angle_mode,
        center_mode=args.center_mode,
        concat_enabled=args.concat,
        scale=args.scale,
        loss_kind=args.loss,
        huber_delta=args.huber_delta,
        loss_weights=args.loss_weights
    )


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        batch_size=args.batch,
        epochs=args.epochs,
        lr0=args.lr,
        lr_decay_steps=args.lr_decay_steps,
        bn_decay_steps=args.bn_decay_steps,
        seed=args.seed
    )


def cmd_train(args, manifest: Manifest) -> None:
    net_cfg = _network_config(args)
    train_cfg = _train_config(args)
    train_data = read_pbev(args.train)
    val_data = read_pbev(args.val) if args.val else []
    result = train(train_data, val_data, net_cfg, train_cfg)
    save_checkpoint(result.params, net_cfg, args.out)
    manifest.add_config(net_cfg, "network.")
    manifest.add_config(train_cfg, "train.")
    manifest.add("train_hash", dataset_hash(train_data))
    manifest.add("val_hash", dataset_hash(val_data))
    manifest.add("best_epoch", result.best_epoch)
    manifest.add("steps", result.params.step)
    manifest.add("output", args.out)
    if args.log:
        write_epoch_log(args.log, result.log)
        manifest.add("epoch_log", args.log)
    manifest.write(args.out)
    return


def cmd_eval(args, manifest: Manifest) -> None:
    if args.ckpt:
        estimator = harness.BoxNetEstimator.from_checkpoint(
            args.ckpt, angle_mode=args.angle_mode, seed=args.seed
        )
        manifest.add("checkpoint", args.ckpt)
        manifest.add_config(estimator.cfg, "network.")
    else:
        estimator = harness.SlfEstimator(
            SlfConfig(criterion=args.slf, step=math.radians(args.step_deg))
        )
        manifest.add_config(estimator.cfg, "slf.")
    samples = read_pbev(args.data)
    report = harness.evaluate(estimator, samples)
    harness.write_report(args.report, report)
    manifest.add("data", args.data)
    manifest.add("seed", args.seed)
    manifest.pairs.extend(report.metadata())
    manifest.add("output", args.report)
    if args.hist:
        harness.write_histogram(
            args.hist, harness.histogram(report, args.hist_metric, args.hist_bin)
        )
        manifest.add("histogram", args.hist)
    print(harness.format_summary(report))
    manifest.write(args.report)
    return


def cmd_ablate(args, manifest: Manifest) -> None:
    base = _network_config(args)
    grid = harness.parse_grid(args.grid, base)
    train_cfg = attr.evolve(_train_config(args), val_fraction=args.val_fraction)
    train_data = read_pbev(args.train)
    test_data = read_pbev(args.test)
    rows = harness.ablate(grid, train_data, test_data, train_cfg, args.out, base)
    manifest.add("grid", args.grid)
    manifest.add_config(base, "network.")
    manifest.add_config(train_cfg, "train.")
    manifest.add("train_hash", dataset_hash(train_data))
    manifest.add("test_hash", dataset_hash(test_data))
    manifest.add("cells", len(rows))
    manifest.add("failed_cells", sum(row.status != "ok" for row in rows))
    manifest.add("output", os.path.join(args.out, "ablation.csv"))
    manifest.write(os.path.join(args.out, "ablation.csv"))
    return


def cmd_time(args, manifest: Manifest) -> None:
    (params, cfg) = load_checkpoint(args.ckpt)
    samples = read_pbev(args.data)
    result = harness.time_inference(params, cfg, samples, args.batch, args.reps, args.seed)
    print(
        f"batch={result.batch_size} reps={result.repetitions} "
        f"mean_ms={result.mean_ms:.4f} std_ms={result.std_ms:.4f} "
        f"per_cloud_ms={result.per_cloud_ms:.4f}"
    )
    return


#
# Parser
# ~~~~~~
#


def _add_network_flags(p: argparse.ArgumentParser, seed_required: bool = False) -> None:
    defaults = NetworkConfig()
    p.add_argument("--angle-mode", default=defaults.angle_mode,
                   choices=("direct_theta", "sincos", "sincos2"))
    p.add_argument("--center-mode", default=defaults.center_mode,
                   choices=("none", "mean", "median"))
    p.add_argument("--concat", type=on_off, default=defaults.concat_enabled, metavar="on|off")
    p.add_argument("--scale", default="1", help="layer-width multiplier, e.g. 1/16")
    p.add_argument("--loss", default=defaults.loss_kind, choices=("mse", "huber"))
    p.add_argument("--huber-delta", type=float, default=defaults.huber_delta)
    p.add_argument("--loss-weights", default="1,2,1", help="angle,size,center weights")
    p.add_argument("--epochs", type=int, default=TrainConfig().epochs)
    p.add_argument("--batch", type=positive_int, default=TrainConfig().batch_size)
    p.add_argument("--lr", type=float, default=TrainConfig().lr0)
    p.add_argument("--lr-decay-steps", type=positive_int, default=TrainConfig().lr_decay_steps)
    p.add_argument("--bn-decay-steps", type=positive_int, default=TrainConfig().bn_decay_steps)
    if seed_required:
        p.add_argument("--seed", type=int, required=True)
    else:
        p.add_argument("--seed", type=int, default=0)
    return


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bevbox",
        description="Oriented bounding boxes for bird's-eye-view point clouds"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("-q", "--quiet", action="store_true")
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True

    p = commands.add_parser("gen-synth", help="simulate labeled BEV scans")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--noise", type=float, default=SynthConfig().noise_m)
    p.add_argument("--mode", default="full", choices=("full", "lshape", "single-edge", "mixed"))
    p.add_argument("--class", dest="class_label", default="car",
                   choices=("car", "pedestrian", "cyclist", "mixed"))
    p.add_argument("--outliers", type=float, default=0.0, help="fraction of clutter points")
    p.set_defaults(func=cmd_gen_synth)

    p = commands.add_parser("ingest-kitti", help="extract samples from KITTI")
    p.add_argument("--labels", type=existing_dir, required=True)
    p.add_argument("--velodyne", type=existing_dir, required=True)
    p.add_argument("--calib", type=existing_dir, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-points", type=int, default=30)
    p.set_defaults(func=cmd_ingest_kitti)

    p = commands.add_parser("split", help="random train/test split")
    p.add_argument("--in", dest="input", type=existing_file, required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--ratio", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_split)

    p = commands.add_parser("train", help="train BoxNet")
    p.add_argument("--train", type=existing_file, required=True)
    p.add_argument("--val", type=existing_file)
    p.add_argument("--out", required=True)
    p.add_argument("--log", help="per-epoch CSV log")
    _add_network_flags(p)
    p.set_defaults(func=cmd_train)

    p = commands.add_parser("eval", help="score BoxNet or SLF on a test set")
    p.add_argument("--data", type=existing_file, required=True)
    method = p.add_mutually_exclusive_group(required=True)
    method.add_argument("--ckpt", type=existing_file)
    method.add_argument("--slf", choices=("area", "closeness", "variance"))
    p.add_argument("--step-deg", type=float, default=0.5)
    p.add_argument("--angle-mode", choices=("direct_theta", "sincos", "sincos2"),
                   help="refuse checkpoints trained with another angle mode")
    p.add_argument("--report", required=True)
    p.add_argument("--hist")
    p.add_argument("--hist-metric", default="abs_err_theta_deg", choices=harness.METRICS)
    p.add_argument("--hist-bin", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0, help="resampling seed")
    p.set_defaults(func=cmd_eval)

    p = commands.add_parser("ablate", help="train and test a grid of configurations")
    p.add_argument("--train", type=existing_file, required=True)
    p.add_argument("--test", type=existing_file, required=True)
    p.add_argument("--grid", required=True,
                   help="e.g. 'angle_mode=direct_theta,sincos,sincos2;scale=1,1/16'")
    p.add_argument("--out", required=True)
    p.add_argument("--val-fraction", type=float, default=TrainConfig().val_fraction)
    _add_network_flags(p, seed_required=True)
    p.set_defaults(func=cmd_ablate)

    p = commands.add_parser("time", help="time batched inference")
    p.add_argument("--ckpt", type=existing_file, required=True)
    p.add_argument("--data", type=existing_file, required=True)
    p.add_argument("--batch", type=positive_int, required=True)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_time)
    return parser


def main(argv: List[str] = None) -> int:
    """Run one command and return the exit status

    """
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    level = (
        logging.ERROR if args.quiet else
        logging.WARNING if args.verbose == 0 else
        logging.INFO if args.verbose == 1 else
        logging.DEBUG
    )
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args, Manifest(["bevbox"] + argv))
    except (ValueError, OSError) as err:
        message = " ".join(str(err).split())
        print(f"bevbox: error: kind={type(err).__name__} message={message}", file=sys.stderr)
        return 1
    return 0
