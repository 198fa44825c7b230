"""Evaluation, ablation and timing

Estimators turn samples into boxes; :func:`evaluate` scores them against the
ground truth with the center error, the orientation error and the IoU and
aggregates the scores per class.

"""

import csv
import itertools
import logging
import math
import os
import time
from typing import List, Sequence

import attr
import numpy as np

from bevbox import geometry, utils
from bevbox.dataset.core import Sample, dataset_hash, resample_many, split_samples, stack_points
from bevbox.network import checkpoint, model
from bevbox.network.config import (
    ANGLE_MODES,
    CENTER_MODES,
    NetworkConfig,
    TrainConfig,
    parse_flag,
    parse_scale,
)
from bevbox.network.train import evaluation_loss, train, write_epoch_log
from bevbox.slf import SlfConfig, slf_fit


logger = logging.getLogger(__name__)


REPORT_FIELDS = ("id", "class", "err_c", "err_theta_deg", "iou", "status")
METRICS = ("err_c", "err_theta_deg", "abs_err_theta_deg", "iou")


#
# Estimators
# ~~~~~~~~~~
#


@attr.s
class SlfEstimator:
    """Search-based L-shape fitting on the raw clouds

    """

    cfg = attr.ib(default=SlfConfig())

    @property
    def name(self) -> str:
        return f"slf-{self.cfg.criterion}"

    @property
    def config_hash(self) -> str:
        return utils.config_hash(self.cfg)

    def estimate_all(self, samples: Sequence[Sample]) -> List:
        results = []
        for s in samples:
            try:
                results.append(slf_fit(s.points, self.cfg))
            except ValueError as err:
                results.append(err)
        return results


@attr.s
class BoxNetEstimator:
    """Trained network on clouds resampled to the network's point count

    Parameters
    ----------
    params : NetworkParams
        Trained parameters
    cfg : NetworkConfig
        Their configuration
    seed : int
        Seed of the resampling, fixed so evaluations repeat exactly
    batch_size : int
        Clouds per inference batch

    """

    params = attr.ib()
    cfg = attr.ib()
    seed = attr.ib(default=0)
    batch_size = attr.ib(default=256)

    @classmethod
    def from_checkpoint(cls, path: str, angle_mode: str = None, **kwargs) -> "BoxNetEstimator":
        (params, cfg) = checkpoint.load_checkpoint(path, angle_mode)
        return cls(params, cfg, **kwargs)

    @property
    def name(self) -> str:
        return "boxnet"

    @property
    def config_hash(self) -> str:
        return utils.config_hash(self.cfg)

    def estimate_all(self, samples: Sequence[Sample]) -> List:
        resampled = resample_many(samples, self.cfg.n_points, self.seed)
        results = []
        for start in range(0, len(resampled), self.batch_size):
            X = stack_points(resampled[start:start + self.batch_size])
            (predictions, cache) = model.forward(self.params, self.cfg, X, mode="infer")
            for i in range(len(X)):
                try:
                    results.extend(
                        model.decode(predictions[i:i + 1], cache.centers[i:i + 1], self.cfg)
                    )
                except ValueError as err:
                    results.append(err)
        return results


#
# Reports
# ~~~~~~~
#


@attr.s(frozen=True)
class ReportRow:
    """Scores of one sample; NaN scores and a ``failed:<kind>`` status when
    the estimator failed on it

    """

    id = attr.ib()
    class_label = attr.ib()
    err_c = attr.ib(default=math.nan)
    err_theta_deg = attr.ib(default=math.nan)
    iou = attr.ib(default=math.nan)
    status = attr.ib(default="ok")

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@attr.s(frozen=True)
class Aggregate:
    """Means over the successful rows of one group"""

    count = attr.ib()
    err_c = attr.ib()
    abs_err_theta_deg = attr.ib()
    iou = attr.ib()


def aggregate(rows: Sequence[ReportRow]) -> Aggregate:
    ok = [r for r in rows if r.ok]
    if not ok:
        return Aggregate(0, math.nan, math.nan, math.nan)
    return Aggregate(
        count=len(ok),
        err_c=float(np.mean([r.err_c for r in ok])),
        abs_err_theta_deg=float(np.mean([abs(r.err_theta_deg) for r in ok])),
        iou=float(np.mean([r.iou for r in ok]))
    )


@attr.s
class EvalReport:
    """Per-sample rows, per-class aggregates and run metadata

    ``aggregates`` maps every class present to its means, plus ``"all"``
    over every successful row.

    """

    rows = attr.ib()
    method = attr.ib()
    config_hash = attr.ib()
    dataset_hash = attr.ib()
    aggregates = attr.ib(init=False)

    def __attrs_post_init__(self):
        classes = sorted({r.class_label for r in self.rows})
        self.aggregates = {
            c: aggregate([r for r in self.rows if r.class_label == c]) for c in classes
        }
        self.aggregates["all"] = aggregate(self.rows)

    @property
    def n_failed(self) -> int:
        return sum(not r.ok for r in self.rows)

    def values(self, metric: str) -> np.ndarray:
        """Metric values of the successful rows"""
        if metric not in METRICS:
            raise ValueError(f"Unknown metric: {metric}")
        if metric == "abs_err_theta_deg":
            return np.array([abs(r.err_theta_deg) for r in self.rows if r.ok])
        return np.array([getattr(r, metric) for r in self.rows if r.ok])

    def metadata(self) -> List:
        pairs = [
            ("method", self.method),
            ("config_hash", self.config_hash),
            ("dataset_hash", self.dataset_hash),
            ("n_rows", str(len(self.rows))),
            ("n_failed", str(self.n_failed)),
        ]
        for (group, agg) in self.aggregates.items():
            pairs.extend([
                (f"{group}.count", str(agg.count)),
                (f"{group}.mean_err_c", utils.format_value(agg.err_c)),
                (f"{group}.mean_abs_err_theta_deg", utils.format_value(agg.abs_err_theta_deg)),
                (f"{group}.mean_iou", utils.format_value(agg.iou)),
            ])
        return pairs


def score(sample: Sample, result) -> ReportRow:
    """Report row of one estimator result, a box or the error it raised

    """
    if isinstance(result, Exception):
        return ReportRow(
            id=sample.id,
            class_label=sample.class_label,
            status=f"failed:{type(result).__name__}"
        )
    return ReportRow(
        id=sample.id,
        class_label=sample.class_label,
        err_c=geometry.center_error(result, sample.gt),
        err_theta_deg=math.degrees(geometry.orientation_error(result, sample.gt)),
        iou=geometry.iou(result, sample.gt)
    )


def evaluate(estimator, samples: Sequence[Sample]) -> EvalReport:
    """Score an estimator on a test set

    Parameters
    ----------
    estimator : SlfEstimator or BoxNetEstimator
        Anything with ``name``, ``config_hash`` and ``estimate_all``
    samples : Sequence[Sample]
        Test samples with ground truth

    """
    results = estimator.estimate_all(samples)
    rows = [score(s, r) for (s, r) in zip(samples, results)]
    for r in rows:
        if not r.ok:
            logger.warning("%s failed on sample %s (%s)", estimator.name, r.id, r.status)
    report = EvalReport(
        rows=rows,
        method=estimator.name,
        config_hash=estimator.config_hash,
        dataset_hash=dataset_hash(samples)
    )
    overall = report.aggregates["all"]
    logger.info(
        "%s on %d samples (%d failed): err_c %.4f m, |err_theta| %.3f deg, IoU %.4f",
        report.method, len(rows), report.n_failed,
        overall.err_c, overall.abs_err_theta_deg, overall.iou
    )
    return report


def histogram(report: EvalReport, metric: str, bin_width: float) -> List:
    """Fixed-width histogram of a metric over the successful rows

    Bins are ``[k w, (k + 1) w)`` for every ``k`` between the lowest and the
    highest occupied bin, empty bins included.

    Returns
    -------
    List[Tuple[float, int]]
        ``(bin_low, count)`` pairs

    """
    if not bin_width > 0:
        raise ValueError(f"bin_width must be positive, got {bin_width}")
    values = report.values(metric)
    if len(values) == 0:
        return []
    # Quotients within rounding noise of an integer belong to the upper bin
    index = np.floor(np.round(values / bin_width, 9)).astype(int)
    (low, high) = (index.min(), index.max())
    counts = np.bincount(index - low, minlength=high - low + 1)
    return [
        (float(f"{(low + k) * bin_width:.12g}"), int(c))
        for (k, c) in enumerate(counts)
    ]


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return


def write_report(path: str, report: EvalReport) -> None:
    """Write the per-sample rows as CSV"""
    _write_csv(path, REPORT_FIELDS, [
        [
            r.id,
            r.class_label,
            utils.format_value(float(r.err_c)),
            utils.format_value(float(r.err_theta_deg)),
            utils.format_value(float(r.iou)),
            r.status,
        ]
        for r in report.rows
    ])
    return


def write_histogram(path: str, bins) -> None:
    _write_csv(path, ("bin_low", "count"), [
        [utils.format_value(float(low)), count] for (low, count) in bins
    ])
    return


def format_summary(report: EvalReport) -> str:
    """Per-class table of the aggregates"""
    lines = [
        f"{'class':<12}{'count':>7}{'err_c [m]':>12}{'|err_theta| [deg]':>19}{'IoU':>9}"
    ]
    for (group, agg) in report.aggregates.items():
        lines.append(
            f"{group:<12}{agg.count:>7}{agg.err_c:>12.4f}"
            f"{agg.abs_err_theta_deg:>19.4f}{agg.iou:>9.4f}"
        )
    return "\n".join(lines)


#
# Ablation
# ~~~~~~~~
#


@attr.s(frozen=True)
class AblationGrid:
    """Axes of an ablation grid

    Every axis left out of a grid string keeps its default.

    """

    angle_modes = attr.ib(default=("sincos2",), converter=tuple)
    center_modes = attr.ib(default=("mean",), converter=tuple)
    concat = attr.ib(default=(True,), converter=tuple)
    scales = attr.ib(default=(1.0,), converter=tuple)

    @angle_modes.validator
    def _check_angles(self, attribute, value):
        bad = set(value) - set(ANGLE_MODES)
        if not value or bad:
            raise ValueError(f"Invalid angle modes: {sorted(bad) or 'none given'}")

    @center_modes.validator
    def _check_centers(self, attribute, value):
        bad = set(value) - set(CENTER_MODES)
        if not value or bad:
            raise ValueError(f"Invalid center modes: {sorted(bad) or 'none given'}")

    def cells(self, base: NetworkConfig = NetworkConfig()) -> List[NetworkConfig]:
        return [
            attr.evolve(base, angle_mode=a, center_mode=c, concat_enabled=k, scale=s)
            for (a, c, k, s) in itertools.product(
                self.angle_modes, self.center_modes, self.concat, self.scales
            )
        ]


GRID_AXES = {
    "angle_mode": ("angle_modes", str),
    "center_mode": ("center_modes", str),
    "concat": ("concat", parse_flag),
    "scale": ("scales", parse_scale),
}


def parse_grid(text: str, base: NetworkConfig = NetworkConfig()) -> AblationGrid:
    """Parse ``axis=v1,v2;axis=v3`` grid strings

    Axes left out keep the value of ``base``.

    Examples
    --------

    .. code-block:: python

        parse_grid("angle_mode=sincos,sincos2;scale=1,1/16").scales
        # (1.0, 0.0625)

    """
    axes = {
        "angle_modes": (base.angle_mode,),
        "center_modes": (base.center_mode,),
        "concat": (base.concat_enabled,),
        "scales": (base.scale,),
    }
    for part in filter(None, (p.strip() for p in text.split(";"))):
        if "=" not in part:
            raise ValueError(f"Grid axis without values: {part!r}")
        (key, values) = (s.strip() for s in part.split("=", 1))
        if key not in GRID_AXES:
            raise ValueError(f"Unknown grid axis {key!r}, expected one of {sorted(GRID_AXES)}")
        (field, convert) = GRID_AXES[key]
        axes[field] = tuple(convert(v.strip()) for v in values.split(",") if v.strip())
    return AblationGrid(**axes)


@attr.s(frozen=True)
class AblationRow:
    """Test-set scores of one grid cell"""

    cfg = attr.ib()
    eval_loss = attr.ib(default=math.nan)
    err_c = attr.ib(default=math.nan)
    abs_err_theta_deg = attr.ib(default=math.nan)
    iou = attr.ib(default=math.nan)
    status = attr.ib(default="ok")


ABLATION_FIELDS = (
    "cell", "angle_mode", "center_mode", "concat", "scale",
    "eval_loss", "mean_err_c", "mean_abs_err_theta_deg", "mean_iou", "status",
)


def ablate(
        grid: AblationGrid,
        train_data: Sequence[Sample],
        test_data: Sequence[Sample],
        train_cfg: TrainConfig,
        out_dir: str,
        base: NetworkConfig = NetworkConfig()
) -> List[AblationRow]:
    """Train and test one network per grid cell

    Every cell shares the seed, the schedule and the validation slice carved
    from the training data. A failing cell is reported with its error and
    the grid continues. Checkpoints, epoch logs and ``ablation.csv`` go to
    ``out_dir``.

    """
    os.makedirs(out_dir, exist_ok=True)
    if train_cfg.val_fraction > 0:
        split = split_samples(train_data, 1.0 - train_cfg.val_fraction, train_cfg.seed)
        (fit_data, val_data) = (split.train, split.test)
    else:
        (fit_data, val_data) = (list(train_data), [])
    eval_seed = utils.child_seed(train_cfg.seed, 4)

    rows = []
    cells = grid.cells(base)
    for (i, cfg) in enumerate(cells):
        label = ", ".join(f"{k}={v}" for (k, v) in utils.flatten_config(cfg)[:4])
        logger.info("Ablation cell %d/%d: %s", i + 1, len(cells), label)
        try:
            result = train(fit_data, val_data, cfg, train_cfg)
            checkpoint.save_checkpoint(
                result.params, cfg, os.path.join(out_dir, f"cell-{i:02d}.ckpt")
            )
            write_epoch_log(os.path.join(out_dir, f"cell-{i:02d}-epochs.csv"), result.log)
            report = evaluate(BoxNetEstimator(result.params, cfg, seed=eval_seed), test_data)
            overall = report.aggregates["all"]
            row = AblationRow(
                cfg=cfg,
                eval_loss=evaluation_loss(result.params, cfg, test_data, eval_seed),
                err_c=overall.err_c,
                abs_err_theta_deg=overall.abs_err_theta_deg,
                iou=overall.iou
            )
        except Exception as err:
            logger.warning("Ablation cell %d failed: %s: %s", i + 1, type(err).__name__, err)
            row = AblationRow(cfg=cfg, status=f"failed:{type(err).__name__}")
        rows.append(row)
    write_ablation(os.path.join(out_dir, "ablation.csv"), rows)
    return rows


def write_ablation(path: str, rows: Sequence[AblationRow]) -> None:
    _write_csv(path, ABLATION_FIELDS, [
        [
            i,
            row.cfg.angle_mode,
            row.cfg.center_mode,
            utils.format_value(row.cfg.concat_enabled),
            utils.format_value(row.cfg.scale),
            utils.format_value(float(row.eval_loss)),
            utils.format_value(float(row.err_c)),
            utils.format_value(float(row.abs_err_theta_deg)),
            utils.format_value(float(row.iou)),
            row.status,
        ]
        for (i, row) in enumerate(rows)
    ])
    return


#
# Timing
# ~~~~~~
#


WARMUP_RUNS = 10


@attr.s(frozen=True)
class TimingResult:
    """Wall-clock milliseconds per inference batch"""

    batch_size = attr.ib()
    repetitions = attr.ib()
    mean_ms = attr.ib()
    std_ms = attr.ib()

    @property
    def per_cloud_ms(self) -> float:
        return self.mean_ms / self.batch_size


def time_inference(
        params: model.NetworkParams,
        cfg: NetworkConfig,
        samples: Sequence[Sample],
        batch_size: int,
        repetitions: int,
        seed: int = 0,
        warmup: int = WARMUP_RUNS
) -> TimingResult:
    """Time batched inference, decoding included

    The batch cycles through ``samples`` when there are fewer samples than
    ``batch_size``; the first ``warmup`` runs are not timed.

    """
    if repetitions <= 0:
        raise ValueError(f"repetitions must be positive, got {repetitions}")
    if batch_size <= 0:
        raise ValueError(f"batch_size must be positive, got {batch_size}")
    if len(samples) == 0:
        raise ValueError("No samples to time")
    batch = [samples[i % len(samples)] for i in range(batch_size)]
    X = stack_points(resample_many(batch, cfg.n_points, seed))
    for _ in range(warmup):
        model.predict_batch(params, cfg, X)
    elapsed = []
    for _ in range(repetitions):
        start = time.perf_counter()
        model.predict_batch(params, cfg, X)
        elapsed.append(1e3 * (time.perf_counter() - start))
    result = TimingResult(
        batch_size=batch_size,
        repetitions=repetitions,
        mean_ms=float(np.mean(elapsed)),
        std_ms=float(np.std(elapsed))
    )
    logger.info(
        "Batch %d: %.3f ± %.3f ms per batch, %.4f ms per cloud",
        batch_size, result.mean_ms, result.std_ms, result.per_cloud_ms
    )
    return result
