"""Mini-batch training loop

"""

import csv
import logging
import math
from typing import List, Sequence

import attr
import numpy as np

from bevbox import utils
from bevbox.dataset.core import Sample, resample_many, stack_points
from bevbox.network.config import NetworkConfig, TrainConfig
from bevbox.network.loss import loss
from bevbox.network.model import (
    NetworkParams,
    apply_running_stats,
    backward,
    forward,
    init_params,
    make_targets,
)
from bevbox.network.optim import AdamState, adam_step, bn_momentum


logger = logging.getLogger(__name__)


EPOCH_LOG_FIELDS = ("epoch", "train_loss", "val_err_c", "val_err_theta_deg", "val_iou")


class EmptyDatasetError(ValueError):
    """Training was asked to fit no samples"""


@attr.s(frozen=True)
class EpochRecord:
    """Training loss and validation metrics after one epoch

    Validation fields are NaN when there is no validation data.

    """

    epoch = attr.ib()
    train_loss = attr.ib()
    val_err_c = attr.ib(default=math.nan)
    val_err_theta_deg = attr.ib(default=math.nan)
    val_iou = attr.ib(default=math.nan)


@attr.s
class TrainResult:
    """Selected parameters and the per-epoch log

    Attributes
    ----------
    params : NetworkParams
        Parameters of the epoch with the best validation IoU, or of the last
        epoch without validation data
    log : List[EpochRecord]
        One record per epoch
    best_epoch : int
        Epoch the parameters come from, 0 for the initialization

    """

    params = attr.ib()
    log = attr.ib(factory=list)
    best_epoch = attr.ib(default=0)


def batches(n: int, batch_size: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Shuffled index batches of one epoch

    A trailing batch of a single sample is dropped unless it is the whole
    dataset, since batch statistics of one sample are degenerate.

    """
    order = rng.permutation(n)
    chunks = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    if n > 1 and len(chunks[-1]) == 1:
        chunks.pop()
    return chunks


def train(
        train_data: Sequence[Sample],
        val_data: Sequence[Sample],
        net_cfg: NetworkConfig,
        train_cfg: TrainConfig,
        params: NetworkParams = None
) -> TrainResult:
    """Fit BoxNet with Adam

    Parameters
    ----------
    train_data : Sequence[Sample]
        Training samples, resampled to ``net_cfg.n_points`` once up front
    val_data : Sequence[Sample]
        Validation samples, possibly empty; evaluated after every epoch
    net_cfg : NetworkConfig
        Architecture and loss
    train_cfg : TrainConfig
        Schedule and seed; every random draw derives from ``train_cfg.seed``
    params : NetworkParams
        Starting point instead of a fresh initialization

    """
    # Deferred: the harness builds on the network package
    from bevbox.harness import BoxNetEstimator, evaluate

    if len(train_data) == 0:
        raise EmptyDatasetError("No training samples")
    seed = train_cfg.seed
    resampled = resample_many(train_data, net_cfg.n_points, utils.child_seed(seed, 0))
    X = stack_points(resampled)
    targets = make_targets(X, [s.gt for s in resampled], net_cfg)

    params = init_params(net_cfg, utils.child_seed(seed, 1)) if params is None else params
    state = AdamState()
    result = TrainResult(params=params)
    best_iou = -math.inf

    for epoch in range(1, train_cfg.epochs + 1):
        losses = []
        for index in batches(len(X), train_cfg.batch_size, utils.rng_for(seed, 2, epoch)):
            (predictions, cache) = forward(params, net_cfg, X[index], mode="train")
            (value, d_outputs) = loss(predictions, targets[index], net_cfg)
            grads = backward(params, net_cfg, cache, d_outputs)
            momentum = bn_momentum(params.step, train_cfg)
            params = adam_step(params, grads, params.step, train_cfg, state)
            params = apply_running_stats(params, cache, momentum)
            losses.append(value)
        record = EpochRecord(epoch=epoch, train_loss=float(np.mean(losses)))
        if len(val_data):
            report = evaluate(
                BoxNetEstimator(params, net_cfg, seed=utils.child_seed(seed, 3)),
                val_data
            )
            overall = report.aggregates["all"]
            record = attr.evolve(
                record,
                val_err_c=overall.err_c,
                val_err_theta_deg=overall.abs_err_theta_deg,
                val_iou=overall.iou
            )
            if overall.iou > best_iou:
                best_iou = overall.iou
                (result.params, result.best_epoch) = (params, epoch)
                logger.debug("Epoch %d: new best validation IoU %.4f", epoch, best_iou)
        else:
            (result.params, result.best_epoch) = (params, epoch)
        result.log.append(record)
        logger.info(
            "Epoch %d/%d: train loss %.6f, val err_c %.4f, val |err_theta| %.3f deg, val IoU %.4f",
            epoch, train_cfg.epochs, record.train_loss,
            record.val_err_c, record.val_err_theta_deg, record.val_iou
        )
    return result


def evaluation_loss(
        params: NetworkParams,
        net_cfg: NetworkConfig,
        samples: Sequence[Sample],
        seed: int = 0,
        batch_size: int = 256
) -> float:
    """Mean squared-error loss over a data set in inference mode

    """
    if len(samples) == 0:
        raise EmptyDatasetError("No samples to evaluate")
    resampled = resample_many(samples, net_cfg.n_points, seed)
    total = 0.0
    for start in range(0, len(resampled), batch_size):
        chunk = resampled[start:start + batch_size]
        X = stack_points(chunk)
        (predictions, _) = forward(params, net_cfg, X, mode="infer")
        (value, _) = loss(predictions, make_targets(X, [s.gt for s in chunk], net_cfg), net_cfg, kind="mse")
        total += value * len(chunk)
    return total / len(resampled)


def write_epoch_log(path: str, log: Sequence[EpochRecord]) -> None:
    """Write the per-epoch log as CSV

    """
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(EPOCH_LOG_FIELDS)
        for record in log:
            writer.writerow([
                record.epoch,
                utils.format_value(float(record.train_loss)),
                utils.format_value(float(record.val_err_c)),
                utils.format_value(float(record.val_err_theta_deg)),
                utils.format_value(float(record.val_iou)),
            ])
    return
