"""Unit tests for the training loop"""

import csv
import math

import numpy as np
import pytest

from bevbox.dataset import Sample
from bevbox.geometry import OrientedBox
from bevbox.network import NetworkConfig, TrainConfig, train
from bevbox.network.train import EmptyDatasetError, batches, evaluation_loss, write_epoch_log


CFG = NetworkConfig(scale=1 / 16, n_points=32)


@pytest.mark.parametrize("n,batch_size,sizes", [
    (10, 4, [4, 4, 2]),
    (9, 4, [4, 4]),
    (8, 4, [4, 4]),
    (1, 4, [1]),
    (3, 8, [3]),
])
def test_batches(n, batch_size, sizes, rng):
    chunks = batches(n, batch_size, rng)
    assert [len(c) for c in chunks] == sizes
    used = np.concatenate(chunks)
    assert len(set(used.tolist())) == len(used)
    return


def test_single_sample_overfit(rng):
    box = OrientedBox(cx=14.0, cy=3.0, w=1.7, l=4.2, theta=0.3)
    local = rng.uniform(-0.5, 0.5, size=(80, 2)) * [box.l, box.w]
    (c, s) = (math.cos(box.theta), math.sin(box.theta))
    points = box.center + local @ np.array([[c, s], [-s, c]])
    sample = Sample(id="only", class_label="car", points=points, gt=box)
    result = train.train(
        [sample], [], CFG, TrainConfig(epochs=200, batch_size=1, lr0=0.05, seed=1)
    )
    assert len(result.log) == 200
    assert result.best_epoch == 200
    assert result.params.step == 200
    assert result.log[-1].train_loss < 0.1 * result.log[0].train_loss
    return


def test_determinism(car_samples):
    cfg = TrainConfig(epochs=2, batch_size=4, seed=3)
    a = train.train(car_samples[:10], car_samples[10:14], CFG, cfg)
    b = train.train(car_samples[:10], car_samples[10:14], CFG, cfg)
    assert a.best_epoch == b.best_epoch
    assert [r.train_loss for r in a.log] == [r.train_loss for r in b.log]
    for name in a.params.tensors:
        assert np.array_equal(a.params[name], b.params[name])
    return


def test_validation_log(car_samples):
    result = train.train(
        car_samples[:10], car_samples[10:14], CFG, TrainConfig(epochs=3, batch_size=4)
    )
    assert [r.epoch for r in result.log] == [1, 2, 3]
    assert 1 <= result.best_epoch <= 3
    best = max(r.val_iou for r in result.log)
    assert result.log[result.best_epoch - 1].val_iou == best
    for record in result.log:
        assert math.isfinite(record.train_loss)
        assert 0.0 <= record.val_iou <= 1.0
        assert record.val_err_c >= 0.0
    return


def test_no_epochs_keeps_initialization(car_samples):
    result = train.train(car_samples[:4], [], CFG, TrainConfig(epochs=0))
    assert result.log == []
    assert result.best_epoch == 0
    assert result.params.step == 0
    return


def test_empty_dataset():
    with pytest.raises(EmptyDatasetError):
        train.train([], [], CFG, TrainConfig(epochs=1))
    return


def test_evaluation_loss(car_samples):
    result = train.train(car_samples[:8], [], CFG, TrainConfig(epochs=1, batch_size=4))
    value = evaluation_loss(result.params, CFG, car_samples[8:12], seed=2, batch_size=3)
    assert math.isfinite(value) and value >= 0
    assert value == evaluation_loss(result.params, CFG, car_samples[8:12], seed=2, batch_size=3)
    with pytest.raises(EmptyDatasetError):
        evaluation_loss(result.params, CFG, [])
    return


def test_write_epoch_log(tmp_path):
    log = [
        train.EpochRecord(epoch=1, train_loss=2.5),
        train.EpochRecord(epoch=2, train_loss=1.25, val_err_c=0.5, val_err_theta_deg=3.0, val_iou=0.75),
    ]
    path = str(tmp_path / "epochs.csv")
    write_epoch_log(path, log)
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    assert rows == [
        ["epoch", "train_loss", "val_err_c", "val_err_theta_deg", "val_iou"],
        ["1", "2.5", "nan", "nan", "nan"],
        ["2", "1.25", "0.5", "3.0", "0.75"],
    ]
    return
