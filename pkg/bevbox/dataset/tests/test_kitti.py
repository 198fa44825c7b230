"""Unit tests for KITTI ingestion"""

import math

import numpy as np
from numpy.testing import assert_allclose
import pytest

from bevbox.dataset import kitti
from bevbox.dataset.kitti import KittiIngestError


IDENTITY_CALIB = "\n".join([
    "P0: 1 0 0 0 0 1 0 0 0 0 1 0",
    "R0_rect: 1 0 0 0 1 0 0 0 1",
    "Tr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0",
    ""
])


def label_line(kind, h, w, l, x, y, z, ry):
    return f"{kind} 0.00 0 0.00 0 0 100 100 {h} {w} {l} {x} {y} {z} {ry}"


def points_around(rng, n, x, y, z, h, w, l):
    """Points strictly inside an axis-aligned labeled box"""
    return np.stack([
        x + rng.uniform(-0.45, 0.45, n) * l,
        y - rng.uniform(0.05, 0.95, n) * h,
        z + rng.uniform(-0.45, 0.45, n) * w,
        np.zeros(n),
    ], axis=1)


@pytest.fixture
def kitti_dirs(tmp_path):
    """One frame with a well covered car, a sparse pedestrian and a van"""
    rng = np.random.default_rng(0)
    dirs = {name: tmp_path / name for name in ("label_2", "velodyne", "calib")}
    for d in dirs.values():
        d.mkdir()
    (dirs["calib"] / "000007.txt").write_text(IDENTITY_CALIB)
    (dirs["label_2"] / "000007.txt").write_text("\n".join([
        label_line("Car", 1.5, 1.6, 4.0, 2.0, 1.5, 10.0, 0.0),
        label_line("Pedestrian", 1.7, 0.6, 0.8, -5.0, 1.5, 8.0, 0.0),
        label_line("Van", 2.0, 2.0, 5.0, 8.0, 1.5, 20.0, 0.0),
        "DontCare -1 -1 -10 0 0 10 10 -1 -1 -1 -1000 -1000 -1000 -10",
    ]) + "\n")
    scan = np.vstack([
        points_around(rng, 40, 2.0, 1.5, 10.0, 1.5, 1.6, 4.0),
        points_around(rng, 30, -5.0, 1.5, 8.0, 1.7, 0.6, 0.8),
        points_around(rng, 50, 8.0, 1.5, 20.0, 2.0, 2.0, 5.0),
        # ground clutter below the car
        [[2.0, 3.0, 10.0, 0.0]],
    ]).astype(np.float32)
    scan.tofile(str(dirs["velodyne"] / "000007.bin"))
    return {name: str(d) for (name, d) in dirs.items()}


def test_ingest(kitti_dirs):
    samples = kitti.ingest_kitti(
        kitti_dirs["label_2"], kitti_dirs["velodyne"], kitti_dirs["calib"]
    )
    # the pedestrian has exactly 30 points and the van is not a tracked class
    assert len(samples) == 1
    (car,) = samples
    assert car.id == "000007-00"
    assert car.class_label == "car"
    assert len(car.points) == 40
    assert_allclose(car.gt.to_array(), [2.0, 10.0, 1.6, 4.0, 0.0])
    assert np.all(np.abs(car.points[:, 0] - 2.0) <= 2.0)
    assert np.all(np.abs(car.points[:, 1] - 10.0) <= 0.8)
    return


def test_ingest_lower_threshold(kitti_dirs):
    samples = kitti.ingest_kitti(
        kitti_dirs["label_2"], kitti_dirs["velodyne"], kitti_dirs["calib"],
        min_points=29
    )
    assert [s.class_label for s in samples] == ["car", "pedestrian"]
    return


def test_mismatched_frames(kitti_dirs, tmp_path):
    (tmp_path / "calib" / "000008.txt").write_text(IDENTITY_CALIB)
    with pytest.raises(KittiIngestError, match="000008"):
        kitti.ingest_kitti(
            kitti_dirs["label_2"], kitti_dirs["velodyne"], kitti_dirs["calib"]
        )
    return


def test_malformed_label(kitti_dirs, tmp_path):
    (tmp_path / "label_2" / "000007.txt").write_text("Car 0 0 0\n")
    with pytest.raises(KittiIngestError, match="000007"):
        kitti.ingest_kitti(
            kitti_dirs["label_2"], kitti_dirs["velodyne"], kitti_dirs["calib"]
        )
    return


def test_missing_calibration_key(tmp_path):
    path = tmp_path / "calib.txt"
    path.write_text("P0: 1 0 0 0 0 1 0 0 0 0 1 0\n")
    with pytest.raises(KittiIngestError):
        kitti.read_calibration(str(path))
    return


@pytest.mark.parametrize("ry,theta", [
    (0.0, 0.0),
    (math.pi / 2, math.pi / 2),
    (-math.pi / 2, math.pi / 2),
    (0.3, -0.3),
    (-2.9, 2.9 - math.pi),
])
def test_bev_angle(ry, theta):
    obj = kitti.KittiObject("Car", 1.5, 1.6, 4.0, 0.0, 1.0, 0.0, ry)
    assert_allclose(obj.bev_box().theta, theta, atol=1e-12)
    return


def test_rotated_box_membership():
    ry = 0.5
    obj = kitti.KittiObject("Car", 1.5, 1.0, 4.0, 0.0, 1.0, 0.0, ry)
    # a point 1.9 m along the length axis and one 1.9 m along the width axis
    axis = np.array([math.cos(ry), 0.5, -math.sin(ry)])
    across = np.array([math.sin(ry), 0.5, math.cos(ry)])
    inside = kitti.points_in_box3d(np.stack([1.9 * axis, 1.9 * across]), obj)
    assert inside.tolist() == [True, False]
    # the BEV box agrees with the 3D membership
    box = obj.bev_box()
    assert_allclose(
        [math.cos(box.theta), math.sin(box.theta)], axis[[0, 2]], atol=1e-12
    )
    return


def rot_x(a):
    (c, s) = (math.cos(a), math.sin(a))
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a):
    (c, s) = (math.cos(a), math.sin(a))
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a):
    (c, s) = (math.cos(a), math.sin(a))
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


# velodyne axes (forward, left, up) to camera axes (right, down, forward)
VELO_AXES = np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])
TR_ROTATION = VELO_AXES @ rot_z(0.05) @ rot_y(0.01)
TR_TRANSLATION = np.array([0.27, -0.08, -0.31])
R0_RECT = rot_x(0.012) @ rot_y(-0.02)

CAR = (1.5, 1.7, 4.2, 3.0, 1.6, 15.0, 0.7)


def flat(matrix):
    return " ".join(repr(float(v)) for v in np.ravel(matrix))


def box_offsets(u, v, height, ry):
    """Rectified-frame offsets from the bottom center of a box with yaw ``ry``

    ``u`` runs along the length, ``v`` along the width and ``height`` upwards.

    """
    (c, s) = (math.cos(ry), math.sin(ry))
    return np.stack([c * u + s * v, -height, -s * u + c * v], axis=1)


@pytest.fixture
def calibrated_frame(tmp_path):
    """A yawed car behind a rotated and shifted sensor, with clutter just outside"""
    rng = np.random.default_rng(1)
    (h, w, l, x, y, z, ry) = CAR
    n = 45
    inside = box_offsets(
        rng.uniform(-0.45, 0.45, n) * l,
        rng.uniform(-0.45, 0.45, n) * w,
        rng.uniform(0.05, 0.95, n) * h,
        ry
    )
    outside = np.vstack([
        # beyond either end, beside either flank and above the roof
        box_offsets(rng.choice([-1, 1], 10) * rng.uniform(0.55, 0.7, 10) * l,
                    rng.uniform(-0.4, 0.4, 10) * w, rng.uniform(0.1, 0.9, 10) * h, ry),
        box_offsets(rng.uniform(-0.4, 0.4, 10) * l,
                    rng.choice([-1, 1], 10) * rng.uniform(0.55, 0.7, 10) * w,
                    rng.uniform(0.1, 0.9, 10) * h, ry),
        box_offsets(rng.uniform(-0.4, 0.4, 5) * l, rng.uniform(-0.4, 0.4, 5) * w,
                    rng.uniform(1.05, 1.3, 5) * h, ry),
    ])
    rect = np.vstack([inside, outside]) + [x, y, z]
    # invert rect = R0 (Tr_R velo + Tr_t)
    velo = (rect @ R0_RECT - TR_TRANSLATION) @ TR_ROTATION
    scan = np.hstack([velo, np.zeros((len(velo), 1))]).astype(np.float32)
    dirs = {name: tmp_path / name for name in ("label_2", "velodyne", "calib")}
    for d in dirs.values():
        d.mkdir()
    (dirs["calib"] / "000042.txt").write_text("\n".join([
        "P0: 1 0 0 0 0 1 0 0 0 0 1 0",
        "R0_rect: " + flat(R0_RECT),
        "Tr_velo_to_cam: " + flat(np.hstack([TR_ROTATION, TR_TRANSLATION[:, None]])),
        ""
    ]))
    (dirs["label_2"] / "000042.txt").write_text(label_line("Car", *CAR) + "\n")
    scan.tofile(str(dirs["velodyne"] / "000042.bin"))
    return ({name: str(d) for (name, d) in dirs.items()}, scan, n)


def test_ingest_with_rotated_calibration(calibrated_frame):
    (dirs, scan, n_inside) = calibrated_frame
    (sample,) = kitti.ingest_kitti(dirs["label_2"], dirs["velodyne"], dirs["calib"])
    # the stored float32 scan, lifted with homogeneous matrices
    to_cam = np.eye(4)
    to_cam[:3, :3] = TR_ROTATION
    to_cam[:3, 3] = TR_TRANSLATION
    rectify = np.eye(4)
    rectify[:3, :3] = R0_RECT
    homogeneous = np.hstack([scan[:, :3].astype(float), np.ones((len(scan), 1))])
    expected = (homogeneous @ (rectify @ to_cam).T)[:n_inside]
    assert len(sample.points) == n_inside
    assert_allclose(sample.points, expected[:, [0, 2]], atol=1e-9)
    (h, w, l, x, y, z, ry) = CAR
    assert_allclose(sample.gt.to_array(), [x, z, w, l, -ry], atol=1e-12)
    # every extracted point lies in the BEV footprint of the label
    box = sample.gt
    d = sample.points - [box.cx, box.cy]
    (c, s) = (math.cos(box.theta), math.sin(box.theta))
    assert np.all(np.abs(d @ [c, s]) <= 0.5 * box.l)
    assert np.all(np.abs(d @ [-s, c]) <= 0.5 * box.w)
    return
