"""KITTI 3D object ingestion

Reads the label, velodyne and calibration files of the KITTI object
benchmark, lifts every scan into the rectified camera frame and cuts out the
points inside each labeled car, pedestrian and cyclist box. The camera frame
has x to the right, y down and z forward, so the bird's-eye view keeps
``(x, z)``.

"""

import logging
import math
import os
from typing import Dict, List

import attr
import numpy as np

from bevbox.dataset.core import MIN_POINTS, Sample
from bevbox.geometry import OrientedBox, normalize_angle


logger = logging.getLogger(__name__)


KITTI_CLASSES = {
    "Car": "car",
    "Pedestrian": "pedestrian",
    "Cyclist": "cyclist",
}


class KittiIngestError(ValueError):
    """Missing, malformed or inconsistent KITTI files"""


@attr.s(frozen=True)
class KittiObject:
    """One label line: class, dimensions, bottom-center location and yaw

    """

    kind = attr.ib()
    h = attr.ib(converter=float)
    w = attr.ib(converter=float)
    l = attr.ib(converter=float)
    x = attr.ib(converter=float)
    y = attr.ib(converter=float)
    z = attr.ib(converter=float)
    rotation_y = attr.ib(converter=float)

    def bev_box(self) -> OrientedBox:
        """Bird's-eye-view box in ``(x, z)`` coordinates

        The length axis points along ``(cos ry, -sin ry)`` in ``(x, z)``, so
        the BEV angle is ``-ry`` wrapped modulo π.

        """
        return OrientedBox(
            cx=self.x,
            cy=self.z,
            w=self.w,
            l=self.l,
            theta=normalize_angle(-self.rotation_y)
        )


@attr.s(frozen=True)
class Calibration:
    """Velodyne-to-camera transform and rectification rotation

    """

    tr_velo_to_cam = attr.ib(converter=lambda a: np.asarray(a, dtype=float).reshape(3, 4))
    r0_rect = attr.ib(converter=lambda a: np.asarray(a, dtype=float).reshape(3, 3))

    def velo_to_rect(self, points: np.ndarray) -> np.ndarray:
        """Lift ``(n, 3)`` velodyne points into the rectified camera frame

        """
        cam = points[:, :3] @ self.tr_velo_to_cam[:, :3].T + self.tr_velo_to_cam[:, 3]
        return cam @ self.r0_rect.T


#
# Readers
# ~~~~~~~
#


def read_calibration(path: str, frame_id: str = "?") -> Calibration:
    """Parse ``Tr_velo_to_cam`` and ``R0_rect`` from a calibration file

    """
    rows: Dict[str, List[float]] = {}
    try:
        with open(path, "r") as f:
            for line in f:
                if ":" not in line:
                    continue
                (key, values) = line.split(":", 1)
                rows[key.strip()] = [float(v) for v in values.split()]
        return Calibration(
            tr_velo_to_cam=rows["Tr_velo_to_cam"],
            r0_rect=rows["R0_rect"]
        )
    except (OSError, KeyError, ValueError) as err:
        raise KittiIngestError(f"frame {frame_id}: bad calibration {path}: {err!r}")


def read_labels(path: str, frame_id: str = "?") -> List[KittiObject]:
    """Parse a label file (15 fields per object, an optional 16th score)

    """
    objects = []
    try:
        with open(path, "r") as f:
            lines = [line.split() for line in f if line.strip()]
    except OSError as err:
        raise KittiIngestError(f"frame {frame_id}: cannot read labels: {err}")
    for (i, fields) in enumerate(lines, start=1):
        if len(fields) not in (15, 16):
            raise KittiIngestError(
                f"frame {frame_id}: label line {i} has {len(fields)} fields, expected 15"
            )
        try:
            (h, w, l, x, y, z, ry) = [float(v) for v in fields[8:15]]
        except ValueError as err:
            raise KittiIngestError(f"frame {frame_id}: label line {i}: {err}")
        objects.append(KittiObject(fields[0], h, w, l, x, y, z, ry))
    return objects


def read_velodyne(path: str, frame_id: str = "?") -> np.ndarray:
    """Read a float32 ``x, y, z, reflectance`` scan

    """
    try:
        raw = np.fromfile(path, dtype=np.float32)
    except OSError as err:
        raise KittiIngestError(f"frame {frame_id}: cannot read scan: {err}")
    if raw.size % 4:
        raise KittiIngestError(
            f"frame {frame_id}: scan size {raw.size} is not a multiple of 4"
        )
    return raw.reshape(-1, 4).astype(float)


#
# Extraction
# ~~~~~~~~~~
#


def points_in_box3d(points_rect: np.ndarray, obj: KittiObject) -> np.ndarray:
    """Mask of rectified-camera points inside a labeled 3D box

    The location is the bottom face center and y points down, so the box
    spans ``[y - h, y]`` vertically.

    """
    (c, s) = (math.cos(obj.rotation_y), math.sin(obj.rotation_y))
    d = points_rect - np.array([obj.x, obj.y, obj.z])
    along_length = c * d[:, 0] - s * d[:, 2]
    along_width = s * d[:, 0] + c * d[:, 2]
    return (
        (np.abs(along_length) <= 0.5 * obj.l) &
        (np.abs(along_width) <= 0.5 * obj.w) &
        (d[:, 1] <= 0.0) &
        (d[:, 1] >= -obj.h)
    )


def extract_samples(
        frame_id: str,
        points_rect: np.ndarray,
        objects: List[KittiObject],
        min_points: int = MIN_POINTS
) -> List[Sample]:
    """Cut out the BEV samples of one frame

    """
    samples = []
    for (k, obj) in enumerate(objects):
        if obj.kind not in KITTI_CLASSES:
            continue
        if obj.w <= 0 or obj.l <= 0:
            logger.warning("frame %s: object %d has a degenerate size, skipped", frame_id, k)
            continue
        inside = points_rect[points_in_box3d(points_rect, obj)]
        if len(inside) <= min_points:
            logger.debug(
                "frame %s: object %d has %d points, skipped", frame_id, k, len(inside)
            )
            continue
        samples.append(Sample(
            id=f"{frame_id}-{k:02d}",
            class_label=KITTI_CLASSES[obj.kind],
            points=inside[:, [0, 2]],
            gt=obj.bev_box()
        ))
    return samples


def _frame_ids(directory: str, extension: str) -> List[str]:
    try:
        names = os.listdir(directory)
    except OSError as err:
        raise KittiIngestError(f"cannot list {directory}: {err}")
    return sorted(
        os.path.splitext(name)[0] for name in names if name.endswith(extension)
    )


def ingest_kitti(
        label_dir: str,
        velo_dir: str,
        calib_dir: str,
        min_points: int = MIN_POINTS
) -> List[Sample]:
    """Extract BEV samples from a KITTI object dataset

    Parameters
    ----------
    label_dir : str
        Directory of ``<frame>.txt`` label files
    velo_dir : str
        Directory of ``<frame>.bin`` velodyne scans
    calib_dir : str
        Directory of ``<frame>.txt`` calibration files
    min_points : int
        Objects need strictly more points than this

    """
    frames = _frame_ids(label_dir, ".txt")
    for (directory, extension) in ((velo_dir, ".bin"), (calib_dir, ".txt")):
        other = _frame_ids(directory, extension)
        if other != frames:
            diff = sorted(set(frames) ^ set(other))
            raise KittiIngestError(
                f"frame sets differ between {label_dir} and {directory} "
                f"({len(diff)} unmatched, e.g. frame {diff[0]})"
            )
    samples = []
    for frame_id in frames:
        calib = read_calibration(os.path.join(calib_dir, frame_id + ".txt"), frame_id)
        objects = read_labels(os.path.join(label_dir, frame_id + ".txt"), frame_id)
        scan = read_velodyne(os.path.join(velo_dir, frame_id + ".bin"), frame_id)
        samples.extend(
            extract_samples(frame_id, calib.velo_to_rect(scan), objects, min_points)
        )
    logger.info("Ingested %d samples from %d KITTI frames", len(samples), len(frames))
    return samples
