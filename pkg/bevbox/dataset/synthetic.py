"""Synthetic bird's-eye-view scans of rectangular objects

A desk-scale stand-in for real LiDAR data. Every sample is a random box seen
from a sensor at the origin; depending on the visibility mode the points lie
on all four edges, on the edges facing the sensor (the L-shape) or on the one
edge facing it most directly.

In the partial modes a facing edge is rarely seen end to end: returns thin
out towards grazing incidence and nearby objects cut off the far part. Each
visible edge is therefore covered only from its end nearest to the sensor
over a random fraction of its length, so the extent of the points
underestimates the box.

"""

import logging
import math
from typing import List

import attr
import numpy as np

from bevbox import utils
from bevbox.dataset.core import CLASSES, MIN_POINTS, VIEWS, Sample
from bevbox.geometry import OrientedBox, box_corners, normalize_angle


logger = logging.getLogger(__name__)


MODES = VIEWS

DEFAULT_SIZE_PRIORS = {
    # class: ((w_min, w_max), (l_min, l_max)) in meters
    "car": ((1.5, 1.9), (3.2, 4.8)),
    "pedestrian": ((0.4, 0.9), (0.4, 0.9)),
    "cyclist": ((0.4, 0.7), (1.5, 1.9)),
}


def _range_pair(instance, attribute, value):
    (low, high) = value
    if not 0 < low <= high:
        raise ValueError(f"{attribute.name} must satisfy 0 < low <= high, got {value}")


def _size_priors(instance, attribute, value):
    missing = set(CLASSES) - set(value)
    if missing:
        raise ValueError(f"Size priors missing for {sorted(missing)}")
    for (name, ranges) in value.items():
        for (low, high) in ranges:
            if not 0 < low <= high:
                raise ValueError(f"Invalid size prior for {name}: {ranges}")


@attr.s(frozen=True)
class SynthConfig:
    """Settings of the scan simulator

    Parameters
    ----------
    class_label : str
        One of the object classes, or ``"mixed"`` to draw the class uniformly
    mode : str
        Visibility mode ``full``, ``lshape``, ``single-edge`` or ``mixed``
        (``full`` or ``lshape`` with equal probability)
    noise_m : float
        Standard deviation of the isotropic Gaussian point noise
    points_per_edge : float
        Poisson mean of the number of points on each visible edge
    interior_points : float
        Poisson mean of the number of interior points in ``full`` mode
    sensor_range : Tuple[float, float]
        Range of the object's distance from the sensor
    outlier_ratio : float
        Fraction of points replaced with uniform clutter around the object
    edge_coverage : Tuple[float, float]
        Range of the covered fraction of each visible edge in the
        ``lshape`` and ``single-edge`` modes
    min_points : int
        Samples need strictly more points than this; others are regenerated
    max_attempts : int
        Regeneration budget per sample
    size_priors : dict
        Per-class uniform ranges ``((w_min, w_max), (l_min, l_max))``

    """

    class_label = attr.ib(default="car", validator=attr.validators.in_(CLASSES + ("mixed",)))
    mode = attr.ib(default="full", validator=attr.validators.in_(MODES + ("mixed",)))
    noise_m = attr.ib(default=0.02, converter=float)
    points_per_edge = attr.ib(default=40.0, converter=float)
    interior_points = attr.ib(default=10.0, converter=float)
    sensor_range = attr.ib(default=(5.0, 40.0), converter=tuple, validator=_range_pair)
    outlier_ratio = attr.ib(default=0.0, converter=float)
    edge_coverage = attr.ib(default=(0.7, 1.0), converter=tuple, validator=_range_pair)
    min_points = attr.ib(default=MIN_POINTS, converter=int)
    max_attempts = attr.ib(default=1000, converter=int)
    size_priors = attr.ib(factory=lambda: dict(DEFAULT_SIZE_PRIORS), validator=_size_priors)

    @noise_m.validator
    def _check_noise(self, attribute, value):
        if not value >= 0:
            raise ValueError(f"noise_m must be non-negative, got {value}")

    @points_per_edge.validator
    def _check_points_per_edge(self, attribute, value):
        if not value > 0:
            raise ValueError(f"points_per_edge must be positive, got {value}")

    @interior_points.validator
    def _check_interior(self, attribute, value):
        if not value >= 0:
            raise ValueError(f"interior_points must be non-negative, got {value}")

    @outlier_ratio.validator
    def _check_outliers(self, attribute, value):
        if not 0 <= value < 1:
            raise ValueError(f"outlier_ratio must lie in [0, 1), got {value}")

    @edge_coverage.validator
    def _check_coverage(self, attribute, value):
        if not value[1] <= 1:
            raise ValueError(f"edge_coverage must not exceed 1, got {value}")

    @max_attempts.validator
    def _check_attempts(self, attribute, value):
        if value < 1:
            raise ValueError(f"max_attempts must be positive, got {value}")


#
# Scan simulation
# ~~~~~~~~~~~~~~~
#


def edge_visibility(box: OrientedBox, sensor) -> np.ndarray:
    """Cosine between each edge's outward normal and the direction to the sensor

    Edge ``k`` runs from corner ``k`` to corner ``k + 1`` of
    :func:`bevbox.geometry.box_corners`. Positive values mean the edge faces
    the sensor.

    """
    corners = box_corners(box)
    edges = np.roll(corners, -1, axis=0) - corners
    normals = np.stack([edges[:, 1], -edges[:, 0]], axis=1)
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    to_sensor = np.asarray(sensor, dtype=float) - (corners + 0.5 * edges)
    to_sensor /= np.linalg.norm(to_sensor, axis=1, keepdims=True)
    return np.sum(normals * to_sensor, axis=1)


def visible_edges(box: OrientedBox, sensor, mode: str) -> List[int]:
    """Indices of the edges that carry points in a visibility mode

    """
    if mode == "full":
        return [0, 1, 2, 3]
    facing = edge_visibility(box, sensor)
    if mode == "lshape":
        return [k for k in range(4) if facing[k] > 0]
    if mode == "single-edge":
        return [int(np.argmax(facing))]
    raise ValueError(f"Unknown visibility mode {mode!r}")


def simulate_scan(
        box: OrientedBox,
        sensor,
        mode: str,
        cfg: SynthConfig,
        rng: np.random.Generator
) -> np.ndarray:
    """Points of one simulated scan of a box

    Parameters
    ----------
    box : OrientedBox
        Scanned object
    sensor : array_like
        Sensor position
    mode : str
        One of :data:`MODES`
    cfg : SynthConfig
        Point density, noise and clutter settings
    rng : np.random.Generator
        Randomness source

    """
    corners = box_corners(box)
    edges = np.roll(corners, -1, axis=0) - corners
    distance = np.linalg.norm(corners - np.asarray(sensor, dtype=float), axis=1)
    parts = []
    for k in visible_edges(box, sensor, mode):
        t = rng.uniform(0.0, 1.0, size=(rng.poisson(cfg.points_per_edge), 1))
        if mode != "full":
            t *= rng.uniform(*cfg.edge_coverage)
            if distance[(k + 1) % 4] < distance[k]:
                t = 1.0 - t
        parts.append(corners[k] + t * edges[k])
    if mode == "full":
        n = rng.poisson(cfg.interior_points)
        local = rng.uniform(-0.5, 0.5, size=(n, 2)) * [box.l, box.w]
        (c, s) = (math.cos(box.theta), math.sin(box.theta))
        parts.append(box.center + local @ np.array([[c, s], [-s, c]]))
    points = np.vstack(parts) if parts else np.zeros((0, 2))
    points = points + rng.normal(0.0, cfg.noise_m, size=points.shape)
    n_outliers = int(round(cfg.outlier_ratio * len(points)))
    if n_outliers:
        half = max(box.l, box.w)
        index = rng.choice(len(points), size=n_outliers, replace=False)
        points[index] = box.center + rng.uniform(-half, half, size=(n_outliers, 2))
    return points


def random_box(class_label: str, cfg: SynthConfig, rng: np.random.Generator) -> OrientedBox:
    """Random box of a class placed around the sensor at the origin

    The longer side is always the length.

    """
    ((w_low, w_high), (l_low, l_high)) = cfg.size_priors[class_label]
    (w, l) = sorted([rng.uniform(w_low, w_high), rng.uniform(l_low, l_high)])
    distance = rng.uniform(*cfg.sensor_range)
    bearing = rng.uniform(-math.pi, math.pi)
    return OrientedBox(
        cx=distance * math.cos(bearing),
        cy=distance * math.sin(bearing),
        w=w,
        l=l,
        theta=normalize_angle(rng.uniform(-0.5 * math.pi, 0.5 * math.pi))
    )


def generate_sample(cfg: SynthConfig, seed: int, index: int) -> Sample:
    """Sample number ``index`` of the synthetic dataset with run seed ``seed``

    Each sample has its own random stream, so datasets can be generated in
    any order or in parallel.

    """
    rng = utils.rng_for(seed, index)
    sensor = np.zeros(2)
    for _ in range(cfg.max_attempts):
        class_label = (
            CLASSES[rng.integers(len(CLASSES))] if cfg.class_label == "mixed"
            else cfg.class_label
        )
        mode = (
            ("full", "lshape")[rng.integers(2)] if cfg.mode == "mixed"
            else cfg.mode
        )
        box = random_box(class_label, cfg, rng)
        points = simulate_scan(box, sensor, mode, cfg, rng)
        if len(points) > cfg.min_points:
            return Sample(
                id=f"synth-{seed}-{index:06d}",
                class_label=class_label,
                points=points,
                gt=box,
                view=mode
            )
    raise ValueError(
        f"Could not generate a sample with more than {cfg.min_points} points "
        f"in {cfg.max_attempts} attempts; the configuration is too sparse"
    )


def generate_synthetic(cfg: SynthConfig, count: int, seed: int) -> List[Sample]:
    """Generate a synthetic dataset

    Parameters
    ----------
    cfg : SynthConfig
        Simulator settings
    count : int
        Number of samples
    seed : int
        Run seed; equal seeds give bit-identical datasets

    """
    if count < 0:
        raise ValueError(f"Sample count must be non-negative, got {count}")
    samples = [generate_sample(cfg, seed, i) for i in range(count)]
    logger.info(
        "Generated %d synthetic samples (class=%s, mode=%s, seed=%d)",
        len(samples), cfg.class_label, cfg.mode, seed
    )
    return samples
