"""Search-based L-shape fitting

The non-learning baseline: sweep the box orientation over a quarter turn,
score every candidate by a criterion computed from the point projections on
the two box axes and return the tightest box embracing all points at the best
orientation.

"""

import math

import attr
import numpy as np

from bevbox.geometry import OrientedBox, as_points, rectangle_from_projections


CRITERIA = ("area", "closeness", "variance")


class SlfFitError(ValueError):
    """The point set cannot define a box"""


@attr.s(frozen=True)
class SlfConfig:
    """L-shape fitting settings

    Parameters
    ----------
    criterion : str
        ``area``, ``closeness`` or ``variance``
    step : float
        Orientation search resolution in radians
    d0 : float
        Closeness distance floor in meters

    """

    criterion = attr.ib(default="area", validator=attr.validators.in_(CRITERIA))
    step = attr.ib(default=math.radians(0.5), converter=float)
    d0 = attr.ib(default=0.01, converter=float)

    @step.validator
    def _check_step(self, attribute, value):
        if not 0 < value <= math.pi / 4:
            raise ValueError(f"step must lie in (0, pi/4], got {value}")

    @d0.validator
    def _check_d0(self, attribute, value):
        if not value > 0:
            raise ValueError(f"d0 must be positive, got {value}")


def candidate_angles(step: float) -> np.ndarray:
    """Search grid ``0, step, 2 step, ... < π/2``

    """
    return np.arange(0.0, 0.5 * math.pi, step)


def _edge_distances(proj: np.ndarray) -> np.ndarray:
    """Distance of each projection to the nearer end of its range"""
    low = proj.min(axis=1, keepdims=True)
    high = proj.max(axis=1, keepdims=True)
    return np.minimum(proj - low, high - proj)


def _masked_variance(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Row-wise variance over masked entries, 0 for fewer than two entries"""
    n = mask.sum(axis=1)
    safe_n = np.maximum(n, 1)
    mean = np.sum(values * mask, axis=1) / safe_n
    var = np.sum(mask * (values - mean[:, None]) ** 2, axis=1) / safe_n
    return np.where(n >= 2, var, 0.0)


def score_area(proj1, proj2, cfg) -> np.ndarray:
    return -(np.ptp(proj1, axis=1) * np.ptp(proj2, axis=1))


def score_closeness(proj1, proj2, cfg) -> np.ndarray:
    d = np.minimum(_edge_distances(proj1), _edge_distances(proj2))
    return np.sum(1.0 / np.maximum(d, cfg.d0), axis=1)


def score_variance(proj1, proj2, cfg) -> np.ndarray:
    (d1, d2) = (_edge_distances(proj1), _edge_distances(proj2))
    # Ties go to the e1 family
    near1 = d1 <= d2
    return -(_masked_variance(d1, near1) + _masked_variance(d2, ~near1))


SCORES = {
    "area": score_area,
    "closeness": score_closeness,
    "variance": score_variance,
}


def criterion_scores(points: np.ndarray, cfg: SlfConfig):
    """Candidate angles and their scores (higher is better)

    """
    angles = candidate_angles(cfg.step)
    (c, s) = (np.cos(angles)[:, None], np.sin(angles)[:, None])
    proj1 = c * points[:, 0] + s * points[:, 1]
    proj2 = -s * points[:, 0] + c * points[:, 1]
    return (angles, proj1, proj2, SCORES[cfg.criterion](proj1, proj2, cfg))


def slf_fit(points, cfg: SlfConfig = SlfConfig()) -> OrientedBox:
    """Fit the tightest embracing box at the best-scoring orientation

    Ties between orientations go to the smallest angle. The output has
    ``l >= w`` with ``theta`` along the longer side.

    Parameters
    ----------
    points : array_like
        ``(n, 2)`` points, at least three and not all coincident
    cfg : SlfConfig
        Criterion and search settings

    """
    points = as_points(points)
    if len(points) < 3:
        raise SlfFitError(f"L-shape fitting needs at least 3 points, got {len(points)}")
    if not np.all(np.isfinite(points)):
        raise SlfFitError("Non-finite point coordinates")
    if np.all(points == points[0]):
        raise SlfFitError("All points coincide")
    (angles, proj1, proj2, scores) = criterion_scores(points, cfg)
    i = int(np.argmax(scores))
    return rectangle_from_projections(
        angles[i], proj1[i].min(), proj1[i].max(), proj2[i].min(), proj2[i].max()
    )
