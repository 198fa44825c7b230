"""Oriented box geometry in the bird's-eye-view plane

Boxes are parameterized by center ``(cx, cy)``, width ``w``, length ``l`` and
orientation ``theta``. The length edges run along ``(cos θ, sin θ)`` and the
orientation is only defined modulo π, so ``theta`` always lies in
``(-π/2, π/2]``.

.. rubric:: Objects

.. autosummary::
   :toctree:

   Point2
   OrientedBox

"""

import math
from typing import List

import attr
import numpy as np
from scipy import spatial


HALF_PI = 0.5 * math.pi

MIN_AREA = 1e-12
"""Intersection areas below this are treated as zero (m²)"""

MIN_EXTENT = 1e-9
"""Boxes thinner than this have zero area for IoU purposes (m)"""


def _finite(instance, attribute, value):
    if not math.isfinite(value):
        raise ValueError(f"{attribute.name} must be finite, got {value}")


def _positive(instance, attribute, value):
    if not value > 0:
        raise ValueError(f"{attribute.name} must be positive, got {value}")


def _normalized(instance, attribute, value):
    if not -HALF_PI < value <= HALF_PI:
        raise ValueError(
            f"{attribute.name} must lie in (-pi/2, pi/2], got {value}"
        )


@attr.s(frozen=True)
class Point2:
    """A bird's-eye-view point in meters

    """

    x = attr.ib(converter=float, validator=_finite)
    y = attr.ib(converter=float, validator=_finite)

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


@attr.s(frozen=True)
class OrientedBox:
    """Oriented rectangle in the bird's-eye-view plane

    Parameters
    ----------
    cx, cy : float
        Center in meters
    w : float
        Width in meters, the extent along ``(-sin θ, cos θ)``
    l : float
        Length in meters, the extent along ``(cos θ, sin θ)``
    theta : float
        Orientation in radians, in ``(-π/2, π/2]``

    """

    cx = attr.ib(converter=float, validator=_finite)
    cy = attr.ib(converter=float, validator=_finite)
    w = attr.ib(converter=float, validator=[_finite, _positive])
    l = attr.ib(converter=float, validator=[_finite, _positive])
    theta = attr.ib(converter=float, validator=[_finite, _normalized])

    @property
    def center(self) -> np.ndarray:
        return np.array([self.cx, self.cy])

    @property
    def area(self) -> float:
        return self.w * self.l

    def to_array(self) -> np.ndarray:
        """``[cx, cy, w, l, theta]``"""
        return np.array([self.cx, self.cy, self.w, self.l, self.theta])

    def translated(self, dx: float, dy: float) -> "OrientedBox":
        return attr.evolve(self, cx=self.cx + dx, cy=self.cy + dy)

    def rotated(self, phi: float) -> "OrientedBox":
        """Rotate the box about the origin by ``phi`` radians

        """
        (c, s) = (math.cos(phi), math.sin(phi))
        return OrientedBox(
            cx=c * self.cx - s * self.cy,
            cy=s * self.cx + c * self.cy,
            w=self.w,
            l=self.l,
            theta=normalize_angle(self.theta + phi)
        )


#
# Angles
# ~~~~~~
#


def normalize_angle(theta: float) -> float:
    """Wrap an angle to ``(-π/2, π/2]`` modulo π

    Examples
    --------

    .. code-block:: python

        normalize_angle(math.pi)
        # 0.0
        normalize_angle(-math.pi / 2)
        # 1.5707963267948966

    """
    theta = float(theta)
    if not math.isfinite(theta):
        raise ValueError(f"Angle must be finite, got {theta}")
    t = math.fmod(theta, math.pi)
    if t <= -HALF_PI:
        t += math.pi
    elif t > HALF_PI:
        t -= math.pi
    # Guards against rounding onto the open end
    return HALF_PI if t <= -HALF_PI else t


def unit_vectors(theta: float):
    """Length and width directions ``(e1, e2)`` of a box orientation

    """
    (c, s) = (math.cos(theta), math.sin(theta))
    return (np.array([c, s]), np.array([-s, c]))


#
# Corners and containment
# ~~~~~~~~~~~~~~~~~~~~~~~
#


def box_corners(box: OrientedBox) -> np.ndarray:
    """Corners of a box in counter-clockwise order

    Returns a ``(4, 2)`` array. The first two corners lie on the front
    length-end of the box, so ``corners[1] - corners[0]`` spans the width and
    ``corners[1] - corners[2]`` spans the length.

    Examples
    --------

    .. code-block:: python

        box_corners(OrientedBox(0, 0, w=2, l=4, theta=0))
        # array([[ 2., -1.],
        #        [ 2.,  1.],
        #        [-2.,  1.],
        #        [-2., -1.]])

    """
    (e1, e2) = unit_vectors(box.theta)
    local = np.array([
        [0.5 * box.l, -0.5 * box.w],
        [0.5 * box.l, 0.5 * box.w],
        [-0.5 * box.l, 0.5 * box.w],
        [-0.5 * box.l, -0.5 * box.w],
    ])
    return box.center + local[:, :1] * e1 + local[:, 1:] * e2


def box_from_corners(corners: np.ndarray) -> OrientedBox:
    """Inverse of :func:`box_corners`

    """
    corners = np.asarray(corners, dtype=float)
    length_edge = corners[1] - corners[2]
    width_edge = corners[1] - corners[0]
    center = corners.mean(axis=0)
    return OrientedBox(
        cx=center[0],
        cy=center[1],
        w=np.hypot(*width_edge),
        l=np.hypot(*length_edge),
        theta=normalize_angle(math.atan2(length_edge[1], length_edge[0]))
    )


def to_box_frame(points: np.ndarray, box: OrientedBox) -> np.ndarray:
    """Point coordinates along the box's length and width directions

    """
    (e1, e2) = unit_vectors(box.theta)
    d = np.asarray(points, dtype=float) - box.center
    return np.stack([d @ e1, d @ e2], axis=-1)


def points_in_box(points: np.ndarray, box: OrientedBox, margin: float = 0.0) -> np.ndarray:
    """Boolean mask of the points inside (or on) a box inflated by ``margin``

    """
    local = to_box_frame(points, box)
    return (
        (np.abs(local[:, 0]) <= 0.5 * box.l + margin) &
        (np.abs(local[:, 1]) <= 0.5 * box.w + margin)
    )


#
# Metrics
# ~~~~~~~
#


def center_error(pred: OrientedBox, gt: OrientedBox) -> float:
    """Euclidean distance between box centers

    """
    return math.hypot(pred.cx - gt.cx, pred.cy - gt.cy)


def orientation_error(pred: OrientedBox, gt: OrientedBox) -> float:
    """Smaller signed rotation from the predicted to the true orientation

    Always in ``(-π/2, π/2]``.

    """
    err = gt.theta - pred.theta
    if err > HALF_PI:
        err -= math.pi
    elif err <= -HALF_PI:
        # -π/2 itself maps to the closed end
        err += math.pi
    return err


def polygon_area(polygon: np.ndarray) -> float:
    """Signed shoelace area, positive for counter-clockwise polygons

    """
    if len(polygon) < 3:
        return 0.0
    (x, y) = (polygon[:, 0], polygon[:, 1])
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def clip_polygon(subject: np.ndarray, clipper: np.ndarray) -> np.ndarray:
    """Clip a polygon against a convex counter-clockwise polygon

    Sequential half-plane clipping (Sutherland–Hodgman). Returns the
    vertices of the intersection, possibly an empty ``(0, 2)`` array.

    """
    output = [np.asarray(p, dtype=float) for p in subject]
    n = len(clipper)
    for i in range(n):
        if not output:
            break
        (a, b) = (clipper[i], clipper[(i + 1) % n])
        vertices = output
        output = []
        for j in range(len(vertices)):
            (s, e) = (vertices[j - 1], vertices[j])
            (cs, ce) = (_cross(a, b, s), _cross(a, b, e))
            if ce >= 0:
                if cs < 0:
                    output.append(s + (e - s) * (cs / (cs - ce)))
                output.append(e)
            elif cs >= 0:
                output.append(s + (e - s) * (cs / (cs - ce)))
    return np.array(output).reshape(-1, 2)


def intersection_area(a: OrientedBox, b: OrientedBox) -> float:
    """Overlap area of two boxes, zero below :data:`MIN_AREA`

    """
    if min(a.w, a.l, b.w, b.l) < MIN_EXTENT:
        return 0.0
    area = polygon_area(clip_polygon(box_corners(a), box_corners(b)))
    return area if area >= MIN_AREA else 0.0


def iou(a: OrientedBox, b: OrientedBox) -> float:
    """Intersection over union of two oriented boxes

    Examples
    --------

    .. code-block:: python

        square = OrientedBox(0, 0, 1, 1, 0)
        iou(square, square.rotated(math.pi / 4))
        # 0.7071067811865...

    """
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    union = a.area + b.area - inter
    return min(1.0, max(0.0, inter / union))


def monte_carlo_iou(
        a: OrientedBox,
        b: OrientedBox,
        n_samples: int = 10 ** 6,
        rng: np.random.Generator = None
) -> float:
    """IoU estimated by uniform sampling over the boxes' joint bounding region

    Independent of the polygon clipping in :func:`iou` and meant as its
    cross-check.

    """
    rng = np.random.default_rng(0) if rng is None else rng
    corners = np.vstack([box_corners(a), box_corners(b)])
    (low, high) = (corners.min(axis=0), corners.max(axis=0))
    samples = rng.uniform(low, high, size=(n_samples, 2))
    (in_a, in_b) = (points_in_box(samples, a), points_in_box(samples, b))
    union = np.count_nonzero(in_a | in_b)
    return 0.0 if union == 0 else np.count_nonzero(in_a & in_b) / union


def min_area_rectangle(points: np.ndarray) -> OrientedBox:
    """Minimum-area enclosing rectangle by rotating calipers

    Every edge of the convex hull is tried as a rectangle side. The result
    follows the same convention as the L-shape fit: ``l >= w`` and ``theta``
    along the longer side.

    """
    points = np.asarray(points, dtype=float)
    try:
        hull = points[spatial.ConvexHull(points).vertices]
    except spatial.QhullError as err:
        raise ValueError(f"Degenerate point set: {err}")
    edges = np.roll(hull, -1, axis=0) - hull
    angles = np.unique(np.mod(np.arctan2(edges[:, 1], edges[:, 0]), HALF_PI))
    (c, s) = (np.cos(angles)[:, None], np.sin(angles)[:, None])
    u = c * hull[:, 0] + s * hull[:, 1]
    v = -s * hull[:, 0] + c * hull[:, 1]
    areas = np.ptp(u, axis=1) * np.ptp(v, axis=1)
    i = int(np.argmin(areas))
    return rectangle_from_projections(
        angles[i], u[i].min(), u[i].max(), v[i].min(), v[i].max()
    )


def rectangle_from_projections(theta, u_min, u_max, v_min, v_max) -> OrientedBox:
    """Box spanning projection intervals along ``(e1, e2)`` of ``theta``

    The longer side becomes the length. Extents are clamped below at
    :data:`MIN_EXTENT`.

    """
    (e1, e2) = unit_vectors(theta)
    center = 0.5 * (u_min + u_max) * e1 + 0.5 * (v_min + v_max) * e2
    (ext1, ext2) = (
        max(u_max - u_min, MIN_EXTENT), max(v_max - v_min, MIN_EXTENT)
    )
    (l, w, angle) = (
        (ext1, ext2, theta) if ext1 >= ext2 else (ext2, ext1, theta + HALF_PI)
    )
    return OrientedBox(
        cx=center[0], cy=center[1], w=w, l=l, theta=normalize_angle(angle)
    )


def rotate_points(points: np.ndarray, phi: float) -> np.ndarray:
    """Rotate points about the origin

    """
    (c, s) = (math.cos(phi), math.sin(phi))
    return np.asarray(points, dtype=float) @ np.array([[c, s], [-s, c]])


def as_points(points) -> np.ndarray:
    """Coerce a point sequence to a ``(n, 2)`` float array

    Accepts arrays and sequences of :class:`Point2`.

    """
    if len(points) and isinstance(points[0], Point2):
        points = [p.to_array() for p in points]
    array = np.asarray(points, dtype=float).reshape(-1, 2)
    return array


__all__ = [
    "Point2",
    "OrientedBox",
    "normalize_angle",
    "box_corners",
    "box_from_corners",
    "points_in_box",
    "center_error",
    "orientation_error",
    "iou",
    "monte_carlo_iou",
    "min_area_rectangle",
]
