"""Labeled point-cloud samples and the operations on them

"""

import hashlib
import logging
from typing import List, Sequence

import attr
import numpy as np

from bevbox import utils
from bevbox.geometry import OrientedBox, Point2


logger = logging.getLogger(__name__)


CLASSES = ("car", "pedestrian", "cyclist")

MIN_POINTS = 30
"""Samples are kept only with strictly more points than this"""

N_POINTS = 512
"""Resampled cloud size"""

VIEWS = ("full", "lshape", "single-edge")
"""How much of an object a scan sees: every edge, the edges facing the
sensor, or the one edge facing it most directly"""


def _as_cloud(points) -> np.ndarray:
    return np.array(points, dtype=float).reshape(-1, 2)


def _check_cloud(instance, attribute, value):
    if len(value) == 0:
        raise ValueError(f"Sample {instance.id!r} has no points")
    if not np.all(np.isfinite(value)):
        raise ValueError(f"Sample {instance.id!r} has non-finite points")


@attr.s(frozen=True, eq=False)
class Sample:
    """One object: its class, its BEV points and its ground-truth box

    Parameters
    ----------
    id : str
        Unique sample identifier without whitespace
    class_label : str
        One of :data:`CLASSES`
    points : np.ndarray
        ``(n, 2)`` point coordinates in meters
    gt : OrientedBox
        Ground-truth box
    view : str, optional
        One of :data:`VIEWS` when known. Simulated samples record it; PBEV
        files do not carry it.

    """

    id = attr.ib(converter=str)
    class_label = attr.ib(validator=attr.validators.in_(CLASSES))
    points = attr.ib(converter=_as_cloud, validator=_check_cloud)
    gt = attr.ib(validator=attr.validators.instance_of(OrientedBox))
    view = attr.ib(default=None, validator=attr.validators.optional(attr.validators.in_(VIEWS)))

    @id.validator
    def _check_id(self, attribute, value):
        if not value or any(c.isspace() for c in value):
            raise ValueError(f"Invalid sample id {value!r}")

    def __len__(self) -> int:
        return len(self.points)


@attr.s(frozen=True)
class DatasetSplit:
    """Disjoint train and test sample lists

    """

    train = attr.ib(converter=list)
    test = attr.ib(converter=list)
    seed = attr.ib(converter=int)

    def __attrs_post_init__(self):
        overlap = {s.id for s in self.train} & {s.id for s in self.test}
        if overlap:
            raise ValueError(
                f"Train and test share {len(overlap)} sample ids, "
                f"e.g. {sorted(overlap)[0]!r}"
            )


#
# Point cloud statistics
# ~~~~~~~~~~~~~~~~~~~~~~
#


def _non_empty(points) -> np.ndarray:
    points = _as_cloud(points)
    if len(points) == 0:
        raise ValueError("Empty point list")
    return points


def cloud_mean(points) -> Point2:
    """Componentwise arithmetic mean of a cloud

    """
    return Point2(*_non_empty(points).mean(axis=0))


def cloud_median(points) -> Point2:
    """Componentwise median of a cloud

    Even counts average the two middle values.

    """
    return Point2(*np.median(_non_empty(points), axis=0))


#
# Resampling
# ~~~~~~~~~~
#


def resample(s: Sample, n: int = N_POINTS, seed: int = 0) -> Sample:
    """Resample a cloud to exactly ``n`` points

    Draws without replacement when the cloud is large enough, otherwise keeps
    every point and fills up with uniform draws with replacement. The result
    only ever contains points of the source cloud and the ground truth is
    carried over untouched.

    Parameters
    ----------
    s : Sample
        Source sample
    n : int
        Target number of points
    seed : int
        Seed of the draw

    """
    if n < 1:
        raise ValueError(f"Resample size must be positive, got {n}")
    m = len(s.points)
    if m == 0:
        raise ValueError(f"Sample {s.id!r} has no points")
    rng = np.random.default_rng(seed)
    index = (
        rng.choice(m, size=n, replace=False) if m >= n
        else np.concatenate([np.arange(m), rng.integers(0, m, size=n - m)])
    )
    return attr.evolve(s, points=s.points[index])


def resample_many(samples: Sequence[Sample], n: int = N_POINTS, seed: int = 0) -> List[Sample]:
    """Resample every sample with its own child seed

    """
    return [
        resample(s, n, utils.child_seed(seed, i)) for (i, s) in enumerate(samples)
    ]


def stack_points(samples: Sequence[Sample]) -> np.ndarray:
    """Stack equally sized clouds into a ``(B, N, 2)`` batch

    """
    sizes = {len(s.points) for s in samples}
    if len(sizes) > 1:
        raise ValueError(f"Clouds have different sizes: {sorted(sizes)}")
    return np.stack([s.points for s in samples])


#
# Splitting and bookkeeping
# ~~~~~~~~~~~~~~~~~~~~~~~~~
#


def split_samples(samples: Sequence[Sample], ratio: float, seed: int) -> DatasetSplit:
    """Random train/test split

    Parameters
    ----------
    samples : Sequence[Sample]
        Samples with unique ids
    ratio : float
        Fraction of samples going to the training set
    seed : int
        Seed of the shuffle

    """
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"Split ratio must lie in [0, 1], got {ratio}")
    ids = [s.id for s in samples]
    if len(set(ids)) != len(ids):
        raise ValueError("Sample ids are not unique")
    order = np.random.default_rng(seed).permutation(len(samples))
    n_train = int(round(ratio * len(samples)))
    logger.info(
        "Split %d samples into %d train / %d test",
        len(samples), n_train, len(samples) - n_train
    )
    return DatasetSplit(
        train=[samples[i] for i in order[:n_train]],
        test=[samples[i] for i in order[n_train:]],
        seed=seed
    )


def filter_min_points(samples: Sequence[Sample], min_points: int = MIN_POINTS) -> List[Sample]:
    """Keep the samples with strictly more than ``min_points`` points

    """
    return utils.listfilter(lambda s: len(s.points) > min_points)(samples)


def dataset_hash(samples: Sequence[Sample]) -> str:
    """Content digest of a sample list

    """
    digest = hashlib.sha256()
    for s in samples:
        digest.update(f"{s.id} {s.class_label}\n".encode("utf-8"))
        digest.update(utils.sha256_arrays([s.gt.to_array(), s.points]).encode())
    return digest.hexdigest()[:16]
