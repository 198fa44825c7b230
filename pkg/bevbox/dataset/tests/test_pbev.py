"""Unit tests for the PBEV text format"""

import math
import os

from numpy.testing import assert_allclose
import pytest

from bevbox.dataset import CLASSES, Sample, pbev
from bevbox.dataset.pbev import PbevParseError
from bevbox.dataset.synthetic import SynthConfig, generate_synthetic
from bevbox.geometry import OrientedBox


SINGLE = """pbev 1
sample a-1 car
box 1 2 1.5 4 0.25
points 3
0 0
1 0.5
-1 2
end
"""


def test_round_trip(tmp_path):
    samples = generate_synthetic(SynthConfig(class_label="mixed", mode="mixed"), 100, seed=1)
    path = str(tmp_path / "data.pbev")
    pbev.write_pbev(path, samples)
    loaded = pbev.read_pbev(path)
    assert [s.id for s in loaded] == [s.id for s in samples]
    for (a, b) in zip(samples, loaded):
        assert a.class_label == b.class_label
        assert a.gt == b.gt
        assert_allclose(b.points, a.points, rtol=1e-8, atol=1e-7)
    return

ID_CHARS = list("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_.:/")
BOUNDARY_THETAS = (0.5 * math.pi, math.nextafter(-0.5 * math.pi, 0.0), 0.0, -0.0)


def random_sample(rng, i):
    """Random sample with orientations on and near the interval bounds"""
    if rng.uniform() < 0.3:
        theta = BOUNDARY_THETAS[rng.integers(len(BOUNDARY_THETAS))]
    else:
        theta = math.nextafter(rng.uniform(-0.5 * math.pi, 0.5 * math.pi), math.inf)
    size = rng.uniform(1e-6, 20.0, size=2)
    return Sample(
        id=f"{i}-" + "".join(rng.choice(ID_CHARS, size=rng.integers(1, 24))),
        class_label=CLASSES[rng.integers(len(CLASSES))],
        points=rng.normal(size=(rng.integers(1, 51), 2)) * 10.0 ** rng.integers(-3, 4),
        gt=OrientedBox(*rng.uniform(-1e3, 1e3, size=2), *size, theta)
    )


def assert_same_samples(expected, loaded):
    assert [s.id for s in loaded] == [s.id for s in expected]
    for (a, b) in zip(expected, loaded):
        assert a.class_label == b.class_label
        assert a.gt == b.gt
        assert_allclose(b.points, a.points, rtol=1e-8, atol=0)
    return


def test_round_trip_random_samples(tmp_path, rng):
    samples = [random_sample(rng, i) for i in range(1000)]
    for s in samples:
        assert_same_samples([s], pbev.loads(pbev.dumps([s])))
    path = str(tmp_path / "random.pbev")
    pbev.write_pbev(path, samples)
    assert_same_samples(samples, pbev.read_pbev(path))
    return


def test_write_replaces_file(tmp_path):
    samples = generate_synthetic(SynthConfig(), 3, seed=2)
    path = str(tmp_path / "data.pbev")
    pbev.write_pbev(path, samples)
    pbev.write_pbev(path, samples[:1])
    assert os.listdir(str(tmp_path)) == ["data.pbev"]
    assert [s.id for s in pbev.read_pbev(path)] == [samples[0].id]
    return


def test_invalid_utf8(tmp_path):
    path = tmp_path / "bad.pbev"
    path.write_bytes(SINGLE.replace("0 0\n", "0 \xff0\n").encode("latin-1"))
    with pytest.raises(PbevParseError, match="^line 5: invalid UTF-8 byte 0xff"):
        pbev.read_pbev(str(path))
    return

def test_parse_single():
    (s,) = pbev.loads(SINGLE)
    assert (s.id, s.class_label) == ("a-1", "car")
    assert s.gt.to_array().tolist() == [1.0, 2.0, 1.5, 4.0, 0.25]
    assert s.points.tolist() == [[0, 0], [1, 0.5], [-1, 2]]
    assert pbev.loads(pbev.dumps([s]))[0].gt == s.gt
    return


@pytest.mark.parametrize("text", ["", "\n", "   \n\n"])
def test_empty(text):
    assert pbev.loads(text) == []
    return


def test_without_final_newline():
    assert len(pbev.loads(SINGLE.rstrip("\n"))) == 1
    return


@pytest.mark.parametrize("old,new,line", [
    ("box 1 2 1.5 4 0.25", "box 1 2 1.5 4 2.0", 3),
    ("box 1 2 1.5 4 0.25", "box 1 2 1.5 4 -1.5707963267948966", 3),
    ("box 1 2 1.5 4 0.25", "box 1 2 0 4 0.25", 3),
    ("box 1 2 1.5 4 0.25", "box 1 2 1.5 4", 3),
    ("box 1 2 1.5 4 0.25", "box 1 nan 1.5 4 0.25", 3),
    ("sample a-1 car", "sample a-1 truck", 2),
    ("pbev 1", "pbev 2", 1),
    ("points 3", "points 4", 8),
    ("points 3", "points three", 4),
    ("1 0.5", "1 0.5 7", 6),
    ("end\n", "", 8),
])
def test_parse_errors(old, new, line):
    with pytest.raises(PbevParseError, match=f"^line {line}:"):
        pbev.loads(SINGLE.replace(old, new))
    return


def test_duplicate_ids():
    with pytest.raises(PbevParseError, match="^line 15: duplicate"):
        pbev.loads(SINGLE + SINGLE[len("pbev 1\n"):])
    return


def test_theta_written_at_upper_bound():
    text = SINGLE.replace("0.25", repr(math.pi / 2))
    (s,) = pbev.loads(text)
    assert s.gt.theta == math.pi / 2
    assert pbev.loads(pbev.dumps([s]))[0].gt.theta == math.pi / 2
    return
