"""Top-level configuration for PyTest

"""

import numpy as np
import pytest

from bevbox.dataset import Sample, SynthConfig, generate_synthetic
from bevbox.geometry import OrientedBox, box_corners
from bevbox.network import NetworkConfig, init_params


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False,
        help="run the desk-scale training and timing checks"
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale end-to-end check")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="module")
def car_samples():
    """Forty synthetic cars, full outlines and L-shapes"""
    return generate_synthetic(SynthConfig(class_label="car", mode="mixed"), 40, seed=3)


@pytest.fixture
def corner_sample():
    """The four exact corners of a 2 m by 4 m box at 30 degrees, densely
    sampled along its edges"""
    box = OrientedBox(cx=12.0, cy=-3.0, w=2.0, l=4.0, theta=np.radians(30.0))
    corners = box_corners(box)
    t = np.linspace(0.0, 1.0, 11)[:-1, None]
    points = np.vstack([
        corners[i] + t * (corners[(i + 1) % 4] - corners[i]) for i in range(4)
    ])
    return Sample(id="corners", class_label="car", points=points, gt=box)


@pytest.fixture(params=[
    NetworkConfig(scale=1 / 16, n_points=32),
    NetworkConfig(scale=1 / 16, n_points=32, concat_enabled=False, angle_mode="sincos"),
    NetworkConfig(scale=1 / 16, n_points=32, angle_mode="direct_theta", center_mode="median"),
], ids=["sincos2-concat", "sincos-split", "direct-median"])
def small_network(request):
    """Tiny network configurations with freshly initialized parameters"""
    cfg = request.param
    return (cfg, init_params(cfg, seed=5))
