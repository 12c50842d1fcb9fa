import math

import numpy as np
import pytest

from mergeguard.geometry import Pose2
from mergeguard.model import Scan

DEFAULT_INFO = np.diag([100.0, 100.0, 400.0])


def random_scan(rng, n_points=None, full_circle=True, range_max=10.0,
                pose=None) -> Scan:
    """Random but valid scan: sorted bearings, ranges in (0, range_max]."""
    n = n_points or int(rng.integers(40, 160))
    if full_circle:
        bearings = np.sort(rng.uniform(-math.pi + 1e-6, math.pi, n))
    else:
        lo = rng.uniform(-math.pi, 0.0)
        hi = lo + rng.uniform(0.8, 2.5)
        bearings = np.sort(rng.uniform(lo, hi, n))
    bearings = np.unique(bearings)
    ranges = rng.uniform(0.3, range_max, bearings.size)
    pose = pose or Pose2(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-math.pi, math.pi))
    return Scan(pose, bearings, ranges, range_max)


def wall_scan(pose: Pose2, wall_distance=4.0, n=180, range_max=10.0, noise=0.0,
              seed=0) -> Scan:
    """Scan of the fixed square room [-w, w]^2 (world frame) from inside it."""
    step = 2 * math.pi / n
    bearings = -math.pi + step / 2 + step * np.arange(n)
    world = pose.theta + bearings
    ca, sa = np.cos(world), np.sin(world)
    with np.errstate(divide="ignore"):
        tx = (np.sign(ca) * wall_distance - pose.x) / ca
        ty = (np.sign(sa) * wall_distance - pose.y) / sa
    tx[np.abs(ca) < 1e-12] = np.inf
    ty[np.abs(sa) < 1e-12] = np.inf
    ranges = np.minimum(tx, ty)
    if noise > 0.0:
        ranges = ranges + np.random.default_rng(seed).normal(0, noise, ranges.shape)
    keep = (ranges > 0) & (ranges <= range_max)
    return Scan(pose, bearings[keep], ranges[keep], range_max)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
