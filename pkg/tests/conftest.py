import numpy as np
import pytest

from sosflow import (
    BvBallSpec,
    GridSpec,
    HeightProfile,
    ThresholdRule,
    linear_profile,
    reconstruct,
    sine_profile,
)
from sosflow.grid import normalize_logslope, random_logslope


@pytest.fixture
def rule():
    return ThresholdRule()


@pytest.fixture
def spec64():
    return GridSpec(64, 1.0)


@pytest.fixture
def spec4():
    return GridSpec(4, 1.0)


def random_profile(spec, rng, amplitude=0.2, modes=3):
    """Random smooth monotone mean-zero profile."""
    return reconstruct(random_logslope(spec, rng, amplitude=amplitude, modes=modes))


def two_piece_kink(n, length=1.0, low=0.5, high=1.5):
    """Profile with slope `low` on the first half and `high` on the second.

    Only valid when the two slopes average to 1/length; used to pin the
    exact +-ln(high/low) concentrated curvature masses.
    """
    spec = GridSpec(n, length)
    u = np.where(np.arange(n) < n // 2, low, high)
    assert abs(u.sum() * spec.dx - 1.0) < 1e-12
    return HeightProfile.from_slopes(spec, u)
