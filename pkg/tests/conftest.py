import numpy as np
import pytest
from hypothesis import settings

from hotspot_meta.config import GenConfig, RunConfig
from hotspot_meta.geom import Layout, Rect

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))


def single_rect_layout(x1, y1, x2, y2, width=20_000, height=20_000):
    return Layout((Rect(x1, y1, x2, y2),), width, height)


@pytest.fixture
def small_gen():
    """A 12 um square with 60 rects: quick to label, still has both classes."""
    return GenConfig(width=12_000, height=12_000, rect_count=60, motif_rate=0.1)


@pytest.fixture
def small_run(small_gen):
    return RunConfig(gen=small_gen)
