import numpy as np
import pytest

from kpsign.layout import build_layout
from kpsign.windows import Frame, Window


@pytest.fixture(scope="session")
def upper_layout():
    return build_layout(0, ())


@pytest.fixture(scope="session")
def full_layout():
    return build_layout(468)


@pytest.fixture(scope="session")
def reduced_layout():
    return build_layout(128)


def make_window(k=5, t=16, seed=0, width=444.0, height=444.0, label_id=0, signer_id=0, start=0):
    """Random in-frame window for transform tests.

    Coordinates are quantized to float32 like KPSQ-loaded data.
    """
    rng = np.random.default_rng(seed)
    coords = rng.uniform(50.0, 350.0, size=(t, k, 2)).astype(np.float32).astype(np.float64)
    frames = tuple(Frame(coords[i], width, height, start + i) for i in range(t))
    return Window(frames, label_id, signer_id)


@pytest.fixture
def window():
    return make_window()
