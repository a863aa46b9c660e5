import numpy as np
import pytest

from morsynth.imaging import DepthMap, RgbImage


def gradient_image(height: int, width: int) -> RgbImage:
    """Smooth deterministic test scene with distinct channels."""
    ys = np.linspace(0.0, 1.0, height)[:, None]
    xs = np.linspace(0.0, 1.0, width)[None, :]
    data = np.stack([xs * np.ones_like(ys), ys * np.ones_like(xs), 0.5 * (xs + ys)], axis=2)
    return RgbImage(data)


def ramp_depth(height: int, width: int, near: float = 5.0, far: float = 200.0) -> DepthMap:
    """Left-to-right depth ramp in metres."""
    xs = np.linspace(near, far, width)[None, :]
    return DepthMap(np.broadcast_to(xs, (height, width)).copy())


def random_image(rng: np.random.Generator, height: int, width: int) -> RgbImage:
    return RgbImage(rng.random((height, width, 3)))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
