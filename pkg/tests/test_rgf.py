import math

import numpy as np
import pytest

from morsynth.imaging import BinaryMask, DepthMap, RgbImage, ScalarMap
from morsynth.rain import GroundTruthMaps, RainParams, compose_mor
from morsynth.rgf import (
    Decomposition,
    RgfParams,
    decompose,
    gaussian_blur,
    joint_bilateral_step,
    rolling_guidance_filter,
)
from conftest import random_image

# one double-precision rounding step: the bound within which "exact in
# working precision" is attainable for low + high = input
RECONSTRUCTION_TOL = 2.0 ** -52


def dense_bilateral_reference(image, guidance, sigma_s, sigma_r, radius):
    """Straight per-pixel transcription of the filter equation."""
    height, width, _ = image.shape
    out = np.zeros_like(image)
    for y in range(height):
        for x in range(width):
            num = np.zeros(3)
            den = 0.0
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    yy, xx = y + dy, x + dx
                    if not (0 <= yy < height and 0 <= xx < width):
                        continue
                    ws = math.exp(-(dy * dy + dx * dx) / (2 * sigma_s * sigma_s))
                    gd = guidance[y, x] - guidance[yy, xx]
                    wr = math.exp(-float(gd @ gd) / (2 * sigma_r * sigma_r))
                    num += ws * wr * image[yy, xx]
                    den += ws * wr
            out[y, x] = num / den
    return out


def ramp_with_streaks(height=64, width=96, amplitude=0.3, seed=9):
    """Smooth horizontal ramp plus thin vertical streaks of known support.

    Streaks are one pixel wide, well separated, and the ramp tops out at
    0.65 so adding the amplitude never clips: the streak signal is
    exactly `amplitude` on its mask.
    """
    xs = np.linspace(0.1, 0.65, width)[None, :]
    ramp = np.broadcast_to(xs, (height, width)).copy()
    rng = np.random.default_rng(seed)
    streaks = np.zeros((height, width))
    for col in range(6, width - 6, 11):
        top = int(rng.integers(0, height // 3))
        length = int(rng.integers(height // 2, height - top))
        streaks[top : top + length, col] = amplitude
    clean = RgbImage(np.stack([ramp] * 3, axis=2))
    streaky = RgbImage(np.stack([ramp + streaks] * 3, axis=2))
    mask = streaks > 0
    return clean, streaky, mask


# ---------------------------------------------------------------------------
# the bilateral step


def test_step_matches_dense_reference_impulse():
    # 1-D impulse row with zero guidance -> truncated normalised Gaussian
    data = np.zeros((1, 5, 3))
    data[0, 2, :] = 1.0
    image = RgbImage(data)
    guidance = RgbImage(np.zeros_like(data))
    params = RgfParams(sigma_s=1.0, sigma_r=0.1, n_iter=1)
    got = joint_bilateral_step(image, guidance, params)
    want = dense_bilateral_reference(data, guidance.data, 1.0, 0.1, params.radius)
    assert np.abs(got.data - want).max() < 1e-12


def test_step_matches_dense_reference_random(rng):
    image = random_image(rng, 10, 12)
    guidance = random_image(rng, 10, 12)
    params = RgfParams(sigma_s=1.2, sigma_r=0.15, n_iter=1, window_radius=3)
    got = joint_bilateral_step(image, guidance, params)
    want = dense_bilateral_reference(image.data, guidance.data, 1.2, 0.15, 3)
    assert np.abs(got.data - want).max() < 1e-12


def test_step_constant_image_is_exact_fixed_point(rng):
    data = np.full((9, 11, 3), 0.37)
    image = RgbImage(data)
    guidance = random_image(rng, 9, 11)
    out = joint_bilateral_step(image, guidance, RgfParams(sigma_s=2.0))
    assert np.array_equal(out.data, data)


def test_step_constant_guidance_equals_gaussian(rng):
    image = random_image(rng, 14, 17)
    guidance = RgbImage(np.full((14, 17, 3), 0.5))
    params = RgfParams(sigma_s=2.0, sigma_r=0.1)
    stepped = joint_bilateral_step(image, guidance, params)
    blurred = gaussian_blur(image, 2.0, params.radius)
    assert np.abs(stepped.data - blurred.data).max() < 1e-6


def test_step_shape_mismatch():
    with pytest.raises(ValueError):
        joint_bilateral_step(
            RgbImage(np.zeros((4, 4, 3))), RgbImage(np.zeros((4, 5, 3))), RgfParams()
        )


# ---------------------------------------------------------------------------
# gaussian blur helper


def test_gaussian_blur_matches_dense_window(rng):
    # separable with per-axis renormalisation == dense truncated window
    image = random_image(rng, 9, 13)
    sigma, radius = 1.7, 4
    blurred = gaussian_blur(image, sigma, radius)
    height, width, _ = image.data.shape
    want = np.zeros_like(image.data)
    for y in range(height):
        for x in range(width):
            num = np.zeros(3)
            den = 0.0
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    yy, xx = y + dy, x + dx
                    if not (0 <= yy < height and 0 <= xx < width):
                        continue
                    w = math.exp(-(dy * dy + dx * dx) / (2 * sigma * sigma))
                    num += w * image.data[yy, xx]
                    den += w
            want[y, x] = num / den
    assert np.abs(blurred.data - want).max() < 1e-12


def test_gaussian_blur_preserves_mean_roughly(rng):
    image = random_image(rng, 32, 32)
    blurred = gaussian_blur(image, 3.0)
    assert blurred.data.mean() == pytest.approx(image.data.mean(), abs=0.01)


# ---------------------------------------------------------------------------
# the rolling filter


def test_filter_constant_fixed_point_exact():
    data = np.full((16, 20, 3), 0.73)
    out = rolling_guidance_filter(RgbImage(data), RgfParams(sigma_s=2.0, n_iter=4))
    assert np.array_equal(out.data, data)


def test_first_iteration_is_gaussian(rng):
    image = random_image(rng, 20, 24)
    params = RgfParams(sigma_s=3.0, sigma_r=0.1, n_iter=1)
    filtered = rolling_guidance_filter(image, params)
    blurred = gaussian_blur(image, 3.0, params.radius)
    assert np.abs(filtered.data - blurred.data).max() < 1e-6


def test_fast_first_iteration_matches(rng):
    image = random_image(rng, 16, 16)
    params = RgfParams(sigma_s=2.0, sigma_r=0.1, n_iter=3)
    slow = rolling_guidance_filter(image, params)
    fast = rolling_guidance_filter(image, params, fast_first_iteration=True)
    assert np.abs(slow.data - fast.data).max() < 1e-6


def test_shift_equivariance_interior(rng):
    params = RgfParams(sigma_s=1.5, sigma_r=0.12, n_iter=3, window_radius=4)
    base = random_image(rng, 40, 44)
    shift = 3
    shifted = RgbImage(np.roll(base.data, shift, axis=1))
    filtered_base = rolling_guidance_filter(base, params)
    filtered_shifted = rolling_guidance_filter(shifted, params)
    # influence propagates one window per iteration, plus the wrap columns
    margin = params.radius * params.n_iter + shift
    inner = (slice(margin, -margin), slice(margin, -margin))
    rolled = np.roll(filtered_base.data, shift, axis=1)
    assert np.abs(filtered_shifted.data[inner] - rolled[inner]).max() < 1e-9


def test_filter_smooths_streaks_towards_ramp():
    clean, streaky, _ = ramp_with_streaks()
    params = RgfParams()  # 3.0 / 0.1 / 6
    filtered = rolling_guidance_filter(streaky, params)
    close = np.abs(filtered.data - clean.data).max(axis=2) <= 0.05
    assert close.mean() >= 0.95


def test_monotone_smoothing_logged():
    # row total variation is expected not to grow across iterations, but
    # that is an empirical observation rather than a theorem: a violation
    # only logs, while the hard requirement is that the filtered result is
    # smoother than the streaky input
    _, streaky, _ = ramp_with_streaks()
    params = RgfParams()

    def row_tv(data):
        return float(np.abs(np.diff(data, axis=1)).sum())

    guidance = RgbImage(np.zeros_like(streaky.data))
    tv = []
    for _ in range(params.n_iter):
        guidance = joint_bilateral_step(streaky, guidance, params)
        tv.append(row_tv(guidance.data))
    increases = [k for k in range(1, len(tv)) if tv[k] > tv[k - 1] + 1e-9]
    if increases:
        print(f"NOTE: row total variation increased at iterations {increases}: {tv}")
    assert tv[-1] <= row_tv(streaky.data) + 1e-9


# ---------------------------------------------------------------------------
# decomposition


def test_decompose_reconstructs_within_rounding(rng):
    image = random_image(rng, 24, 24)
    parts = decompose(image, RgfParams(sigma_s=1.5, n_iter=2))
    err = np.abs(parts.low.data + parts.high - image.data).max()
    assert err <= RECONSTRUCTION_TOL


def test_decompose_constant_high_is_zero():
    image = RgbImage(np.full((12, 12, 3), 0.4))
    parts = decompose(image, RgfParams(sigma_s=1.5, n_iter=2))
    assert np.array_equal(parts.high, np.zeros_like(parts.high))


def test_decompose_streak_energy_in_high():
    # At streak pixels the known streak signal splits exactly between the
    # two layers: amplitude == high + (low - clean).  Require that at least
    # 90% of the split energy lands in the high layer rather than being
    # retained in the low layer.  (The low layer always keeps a faint
    # blurred remnant of the streak mass -- see notes/decisions.md -- so
    # the captured fraction is measured against what actually lands in
    # either layer.)
    clean, streaky, mask = ramp_with_streaks()
    parts = decompose(streaky, RgfParams())
    amplitude = streaky.data - clean.data
    np.testing.assert_allclose(
        amplitude, parts.high + (parts.low.data - clean.data), atol=1e-12
    )
    captured = float((parts.high[mask] ** 2).sum())
    retained = float(((parts.low.data - clean.data)[mask] ** 2).sum())
    assert captured > 0
    assert captured / (captured + retained) >= 0.90


def test_decomposition_validates_shapes():
    with pytest.raises(ValueError):
        Decomposition(low=RgbImage(np.zeros((4, 4, 3))), high=np.zeros((4, 5, 3)))


def test_rgf_params_validation():
    with pytest.raises(ValueError):
        RgfParams(sigma_s=0.0)
    with pytest.raises(ValueError):
        RgfParams(sigma_r=-1.0)
    with pytest.raises(ValueError):
        RgfParams(n_iter=0)
    assert RgfParams(sigma_s=3.0).radius == 9
    assert RgfParams(sigma_s=3.0, window_radius=5).radius == 5


def test_behaviour_on_composed_rain():
    # sanity: decomposing an actual composed rainy frame keeps haze in low
    depth = DepthMap(np.full((24, 24), 150.0))
    clean = RgbImage(np.full((24, 24, 3), 0.5))
    maps = GroundTruthMaps(
        streak_mask=BinaryMask(np.zeros((24, 24), np.uint8)),
        drop_mask=BinaryMask(np.zeros((24, 24), np.uint8)),
        haze=ScalarMap(np.full((24, 24), 0.4)),
        streaks=ScalarMap(np.zeros((24, 24))),
        drop_layer=ScalarMap(np.zeros((24, 24))),
    )
    rainy = compose_mor(clean, maps, RainParams(atm_light=0.8))
    parts = decompose(rainy, RgfParams(sigma_s=2.0, n_iter=3))
    # constant hazy frame: everything is structure, residual vanishes
    assert np.abs(parts.high).max() < 1e-12
