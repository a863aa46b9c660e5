"""Depth-driven rain synthesis: streaks, haze, and the full mixture model.

The forward composition treats a rainy frame as the clean scene dimmed by
everything the rain occludes, plus the streak layer, plus an atmospheric
veil lit by a global light, with raindrop pixels replaced outright:

    rainy = (1 - drop_mask) * [clean * (1 - streaks - haze)
                               + streaks + atm_light * haze] + drop_layer

clamped to [0, 1].  Streak visibility decays with scene depth as
exp(-alpha * max(d_near, depth)) -- a plateau for near geometry, then a
strict decay -- while the haze fraction grows as 1 - exp(-beta * depth).

``invert_mor`` runs the composition backwards over the pixels where it is
well-posed (no raindrop, occlusion factor comfortably above zero) and
reports that validity region alongside the estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .imaging import BinaryMask, DepthMap, RgbImage, ScalarMap


@dataclass(frozen=True)
class RainParams:
    """Physical constants of the rain imaging model.

    alpha    -- streak extinction coefficient [1/m], > 0
    beta     -- haze extinction coefficient [1/m], >= 0
    d_near   -- depth [m] below which streak visibility saturates, > 0
    atm_light -- global atmospheric light in [0, 1]

    Defaults are plausible for street-scale scenes; every field is
    overridable from the config file and the CLI.
    """

    alpha: float = 0.01
    beta: float = 0.005
    d_near: float = 50.0
    atm_light: float = 0.8

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not self.d_near > 0:
            raise ValueError(f"d_near must be > 0, got {self.d_near}")
        if not 0.0 <= self.atm_light <= 1.0:
            raise ValueError(f"atm_light must lie in [0, 1], got {self.atm_light}")


@dataclass(frozen=True)
class StreakPatternParams:
    """Knobs for the procedural streak pattern.

    density is streaks per megapixel; angle_mean/angle_jitter are degrees
    away from vertical; lengths and widths are pixels; intensity is the
    peak streak brightness before depth attenuation.
    """

    seed: int = 0
    density: float = 1200.0
    angle_mean: float = 10.0
    angle_jitter: float = 4.0
    length_range: tuple[float, float] = (20.0, 40.0)
    width: float = 1.5
    intensity_range: tuple[float, float] = (0.25, 0.65)

    def __post_init__(self) -> None:
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        if self.density < 0:
            raise ValueError(f"density must be >= 0, got {self.density}")
        if self.angle_jitter < 0:
            raise ValueError(f"angle_jitter must be >= 0, got {self.angle_jitter}")
        lo, hi = self.length_range
        if not (0 < lo <= hi):
            raise ValueError(f"length_range must satisfy 0 < min <= max, got {self.length_range}")
        if not self.width > 0:
            raise ValueError(f"width must be > 0, got {self.width}")
        lo, hi = self.intensity_range
        if not (0.0 <= lo <= hi <= 1.0):
            raise ValueError(
                f"intensity_range must satisfy 0 <= min <= max <= 1, got {self.intensity_range}"
            )


@dataclass(frozen=True)
class StreakSegment:
    """One rendered streak: endpoints in pixel coordinates plus profile."""

    x0: float
    y0: float
    x1: float
    y1: float
    half_width: float
    intensity: float


@dataclass(frozen=True)
class GroundTruthMaps:
    """Per-pixel ground truth emitted next to every synthesised frame."""

    streak_mask: BinaryMask
    drop_mask: BinaryMask
    haze: ScalarMap
    streaks: ScalarMap
    drop_layer: ScalarMap

    def __post_init__(self) -> None:
        shape = self.streak_mask.shape
        for name in ("drop_mask", "haze", "streaks", "drop_layer"):
            other = getattr(self, name).shape
            if other != shape:
                raise ValueError(f"{name} shape {other} does not match streak_mask shape {shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.streak_mask.shape


# ---------------------------------------------------------------------------
# depth-dependent layers


def streak_transmission(depth: DepthMap, params: RainParams) -> ScalarMap:
    """Per-pixel streak visibility exp(-alpha * max(d_near, depth)).

    Constant at exp(-alpha * d_near) for everything nearer than d_near,
    strictly decreasing with depth beyond it, and always in (0, 1].
    """
    effective = np.maximum(params.d_near, depth.data)
    return ScalarMap(np.exp(-params.alpha * effective))


def haze_layer(depth: DepthMap, params: RainParams) -> ScalarMap:
    """Scattering veil 1 - exp(-beta * depth): zero up close, towards 1 far away."""
    return ScalarMap(-np.expm1(-params.beta * depth.data))


# ---------------------------------------------------------------------------
# procedural streak pattern


def streak_segments(width: int, height: int, params: StreakPatternParams) -> list[StreakSegment]:
    """Sample the streak population for a canvas of the given size.

    The draw order per streak is fixed (centre x, centre y, angle, length,
    intensity) so a seed pins the whole pattern.  The count is the rounded
    product of density and canvas area in megapixels.
    """
    if width < 1 or height < 1:
        raise ValueError(f"canvas must be at least 1x1, got {width}x{height}")
    count = int(round(params.density * (width * height) / 1.0e6))
    rng = np.random.default_rng(params.seed)
    lo_len, hi_len = params.length_range
    lo_int, hi_int = params.intensity_range
    segments = []
    for _ in range(count):
        cx = rng.uniform(0.0, width)
        cy = rng.uniform(0.0, height)
        angle = params.angle_mean + rng.uniform(-params.angle_jitter, params.angle_jitter)
        length = rng.uniform(lo_len, hi_len)
        intensity = rng.uniform(lo_int, hi_int)
        # angle is measured from vertical, so a falling streak points mostly down
        rad = math.radians(angle)
        dx = 0.5 * length * math.sin(rad)
        dy = 0.5 * length * math.cos(rad)
        segments.append(
            StreakSegment(
                x0=cx - dx,
                y0=cy - dy,
                x1=cx + dx,
                y1=cy + dy,
                half_width=0.5 * params.width,
                intensity=intensity,
            )
        )
    return segments


def _render_segment(canvas: np.ndarray, seg: StreakSegment) -> None:
    height, width = canvas.shape
    margin = seg.half_width + 1.0
    x_min = max(int(math.floor(min(seg.x0, seg.x1) - margin)), 0)
    x_max = min(int(math.ceil(max(seg.x0, seg.x1) + margin)) + 1, width)
    y_min = max(int(math.floor(min(seg.y0, seg.y1) - margin)), 0)
    y_max = min(int(math.ceil(max(seg.y0, seg.y1) + margin)) + 1, height)
    if x_min >= x_max or y_min >= y_max:
        return
    ys, xs = np.mgrid[y_min:y_max, x_min:x_max]
    px = xs + 0.5 - seg.x0
    py = ys + 0.5 - seg.y0
    ux = seg.x1 - seg.x0
    uy = seg.y1 - seg.y0
    seg_sq = ux * ux + uy * uy
    if seg_sq > 0.0:
        t = np.clip((px * ux + py * uy) / seg_sq, 0.0, 1.0)
    else:
        t = 0.0
    dist = np.hypot(px - t * ux, py - t * uy)
    # linear anti-aliased falloff over one pixel of the capsule boundary
    coverage = np.clip(seg.half_width + 0.5 - dist, 0.0, 1.0)
    patch = canvas[y_min:y_max, x_min:x_max]
    np.maximum(patch, seg.intensity * coverage, out=patch)


def generate_streak_pattern(width: int, height: int, params: StreakPatternParams) -> ScalarMap:
    """Render the seeded streak population onto a [0, 1] canvas.

    Overlapping streaks composite by maximum, so the pattern never
    exceeds the brightest intensity drawn.
    """
    canvas = np.zeros((height, width), dtype=np.float64)
    for seg in streak_segments(width, height, params):
        _render_segment(canvas, seg)
    return ScalarMap(canvas)


def streak_layer(pattern: ScalarMap, transmission: ScalarMap) -> ScalarMap:
    """Attenuate a screen-space pattern by per-pixel depth transmission."""
    if pattern.shape != transmission.shape:
        raise ValueError(
            f"pattern shape {pattern.shape} does not match transmission shape {transmission.shape}"
        )
    return ScalarMap(pattern.data * transmission.data)


def threshold_streak_mask(streaks: ScalarMap, threshold: float) -> BinaryMask:
    """Hard streak mask: 1 where the streak layer exceeds the threshold."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    return BinaryMask(streaks.data > threshold)


def empty_ground_truth(shape: tuple[int, int]) -> GroundTruthMaps:
    """All-zero ground truth for a clean frame of the given (H, W)."""
    zeros = np.zeros(shape, dtype=np.float64)
    mask = np.zeros(shape, dtype=bool)
    return GroundTruthMaps(
        streak_mask=BinaryMask(mask),
        drop_mask=BinaryMask(mask.copy()),
        haze=ScalarMap(zeros),
        streaks=ScalarMap(zeros.copy()),
        drop_layer=ScalarMap(zeros.copy()),
    )


def build_ground_truth(
    depth: DepthMap,
    pattern: ScalarMap,
    rain: RainParams,
    streak_threshold: float = 0.05,
    drop_mask: BinaryMask | None = None,
    drop_layer: ScalarMap | None = None,
) -> GroundTruthMaps:
    """Assemble the full ground-truth bundle from depth and a streak pattern."""
    if pattern.shape != depth.shape:
        raise ValueError(f"pattern shape {pattern.shape} does not match depth shape {depth.shape}")
    transmission = streak_transmission(depth, rain)
    streaks = streak_layer(pattern, transmission)
    base = empty_ground_truth(depth.shape)
    maps = replace(
        base,
        streak_mask=threshold_streak_mask(streaks, streak_threshold),
        haze=haze_layer(depth, rain),
        streaks=streaks,
    )
    if drop_mask is not None or drop_layer is not None:
        if drop_mask is None or drop_layer is None:
            raise ValueError("drop_mask and drop_layer must be given together")
        maps = replace(maps, drop_mask=drop_mask, drop_layer=drop_layer)
    return maps


# ---------------------------------------------------------------------------
# forward model and its inverse


def compose_mor(background: RgbImage, maps: GroundTruthMaps, params: RainParams) -> RgbImage:
    """Apply the mixture-of-rain model to a clean frame.

    The occlusion factor 1 - streaks - haze is used exactly as written
    (it may go negative for extreme layer values); only the final frame
    is clamped to [0, 1].  Where drop_mask is 1 the scene term vanishes
    identically and the output equals drop_layer.
    """
    if maps.shape != background.shape:
        raise ValueError(
            f"ground truth shape {maps.shape} does not match image shape {background.shape}"
        )
    s = maps.streaks.data[..., None]
    a = maps.haze.data[..., None]
    m = maps.drop_mask.data[..., None].astype(np.float64)
    d = maps.drop_layer.data[..., None]
    scene = background.data * (1.0 - s - a) + s + params.atm_light * a
    composed = (1.0 - m) * scene + d
    return RgbImage(np.clip(composed, 0.0, 1.0))


def invert_mor(
    image: RgbImage,
    maps: GroundTruthMaps,
    params: RainParams,
    eps: float = 1.0e-3,
) -> tuple[RgbImage, BinaryMask]:
    """Solve the composition for the clean frame where that is well-posed.

    A pixel is recoverable when it is outside the raindrop mask and the
    occlusion factor 1 - streaks - haze exceeds ``eps``.  Recovered values
    are clamped to [0, 1]; everything else is left at 0 and reported via
    the returned validity mask.
    """
    if maps.shape != image.shape:
        raise ValueError(
            f"ground truth shape {maps.shape} does not match image shape {image.shape}"
        )
    if eps <= 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    s = maps.streaks.data
    a = maps.haze.data
    denom = 1.0 - s - a
    valid = ~maps.drop_mask.data & (denom > eps)
    safe_denom = np.where(valid, denom, 1.0)[..., None]
    numer = image.data - s[..., None] - params.atm_light * a[..., None]
    estimate = np.clip(numer / safe_denom, 0.0, 1.0)
    recovered = np.where(valid[..., None], estimate, 0.0)
    return RgbImage(recovered), BinaryMask(valid)
