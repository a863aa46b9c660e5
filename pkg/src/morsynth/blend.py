"""Byte-domain cover compositing and raindrop mask derivation.

The four blend modes operate per pixel, per channel, on the 0-255 scale.
With the complements a_t = 255 - a and b_t = 255 - b:

    overlay      a <= 128:  a * b / 128          else  255 - a_t * b_t / 128
    highlight    b <= 128:  a * b / 128          else  255 - a_t * b_t / 128
    transparency t * a + (1 - t) * b
    final        b <= 128:  t*a * (1-t)*b / 128  else  255 - t*a_t * (1-t)*b_t / 128

All arithmetic happens in double precision; the result is quantised with
round-half-up and clamped to [0, 255].  ``composite_with_mask`` applies a
mode to a background/cover pair and derives the raindrop mask as the
pixels whose maximum per-channel byte change exceeds a threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imaging import BinaryMask, RgbImage, from_byte_domain, round_half_up_bytes, to_byte_domain

BLEND_MODES = ("overlay", "highlight", "transparency", "final")


@dataclass(frozen=True)
class BlendParams:
    """Mode selection plus the knobs shared by the compositing modes.

    transparency is the cover weight t in (0, 1) used by the
    ``transparency`` and ``final`` modes; mask_threshold is the byte
    change above which a pixel counts as raindrop-covered.
    """

    mode: str = "final"
    transparency: float = 0.7
    mask_threshold: int = 10

    def __post_init__(self) -> None:
        if self.mode not in BLEND_MODES:
            raise ValueError(f"mode must be one of {BLEND_MODES}, got {self.mode!r}")
        if not 0.0 < self.transparency < 1.0:
            raise ValueError(f"transparency must lie in (0, 1), got {self.transparency}")
        if not 0 <= int(self.mask_threshold) <= 255:
            raise ValueError(f"mask_threshold must lie in [0, 255], got {self.mask_threshold}")


@dataclass(frozen=True)
class BlendResult:
    composite: RgbImage
    drop_mask: BinaryMask


def _as_byte_values(values: np.ndarray | float) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size and (arr.min() < 0.0 or arr.max() > 255.0):
        raise ValueError("blend inputs must lie on the 0-255 scale")
    return arr


def blend_overlay(a: np.ndarray | float, b: np.ndarray | float) -> np.ndarray:
    """Overlay: branch on the background value a."""
    a = _as_byte_values(a)
    b = _as_byte_values(b)
    low = a * b / 128.0
    high = 255.0 - (255.0 - a) * (255.0 - b) / 128.0
    return round_half_up_bytes(np.where(a <= 128.0, low, high))


def blend_highlight(a: np.ndarray | float, b: np.ndarray | float) -> np.ndarray:
    """Highlight: same two branches as overlay but selected by the cover b."""
    a = _as_byte_values(a)
    b = _as_byte_values(b)
    low = a * b / 128.0
    high = 255.0 - (255.0 - a) * (255.0 - b) / 128.0
    return round_half_up_bytes(np.where(b <= 128.0, low, high))


def blend_transparency(
    a: np.ndarray | float, b: np.ndarray | float, transparency: float
) -> np.ndarray:
    """Plain alpha mix t*a + (1-t)*b; t=1 is pure background, t=0 pure cover."""
    if not 0.0 <= transparency <= 1.0:
        raise ValueError(f"transparency must lie in [0, 1], got {transparency}")
    a = _as_byte_values(a)
    b = _as_byte_values(b)
    return round_half_up_bytes(transparency * a + (1.0 - transparency) * b)


def blend_final(a: np.ndarray | float, b: np.ndarray | float, transparency: float) -> np.ndarray:
    """Highlight-style branching applied to the transparency-weighted inputs."""
    if not 0.0 < transparency < 1.0:
        raise ValueError(f"transparency must lie in (0, 1), got {transparency}")
    a = _as_byte_values(a)
    b = _as_byte_values(b)
    t = transparency
    low = (t * a) * ((1.0 - t) * b) / 128.0
    high = 255.0 - (t * (255.0 - a)) * ((1.0 - t) * (255.0 - b)) / 128.0
    return round_half_up_bytes(np.where(b <= 128.0, low, high))


def apply_blend(
    a: np.ndarray | float, b: np.ndarray | float, params: BlendParams
) -> np.ndarray:
    """Dispatch to the mode named by ``params``."""
    if params.mode == "overlay":
        return blend_overlay(a, b)
    if params.mode == "highlight":
        return blend_highlight(a, b)
    if params.mode == "transparency":
        return blend_transparency(a, b, params.transparency)
    return blend_final(a, b, params.transparency)


def composite_with_mask(
    background: RgbImage, cover: RgbImage, params: BlendParams
) -> BlendResult:
    """Blend a cover onto a background and derive the raindrop mask.

    Both frames are quantised to bytes first so the composite matches a
    pipeline that round-trips through PNG.  The mask flags pixels whose
    largest per-channel byte difference from the background exceeds
    ``params.mask_threshold``.
    """
    if cover.shape != background.shape:
        raise ValueError(
            f"cover shape {cover.shape} does not match background shape {background.shape}"
        )
    bg = to_byte_domain(background)
    cv = to_byte_domain(cover)
    composite = apply_blend(bg, cv, params)
    change = np.abs(composite.astype(np.int16) - bg.astype(np.int16)).max(axis=2)
    mask = (change > int(params.mask_threshold)).astype(np.uint8)
    return BlendResult(composite=from_byte_domain(composite), drop_mask=BinaryMask(mask))
