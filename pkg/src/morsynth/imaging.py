"""Core raster types and image file I/O.

Every image that flows through this package lives in memory as a float64
array on the real [0, 1] scale.  Conversion to and from the 0-255 byte
scale is explicit (``to_byte_domain`` / ``from_byte_domain``) and uses
round-half-up so that the quantisation is bit-reproducible across runs.

Four wrapper types carry shape/range contracts:

* :class:`RgbImage`    -- (H, W, 3) float64 in [0, 1]
* :class:`ScalarMap`   -- (H, W)   float64 in [0, 1]
* :class:`BinaryMask`  -- (H, W)   uint8 in {0, 1}
* :class:`DepthMap`    -- (H, W)   float64 metric depth, finite, >= 0

Depth is read either from PFM (single-channel ``Pf``, scale sign gives
endianness, rows stored bottom-to-top) or from 16-bit grayscale PNG with
an explicit metres-per-unit factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class RgbImage:
    """Three-channel raster with intensities in [0, 1]."""

    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or data.shape[2] != 3:
            raise ValueError(f"expected an (H, W, 3) array, got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError("image height and width must be at least 1")
        if not np.isfinite(data).all():
            raise ValueError("image contains non-finite values")
        lo, hi = float(data.min()), float(data.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"channel values must lie in [0, 1], found [{lo}, {hi}]")
        object.__setattr__(self, "data", _readonly(data))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        """Spatial (height, width) without the channel axis."""
        return self.data.shape[0], self.data.shape[1]


@dataclass(frozen=True)
class ScalarMap:
    """Single-channel map with values in [0, 1] (attention, haze, streaks...)."""

    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError(f"expected an (H, W) array, got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError("map height and width must be at least 1")
        if not np.isfinite(data).all():
            raise ValueError("map contains non-finite values")
        lo, hi = float(data.min()), float(data.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"map values must lie in [0, 1], found [{lo}, {hi}]")
        object.__setattr__(self, "data", _readonly(data))

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[0], self.data.shape[1]


@dataclass(frozen=True)
class BinaryMask:
    """Hard 0/1 mask stored as booleans (safe for boolean indexing)."""

    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise ValueError(f"expected an (H, W) array, got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError("mask height and width must be at least 1")
        if data.dtype != np.bool_:
            if not np.issubdtype(data.dtype, np.integer):
                raise ValueError(f"mask must be integer-valued, got dtype {data.dtype}")
            if not np.isin(data, (0, 1)).all():
                raise ValueError("mask values must be exactly 0 or 1")
            data = data.astype(np.bool_)
        object.__setattr__(self, "data", _readonly(data))

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[0], self.data.shape[1]


@dataclass(frozen=True)
class DepthMap:
    """Metric depth in metres; finite and non-negative everywhere."""

    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError(f"expected an (H, W) array, got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError("depth height and width must be at least 1")
        if not np.isfinite(data).all():
            raise ValueError("depth contains non-finite values")
        if float(data.min()) < 0.0:
            raise ValueError("depth values must be non-negative")
        object.__setattr__(self, "data", _readonly(data))

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[0], self.data.shape[1]


# ---------------------------------------------------------------------------
# byte-domain conversion


def round_half_up_bytes(values: np.ndarray | float) -> np.ndarray:
    """Quantise real values on the 0-255 scale to bytes.

    Ties round away from zero toward the next byte (128.5 -> 129), i.e.
    floor(x + 0.5), and the result is clamped into [0, 255].  This is the
    single quantiser used everywhere in the package so that byte output is
    reproducible bit for bit.
    """
    shifted = np.floor(np.asarray(values, dtype=np.float64) + 0.5)
    return np.clip(shifted, 0.0, 255.0).astype(np.uint8)


def to_byte_domain(image: RgbImage) -> np.ndarray:
    """[0, 1] float image -> (H, W, 3) uint8 on the 0-255 scale."""
    return round_half_up_bytes(image.data * 255.0)


def from_byte_domain(raster: np.ndarray) -> RgbImage:
    """(H, W, 3) bytes -> float image; exact division by 255."""
    raster = np.asarray(raster)
    if raster.dtype != np.uint8:
        if not np.issubdtype(raster.dtype, np.integer):
            raise ValueError(f"byte raster must be integer-valued, got dtype {raster.dtype}")
        if raster.size and (raster.min() < 0 or raster.max() > 255):
            raise ValueError("byte raster values must lie in [0, 255]")
    return RgbImage(raster.astype(np.float64) / 255.0)


# ---------------------------------------------------------------------------
# PNG I/O


def load_image(path: str | Path) -> RgbImage:
    """Load an 8-bit RGB PNG.

    Raises FileNotFoundError for a missing path and ValueError for files
    that are not 8-bit three-channel PNGs.
    """
    with Image.open(path) as im:
        if (im.format or "").upper() != "PNG":
            raise ValueError(f"{path}: expected a PNG file, got format {im.format!r}")
        if im.mode in ("I", "I;16", "I;16B", "I;16L"):
            raise ValueError(f"{path}: unsupported bit depth (mode {im.mode!r}), expected 8-bit RGB")
        if im.mode != "RGB":
            raise ValueError(f"{path}: expected an 8-bit RGB PNG, got mode {im.mode!r}")
        raster = np.asarray(im, dtype=np.uint8)
    return from_byte_domain(raster)


def save_image(image: RgbImage, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_byte_domain(image), mode="RGB").save(path, format="PNG")


def load_map(path: str | Path) -> ScalarMap:
    """Load a single-channel 8-bit PNG as a [0, 1] map."""
    with Image.open(path) as im:
        if (im.format or "").upper() != "PNG":
            raise ValueError(f"{path}: expected a PNG file, got format {im.format!r}")
        if im.mode != "L":
            raise ValueError(f"{path}: expected an 8-bit grayscale PNG, got mode {im.mode!r}")
        raster = np.asarray(im, dtype=np.uint8)
    return ScalarMap(raster.astype(np.float64) / 255.0)


def save_map(value_map: ScalarMap, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    raster = round_half_up_bytes(value_map.data * 255.0)
    Image.fromarray(raster, mode="L").save(path, format="PNG")


def load_mask(path: str | Path) -> BinaryMask:
    """Load a 0/255 grayscale PNG as a hard 0/1 mask."""
    with Image.open(path) as im:
        if im.mode != "L":
            raise ValueError(f"{path}: expected an 8-bit grayscale PNG, got mode {im.mode!r}")
        raster = np.asarray(im, dtype=np.uint8)
    if not np.isin(raster, (0, 255)).all():
        raise ValueError(f"{path}: mask PNG must contain only 0 and 255")
    return BinaryMask(raster == 255)


def save_mask(mask: BinaryMask, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    raster = mask.data.astype(np.uint8) * np.uint8(255)
    Image.fromarray(raster, mode="L").save(path, format="PNG")


# ---------------------------------------------------------------------------
# depth I/O


def read_pfm(path: str | Path) -> np.ndarray:
    """Read a single-channel PFM file into a float64 (H, W) array.

    The header is three whitespace-separated records: the magic ``Pf``,
    the ``width height`` pair, and a scale whose sign encodes endianness
    (negative = little endian).  Pixel rows are stored bottom-to-top and
    are flipped here so row 0 is the top of the image.
    """
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic == b"PF":
            raise ValueError(f"{path}: three-channel PFM is not supported, expected 'Pf'")
        if magic != b"Pf":
            raise ValueError(f"{path}: not a PFM file (bad magic {magic!r})")
        dims = fh.readline().split()
        if len(dims) != 2:
            raise ValueError(f"{path}: malformed PFM dimension record")
        width, height = int(dims[0]), int(dims[1])
        if width < 1 or height < 1:
            raise ValueError(f"{path}: PFM dimensions must be positive, got {width}x{height}")
        scale = float(fh.readline().strip())
        if scale == 0.0:
            raise ValueError(f"{path}: PFM scale must be non-zero")
        dtype = "<f4" if scale < 0 else ">f4"
        payload = fh.read(4 * width * height)
    if len(payload) != 4 * width * height:
        raise ValueError(f"{path}: truncated PFM payload")
    samples = np.frombuffer(payload, dtype=dtype)
    return samples.reshape(height, width)[::-1].astype(np.float64)


def write_pfm(values: np.ndarray, path: str | Path) -> None:
    """Write an (H, W) array as a little-endian single-channel PFM."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected an (H, W) array, got shape {arr.shape}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(b"Pf\n")
        fh.write(f"{arr.shape[1]} {arr.shape[0]}\n".encode("ascii"))
        fh.write(b"-1.0\n")
        fh.write(arr[::-1].astype("<f4").tobytes())


def load_depth(path: str | Path, png_scale: float | None = None) -> DepthMap:
    """Load depth from ``.pfm`` (metres as stored) or 16-bit ``.png``.

    PNG depth is raw sensor units and requires ``png_scale``, the number
    of metres per stored unit.
    """
    p = Path(path)
    suffix = p.suffix.lower()
    if suffix == ".pfm":
        return DepthMap(read_pfm(p))
    if suffix == ".png":
        if png_scale is None:
            raise ValueError(f"{p}: 16-bit PNG depth needs a metres-per-unit scale")
        if png_scale <= 0:
            raise ValueError("depth scale must be positive")
        with Image.open(p) as im:
            if im.mode not in ("I", "I;16", "I;16B", "I;16L"):
                raise ValueError(f"{p}: expected a 16-bit grayscale PNG, got mode {im.mode!r}")
            raster = np.asarray(im, dtype=np.float64)
        return DepthMap(raster * png_scale)
    raise ValueError(f"{p}: unsupported depth format {suffix!r} (expected .pfm or .png)")


def save_depth(depth: DepthMap, path: str | Path) -> None:
    write_pfm(depth.data, path)
