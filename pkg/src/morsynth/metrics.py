"""Image quality metrics and closed-form loss evaluators.

PSNR and SSIM follow the standard definitions (SSIM with the usual
11x11 Gaussian window, sigma 1.5, C1 = (0.01 L)^2, C2 = (0.03 L)^2).
PSNR is computed over all RGB values jointly -- that choice is recorded
in every report header.  Identical inputs give an infinite PSNR, which
serialises as the string sentinel "inf".

The loss evaluators are pure scalar functions over maps: plain MSE
against each ground-truth map for the three attention heads, a weighted
multi-scale MSE sum, the discriminator's map consistency term, and the
adversarial score loss -ln(d_r) - ln(1 - d_o) + gamma * l_map (natural
log).  The perceptual feature term of the generator objective requires a
pretrained backbone and is deliberately not implemented; the aggregate
helper sums the available terms and says so in its docstring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imaging import RgbImage

#: How psnr() aggregates channels; recorded in report headers.
PSNR_DOMAIN = "all RGB values jointly"

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


@dataclass(frozen=True)
class LossWeights:
    """Multi-scale weights (coarse to fine) and the discriminator map weight."""

    lambdas: tuple[float, ...] = (0.4, 0.6, 0.8, 1.0)
    gamma: float = 0.10

    def __post_init__(self) -> None:
        lambdas = tuple(float(v) for v in self.lambdas)
        if not lambdas:
            raise ValueError("lambdas must be nonempty")
        if any(v <= 0 for v in lambdas):
            raise ValueError(f"all lambdas must be > 0, got {lambdas}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        object.__setattr__(self, "lambdas", lambdas)


def _values(x) -> np.ndarray:
    data = getattr(x, "data", x)
    return np.asarray(data, dtype=np.float64)


def mse(x, y) -> float:
    """Mean squared difference over all elements; accepts maps or images."""
    a = _values(x)
    b = _values(y)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.mean(diff * diff))


def psnr(pred: RgbImage, target: RgbImage, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; identical inputs give float('inf')."""
    if peak <= 0:
        raise ValueError(f"peak must be > 0, got {peak}")
    err = mse(pred, target)
    if err == 0.0:
        return float("inf")
    return 10.0 * math.log10(peak * peak / err)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    taps = np.exp(-(offsets * offsets) / (2.0 * sigma * sigma))
    return taps / taps.sum()


def _filter_valid(plane: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Separable 'valid'-mode correlation of a 2-D plane with a 1-D window."""
    n = taps.size
    height, width = plane.shape
    across = np.zeros((height, width - n + 1), dtype=np.float64)
    for i in range(n):
        across += taps[i] * plane[:, i : i + width - n + 1]
    down = np.zeros((height - n + 1, width - n + 1), dtype=np.float64)
    for i in range(n):
        down += taps[i] * across[i : i + height - n + 1, :]
    return down


def ssim(pred: RgbImage, target: RgbImage) -> float:
    """Mean structural similarity, computed per channel and averaged.

    Uses an 11x11 Gaussian window (sigma 1.5) with valid-window cropping,
    a data range of 1.0, and the population (uniformly weighted) local
    moments.
    """
    a = _values(pred)
    b = _values(target)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    height, width = a.shape[0], a.shape[1]
    if height < SSIM_WINDOW or width < SSIM_WINDOW:
        raise ValueError(
            f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for SSIM, got {height}x{width}"
        )
    taps = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    c1 = (0.01 * 1.0) ** 2
    c2 = (0.03 * 1.0) ** 2
    channel_means = []
    for c in range(a.shape[2]):
        x = a[:, :, c]
        y = b[:, :, c]
        mu_x = _filter_valid(x, taps)
        mu_y = _filter_valid(y, taps)
        var_x = _filter_valid(x * x, taps) - mu_x * mu_x
        var_y = _filter_valid(y * y, taps) - mu_y * mu_y
        cov = _filter_valid(x * y, taps) - mu_x * mu_y
        score = ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)) / (
            (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
        )
        channel_means.append(float(score.mean()))
    return float(np.mean(channel_means))


# ---------------------------------------------------------------------------
# loss evaluators


def attention_losses(
    streak_attention,
    haze_attention,
    drop_attention,
    streak_mask,
    haze,
    drop_mask,
) -> tuple[float, float, float]:
    """MSE of each attention head against its ground-truth map.

    Returns (streak, haze, drop) losses: streak attention scores against
    the binary streak mask, haze attention against the haze layer, drop
    attention against the binary drop mask.
    """
    return (
        mse(streak_attention, streak_mask),
        mse(haze_attention, haze),
        mse(drop_attention, drop_mask),
    )


def multiscale_loss(preds, targets, weights: LossWeights) -> float:
    """Weighted sum of per-scale MSEs, coarse scale first."""
    preds = list(preds)
    targets = list(targets)
    if len(preds) != len(weights.lambdas) or len(targets) != len(weights.lambdas):
        raise ValueError(
            f"expected {len(weights.lambdas)} prediction/target pairs, "
            f"got {len(preds)} and {len(targets)}"
        )
    total = 0.0
    for lam, p, t in zip(weights.lambdas, preds, targets):
        total += lam * mse(p, t)
    return total


def discriminator_map_loss(
    output_map,
    real_map,
    streak_attention,
    haze_attention,
    drop_attention,
) -> float:
    """Consistency of the discriminator map with the three attention maps.

    The map produced on a restored image should agree with each attention
    map; the map produced on a real image should vanish.
    """
    zeros = np.zeros_like(_values(real_map))
    return (
        mse(output_map, streak_attention)
        + mse(output_map, haze_attention)
        + mse(output_map, drop_attention)
        + mse(real_map, zeros)
    )


def gan_losses(real_score: float, output_score: float, map_loss: float, weights: LossWeights) -> float:
    """Adversarial score loss -ln(d_r) - ln(1 - d_o) + gamma * map_loss.

    Scores must lie strictly inside (0, 1); the log singularities at the
    endpoints are the caller's problem to clamp.
    """
    if not 0.0 < real_score < 1.0:
        raise ValueError(f"real_score must lie strictly in (0, 1), got {real_score}")
    if not 0.0 < output_score < 1.0:
        raise ValueError(f"output_score must lie strictly in (0, 1), got {output_score}")
    base = -math.log(real_score) - math.log(1.0 - output_score)
    return base + weights.gamma * map_loss


def generator_loss_sum(
    streak_loss: float,
    haze_loss: float,
    drop_loss: float,
    multiscale: float,
) -> float:
    """Sum of the available generator loss terms.

    The full objective also carries a perceptual feature distance, which
    needs a pretrained feature extractor and is intentionally omitted
    here; callers aggregating a complete objective must add it themselves.
    """
    return streak_loss + haze_loss + drop_loss + multiscale


# ---------------------------------------------------------------------------
# quality reports


@dataclass(frozen=True)
class QualityRow:
    """Per-image evaluation record."""

    id: str
    psnr_db: float
    ssim: float


@dataclass(frozen=True)
class QualityReport:
    """Per-image scores plus aggregate means.

    The mean PSNR is infinite whenever any row is infinite (identical
    image pairs); serialisation renders infinities as the string "inf".
    """

    rows: tuple[QualityRow, ...]
    psnr_domain: str = PSNR_DOMAIN

    def __post_init__(self) -> None:
        if not self.rows:
            raise ValueError("a quality report needs at least one row")
        object.__setattr__(self, "rows", tuple(self.rows))

    @property
    def mean_psnr(self) -> float:
        return float(np.mean([row.psnr_db for row in self.rows]))

    @property
    def mean_ssim(self) -> float:
        return float(np.mean([row.ssim for row in self.rows]))


def _render_float(value: float) -> str | float:
    return "inf" if math.isinf(value) else value


def report_to_json_dict(report: QualityReport) -> dict:
    return {
        "psnr_domain": report.psnr_domain,
        "rows": [
            {"id": row.id, "psnr_db": _render_float(row.psnr_db), "ssim": row.ssim}
            for row in report.rows
        ],
        "mean": {
            "psnr_db": _render_float(report.mean_psnr),
            "ssim": report.mean_ssim,
        },
    }


def report_to_csv_text(report: QualityReport) -> str:
    lines = ["id,psnr_db,ssim"]
    for row in report.rows:
        lines.append(f"{row.id},{_render_float(row.psnr_db)},{row.ssim}")
    lines.append(f"mean,{_render_float(report.mean_psnr)},{report.mean_ssim}")
    return "\n".join(lines) + "\n"
