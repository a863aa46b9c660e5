"""morsynth: mixture-of-rain image synthesis, decomposition and evaluation.

The package synthesises rainy frames from clean image + depth pairs
(depth-attenuated streaks, scattering haze, blended raindrop covers),
splits images into low/high-frequency parts with a rolling guidance
filter, emits per-pixel ground-truth maps, and scores restorations with
PSNR/SSIM.  See the ``morsynth`` CLI for the file-level pipeline.
"""

from .blend import BLEND_MODES, BlendParams, BlendResult, composite_with_mask
from .imaging import (
    BinaryMask,
    DepthMap,
    RgbImage,
    ScalarMap,
    from_byte_domain,
    load_depth,
    load_image,
    save_image,
    to_byte_domain,
)
from .metrics import LossWeights, QualityReport, QualityRow, mse, psnr, ssim
from .pipeline import (
    DatasetSample,
    Manifest,
    SampleSpec,
    SynthConfig,
    build_dataset,
    build_sample,
    evaluate_directories,
    split_manifest,
)
from .rain import (
    GroundTruthMaps,
    RainParams,
    StreakPatternParams,
    compose_mor,
    generate_streak_pattern,
    haze_layer,
    invert_mor,
    streak_layer,
    streak_transmission,
    threshold_streak_mask,
)
from .rgf import (
    Decomposition,
    RgfParams,
    decompose,
    gaussian_blur,
    joint_bilateral_step,
    rolling_guidance_filter,
)

__version__ = "0.1.0"

__all__ = [
    "BLEND_MODES",
    "BinaryMask",
    "BlendParams",
    "BlendResult",
    "DatasetSample",
    "Decomposition",
    "DepthMap",
    "GroundTruthMaps",
    "LossWeights",
    "Manifest",
    "QualityReport",
    "QualityRow",
    "RainParams",
    "RgbImage",
    "RgfParams",
    "SampleSpec",
    "ScalarMap",
    "StreakPatternParams",
    "SynthConfig",
    "build_dataset",
    "build_sample",
    "compose_mor",
    "composite_with_mask",
    "decompose",
    "evaluate_directories",
    "from_byte_domain",
    "gaussian_blur",
    "generate_streak_pattern",
    "haze_layer",
    "invert_mor",
    "joint_bilateral_step",
    "load_depth",
    "load_image",
    "mse",
    "psnr",
    "rolling_guidance_filter",
    "save_image",
    "split_manifest",
    "ssim",
    "streak_layer",
    "streak_transmission",
    "threshold_streak_mask",
    "to_byte_domain",
]
