"""Dataset pipeline: batch synthesis, splitting, evaluation, decomposition.

A build takes (clean image, depth) pairs plus an optional raindrop cover
photo, runs the rain model -- streak pattern, depth attenuation, haze,
composition, cover blending -- and emits per sample a rainy PNG, the
clean PNG, the depth PFM, and the ground-truth maps, all indexed by a
versioned JSON manifest.  The manifest embeds the resolved configuration
and every derived seed, so a rebuild from the same inputs reproduces
every output byte for byte.

Sample builds are independent; ``jobs > 1`` fans them out over a process
pool without affecting any output bytes.
"""

from __future__ import annotations

import dataclasses
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from . import rain
from .blend import BlendParams, composite_with_mask
from .imaging import (
    DepthMap,
    RgbImage,
    load_depth,
    load_image,
    round_half_up_bytes,
    save_depth,
    save_image,
    save_map,
    save_mask,
)
from .metrics import QualityReport, QualityRow, psnr, ssim
from .rain import RainParams, StreakPatternParams
from .report import write_report
from .rgf import Decomposition, RgfParams, decompose

MANIFEST_VERSION = "1"

#: How the signed high-frequency residual is stored in an 8-bit PNG.
HIGH_ENCODING = "byte = round((high + 1) / 2 * 255)"


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SynthConfig:
    """Resolved parameter snapshot for a build.

    Mirrors the JSON config document: one section per parameter record
    plus the streak mask threshold.
    """

    rain: RainParams = field(default_factory=RainParams)
    streaks: StreakPatternParams = field(default_factory=StreakPatternParams)
    blend: BlendParams = field(default_factory=BlendParams)
    rgf: RgfParams = field(default_factory=RgfParams)
    streak_threshold: float = 0.05

    def __post_init__(self) -> None:
        if not 0.0 <= self.streak_threshold <= 1.0:
            raise ValueError(
                f"streak_threshold must lie in [0, 1], got {self.streak_threshold}"
            )

    def to_dict(self) -> dict:
        return {
            "rain": dataclasses.asdict(self.rain),
            "streaks": {
                "seed": self.streaks.seed,
                "density": self.streaks.density,
                "angle_mean": self.streaks.angle_mean,
                "angle_jitter": self.streaks.angle_jitter,
                "length_range": list(self.streaks.length_range),
                "width": self.streaks.width,
                "intensity_range": list(self.streaks.intensity_range),
            },
            "blend": dataclasses.asdict(self.blend),
            "rgf": dataclasses.asdict(self.rgf),
            "streak_threshold": self.streak_threshold,
        }


def _record_from_dict(cls, section: str, data: dict, tuple_fields: tuple[str, ...] = ()):
    if not isinstance(data, dict):
        raise ValueError(f"config section {section!r} must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown keys in config section {section!r}: {sorted(unknown)}")
    kwargs = dict(data)
    for name in tuple_fields:
        if name in kwargs:
            kwargs[name] = tuple(kwargs[name])
    return cls(**kwargs)


def config_from_dict(data: dict) -> SynthConfig:
    """Parse the JSON config document, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ValueError("config must be a JSON object")
    known = {"rain", "streaks", "blend", "rgf", "streak_threshold"}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return SynthConfig(
        rain=_record_from_dict(RainParams, "rain", data.get("rain", {})),
        streaks=_record_from_dict(
            StreakPatternParams,
            "streaks",
            data.get("streaks", {}),
            tuple_fields=("length_range", "intensity_range"),
        ),
        blend=_record_from_dict(BlendParams, "blend", data.get("blend", {})),
        rgf=_record_from_dict(RgfParams, "rgf", data.get("rgf", {})),
        streak_threshold=data.get("streak_threshold", 0.05),
    )


def load_config(path: str | Path) -> SynthConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    return config_from_dict(data)


# ---------------------------------------------------------------------------
# manifest


@dataclass(frozen=True)
class DatasetSample:
    """One synthesised example: file paths plus the snapshot that made it.

    Paths are stored relative to the manifest location.  The params
    snapshot together with the seed regenerates the sample byte for byte.
    """

    id: str
    seed: int
    rainy: str
    clean: str
    depth: str
    maps: dict[str, str]
    params: dict

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "seed": self.seed,
            "rainy": self.rainy,
            "clean": self.clean,
            "depth": self.depth,
            "maps": dict(self.maps),
            "params": self.params,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetSample":
        return cls(
            id=data["id"],
            seed=data["seed"],
            rainy=data["rainy"],
            clean=data["clean"],
            depth=data["depth"],
            maps=dict(data["maps"]),
            params=data["params"],
        )


@dataclass(frozen=True)
class Manifest:
    """Versioned index over a built dataset."""

    samples: tuple[DatasetSample, ...]
    config: dict
    groups: dict[str, tuple[str, ...]] = field(default_factory=dict)
    split: dict[str, tuple[str, ...]] = field(default_factory=dict)
    version: str = MANIFEST_VERSION

    def __post_init__(self) -> None:
        if self.version != MANIFEST_VERSION:
            raise ValueError(
                f"unsupported manifest version {self.version!r}, expected {MANIFEST_VERSION!r}"
            )
        ids = [s.id for s in self.samples]
        id_set = set(ids)
        if len(ids) != len(id_set):
            raise ValueError("manifest sample ids must be unique")
        groups = {name: tuple(members) for name, members in self.groups.items()}
        for name, members in groups.items():
            missing = set(members) - id_set
            if missing:
                raise ValueError(f"group {name!r} references unknown ids: {sorted(missing)}")
        split = {name: tuple(members) for name, members in self.split.items()}
        unknown = set(split) - {"train", "test"}
        if unknown:
            raise ValueError(f"split subsets must be 'train'/'test', got {sorted(unknown)}")
        for name, members in split.items():
            missing = set(members) - id_set
            if missing:
                raise ValueError(
                    f"split subset {name!r} references unknown ids: {sorted(missing)}"
                )
        overlap = set(split.get("train", ())) & set(split.get("test", ()))
        if overlap:
            raise ValueError(f"train and test overlap: {sorted(overlap)}")
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "split", split)

    def sample_ids(self) -> list[str]:
        return [s.id for s in self.samples]

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "high_encoding": HIGH_ENCODING,
            "config": self.config,
            "samples": [s.to_dict() for s in self.samples],
            "groups": {name: list(members) for name, members in self.groups.items()},
            "split": {name: list(members) for name, members in self.split.items()},
        }

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Manifest":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: not valid JSON ({exc})") from exc
        if "version" not in data:
            raise ValueError(f"{path}: manifest is missing its version")
        return cls(
            samples=tuple(DatasetSample.from_dict(s) for s in data.get("samples", [])),
            config=data.get("config", {}),
            groups={k: tuple(v) for k, v in data.get("groups", {}).items()},
            split={k: tuple(v) for k, v in data.get("split", {}).items()},
            version=data["version"],
        )


# ---------------------------------------------------------------------------
# synthesis


def derive_sample_seed(master_seed: int, index: int) -> int:
    """Stable per-sample seed from the build seed and the sample index."""
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1, np.uint64)[0])


def build_sample(
    background: RgbImage,
    depth: DepthMap,
    cover: RgbImage | None,
    config: SynthConfig,
    seed: int,
) -> tuple[RgbImage, rain.GroundTruthMaps]:
    """Synthesise one rainy frame and its ground truth, in memory.

    Pipeline order: depth-driven layers first, then the scene composition
    with no raindrops, then -- when a cover photo is given -- the
    configured blend mode, which also yields the raindrop mask.
    """
    if depth.shape != background.shape:
        raise ValueError(
            f"depth shape {depth.shape} does not match image shape {background.shape}"
        )
    pattern_params = replace(config.streaks, seed=seed)
    pattern = rain.generate_streak_pattern(background.width, background.height, pattern_params)
    maps = rain.build_ground_truth(
        depth, pattern, config.rain, streak_threshold=config.streak_threshold
    )
    rainy = rain.compose_mor(background, maps, config.rain)
    if cover is not None:
        blended = composite_with_mask(rainy, cover, config.blend)
        rainy = blended.composite
        maps = replace(maps, drop_mask=blended.drop_mask)
    return rainy, maps


def _write_sample_files(
    sample_dir: Path,
    rainy: RgbImage,
    background: RgbImage,
    depth: DepthMap,
    maps: rain.GroundTruthMaps,
    decomposition: Decomposition | None,
) -> dict[str, str]:
    save_image(rainy, sample_dir / "rainy.png")
    save_image(background, sample_dir / "clean.png")
    save_depth(depth, sample_dir / "depth.pfm")
    map_paths = {
        "streak_mask": "streak_mask.png",
        "drop_mask": "drop_mask.png",
        "haze": "haze.png",
        "streaks": "streaks.png",
    }
    save_mask(maps.streak_mask, sample_dir / map_paths["streak_mask"])
    save_mask(maps.drop_mask, sample_dir / map_paths["drop_mask"])
    save_map(maps.haze, sample_dir / map_paths["haze"])
    save_map(maps.streaks, sample_dir / map_paths["streaks"])
    if decomposition is not None:
        map_paths["low"] = "low.png"
        map_paths["high"] = "high.png"
        save_image(decomposition.low, sample_dir / map_paths["low"])
        # encode the residual against the low layer as quantised into its
        # PNG so that decoding low + high recovers the rainy image within
        # the half-step of the signed byte mapping
        low_quantised = (
            round_half_up_bytes(decomposition.low.data * 255.0).astype(np.float64) / 255.0
        )
        write_high_png(rainy.data - low_quantised, sample_dir / map_paths["high"])
    return map_paths


def _build_sample_task(task: dict) -> dict:
    """Worker for one sample; takes and returns plain picklable data."""
    config = config_from_dict(task["config"])
    background = load_image(task["background"])
    depth = load_depth(task["depth"], png_scale=task["depth_scale"])
    cover = load_image(task["cover"]) if task["cover"] else None
    rainy, maps = build_sample(background, depth, cover, config, task["seed"])
    decomposition = decompose(rainy, config.rgf) if task["decompose"] else None
    out_dir = Path(task["out_dir"])
    sample_dir = out_dir / task["id"]
    map_paths = _write_sample_files(sample_dir, rainy, background, depth, maps, decomposition)
    params = config.to_dict()
    params["streaks"]["seed"] = task["seed"]
    return {
        "id": task["id"],
        "seed": task["seed"],
        "rainy": f"{task['id']}/rainy.png",
        "clean": f"{task['id']}/clean.png",
        "depth": f"{task['id']}/depth.pfm",
        "maps": {key: f"{task['id']}/{name}" for key, name in map_paths.items()},
        "params": params,
    }


@dataclass(frozen=True)
class SampleSpec:
    """Input recipe for one sample of a batch build."""

    id: str
    background: str
    depth: str
    cover: str | None = None


def build_dataset(
    specs: list[SampleSpec],
    config: SynthConfig,
    master_seed: int,
    out_dir: str | Path,
    jobs: int = 1,
    depth_scale: float | None = None,
    emit_decomposition: bool = False,
) -> Manifest:
    """Build every sample and write the manifest.

    Per-sample seeds derive from (master_seed, index); outputs are
    independent of ``jobs``, which only controls process fan-out.
    """
    if not specs:
        raise ValueError("no samples to build")
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")
    ids = [spec.id for spec in specs]
    if len(set(ids)) != len(ids):
        raise ValueError("sample ids must be unique")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [
        {
            "id": spec.id,
            "background": spec.background,
            "depth": spec.depth,
            "cover": spec.cover,
            "config": config.to_dict(),
            "seed": derive_sample_seed(master_seed, index),
            "out_dir": str(out_dir),
            "depth_scale": depth_scale,
            "decompose": emit_decomposition,
        }
        for index, spec in enumerate(specs)
    ]
    if jobs == 1:
        records = [_build_sample_task(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_build_sample_task, tasks))
    manifest = Manifest(
        samples=tuple(DatasetSample.from_dict(r) for r in records),
        config=config.to_dict(),
    )
    manifest.save(out_dir / "manifest.json")
    return manifest


# ---------------------------------------------------------------------------
# signed residual PNG codec


def write_high_png(high: np.ndarray, path: str | Path) -> None:
    """Store a signed [-1, 1] residual as bytes via (h + 1) / 2 * 255."""
    arr = np.asarray(high, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) residual, got shape {arr.shape}")
    if arr.min() < -1.0 or arr.max() > 1.0:
        raise ValueError("residual values must lie in [-1, 1]")
    raster = round_half_up_bytes((arr + 1.0) / 2.0 * 255.0)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(raster, mode="RGB").save(path, format="PNG")


def read_high_png(path: str | Path) -> np.ndarray:
    """Decode the signed residual mapping back to [-1, 1] floats."""
    with Image.open(path) as im:
        if im.mode != "RGB":
            raise ValueError(f"{path}: expected an RGB residual PNG, got mode {im.mode!r}")
        raster = np.asarray(im, dtype=np.float64)
    return raster / 255.0 * 2.0 - 1.0


def decompose_to_files(
    input_path: str | Path,
    params: RgfParams,
    out_low: str | Path,
    out_high: str | Path,
) -> None:
    """Filter an image and write the low PNG plus the signed high PNG.

    The residual is taken against the low layer as quantised into its
    PNG, so decoding low + high reconstructs the input within the 1/255
    half-step of the signed byte mapping.
    """
    image = load_image(input_path)
    parts = decompose(image, params)
    save_image(parts.low, out_low)
    low_quantised = round_half_up_bytes(parts.low.data * 255.0).astype(np.float64) / 255.0
    write_high_png(image.data - low_quantised, out_high)


# ---------------------------------------------------------------------------
# split


def split_ids(
    ids: list[str],
    group_size: int,
    per_group_train: int,
    per_group_test: int,
    seed: int,
) -> tuple[dict[str, tuple[str, ...]], tuple[str, ...], tuple[str, ...]]:
    """Group consecutive ids and draw disjoint train/test members per group.

    Selection is uniform without replacement from each group, driven by
    one seeded generator, so a seed pins the whole split.
    """
    if group_size < 1:
        raise ValueError(f"group_size must be >= 1, got {group_size}")
    if per_group_train < 0 or per_group_test < 0:
        raise ValueError("per-group counts must be >= 0")
    if per_group_train + per_group_test > group_size:
        raise ValueError(
            f"cannot draw {per_group_train} train + {per_group_test} test "
            f"from groups of {group_size}"
        )
    if not ids or len(ids) % group_size != 0:
        raise ValueError(
            f"sample count {len(ids)} does not divide into groups of {group_size}"
        )
    n_groups = len(ids) // group_size
    width = max(4, len(str(n_groups - 1)))
    rng = np.random.default_rng(seed)
    groups: dict[str, tuple[str, ...]] = {}
    train: list[str] = []
    test: list[str] = []
    for g in range(n_groups):
        members = ids[g * group_size : (g + 1) * group_size]
        groups[f"g{g:0{width}d}"] = tuple(members)
        order = rng.permutation(group_size)
        train.extend(members[i] for i in order[:per_group_train])
        test.extend(members[i] for i in order[per_group_train : per_group_train + per_group_test])
    return groups, tuple(train), tuple(test)


def split_manifest(
    manifest: Manifest,
    group_size: int,
    per_group_train: int,
    per_group_test: int,
    seed: int,
) -> Manifest:
    """Return a copy of the manifest with groups and split filled in."""
    groups, train, test = split_ids(
        manifest.sample_ids(), group_size, per_group_train, per_group_test, seed
    )
    return replace(manifest, groups=groups, split={"train": train, "test": test})


# ---------------------------------------------------------------------------
# evaluation


def evaluate_directories(pred_dir: str | Path, gt_dir: str | Path) -> QualityReport:
    """Score same-named PNGs across two directories.

    The two directories must contain exactly the same set of PNG names;
    anything unmatched is an error rather than a silent skip.
    """
    pred_dir = Path(pred_dir)
    gt_dir = Path(gt_dir)
    pred_names = {p.name for p in pred_dir.glob("*.png")}
    gt_names = {p.name for p in gt_dir.glob("*.png")}
    if not pred_names & gt_names:
        raise ValueError(f"no common PNG filenames between {pred_dir} and {gt_dir}")
    if pred_names != gt_names:
        only_pred = sorted(pred_names - gt_names)
        only_gt = sorted(gt_names - pred_names)
        raise ValueError(
            f"unmatched files between {pred_dir} and {gt_dir}: "
            f"prediction-only {only_pred}, ground-truth-only {only_gt}"
        )
    rows = []
    for name in sorted(pred_names):
        pred = load_image(pred_dir / name)
        gt = load_image(gt_dir / name)
        rows.append(
            QualityRow(id=Path(name).stem, psnr_db=psnr(pred, gt), ssim=ssim(pred, gt))
        )
    return QualityReport(rows=tuple(rows))


def evaluate_to_report(
    pred_dir: str | Path,
    gt_dir: str | Path,
    report_path: str | Path,
    figures: bool = True,
) -> QualityReport:
    """Evaluate and serialise: JSON, CSV, and the summary figure."""
    report = evaluate_directories(pred_dir, gt_dir)
    write_report(report, report_path, figures=figures)
    return report
