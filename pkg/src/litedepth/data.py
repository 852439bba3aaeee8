"""Dataset manifests, sample loading, and synthetic scene generation.

A dataset is a directory with a ``manifest.json`` describing paired RGB
and depth files:

    {
      "unit": "indoor_cm",            depth unit tag (see augment module)
      "max_depth_m": 10.0,
      "depth_encoding": "png16_mm",   or "raw_f32_m"
      "eval_crop": [t, l, b, r],      optional fractional crop, or null
      "entries": [{"rgb": "...", "depth": "..."}, ...]
    }

``png16_mm`` stores depth as 16-bit grayscale PNG in millimeters with 0
meaning invalid; ``raw_f32_m`` stores a ``.npy`` float32 map in meters.
Paths are relative to the manifest's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
from PIL import Image

from .augment import SHIFT_BOUND_M, DepthSample
from .errors import DatasetError

__all__ = ["DatasetManifest", "load_manifest", "load_sample", "iter_samples",
           "generate_synthetic_dataset"]

_ENCODINGS = ("png16_mm", "raw_f32_m")


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    unit: str
    max_depth_m: float
    depth_encoding: str
    entries: tuple[tuple[str, str], ...]
    eval_crop: tuple[float, float, float, float] | None = None

    def __len__(self) -> int:
        return len(self.entries)


def load_manifest(path) -> DatasetManifest:
    """Read and validate a manifest.json (or a directory containing one)."""
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    if not path.is_file():
        raise DatasetError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetError(f"{path}: unreadable manifest ({exc})")
    for key in ("unit", "max_depth_m", "depth_encoding", "entries"):
        if key not in doc:
            raise DatasetError(f"{path}: manifest missing field {key!r}")
    if doc["unit"] not in SHIFT_BOUND_M:
        raise DatasetError(f"{path}: unknown unit {doc['unit']!r}")
    if doc["depth_encoding"] not in _ENCODINGS:
        raise DatasetError(
            f"{path}: unknown depth encoding {doc['depth_encoding']!r}; expected {_ENCODINGS}"
        )
    if float(doc["max_depth_m"]) <= 0:
        raise DatasetError(f"{path}: max_depth_m must be positive")
    entries = []
    for i, e in enumerate(doc["entries"]):
        if "rgb" not in e or "depth" not in e:
            raise DatasetError(f"{path}: entry {i} needs 'rgb' and 'depth' paths")
        entries.append((e["rgb"], e["depth"]))
    crop = doc.get("eval_crop")
    return DatasetManifest(
        root=path.parent,
        unit=doc["unit"],
        max_depth_m=float(doc["max_depth_m"]),
        depth_encoding=doc["depth_encoding"],
        entries=tuple(entries),
        eval_crop=tuple(float(c) for c in crop) if crop else None,
    )


def _load_rgb(path: Path, size_hw=None) -> np.ndarray:
    try:
        with Image.open(path) as img:
            rgb = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    except (OSError, ValueError) as exc:
        raise DatasetError(f"unreadable rgb image {path}: {exc}")
    if size_hw is not None and rgb.shape[:2] != tuple(size_hw):
        rgb = cv2.resize(rgb, (size_hw[1], size_hw[0]), interpolation=cv2.INTER_LINEAR)
    return np.moveaxis(rgb, -1, 0)[None].astype(np.float32)


def _load_depth(path: Path, encoding: str) -> np.ndarray:
    try:
        if encoding == "png16_mm":
            with Image.open(path) as img:
                raw = np.asarray(img, dtype=np.float64)
            depth = raw / 1000.0  # mm -> m, zeros stay invalid
        else:
            depth = np.load(path).astype(np.float64)
    except (OSError, ValueError) as exc:
        raise DatasetError(f"unreadable depth map {path}: {exc}")
    if depth.ndim != 2:
        raise DatasetError(f"depth map {path} must be 2-D, got shape {depth.shape}")
    return depth[None, None].astype(np.float32)


def load_sample(manifest: DatasetManifest, index: int, rgb_size_hw=None) -> DepthSample:
    """Load one entry; rgb optionally resized to (H, W), depth kept native."""
    if not 0 <= index < len(manifest.entries):
        raise DatasetError(f"sample index {index} out of range (dataset has {len(manifest)})")
    rgb_rel, depth_rel = manifest.entries[index]
    rgb = _load_rgb(manifest.root / rgb_rel, rgb_size_hw)
    depth = _load_depth(manifest.root / depth_rel, manifest.depth_encoding)
    if rgb_size_hw is None and rgb.shape[2:] != depth.shape[2:]:
        raise DatasetError(
            f"entry {index}: rgb {rgb.shape[2:]} and depth {depth.shape[2:]} extents differ"
        )
    if rgb_size_hw is not None and rgb.shape[2:] != depth.shape[2:]:
        # Keep the pair aligned for augmentation / evaluation.
        d = depth[0, 0]
        d = cv2.resize(d, (rgb.shape[3], rgb.shape[2]), interpolation=cv2.INTER_NEAREST)
        depth = d[None, None].astype(np.float32)
    return DepthSample(rgb=rgb, depth=depth, unit=manifest.unit, max_depth=manifest.max_depth_m)


def iter_samples(manifest: DatasetManifest, rgb_size_hw=None):
    """Yield DepthSamples lazily, in manifest order."""
    for i in range(len(manifest)):
        yield load_sample(manifest, i, rgb_size_hw)


# -- synthetic scenes ---------------------------------------------------------


def _synthetic_pair(rng: np.random.Generator, h: int, w: int, max_depth: float):
    """One procedurally generated scene: a depth ramp with box occluders.

    Depth drives the shading of the image so that the pair is plausibly
    correlated, which matters for smoke-testing metrics end to end.
    """
    yy = np.linspace(0.0, 1.0, h)[:, None]
    xx = np.linspace(0.0, 1.0, w)[None, :]
    tilt = rng.uniform(-0.4, 0.4)
    near, far = sorted(rng.uniform(0.3, 0.9 * max_depth, size=2))
    depth = near + (far - near) * np.clip(yy + tilt * (xx - 0.5), 0.0, 1.0)
    depth = np.broadcast_to(depth, (h, w)).copy()
    for _ in range(rng.integers(2, 5)):
        bh = int(rng.integers(h // 8, h // 3))
        bw = int(rng.integers(w // 8, w // 3))
        top = int(rng.integers(0, h - bh))
        left = int(rng.integers(0, w - bw))
        box_depth = float(rng.uniform(0.2, depth[top : top + bh, left : left + bw].min()))
        depth[top : top + bh, left : left + bw] = box_depth
    # A few invalid pixels, as real sensors produce.
    holes = rng.random((h, w)) < 0.01
    depth[holes] = 0.0
    base = rng.uniform(0.2, 0.9, size=3)
    shade = 1.0 - 0.7 * depth / max_depth
    rgb = np.clip(base[:, None, None] * shade[None], 0.0, 1.0)
    rgb += rng.normal(0.0, 0.02, size=rgb.shape)
    return np.clip(rgb, 0.0, 1.0), depth


def generate_synthetic_dataset(
    out_dir,
    count: int = 8,
    size_hw: tuple[int, int] = (192, 256),
    seed: int = 0,
    unit: str = "indoor_cm",
    max_depth_m: float = 10.0,
    depth_encoding: str = "png16_mm",
) -> DatasetManifest:
    """Write a deterministic synthetic dataset and return its manifest."""
    if count < 1:
        raise DatasetError(f"count must be >= 1, got {count}")
    if depth_encoding not in _ENCODINGS:
        raise DatasetError(f"unknown depth encoding {depth_encoding!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    h, w = size_hw
    entries = []
    for i in range(count):
        rgb, depth = _synthetic_pair(rng, h, w, max_depth_m)
        rgb_name = f"rgb_{i:04d}.png"
        Image.fromarray((np.moveaxis(rgb, 0, -1) * 255).round().astype(np.uint8)).save(
            out_dir / rgb_name
        )
        if depth_encoding == "png16_mm":
            depth_name = f"depth_{i:04d}.png"
            mm = np.clip(depth * 1000.0, 0, 65535).round().astype(np.uint16)
            Image.fromarray(mm).save(out_dir / depth_name)
        else:
            depth_name = f"depth_{i:04d}.npy"
            np.save(out_dir / depth_name, depth.astype(np.float32))
        entries.append({"rgb": rgb_name, "depth": depth_name})
    doc = {
        "unit": unit,
        "max_depth_m": max_depth_m,
        "depth_encoding": depth_encoding,
        "eval_crop": None,
        "entries": entries,
    }
    (out_dir / "manifest.json").write_text(json.dumps(doc, indent=2) + "\n")
    return load_manifest(out_dir)
