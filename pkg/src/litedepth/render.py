"""Render depth maps to color images for visual inspection.

Colormaps are shipped as 256-entry RGB lookup tables in plain text under
``colormaps/``.  Near depths render bright and far depths dark under the
default reversed-plasma map; invalid pixels (non-finite or <= 0) render
as a fixed sentinel color.
"""

from __future__ import annotations

from importlib import resources

import numpy as np
from PIL import Image

from .errors import DimensionError, ValidationError

__all__ = ["render_depth", "load_colormap", "save_png", "COLORMAPS", "INVALID_COLOR"]

COLORMAPS = ("plasma_reversed", "grayscale")
INVALID_COLOR = (255, 255, 0)  # yellow stands out against both map ends


def load_colormap(name: str) -> np.ndarray:
    """Load a named LUT as a (256, 3) uint8 array."""
    if name not in COLORMAPS:
        raise ValidationError(f"unknown colormap {name!r}; available: {COLORMAPS}")
    text = resources.files("litedepth").joinpath(f"colormaps/{name}.txt").read_text()
    rows = [line.split() for line in text.splitlines() if line and not line.startswith("#")]
    lut = np.array(rows, dtype=np.int64)
    if lut.shape != (256, 3) or lut.min() < 0 or lut.max() > 255:
        raise ValidationError(f"colormap {name!r} is malformed")
    return lut.astype(np.uint8)


def render_depth(
    depth: np.ndarray,
    colormap: str = "plasma_reversed",
    vmin: float | None = None,
    vmax: float | None = None,
) -> np.ndarray:
    """Map a depth array to an (H, W, 3) uint8 image.

    Accepts a 2-D map or a (1, 1, H, W) tensor.  The valid range maps
    linearly onto the LUT; vmin/vmax default to the valid min/max.
    """
    z = np.asarray(depth, dtype=np.float64)
    if z.ndim == 4 and z.shape[:2] == (1, 1):
        z = z[0, 0]
    if z.ndim != 2 or z.size == 0:
        raise DimensionError(f"depth must be 2-D (or (1,1,H,W)), got shape {depth.shape}")
    lut = load_colormap(colormap)
    valid = np.isfinite(z) & (z > 0)
    out = np.empty((*z.shape, 3), dtype=np.uint8)
    out[...] = INVALID_COLOR
    if valid.any():
        lo = float(z[valid].min()) if vmin is None else float(vmin)
        hi = float(z[valid].max()) if vmax is None else float(vmax)
        if hi <= lo:
            idx = np.zeros(z.shape, dtype=np.intp)
        else:
            idx = np.clip((z - lo) / (hi - lo) * 255.0, 0, 255).round().astype(np.intp)
        out[valid] = lut[idx[valid]]
    return out


def save_png(image: np.ndarray, path) -> None:
    """Write an (H, W, 3) uint8 image to disk."""
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise DimensionError(f"expected (H, W, 3) uint8, got {image.shape} {image.dtype}")
    Image.fromarray(image).save(path)
