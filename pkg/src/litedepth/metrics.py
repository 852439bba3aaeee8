"""Standard monocular depth evaluation metrics: RMSE, REL, delta1."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DatasetError, DimensionError, ValidationError

__all__ = ["MetricsReport", "rmse", "rel", "delta1", "evaluate_dataset", "resize_nearest"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MetricsReport:
    rmse_m: float
    rel: float
    delta1: float
    pixels_evaluated: int
    crop: tuple[float, float, float, float] | None = None
    samples_evaluated: int = 0
    samples_failed: int = 0

    def lines(self) -> list[str]:
        out = [
            f"rmse_m: {self.rmse_m:.6f}",
            f"rel: {self.rel:.6f}",
            f"delta1: {self.delta1:.6f}",
            f"pixels_evaluated: {self.pixels_evaluated}",
            f"samples_evaluated: {self.samples_evaluated}",
            f"samples_failed: {self.samples_failed}",
        ]
        if self.crop is not None:
            out.append("crop: " + ",".join(f"{c:g}" for c in self.crop))
        return out


def _masked_pair(y, y_hat, mask):
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    y_hat = np.asarray(y_hat, dtype=np.float64).reshape(-1)
    if y.shape != y_hat.shape:
        raise DimensionError(f"shape mismatch: {y.shape} vs {y_hat.shape}")
    if mask is None:
        mask = np.ones(y.shape, dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool).reshape(-1)
        if mask.shape != y.shape:
            raise DimensionError(f"mask shape {mask.shape} does not match maps {y.shape}")
    if not mask.any():
        raise ValidationError("mask selects no pixels")
    return y[mask], y_hat[mask]


def rmse(y, y_hat, mask=None) -> float:
    """Root of the masked mean squared error, in meters."""
    yv, pv = _masked_pair(y, y_hat, mask)
    return float(np.sqrt(np.mean((yv - pv) ** 2)))


def rel(y, y_hat, mask=None) -> float:
    """Masked mean of |y - y_hat| / y; ground truth must be positive."""
    yv, pv = _masked_pair(y, y_hat, mask)
    if np.any(yv <= 0):
        raise ValidationError("relative error needs strictly positive ground truth inside mask")
    return float(np.mean(np.abs(yv - pv) / yv))


def delta1(y, y_hat, mask=None, thr: float = 1.25) -> float:
    """Fraction of pixels with max(y/y_hat, y_hat/y) strictly below thr."""
    yv, pv = _masked_pair(y, y_hat, mask)
    if np.any(yv <= 0) or np.any(pv <= 0):
        raise ValidationError("delta1 needs strictly positive depths inside mask")
    ratio = np.maximum(yv / pv, pv / yv)
    return float(np.mean(ratio < thr))


def resize_nearest(z: np.ndarray, out_hw: tuple[int, int]) -> np.ndarray:
    """Nearest-neighbour resample of a 2-D map (no invented depths)."""
    h, w = z.shape
    oh, ow = out_hw
    ri = (np.arange(oh) * (h / oh)).astype(np.intp)
    ci = (np.arange(ow) * (w / ow)).astype(np.intp)
    return z[np.ix_(ri, ci)]


def _crop_slices(shape, crop):
    """Fractional (top, left, bottom, right) rectangle -> index slices."""
    h, w = shape
    t, l, b, r = crop
    if not (0 <= t < b <= 1 and 0 <= l < r <= 1):
        raise ValidationError(f"crop rectangle {crop} must satisfy 0 <= top < bottom <= 1 etc.")
    return slice(int(round(t * h)), int(round(b * h))), slice(int(round(l * w)), int(round(r * w)))


def evaluate_dataset(predict, samples, crop=None) -> MetricsReport:
    """Aggregate per-image metrics over a dataset (mean of per-image values).

    ``predict`` maps an rgb tensor (1, 3, H, W) to a depth map (1, 1, h, w);
    ground truth is resized (nearest) to the prediction resolution and
    non-positive depths are masked out.  Unreadable or fully invalid
    samples are skipped with a recorded warning.
    """
    per_image = []
    pixels = 0
    failed = 0
    got_any_input = False
    for sample in samples:
        got_any_input = True
        try:
            pred = np.asarray(predict(sample.rgb), dtype=np.float64)[0, 0]
            gt = np.asarray(sample.depth, dtype=np.float64)[0, 0]
            gt = resize_nearest(gt, pred.shape)
            if crop is not None:
                rs, cs = _crop_slices(pred.shape, crop)
                pred, gt = pred[rs, cs], gt[rs, cs]
            # The model clamps at 0 m; floor predictions just above it so
            # the ratio metric stays defined without masking pixels away.
            pred = np.maximum(pred, 1e-6)
            mask = (gt > 0) & np.isfinite(gt) & np.isfinite(pred)
            if not mask.any():
                raise ValidationError("no valid ground-truth pixels")
            per_image.append((rmse(gt, pred, mask), rel(gt, pred, mask), delta1(gt, pred, mask)))
            pixels += int(mask.sum())
        except Exception as exc:  # keep evaluating the remaining samples
            failed += 1
            log.warning("sample skipped: %s", exc)
    if not got_any_input:
        raise DatasetError("dataset is empty")
    if not per_image:
        raise DatasetError(f"all {failed} samples failed to evaluate")
    arr = np.array(per_image, dtype=np.float64)
    mean = arr.mean(axis=0)
    return MetricsReport(
        rmse_m=float(mean[0]),
        rel=float(mean[1]),
        delta1=float(mean[2]),
        pixels_evaluated=pixels,
        crop=tuple(crop) if crop is not None else None,
        samples_evaluated=len(per_image),
        samples_failed=failed,
    )
