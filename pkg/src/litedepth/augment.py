"""Seeded training-time augmentation: default policy plus the shifting pair.

The default policy is vertical flip, mirroring, random crop (resized
back) and a channel swap of the RGB image.  The shifting pair adds a
photometric shift on the RGB image (brightness/gamma then per-channel
color scale, all drawn from [0.9, 1.1]) and a uniform additive shift on
the depth map (within +/-10 cm indoors, +/-10 dm outdoors).  Every
transform fires independently with probability 0.5 and the whole policy
is a pure function of (sample, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import cv2
import numpy as np

from .errors import ValidationError

__all__ = [
    "AugmentParams",
    "DepthSample",
    "PolicyDecisions",
    "c_shift",
    "d_shift",
    "default_policy",
    "draw_decisions",
    "shifting_policy",
]

PHOTO_RANGE = (0.9, 1.1)
SHIFT_BOUND_M = {"indoor_cm": 0.10, "outdoor_dm": 1.0}
APPLY_PROB = 0.5
CROP_SCALE_RANGE = (0.75, 1.0)

# Fixed spawn order of the per-transform RNG streams; appending here
# never perturbs the draws of earlier transforms.
_TRANSFORMS = ("vflip", "mirror", "crop", "channel_swap", "c_shift", "d_shift")


@dataclass(frozen=True)
class DepthSample:
    """Paired RGB image (1,3,H,W in [0,1]) and depth map (1,1,H,W meters)."""

    rgb: np.ndarray
    depth: np.ndarray
    unit: str = "indoor_cm"
    max_depth: float = 10.0

    def __post_init__(self):
        if self.rgb.ndim != 4 or self.rgb.shape[:2] != (1, 3):
            raise ValidationError(f"rgb must be (1,3,H,W), got {self.rgb.shape}")
        if self.depth.ndim != 4 or self.depth.shape[:2] != (1, 1):
            raise ValidationError(f"depth must be (1,1,H,W), got {self.depth.shape}")
        if self.rgb.shape[2:] != self.depth.shape[2:]:
            raise ValidationError(
                f"rgb {self.rgb.shape[2:]} and depth {self.depth.shape[2:]} extents differ"
            )
        if self.unit not in SHIFT_BOUND_M:
            raise ValidationError(f"unknown depth unit {self.unit!r}")
        if self.max_depth <= 0:
            raise ValidationError("max_depth must be positive")


@dataclass(frozen=True)
class AugmentParams:
    """One concrete draw of the shifting-pair parameters."""

    beta: float = 1.0
    gamma: float = 1.0
    eta: tuple[float, float, float] = (1.0, 1.0, 1.0)
    shift_s: float = 0.0

    def validate(self, unit: str) -> None:
        lo, hi = PHOTO_RANGE
        for name, v in (("beta", self.beta), ("gamma", self.gamma), *(("eta", e) for e in self.eta)):
            if not lo <= v <= hi:
                raise ValidationError(f"{name}={v} outside [{lo}, {hi}]")
        bound = SHIFT_BOUND_M[unit]
        if abs(self.shift_s) > bound + 1e-12:
            raise ValidationError(f"depth shift {self.shift_s} m exceeds +/-{bound} m for {unit}")


def c_shift(rgb: np.ndarray, beta: float, gamma: float, eta) -> np.ndarray:
    """Photometric shift: beta * rgb**gamma, then per-channel scale by eta."""
    eta = np.broadcast_to(np.asarray(eta, dtype=np.float64), (3,))
    AugmentParams(beta=beta, gamma=gamma, eta=tuple(eta)).validate("indoor_cm")
    x = np.asarray(rgb, dtype=np.float64)
    out = beta * np.power(x, gamma) * eta.reshape(1, 3, 1, 1)
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def d_shift(depth: np.ndarray, shift_s: float, max_depth: float, unit: str = "indoor_cm") -> np.ndarray:
    """Add a uniform scalar shift to the whole map, clamped to [0, max_depth]."""
    bound = SHIFT_BOUND_M.get(unit)
    if bound is None:
        raise ValidationError(f"unknown depth unit {unit!r}")
    if abs(shift_s) > bound + 1e-12:
        raise ValidationError(f"depth shift {shift_s} m exceeds +/-{bound} m for {unit}")
    out = np.asarray(depth, dtype=np.float64) + shift_s
    return np.clip(out, 0.0, max_depth).astype(np.float32)


@dataclass(frozen=True)
class PolicyDecisions:
    """Which transforms fire for a given seed, and their parameters."""

    vflip: bool
    mirror: bool
    crop: bool
    crop_scale: float
    crop_origin: tuple[float, float]
    channel_swap: bool
    channel_order: tuple[int, int, int]
    apply_c_shift: bool
    c_params: AugmentParams
    apply_d_shift: bool
    shift_s: float


def draw_decisions(seed: int, unit: str = "indoor_cm") -> PolicyDecisions:
    """Deterministically expand a seed into all policy decisions.

    One child RNG stream per transform, spawned in fixed order, so each
    transform's draws are independent of the others.
    """
    streams = {
        name: np.random.default_rng(s)
        for name, s in zip(_TRANSFORMS, np.random.SeedSequence(seed).spawn(len(_TRANSFORMS)))
    }
    lo, hi = PHOTO_RANGE
    crop_rng = streams["crop"]
    crop_fire = crop_rng.random() < APPLY_PROB
    crop_scale = float(crop_rng.uniform(*CROP_SCALE_RANGE))
    crop_origin = (float(crop_rng.random()), float(crop_rng.random()))
    swap_rng = streams["channel_swap"]
    swap_fire = swap_rng.random() < APPLY_PROB
    channel_order = tuple(int(i) for i in swap_rng.permutation(3))
    cs_rng = streams["c_shift"]
    cs_fire = cs_rng.random() < APPLY_PROB
    c_params = AugmentParams(
        beta=float(cs_rng.uniform(lo, hi)),
        gamma=float(cs_rng.uniform(lo, hi)),
        eta=tuple(float(v) for v in cs_rng.uniform(lo, hi, size=3)),
    )
    ds_rng = streams["d_shift"]
    ds_fire = ds_rng.random() < APPLY_PROB
    bound = SHIFT_BOUND_M[unit]
    shift_s = float(ds_rng.uniform(-bound, bound))
    return PolicyDecisions(
        vflip=streams["vflip"].random() < APPLY_PROB,
        mirror=streams["mirror"].random() < APPLY_PROB,
        crop=crop_fire,
        crop_scale=crop_scale,
        crop_origin=crop_origin,
        channel_swap=swap_fire,
        channel_order=channel_order,
        apply_c_shift=cs_fire,
        c_params=c_params,
        apply_d_shift=ds_fire,
        shift_s=shift_s,
    )


def _resize_chw(chw: np.ndarray, out_hw: tuple[int, int], nearest: bool) -> np.ndarray:
    interp = cv2.INTER_NEAREST if nearest else cv2.INTER_LINEAR
    hwc = np.moveaxis(chw, 0, -1)
    out = cv2.resize(hwc, (out_hw[1], out_hw[0]), interpolation=interp)
    if out.ndim == 2:
        out = out[:, :, None]
    return np.moveaxis(out, -1, 0).astype(np.float32)


def _apply_crop(rgb, depth, scale, origin):
    h, w = rgb.shape[2:]
    ch, cw = max(1, round(h * scale)), max(1, round(w * scale))
    top = round(origin[0] * (h - ch))
    left = round(origin[1] * (w - cw))
    rgb_c = rgb[0, :, top : top + ch, left : left + cw]
    depth_c = depth[0, :, top : top + ch, left : left + cw]
    rgb_r = _resize_chw(rgb_c, (h, w), nearest=False)[None]
    depth_r = _resize_chw(depth_c, (h, w), nearest=True)[None]
    return rgb_r, depth_r


def default_policy(sample: DepthSample, seed: int) -> DepthSample:
    """Geometric + channel-swap transforms, each fired with p=0.5."""
    dec = draw_decisions(seed, sample.unit)
    rgb, depth = sample.rgb, sample.depth
    if dec.vflip:
        rgb, depth = rgb[:, :, ::-1, :], depth[:, :, ::-1, :]
    if dec.mirror:
        rgb, depth = rgb[:, :, :, ::-1], depth[:, :, :, ::-1]
    if dec.crop:
        rgb, depth = _apply_crop(rgb, depth, dec.crop_scale, dec.crop_origin)
    if dec.channel_swap:
        rgb = rgb[:, list(dec.channel_order), :, :]
    return replace(sample, rgb=np.ascontiguousarray(rgb), depth=np.ascontiguousarray(depth))


def shifting_policy(sample: DepthSample, seed: int) -> DepthSample:
    """Default policy followed by the photometric/depth shifting pair."""
    dec = draw_decisions(seed, sample.unit)
    out = default_policy(sample, seed)
    rgb, depth = out.rgb, out.depth
    if dec.apply_c_shift:
        p = dec.c_params
        rgb = c_shift(rgb, p.beta, p.gamma, p.eta)
    if dec.apply_d_shift:
        depth = d_shift(depth, dec.shift_s, sample.max_depth, sample.unit)
    return replace(out, rgb=rgb, depth=depth)
