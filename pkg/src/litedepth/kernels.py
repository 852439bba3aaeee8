"""Dense NCHW tensor kernels used by the depth network.

All kernels operate on rank-4 float32 arrays laid out (batch, channel,
height, width) and are pure functions: same inputs give bit-identical
outputs.  Reductions accumulate in float64 and the result is cast back
to float32, so drift stays below the 1e-6 oracle tolerance even for the
largest layer shapes in the network.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigurationError, DimensionError, ValidationError

__all__ = [
    "PatchSequence",
    "batchnorm_inference",
    "concat_channels",
    "conv2d",
    "depthwise_conv2d",
    "fold",
    "layernorm",
    "multihead_self_attention",
    "pointwise_conv2d",
    "relu",
    "silu",
    "transposed_conv2d",
    "unfold",
]


def _require_4d(x: np.ndarray, what: str) -> None:
    if x.ndim != 4:
        raise DimensionError(f"{what} must be rank-4 (b, c, h, w), got shape {x.shape}")


def _as64(x: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.float64)


def _windows(x: np.ndarray, kh: int, kw: int, stride: int, padding: int) -> np.ndarray:
    """Strided (b, c, ho, wo, kh, kw) view of the zero-padded input."""
    b, c, h, w = x.shape
    if h + 2 * padding < kh or w + 2 * padding < kw:
        raise DimensionError(
            f"kernel ({kh}x{kw}) does not fit padded input ({h + 2 * padding}x{w + 2 * padding})"
        )
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    view = sliding_window_view(x, (kh, kw), axis=(2, 3))
    return view[:, :, ::stride, ::stride]


def conv2d(
    x: np.ndarray,
    weights: np.ndarray,
    bias: np.ndarray | None = None,
    stride: int = 1,
    padding: int = 0,
) -> np.ndarray:
    """Direct cross-correlation with (out_ch, in_ch, kh, kw) weights."""
    _require_4d(x, "input")
    _require_4d(weights, "weights")
    if stride < 1:
        raise ConfigurationError(f"stride must be positive, got {stride}")
    if padding < 0:
        raise ConfigurationError(f"padding must be non-negative, got {padding}")
    out_ch, in_ch, kh, kw = weights.shape
    if x.shape[1] != in_ch:
        raise DimensionError(
            f"input has {x.shape[1]} channels but weights {weights.shape} expect {in_ch}"
        )
    win = _windows(_as64(x), kh, kw, stride, padding)
    out = np.einsum("bchwkl,ockl->bohw", win, _as64(weights), optimize=True)
    if bias is not None:
        out += np.asarray(bias, dtype=np.float64).reshape(1, out_ch, 1, 1)
    return out.astype(np.float32)


def depthwise_conv2d(
    x: np.ndarray,
    weights: np.ndarray,
    bias: np.ndarray | None = None,
    stride: int = 1,
    padding: int = 0,
) -> np.ndarray:
    """Per-channel cross-correlation with (ch, 1, kh, kw) weights."""
    _require_4d(x, "input")
    _require_4d(weights, "weights")
    ch, one, kh, kw = weights.shape
    if one != 1:
        raise DimensionError(f"depthwise weights must be (ch, 1, kh, kw), got {weights.shape}")
    if x.shape[1] != ch:
        raise DimensionError(f"input has {x.shape[1]} channels but weights expect {ch}")
    win = _windows(_as64(x), kh, kw, stride, padding)
    out = np.einsum("bchwkl,ckl->bchw", win, _as64(weights[:, 0]), optimize=True)
    if bias is not None:
        out += np.asarray(bias, dtype=np.float64).reshape(1, ch, 1, 1)
    return out.astype(np.float32)


def pointwise_conv2d(
    x: np.ndarray, weights: np.ndarray, bias: np.ndarray | None = None
) -> np.ndarray:
    """1x1 convolution: per-pixel channel mixing."""
    _require_4d(x, "input")
    _require_4d(weights, "weights")
    out_ch, in_ch, kh, kw = weights.shape
    if (kh, kw) != (1, 1):
        raise DimensionError(f"pointwise weights must be (out, in, 1, 1), got {weights.shape}")
    if x.shape[1] != in_ch:
        raise DimensionError(f"input has {x.shape[1]} channels but weights expect {in_ch}")
    out = np.einsum("bchw,oc->bohw", _as64(x), _as64(weights[:, :, 0, 0]), optimize=True)
    if bias is not None:
        out += np.asarray(bias, dtype=np.float64).reshape(1, out_ch, 1, 1)
    return out.astype(np.float32)


def transposed_conv2d(
    x: np.ndarray,
    weights: np.ndarray,
    bias: np.ndarray | None = None,
    stride: int = 2,
    kernel: int = 2,
    padding: int = 0,
) -> np.ndarray:
    """Fractionally strided convolution that exactly doubles resolution.

    Weights are (in_ch, out_ch, kh, kw).  Only the resolution-doubling
    configuration kernel=2, stride=2, padding=0 is supported; anything
    else is rejected.
    """
    _require_4d(x, "input")
    _require_4d(weights, "weights")
    if (stride, kernel, padding) != (2, 2, 0):
        raise ConfigurationError(
            "transposed_conv2d only supports the doubling configuration "
            f"kernel=2, stride=2, padding=0 (got k={kernel}, s={stride}, p={padding})"
        )
    in_ch, out_ch, kh, kw = weights.shape
    if (kh, kw) != (2, 2):
        raise DimensionError(f"weights spatial extent must be 2x2, got {weights.shape}")
    if x.shape[1] != in_ch:
        raise DimensionError(f"input has {x.shape[1]} channels but weights expect {in_ch}")
    b, _, h, w = x.shape
    # out[b,o,2i+di,2j+dj] = sum_c x[b,c,i,j] * w[c,o,di,dj]
    out = np.einsum("bchw,codk->bohdwk", _as64(x), _as64(weights), optimize=True)
    out = out.reshape(b, out_ch, 2 * h, 2 * w)
    if bias is not None:
        out += np.asarray(bias, dtype=np.float64).reshape(1, out_ch, 1, 1)
    return out.astype(np.float32)


def batchnorm_inference(
    x: np.ndarray,
    mean: np.ndarray,
    var: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    eps: float = 1e-5,
) -> np.ndarray:
    """Per-channel affine normalisation with stored statistics."""
    _require_4d(x, "input")
    c = x.shape[1]
    mean, var, gamma, beta = (np.asarray(a, dtype=np.float64).reshape(-1) for a in (mean, var, gamma, beta))
    for name, a in (("mean", mean), ("var", var), ("gamma", gamma), ("beta", beta)):
        if a.shape[0] != c:
            raise DimensionError(f"batchnorm {name} has length {a.shape[0]}, expected {c}")
    if np.any(var < 0):
        raise ValidationError("batchnorm variance must be non-negative")
    scale = gamma / np.sqrt(var + eps)
    shift = beta - mean * scale
    out = _as64(x) * scale.reshape(1, c, 1, 1) + shift.reshape(1, c, 1, 1)
    return out.astype(np.float32)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0).astype(np.float32)


def silu(x: np.ndarray) -> np.ndarray:
    x64 = np.asarray(x, dtype=np.float64)
    return (x64 / (1.0 + np.exp(-x64))).astype(np.float32)


@dataclass(frozen=True)
class PatchSequence:
    """Flattened patch tokens: (batch, ph*pw, tokens, channels).

    Axis 1 indexes the pixel position inside a patch (row-major), axis 2
    the patch grid position (row-major over grid).  ``grid`` remembers
    the patch-grid extents so ``fold`` can invert losslessly.
    """

    tokens: np.ndarray
    patch: tuple[int, int]
    grid: tuple[int, int]

    @property
    def channels(self) -> int:
        return self.tokens.shape[3]


def unfold(x: np.ndarray, patch: tuple[int, int]) -> PatchSequence:
    """Rearrange (b, c, h, w) into per-patch token sequences."""
    _require_4d(x, "input")
    ph, pw = patch
    b, c, h, w = x.shape
    if ph < 1 or pw < 1:
        raise ConfigurationError(f"patch extents must be positive, got {patch}")
    if h % ph or w % pw:
        raise DimensionError(f"spatial extents ({h}x{w}) not divisible by patch ({ph}x{pw})")
    th, tw = h // ph, w // pw
    t = x.reshape(b, c, th, ph, tw, pw)
    # (b, ph, pw, th, tw, c) -> (b, ph*pw, th*tw, c)
    t = t.transpose(0, 3, 5, 2, 4, 1).reshape(b, ph * pw, th * tw, c)
    return PatchSequence(tokens=np.ascontiguousarray(t), patch=(ph, pw), grid=(th, tw))


def fold(seq: PatchSequence) -> np.ndarray:
    """Inverse of unfold; bit-exact round trip."""
    ph, pw = seq.patch
    th, tw = seq.grid
    b, p, n, c = seq.tokens.shape
    if p != ph * pw or n != th * tw:
        raise DimensionError(
            f"token array {seq.tokens.shape} inconsistent with patch {seq.patch} grid {seq.grid}"
        )
    t = seq.tokens.reshape(b, ph, pw, th, tw, c)
    t = t.transpose(0, 5, 3, 1, 4, 2)  # (b, c, th, ph, tw, pw)
    return np.ascontiguousarray(t.reshape(b, c, th * ph, tw * pw))


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=-1, keepdims=True)
    e = np.exp(logits - m)
    return e / e.sum(axis=-1, keepdims=True)


def multihead_self_attention(
    seq: PatchSequence,
    wq: np.ndarray,
    wk: np.ndarray,
    wv: np.ndarray,
    wo: np.ndarray,
    heads: int,
    bq: np.ndarray | None = None,
    bk: np.ndarray | None = None,
    bv: np.ndarray | None = None,
    bo: np.ndarray | None = None,
) -> PatchSequence:
    """Scaled dot-product self-attention within each patch-position group.

    No positional encoding is applied, so permuting token order permutes
    the output identically.  Weight matrices are (d, d), applied as
    ``token @ W + b``.
    """
    d = seq.channels
    if d % heads:
        raise ConfigurationError(f"embedding dim {d} not divisible by {heads} heads")
    for name, w in (("wq", wq), ("wk", wk), ("wv", wv), ("wo", wo)):
        if w.shape != (d, d):
            raise DimensionError(f"{name} must be ({d}, {d}), got {w.shape}")
    x = _as64(seq.tokens)  # (b, p, n, d)
    b, p, n, _ = x.shape
    dh = d // heads

    def proj(w: np.ndarray, bias: np.ndarray | None) -> np.ndarray:
        y = x @ _as64(w)
        if bias is not None:
            y = y + np.asarray(bias, dtype=np.float64)
        # (b, p, n, heads, dh) -> (b, p, heads, n, dh)
        return y.reshape(b, p, n, heads, dh).transpose(0, 1, 3, 2, 4)

    q, k, v = proj(wq, bq), proj(wk, bk), proj(wv, bv)
    logits = q @ k.transpose(0, 1, 2, 4, 3) / np.sqrt(dh)
    attn = _softmax_rows(logits)
    ctx = attn @ v  # (b, p, heads, n, dh)
    ctx = ctx.transpose(0, 1, 3, 2, 4).reshape(b, p, n, d)
    out = ctx @ _as64(wo)
    if bo is not None:
        out = out + np.asarray(bo, dtype=np.float64)
    return PatchSequence(tokens=out.astype(np.float32), patch=seq.patch, grid=seq.grid)


def layernorm(
    seq: PatchSequence, gamma: np.ndarray, beta: np.ndarray, eps: float = 1e-5
) -> PatchSequence:
    """Per-token zero-mean unit-variance normalisation with affine."""
    d = seq.channels
    gamma = np.asarray(gamma, dtype=np.float64).reshape(-1)
    beta = np.asarray(beta, dtype=np.float64).reshape(-1)
    if gamma.shape[0] != d or beta.shape[0] != d:
        raise DimensionError(f"layernorm affine length must be {d}")
    x = _as64(seq.tokens)
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    out = (x - mu) / np.sqrt(var + eps) * gamma + beta
    return PatchSequence(tokens=out.astype(np.float32), patch=seq.patch, grid=seq.grid)


def concat_channels(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Stack two tensors along the channel axis (argument order preserved)."""
    _require_4d(a, "first input")
    _require_4d(b, "second input")
    if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise DimensionError(f"non-channel extents differ: {a.shape} vs {b.shape}")
    return np.concatenate([a, b], axis=1)
