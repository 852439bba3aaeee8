"""End-to-end numerical self-check: kernel oracles, gradient checks and
model cost-table verification, runnable from the CLI.

Every check reports a measured error against an explicit tolerance, so a
run is auditable line by line.  ``perturb_sobel=True`` deliberately
corrupts one Sobel coefficient before the gradient checks run, which
must make them fail; it exists to prove the checks are able to fail.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels as K
from . import loss as L
from .model import build, preset_config

__all__ = ["CheckResult", "run_selfcheck", "PARAM_TARGETS", "MAC_TARGETS"]

# Design targets for the three variants (params, and MACs at the two
# reference resolutions), with the tolerances the package promises.
PARAM_TARGETS = {"s": 3.29e6, "xs": 1.45e6, "xxs": 0.71e6}
PARAM_TOL = 0.05
MAC_TARGETS = {
    ("s", (192, 256)): 0.975e9,
    ("s", (192, 636)): 2.432e9,
    ("xs", (192, 256)): 0.579e9,
    ("xs", (192, 636)): 1.444e9,
    ("xxs", (192, 256)): 0.186e9,
    ("xxs", (192, 636)): 0.464e9,
}
MAC_TOL = 0.10


@dataclass(frozen=True)
class CheckResult:
    name: str
    measured: float
    tolerance: float
    passed: bool

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return f"[{status}] {self.name}: measured {self.measured:.3e} (tolerance {self.tolerance:.3e})"


def _rel_err(got, want) -> float:
    got = np.asarray(got, dtype=np.float64)
    want = np.asarray(want, dtype=np.float64)
    denom = max(float(np.abs(want).max()), 1e-30)
    return float(np.abs(got - want).max() / denom)


# -- loop oracles (slow, obviously correct) -----------------------------------


def _conv2d_loop(x, w, b, stride, pad):
    bs, cin, h, ww = x.shape
    cout, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))).astype(np.float64)
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (ww + 2 * pad - kw) // stride + 1
    out = np.zeros((bs, cout, ho, wo))
    for n in range(bs):
        for o in range(cout):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for c in range(cin):
                        for ki in range(kh):
                            for kj in range(kw):
                                acc += xp[n, c, i * stride + ki, j * stride + kj] * w[o, c, ki, kj]
                    out[n, o, i, j] = acc + (b[o] if b is not None else 0.0)
    return out.astype(np.float32)


def _depthwise_loop(x, w, b, stride, pad):
    bs, c, h, ww = x.shape
    kh, kw = w.shape[2:]
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))).astype(np.float64)
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (ww + 2 * pad - kw) // stride + 1
    out = np.zeros((bs, c, ho, wo))
    for n in range(bs):
        for ch in range(c):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for ki in range(kh):
                        for kj in range(kw):
                            acc += xp[n, ch, i * stride + ki, j * stride + kj] * w[ch, 0, ki, kj]
                    out[n, ch, i, j] = acc + (b[ch] if b is not None else 0.0)
    return out.astype(np.float32)


def _tconv_loop(x, w, b):
    bs, cin, h, ww = x.shape
    cout = w.shape[1]
    out = np.zeros((bs, cout, 2 * h, 2 * ww))
    for n in range(bs):
        for c in range(cin):
            for i in range(h):
                for j in range(ww):
                    for o in range(cout):
                        for ki in range(2):
                            for kj in range(2):
                                out[n, o, 2 * i + ki, 2 * j + kj] += x[n, c, i, j] * w[c, o, ki, kj]
    if b is not None:
        out += b.reshape(1, -1, 1, 1)
    return out.astype(np.float32)


def _attention_loop(seq, wq, wk, wv, wo, heads, bq, bk, bv, bo):
    tokens = seq.tokens.astype(np.float64)
    bs, groups, n, d = tokens.shape
    dh = d // heads
    out = np.zeros_like(tokens)
    for nb in range(bs):
        for g in range(groups):
            x = tokens[nb, g]
            q = x @ wq + bq
            k = x @ wk + bk
            v = x @ wv + bv
            merged = np.zeros((n, d))
            for h in range(heads):
                sl = slice(h * dh, (h + 1) * dh)
                logits = q[:, sl] @ k[:, sl].T / np.sqrt(dh)
                logits -= logits.max(axis=1, keepdims=True)
                p = np.exp(logits)
                p /= p.sum(axis=1, keepdims=True)
                merged[:, sl] = p @ v[:, sl]
            out[nb, g] = merged @ wo + bo
    return out.astype(np.float32)


def _fd_gradcheck(fn, y, y_hat, analytic, eps=1e-5):
    """Max relative error of an analytic gradient vs central differences."""
    num = np.zeros_like(y_hat)
    it = np.nditer(y_hat, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        p = y_hat.copy()
        p[idx] += eps
        up = fn(y, p)
        p[idx] -= 2 * eps
        down = fn(y, p)
        num[idx] = (up - down) / (2 * eps)
        it.iternext()
    scale = max(float(np.abs(num).max()), 1e-12)
    return float(np.abs(analytic - num).max() / scale)


# -- check suite ---------------------------------------------------------------


def run_selfcheck(seed: int = 0, perturb_sobel: bool = False) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    results: list[CheckResult] = []

    def check(name, measured, tolerance):
        results.append(CheckResult(name, float(measured), tolerance, measured <= tolerance))

    # Kernels against loop oracles.
    x = rng.standard_normal((2, 3, 9, 8)).astype(np.float32)
    w = rng.standard_normal((5, 3, 3, 3)).astype(np.float32)
    b = rng.standard_normal(5).astype(np.float32)
    check("conv2d vs loop oracle (k3 s2 p1)",
          _rel_err(K.conv2d(x, w, b, 2, 1), _conv2d_loop(x, w, b, 2, 1)), 1e-5)
    wd = rng.standard_normal((3, 1, 3, 3)).astype(np.float32)
    bd = rng.standard_normal(3).astype(np.float32)
    check("depthwise_conv2d vs loop oracle",
          _rel_err(K.depthwise_conv2d(x, wd, bd, 1, 1), _depthwise_loop(x, wd, bd, 1, 1)), 1e-5)
    wp = rng.standard_normal((4, 3, 1, 1)).astype(np.float32)
    bp = rng.standard_normal(4).astype(np.float32)
    check("pointwise_conv2d vs loop oracle",
          _rel_err(K.pointwise_conv2d(x, wp, bp), _conv2d_loop(x, wp, bp, 1, 0)), 1e-5)
    wt = rng.standard_normal((3, 4, 2, 2)).astype(np.float32)
    bt = rng.standard_normal(4).astype(np.float32)
    check("transposed_conv2d vs scatter oracle",
          _rel_err(K.transposed_conv2d(x, wt, bt), _tconv_loop(x, wt, bt)), 1e-5)

    # Patch fold/unfold must be a bit-exact round trip.
    feat = rng.standard_normal((1, 6, 8, 8)).astype(np.float32)
    seq = K.unfold(feat, (4, 4))
    check("fold(unfold(x)) round trip", _rel_err(K.fold(seq), feat), 0.0)

    # Attention against the per-group loop oracle.
    d = 8
    toks = rng.standard_normal((1, 4, 4, d)).astype(np.float32)
    seq = K.PatchSequence(toks, (2, 2), (2, 2))
    mats = [rng.standard_normal((d, d)).astype(np.float32) for _ in range(4)]
    biases = [rng.standard_normal(d).astype(np.float32) for _ in range(4)]
    got = K.multihead_self_attention(seq, *mats, 2, *biases)
    want = _attention_loop(seq, *[m.astype(np.float64) for m in mats], 2,
                           *[v.astype(np.float64) for v in biases])
    check("attention vs loop oracle", _rel_err(got.tokens, want), 1e-5)

    # Loss gradients against central finite differences (float64 maps).
    y = rng.uniform(0.5, 9.5, (9, 10))
    y_hat = y + rng.normal(0.0, 0.3, y.shape)
    orig = L.SOBEL_X
    if perturb_sobel:
        L.SOBEL_X = orig + np.array([[0.0, 0.0, 0.0], [0.05, 0.0, 0.0], [0.0, 0.0, 0.0]])
    try:
        if perturb_sobel:
            # The injected fault changes the loss surface between the
            # analytic gradient and this re-evaluation path.
            _, g = L.l_grad(y, y_hat, True)
            L.SOBEL_X = orig
            check("gradcheck l_grad (fault injected)",
                  _fd_gradcheck(lambda a, b: L.l_grad(a, b), y, y_hat, g), 1e-4)
        else:
            for name, fn in (
                ("l_depth", lambda a, b, wg=False: L.l_depth(a, b, wg)),
                ("l_grad", lambda a, b, wg=False: L.l_grad(a, b, wg)),
                ("l_norm", lambda a, b, wg=False: L.l_norm(a, b, wg)),
                ("l_ssim", lambda a, b, wg=False: L.l_ssim(a, b, 10.0, wg)),
            ):
                _, g = fn(y, y_hat, True)
                check(f"gradcheck {name} vs finite differences",
                      _fd_gradcheck(fn, y, y_hat, g), 1e-4)
    finally:
        L.SOBEL_X = orig

    # Model cost tables against the design targets.
    for variant, target in PARAM_TARGETS.items():
        model = build(preset_config(variant), seed=seed)
        check(f"{variant} parameter total vs {target / 1e6:.2f}M",
              abs(model.param_count - target) / target, PARAM_TOL)
        for size in ((192, 256), (192, 636)):
            macs = sum(m for _, _, m, _ in model.layer_report(size))
            want = MAC_TARGETS[(variant, size)]
            check(f"{variant} MAC total @{size[1]}x{size[0]} vs {want / 1e9:.3f}G",
                  abs(macs - want) / want, MAC_TOL)

    # Output geometry: half resolution at both reference extents.
    model = build(preset_config("xxs"), seed=seed)
    out = model.forward(rng.uniform(0, 1, (1, 3, 192, 256)).astype(np.float32))
    check("xxs forward output is half resolution",
          0.0 if out.values.shape == (1, 1, 96, 128) else 1.0, 0.0)
    check("xxs forward output is finite",
          0.0 if np.isfinite(out.values).all() else 1.0, 0.0)
    return results
