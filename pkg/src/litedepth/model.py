"""Encoder-decoder depth network in three sizes (s / xs / xxs).

The encoder is a hybrid of MobileNetV2 inverted-residual stages and two
transformer blocks operating on folded patches at 1/16 scale; the
decoder upsamples back to half the input resolution through three
transposed-convolution blocks fed by encoder skip connections.

Every layer is described once, by a small layer object that knows how to
initialise its weights, run forward, and report its parameter / MAC
cost.  ``build``, ``forward`` and the profiler all walk the same
objects, so the counted network is the executed network.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels as K
from .errors import ConfigurationError, DimensionError

__all__ = ["ModelConfig", "DepthNet", "DepthMap", "PRESETS", "build", "preset_config"]

# Channel plans C1..C10 per variant.
_CHANNELS = {
    "s": (16, 32, 64, 128, 160, 320, 128, 64, 32, 16),
    "xs": (16, 32, 48, 80, 96, 192, 128, 64, 32, 16),
    "xxs": (16, 16, 24, 64, 80, 160, 64, 32, 16, 8),
}

# Structural hyperparameters tuned per variant so that parameter totals
# land on 3.29M / 1.45M / 0.71M and MAC totals on the published figures.
_STRUCT = {
    "s": dict(mv2_expansion=4, attn_dim=296, ffn_mult=4),
    "xs": dict(mv2_expansion=4, attn_dim=192, ffn_mult=4),
    "xxs": dict(mv2_expansion=2, attn_dim=136, ffn_mult=4),
}


@dataclass(frozen=True)
class ModelConfig:
    variant: str
    channels: tuple[int, ...]
    activation: str = "relu"  # or "silu"
    patch: tuple[int, int] = (4, 4)
    heads: int = 4
    ffn_mult: float = 4.0
    mv2_expansion: int = 4
    attn_dim: int = 296
    input_size: tuple[int, int] = (192, 256)  # (H, W)
    depth_range: tuple[float, float] = (0.0, 10.0)

    def __post_init__(self):
        if len(self.channels) != 10 or any(c <= 0 for c in self.channels):
            raise ConfigurationError(f"channel plan must be 10 positive ints, got {self.channels}")
        if self.activation not in ("relu", "silu"):
            raise ConfigurationError(f"unknown activation {self.activation!r}")
        if self.attn_dim % self.heads:
            raise ConfigurationError(
                f"attention dim {self.attn_dim} not divisible by {self.heads} heads"
            )
        if self.heads < 1 or self.mv2_expansion < 1 or self.ffn_mult <= 0:
            raise ConfigurationError("structural hyperparameters must be positive")
        h, w = self.input_size
        validate_input_size(h, w, self.patch)
        lo, hi = self.depth_range
        if not hi > lo:
            raise ConfigurationError(f"depth range must satisfy max > min, got {self.depth_range}")


def validate_input_size(h: int, w: int, patch: tuple[int, int] = (4, 4)) -> tuple[int, int]:
    """Check an input extent pair and return the 1/16-scale extents.

    Extents must be even and large enough to survive the four stride-2
    stages, and the 1/16-scale feature map must tile exactly by the
    transformer patch size.  Odd intermediate extents (as with the 636
    wide outdoor resolution) are handled by floor-strided convolutions
    plus a crop at the matching decoder stage.
    """
    if h < 64 or w < 64 or h % 2 or w % 2:
        raise ConfigurationError(f"input extents must be even and >= 64, got {h}x{w}")
    hh, ww = h, w
    for _ in range(4):  # stem + three strided stages
        hh = (hh - 1) // 2 + 1
        ww = (ww - 1) // 2 + 1
    ph, pw = patch
    if hh % ph or ww % pw:
        raise ConfigurationError(
            f"input {h}x{w} reaches a 1/16 feature map of {hh}x{ww}, "
            f"which does not tile by the {ph}x{pw} transformer patch"
        )
    return hh, ww


def preset_config(variant: str, **overrides) -> ModelConfig:
    v = variant.lower()
    if v not in _CHANNELS:
        raise ConfigurationError(f"unknown variant {variant!r}; expected one of s, xs, xxs")
    kw = dict(variant=v, channels=_CHANNELS[v], **_STRUCT[v])
    kw.update(overrides)
    return ModelConfig(**kw)


PRESETS = {v: preset_config(v) for v in _CHANNELS}


@dataclass(frozen=True)
class DepthMap:
    """Metric depth prediction at half the input resolution."""

    values: np.ndarray  # (b, 1, H/2, W/2) meters
    valid_mask: np.ndarray | None = None


# ---------------------------------------------------------------------------
# Layer building blocks.  Each exposes:
#   init(rng) -> {name: array}            deterministic weight creation
#   forward(x, w) -> array                inference
#   report(h, w) -> (entries, (h, w))     per-layer (name, params, macs, shape)
# ---------------------------------------------------------------------------


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


def _out_extent(h: int, k: int, s: int) -> int:
    return (h + 2 * (k // 2) - k) // s + 1


class ConvBNAct:
    """Convolution + batchnorm (+ optional activation) as one unit."""

    def __init__(self, name, cin, cout, k=1, stride=1, act=True, bn=True, depthwise=False):
        self.name = name
        self.cin, self.cout, self.k, self.stride = cin, cout, k, stride
        self.act, self.bn, self.depthwise = act, bn, depthwise
        if depthwise and cin != cout:
            raise ConfigurationError("depthwise layer must preserve channel count")

    def init(self, rng):
        fan_in = self.k * self.k if self.depthwise else self.cin * self.k * self.k
        wshape = (
            (self.cout, 1, self.k, self.k)
            if self.depthwise
            else (self.cout, self.cin, self.k, self.k)
        )
        w = {
            f"{self.name}.weight": _uniform(rng, wshape, fan_in),
            f"{self.name}.bias": np.zeros(self.cout, dtype=np.float32),
        }
        if self.bn:
            w[f"{self.name}.bn_gamma"] = np.ones(self.cout, dtype=np.float32)
            w[f"{self.name}.bn_beta"] = np.zeros(self.cout, dtype=np.float32)
            w[f"{self.name}.bn_mean"] = np.zeros(self.cout, dtype=np.float32)
            w[f"{self.name}.bn_var"] = np.ones(self.cout, dtype=np.float32)
        return w

    def forward(self, x, w, act_fn):
        pad = self.k // 2
        if self.depthwise:
            y = K.depthwise_conv2d(
                x, w[f"{self.name}.weight"], w[f"{self.name}.bias"], self.stride, pad
            )
        elif self.k == 1 and self.stride == 1:
            y = K.pointwise_conv2d(x, w[f"{self.name}.weight"], w[f"{self.name}.bias"])
        else:
            y = K.conv2d(x, w[f"{self.name}.weight"], w[f"{self.name}.bias"], self.stride, pad)
        if self.bn:
            y = K.batchnorm_inference(
                y,
                w[f"{self.name}.bn_mean"],
                w[f"{self.name}.bn_var"],
                w[f"{self.name}.bn_gamma"],
                w[f"{self.name}.bn_beta"],
            )
        if self.act:
            y = act_fn(y)
        return y

    def report(self, h, w):
        ho, wo = _out_extent(h, self.k, self.stride), _out_extent(w, self.k, self.stride)
        taps = self.k * self.k if self.depthwise else self.cin * self.k * self.k
        params = self.cout * (self.k * self.k if self.depthwise else self.cin * self.k * self.k)
        params += self.cout  # bias
        if self.bn:
            params += 2 * self.cout  # gamma, beta (running stats not trainable)
        macs = ho * wo * self.cout * (taps if not self.depthwise else self.k * self.k)
        return [(self.name, params, macs, (self.cout, ho, wo))], (ho, wo)


class TransposedConv:
    """2x2 stride-2 transposed convolution (resolution doubling)."""

    def __init__(self, name, cin, cout):
        self.name, self.cin, self.cout = name, cin, cout

    def init(self, rng):
        return {
            f"{self.name}.weight": _uniform(rng, (self.cin, self.cout, 2, 2), self.cin),
            f"{self.name}.bias": np.zeros(self.cout, dtype=np.float32),
        }

    def forward(self, x, w):
        return K.transposed_conv2d(x, w[f"{self.name}.weight"], w[f"{self.name}.bias"])

    def report(self, h, w):
        ho, wo = 2 * h, 2 * w
        params = self.cin * self.cout * 4 + self.cout
        macs = ho * wo * self.cin * self.cout  # one tap per output element (k=s=2)
        return [(self.name, params, macs, (self.cout, ho, wo))], (ho, wo)


class SepConvBlock:
    """Depthwise 3x3 followed by a pointwise channel mixer."""

    def __init__(self, name, cin, cout, act=True):
        self.dw = ConvBNAct(f"{name}.dw", cin, cin, k=3, act=act, depthwise=True)
        self.pw = ConvBNAct(f"{name}.pw", cin, cout, k=1, act=act)

    def init(self, rng):
        return {**self.dw.init(rng), **self.pw.init(rng)}

    def forward(self, x, w, act_fn):
        return self.pw.forward(self.dw.forward(x, w, act_fn), w, act_fn)

    def report(self, h, w):
        e1, (h, w) = self.dw.report(h, w)
        e2, (h, w) = self.pw.report(h, w)
        return e1 + e2, (h, w)


class MV2Block:
    """Inverted residual: expand -> depthwise (stride) -> linear project."""

    def __init__(self, name, cin, cout, stride, expansion):
        if stride not in (1, 2):
            raise ConfigurationError(f"mv2 stride must be 1 or 2, got {stride}")
        hid = cin * expansion
        self.name, self.cin, self.cout, self.stride = name, cin, cout, stride
        self.expand = ConvBNAct(f"{name}.expand", cin, hid, k=1)
        self.dw = ConvBNAct(f"{name}.dw", hid, hid, k=3, stride=stride, depthwise=True)
        self.project = ConvBNAct(f"{name}.project", hid, cout, k=1, act=False)
        self.residual = stride == 1 and cin == cout

    def init(self, rng):
        return {**self.expand.init(rng), **self.dw.init(rng), **self.project.init(rng)}

    def forward(self, x, w, act_fn):
        y = self.expand.forward(x, w, act_fn)
        y = self.dw.forward(y, w, act_fn)
        y = self.project.forward(y, w, act_fn)
        if self.residual:
            y = (y.astype(np.float64) + x.astype(np.float64)).astype(np.float32)
        return y

    def report(self, h, w):
        entries = []
        for layer in (self.expand, self.dw, self.project):
            e, (h, w) = layer.report(h, w)
            entries += e
        return entries, (h, w)


class TransformerLayer:
    """Pre-norm transformer encoder layer on folded patch tokens."""

    def __init__(self, name, dim, heads, ffn_mult):
        self.name, self.dim, self.heads = name, dim, heads
        self.hidden = int(dim * ffn_mult)

    def init(self, rng):
        d, h = self.dim, self.hidden
        w = {}
        for ln in ("ln1", "ln2"):
            w[f"{self.name}.{ln}.gamma"] = np.ones(d, dtype=np.float32)
            w[f"{self.name}.{ln}.beta"] = np.zeros(d, dtype=np.float32)
        for proj in ("wq", "wk", "wv", "wo"):
            w[f"{self.name}.attn.{proj}"] = _uniform(rng, (d, d), d)
            w[f"{self.name}.attn.b{proj[1]}"] = np.zeros(d, dtype=np.float32)
        w[f"{self.name}.ffn.w1"] = _uniform(rng, (d, h), d)
        w[f"{self.name}.ffn.b1"] = np.zeros(h, dtype=np.float32)
        w[f"{self.name}.ffn.w2"] = _uniform(rng, (h, d), h)
        w[f"{self.name}.ffn.b2"] = np.zeros(d, dtype=np.float32)
        return w

    def forward(self, seq: K.PatchSequence, w, act_fn) -> K.PatchSequence:
        n = self.name
        normed = K.layernorm(seq, w[f"{n}.ln1.gamma"], w[f"{n}.ln1.beta"])
        attn = K.multihead_self_attention(
            normed,
            w[f"{n}.attn.wq"], w[f"{n}.attn.wk"], w[f"{n}.attn.wv"], w[f"{n}.attn.wo"],
            self.heads,
            w[f"{n}.attn.bq"], w[f"{n}.attn.bk"], w[f"{n}.attn.bv"], w[f"{n}.attn.bo"],
        )
        x = seq.tokens.astype(np.float64) + attn.tokens.astype(np.float64)
        seq = K.PatchSequence(x.astype(np.float32), seq.patch, seq.grid)
        normed = K.layernorm(seq, w[f"{n}.ln2.gamma"], w[f"{n}.ln2.beta"])
        hid = normed.tokens.astype(np.float64) @ w[f"{n}.ffn.w1"].astype(np.float64)
        hid += w[f"{n}.ffn.b1"].astype(np.float64)
        hid = act_fn(hid.astype(np.float32)).astype(np.float64)
        out = hid @ w[f"{n}.ffn.w2"].astype(np.float64) + w[f"{n}.ffn.b2"].astype(np.float64)
        tokens = seq.tokens.astype(np.float64) + out
        return K.PatchSequence(tokens.astype(np.float32), seq.patch, seq.grid)

    def report_at(self, n_tokens, groups):
        d, hid = self.dim, self.hidden
        params = 4 * d  # two layernorms
        params += 4 * (d * d + d)  # qkvo with biases
        params += d * hid + hid + hid * d + d  # ffn
        seq = n_tokens // groups
        macs = 4 * n_tokens * d * d  # qkv + output projections
        macs += 2 * groups * seq * seq * d  # logits + weighted values
        macs += 2 * n_tokens * d * hid  # ffn matmuls
        return params, macs


class VitBlock:
    """Patch-attention feature block with input-concat fusion.

    Pipeline: separable conv block (to the attention width) -> unfold ->
    one transformer layer -> fold -> project back to block channels ->
    concat with the block input -> 1x1 fusion conv -> separable conv
    block.  Spatial extents and channel count are preserved end to end.
    """

    def __init__(self, name, channels, cfg: ModelConfig):
        c, d = channels, cfg.attn_dim
        self.name, self.channels = name, channels
        self.patch = cfg.patch
        self.cb_in_dw = ConvBNAct(f"{name}.conv_in.dw", c, c, k=3, depthwise=True)
        self.cb_in_pw = ConvBNAct(f"{name}.conv_in.pw", c, d, k=1)
        self.transformer = TransformerLayer(f"{name}.transformer", d, cfg.heads, cfg.ffn_mult)
        self.project = ConvBNAct(f"{name}.project", d, c, k=1)
        self.fuse = ConvBNAct(f"{name}.fuse", 2 * c, c, k=1)
        self.cb_out = SepConvBlock(f"{name}.conv_out", c, c)

    def init(self, rng):
        w = {}
        for part in (self.cb_in_dw, self.cb_in_pw, self.transformer, self.project,
                     self.fuse, self.cb_out):
            w.update(part.init(rng))
        return w

    def forward(self, x, w, act_fn, trace=None):
        inp = x
        y = self.cb_in_dw.forward(x, w, act_fn)
        y = self.cb_in_pw.forward(y, w, act_fn)
        h, wd = y.shape[2], y.shape[3]
        if h % self.patch[0] or wd % self.patch[1]:
            raise DimensionError(
                f"{self.name}: feature map {h}x{wd} not divisible by patch {self.patch}"
            )
        seq = K.unfold(y, self.patch)
        seq = self.transformer.forward(seq, w, act_fn)
        y = K.fold(seq)
        y = self.project.forward(y, w, act_fn)
        y = K.concat_channels(inp, y)
        if trace is not None:
            trace[f"{self.name}.concat_channels"] = y.shape[1]
        y = self.fuse.forward(y, w, act_fn)
        return self.cb_out.forward(y, w, act_fn)

    def report(self, h, w):
        entries = []
        for layer in (self.cb_in_dw, self.cb_in_pw):
            e, _ = layer.report(h, w)
            entries += e
        n_tokens = h * w
        groups = self.patch[0] * self.patch[1]
        p, m = self.transformer.report_at(n_tokens, groups)
        entries.append((self.transformer.name, p, m, (self.transformer.dim, h, w)))
        for layer in (self.project, self.fuse):
            e, _ = layer.report(h, w)
            entries += e
        e, _ = self.cb_out.report(h, w)
        entries += e
        return entries, (h, w)


class UpBlock:
    """Transposed-conv doubling, skip concat, separable conv block."""

    def __init__(self, name, cin, skip_ch, cout):
        self.name, self.skip_ch, self.cout = name, skip_ch, cout
        self.up = TransposedConv(f"{name}.up", cin, cout)
        self.cb = SepConvBlock(f"{name}.conv", cout + skip_ch, cout)

    def init(self, rng):
        return {**self.up.init(rng), **self.cb.init(rng)}

    def forward(self, x, skip, w, act_fn):
        y = self.up.forward(x, w)
        # Odd encoder extents floor under stride 2; crop the doubled map
        # back to the skip's extent so the concat lines up.
        if y.shape[2] != skip.shape[2] or y.shape[3] != skip.shape[3]:
            if y.shape[2] < skip.shape[2] or y.shape[3] < skip.shape[3]:
                raise DimensionError(
                    f"{self.name}: upsampled {y.shape} smaller than skip {skip.shape}"
                )
            y = y[:, :, : skip.shape[2], : skip.shape[3]]
        y = K.concat_channels(y, skip)
        return self.cb.forward(y, w, act_fn)

    def report(self, h, w, skip_hw):
        entries, (ho, wo) = self.up.report(h, w)
        ho, wo = min(ho, skip_hw[0]), min(wo, skip_hw[1])
        e, (ho, wo) = self.cb.report(ho, wo)
        return entries + e, (ho, wo)


class DepthNet:
    """Built model: config, layer graph, and a named weight map."""

    def __init__(self, config: ModelConfig, weights: dict[str, np.ndarray]):
        self.config = config
        self.weights = weights
        self._graph = _layer_graph(config)
        expected = set(weight_names(config))
        got = set(weights)
        if expected != got:
            missing = sorted(expected - got)[:3]
            extra = sorted(got - expected)[:3]
            raise ConfigurationError(f"weight map mismatch (missing {missing}, extra {extra})")

    # -- inference ---------------------------------------------------------

    def _act(self):
        return K.relu if self.config.activation == "relu" else K.silu

    def encoder_forward(self, image: np.ndarray, weights=None, trace=None):
        g = self._graph
        w = self.weights if weights is None else weights
        act = self._act()
        if image.ndim != 4 or image.shape[1] != 3:
            raise DimensionError(f"image must be (b, 3, H, W), got {image.shape}")
        if (image.shape[2], image.shape[3]) != self.config.input_size:
            raise DimensionError(
                f"image extent {image.shape[2:]} does not match configured "
                f"input size {self.config.input_size}"
            )
        x = g["stem"].forward(image, w, act)
        x = g["stage1"].forward(x, w, act)
        skip1 = x  # C2 @ 1/2
        x = g["stage2a"].forward(x, w, act)
        x = g["stage2b"].forward(x, w, act)
        skip2 = x  # C3 @ 1/4
        x = g["stage3"].forward(x, w, act)
        skip3 = x  # C4 @ 1/8
        x = g["stage4"].forward(x, w, act)
        x = g["vit1"].forward(x, w, act, trace)
        x = g["vit2"].forward(x, w, act, trace)
        bottleneck = g["enc_out"].forward(x, w, act)  # C6 @ 1/16
        return bottleneck, [skip1, skip2, skip3]

    def decoder_forward(self, bottleneck: np.ndarray, skips) -> DepthMap:
        g = self._graph
        w = self.weights
        act = self._act()
        skip1, skip2, skip3 = skips
        x = g["dec_in"].forward(bottleneck, w, act)
        x = g["up1"].forward(x, skip3, w, act)
        x = g["up2"].forward(x, skip2, w, act)
        x = g["up3"].forward(x, skip1, w, act)
        x = g["head"].forward(x, w, act)
        lo, hi = self.config.depth_range
        values = np.clip(x, lo, hi).astype(np.float32)
        return DepthMap(values=values)

    def forward(self, image: np.ndarray) -> DepthMap:
        bottleneck, skips = self.encoder_forward(image)
        return self.decoder_forward(bottleneck, skips)

    # -- introspection -----------------------------------------------------

    def layer_report(self, input_size=None):
        """Per-layer (name, params, macs, (c, h, w)) for one batch element."""
        h, w = input_size or self.config.input_size
        validate_input_size(h, w, self.config.patch)
        return _layer_report(self.config, h, w)

    @property
    def param_count(self) -> int:
        return sum(p for _, p, _, _ in self.layer_report())

    def self_check(self):
        """Run a forward pass on zeros and verify output extents."""
        h, w = self.config.input_size
        out = self.forward(np.zeros((1, 3, h, w), dtype=np.float32))
        if out.values.shape != (1, 1, h // 2, w // 2):
            raise ConfigurationError(
                f"output shape {out.values.shape} is not half of input {h}x{w}"
            )
        return out


def _layer_graph(cfg: ModelConfig):
    c1, c2, c3, c4, c5, c6, c7, c8, c9, c10 = cfg.channels
    t = cfg.mv2_expansion
    return {
        "stem": ConvBNAct("encoder.stem", 3, c1, k=3, stride=2),
        "stage1": MV2Block("encoder.stage1", c1, c2, 1, t),
        "stage2a": MV2Block("encoder.stage2a", c2, c3, 2, t),
        "stage2b": MV2Block("encoder.stage2b", c3, c3, 1, t),
        "stage3": MV2Block("encoder.stage3", c3, c4, 2, t),
        "stage4": MV2Block("encoder.stage4", c4, c5, 2, t),
        "vit1": VitBlock("encoder.vit1", c5, cfg),
        "vit2": VitBlock("encoder.vit2", c5, cfg),
        "enc_out": ConvBNAct("encoder.out", c5, c6, k=1),
        "dec_in": ConvBNAct("decoder.in", c6, c7, k=3),
        "up1": UpBlock("decoder.up1", c7, c4, c8),
        "up2": UpBlock("decoder.up2", c8, c3, c9),
        "up3": UpBlock("decoder.up3", c9, c2, c10),
        "head": ConvBNAct("decoder.head", c10, 1, k=3, act=False, bn=False),
    }


_GRAPH_ORDER = [
    "stem", "stage1", "stage2a", "stage2b", "stage3", "stage4",
    "vit1", "vit2", "enc_out", "dec_in", "up1", "up2", "up3", "head",
]


def _layer_report(cfg: ModelConfig, h: int, w: int):
    g = _layer_graph(cfg)
    entries = []
    skips = {}
    for name in _GRAPH_ORDER:
        layer = g[name]
        if name.startswith("up"):
            skip_hw = skips[{"up1": "stage3", "up2": "stage2b", "up3": "stage1"}[name]]
            e, (h, w) = layer.report(h, w, skip_hw)
        else:
            e, (h, w) = layer.report(h, w)
        if name in ("stage1", "stage2b", "stage3"):
            skips[name] = (h, w)
        entries += e
    return entries


def weight_names(cfg: ModelConfig) -> list[str]:
    rng = np.random.default_rng(0)
    g = _layer_graph(cfg)
    names = []
    for name in _GRAPH_ORDER:
        names += list(g[name].init(rng))
    return names


def build(config: ModelConfig, seed: int = 0) -> DepthNet:
    """Construct a model with deterministic fan-in-scaled uniform init."""
    rng = np.random.default_rng(seed)
    g = _layer_graph(config)
    weights: dict[str, np.ndarray] = {}
    for name in _GRAPH_ORDER:
        weights.update(g[name].init(rng))
    model = DepthNet(config, weights)
    model.self_check()
    return model
