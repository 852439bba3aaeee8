"""Parameter / MAC accounting and single-image latency benchmarking.

MAC counts follow the dominant published convention: multiplications
only, with the accumulating adds folded in, and activations, batchnorm
and softmax excluded.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .model import DepthNet

__all__ = ["ProfileReport", "count_params", "count_macs", "bench_latency"]


@dataclass(frozen=True)
class ProfileReport:
    variant: str
    input_size: tuple[int, int]
    params_total: int
    macs_total: int
    per_layer: list[tuple[str, int, int, tuple[int, int, int]]] = field(default_factory=list)
    fps: float | None = None
    latency_ms_mean: float | None = None
    latency_ms_std: float | None = None
    iterations: int | None = None

    def table(self) -> str:
        name_w = max([len("layer")] + [len(n) for n, _, _, _ in self.per_layer])
        lines = [
            f"{'layer':<{name_w}}  {'params':>10}  {'macs':>14}  output",
            "-" * (name_w + 40),
        ]
        for name, p, m, shape in self.per_layer:
            lines.append(f"{name:<{name_w}}  {p:>10}  {m:>14}  {shape[0]}x{shape[1]}x{shape[2]}")
        lines.append("-" * (name_w + 40))
        lines.append(f"{'total':<{name_w}}  {self.params_total:>10}  {self.macs_total:>14}")
        return "\n".join(lines)

    def lines(self) -> list[str]:
        h, w = self.input_size
        out = [
            f"variant: {self.variant}",
            f"input_size: {w}x{h}",
            f"params_total: {self.params_total}",
            f"params_m: {self.params_total / 1e6:.4f}",
            f"macs_total: {self.macs_total}",
            f"macs_g: {self.macs_total / 1e9:.4f}",
        ]
        if self.latency_ms_mean is not None:
            out += [
                f"latency_ms_mean: {self.latency_ms_mean:.3f}",
                f"latency_ms_std: {self.latency_ms_std:.3f}",
                f"fps: {self.fps:.3f}",
                f"iterations: {self.iterations}",
            ]
        return out

    def to_dict(self) -> dict:
        d = {
            "variant": self.variant,
            "input_size": list(self.input_size),
            "params_total": self.params_total,
            "macs_total": self.macs_total,
            "per_layer": [
                {"name": n, "params": p, "macs": m, "output": list(s)}
                for n, p, m, s in self.per_layer
            ],
        }
        if self.latency_ms_mean is not None:
            d.update(
                fps=self.fps,
                latency_ms_mean=self.latency_ms_mean,
                latency_ms_std=self.latency_ms_std,
                iterations=self.iterations,
            )
        return d


def _report(model: DepthNet, input_size) -> ProfileReport:
    entries = model.layer_report(input_size)
    return ProfileReport(
        variant=model.config.variant,
        input_size=tuple(input_size or model.config.input_size),
        params_total=sum(e[1] for e in entries),
        macs_total=sum(e[2] for e in entries),
        per_layer=entries,
    )


def count_params(model: DepthNet) -> ProfileReport:
    """Trainable parameter totals (batchnorm running stats excluded)."""
    return _report(model, model.config.input_size)


def count_macs(model: DepthNet, input_size: tuple[int, int] | None = None) -> ProfileReport:
    """Closed-form multiply-accumulate totals at the given (H, W)."""
    return _report(model, input_size)


def bench_latency(
    model: DepthNet,
    input_size: tuple[int, int] | None = None,
    iterations: int = 10,
    warmup: int = 2,
    seed: int = 0,
) -> ProfileReport:
    """Wall-clock single-image forward latency after warmup discards.

    The caller owns the process timer: do not run concurrent load during
    a benchmark.  Thread caps are applied by the CLI before numpy loads.
    """
    if iterations < 1:
        raise ValidationError(f"iterations must be >= 1, got {iterations}")
    if warmup < 0:
        raise ValidationError(f"warmup must be >= 0, got {warmup}")
    size = tuple(input_size or model.config.input_size)
    if size != model.config.input_size:
        from .model import build, preset_config

        model = build(preset_config(model.config.variant, input_size=size), seed=seed)
    rng = np.random.default_rng(seed)
    image = rng.uniform(0.0, 1.0, (1, 3, *size)).astype(np.float32)
    for _ in range(warmup):
        model.forward(image)
    times_ms = []
    for _ in range(iterations):
        t0 = time.perf_counter()
        model.forward(image)
        times_ms.append((time.perf_counter() - t0) * 1e3)
    mean = statistics.fmean(times_ms)
    std = statistics.pstdev(times_ms) if len(times_ms) > 1 else 0.0
    base = _report(model, size)
    return ProfileReport(
        variant=base.variant,
        input_size=base.input_size,
        params_total=base.params_total,
        macs_total=base.macs_total,
        per_layer=base.per_layer,
        fps=1000.0 / mean,
        latency_ms_mean=mean,
        latency_ms_std=std,
        iterations=iterations,
    )
