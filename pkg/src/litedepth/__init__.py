"""Lightweight monocular depth estimation runtime and verification toolkit.

Submodules are imported lazily so the command line interface can cap
BLAS thread pools before numpy first loads.
"""

from importlib import import_module

__version__ = "0.1.0"

_EXPORTS = {
    "ModelConfig": "model",
    "DepthNet": "model",
    "DepthMap": "model",
    "PRESETS": "model",
    "build": "model",
    "preset_config": "model",
    "LossWeights": "loss",
    "LossReport": "loss",
    "balanced_loss": "loss",
    "MetricsReport": "metrics",
    "evaluate_dataset": "metrics",
    "rmse": "metrics",
    "rel": "metrics",
    "delta1": "metrics",
    "DepthSample": "augment",
    "default_policy": "augment",
    "shifting_policy": "augment",
    "ProfileReport": "profiling",
    "count_params": "profiling",
    "count_macs": "profiling",
    "bench_latency": "profiling",
    "save_weights": "archive",
    "load_weights": "archive",
    "DatasetManifest": "data",
    "load_manifest": "data",
    "load_sample": "data",
    "generate_synthetic_dataset": "data",
    "render_depth": "render",
    "run_selfcheck": "selfcheck",
    "LiteDepthError": "errors",
}

__all__ = ["__version__", *_EXPORTS]


def __getattr__(name):
    if name in _EXPORTS:
        return getattr(import_module(f".{_EXPORTS[name]}", __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(__all__)
