"""Command line interface.

Exit codes: 0 on success, 1 when an operation ran but failed (selfcheck
errors above tolerance, an unloadable dataset), 2 for invalid input or
configuration (also used by the argument parser itself).

numpy-dependent modules are imported inside the commands so that the
global ``--threads`` option can cap the BLAS thread pools before numpy
first loads.
"""

from __future__ import annotations

import json
import logging
import os
import sys

import click


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guard(fn, *args, **kwargs):
    """Run an operation, mapping package errors to exit code 2."""
    from .errors import LiteDepthError

    try:
        return fn(*args, **kwargs)
    except LiteDepthError as exc:
        _fail(str(exc), 2)


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        _fail(f"size must look like 256x192 (WxH), got {text!r}", 2)
    return h, w


@click.group()
@click.option("--seed", default=0, show_default=True, help="Seed for all random draws.")
@click.option("--threads", default=1, show_default=True,
              help="Cap for BLAS/OpenMP thread pools (applied before numpy loads).")
@click.option("--verbose", is_flag=True, help="Enable debug logging.")
@click.pass_context
def main(ctx, seed, threads, verbose):
    """Depth estimation runtime and verification toolkit."""
    if threads < 1:
        _fail(f"--threads must be >= 1, got {threads}", 2)
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(threads))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    ctx.ensure_object(dict)
    ctx.obj["seed"] = seed


def _build_model(variant, size_hw, seed, weights_path=None):
    from .archive import load_weights
    from .model import build, preset_config

    overrides = {"input_size": size_hw} if size_hw else {}
    model = build(preset_config(variant, **overrides), seed=seed)
    if weights_path:
        load_weights(model, weights_path)
    return model


_variant_opt = click.option("--variant", type=click.Choice(["s", "xs", "xxs"]),
                            default="s", show_default=True)
_size_opt = click.option("--size", default="256x192", show_default=True,
                         help="Input size as WxH.")


@main.command()
@_variant_opt
@_size_opt
@click.option("--per-layer", is_flag=True, help="Print the per-layer cost table.")
@click.option("--as-json", is_flag=True, help="Emit machine-readable JSON instead of text.")
@click.pass_context
def profile(ctx, variant, size, per_layer, as_json):
    """Report parameter and MAC totals for a variant."""
    from .profiling import count_macs

    size_hw = _parse_size(size)
    model = _guard(_build_model, variant, size_hw, ctx.obj["seed"])
    report = _guard(count_macs, model, size_hw)
    if as_json:
        doc = report.to_dict()
        if not per_layer:
            doc.pop("per_layer")
        click.echo(json.dumps(doc, indent=2))
        return
    for line in report.lines():
        click.echo(line)
    if per_layer:
        click.echo(report.table())


@main.command()
@_variant_opt
@_size_opt
@click.option("--weights", type=click.Path(exists=True, dir_okay=False),
              help="Weight archive to load.")
@click.option("--output", required=True, type=click.Path(dir_okay=False),
              help="Output path (.npy for raw depth, .png for a rendering).")
@click.option("--colormap", default="plasma_reversed", show_default=True)
@click.argument("image", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def infer(ctx, variant, size, weights, output, colormap, image):
    """Predict a depth map for one RGB image."""
    import numpy as np
    from PIL import Image as PILImage

    import cv2

    from .render import render_depth, save_png

    size_hw = _parse_size(size)
    model = _guard(_build_model, variant, size_hw, ctx.obj["seed"], weights)
    with PILImage.open(image) as img:
        rgb = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    if rgb.shape[:2] != size_hw:
        rgb = cv2.resize(rgb, (size_hw[1], size_hw[0]), interpolation=cv2.INTER_LINEAR)
    tensor = np.moveaxis(rgb, -1, 0)[None].astype(np.float32)
    depth = _guard(model.forward, tensor).values
    if output.endswith(".npy"):
        np.save(output, depth[0, 0])
    else:
        _guard(save_png, _guard(render_depth, depth, colormap), output)
    click.echo(f"wrote {output} ({depth.shape[3]}x{depth.shape[2]}, "
               f"range {depth.min():.3f}..{depth.max():.3f} m)")


@main.command("eval")
@_variant_opt
@_size_opt
@click.option("--weights", type=click.Path(exists=True, dir_okay=False))
@click.option("--crop", default=None,
              help="Fractional eval crop top,left,bottom,right (overrides the manifest).")
@click.argument("dataset", type=click.Path(exists=True))
@click.pass_context
def eval_cmd(ctx, variant, size, weights, crop, dataset):
    """Evaluate RMSE / REL / delta1 over a dataset directory."""
    from .data import iter_samples, load_manifest
    from .errors import LiteDepthError
    from .metrics import evaluate_dataset

    size_hw = _parse_size(size)
    model = _guard(_build_model, variant, size_hw, ctx.obj["seed"], weights)
    manifest = _guard(load_manifest, dataset)
    if crop is not None:
        try:
            crop = tuple(float(v) for v in crop.split(","))
            assert len(crop) == 4
        except (ValueError, AssertionError):
            _fail(f"--crop must be four comma-separated fractions, got {crop!r}", 2)
    else:
        crop = manifest.eval_crop
    try:
        report = evaluate_dataset(
            lambda rgb: model.forward(rgb).values,
            iter_samples(manifest, rgb_size_hw=size_hw),
            crop=crop,
        )
    except LiteDepthError as exc:
        _fail(str(exc), 1)
    for line in report.lines():
        click.echo(line)
    if report.samples_failed:
        click.echo(f"warning: {report.samples_failed} samples skipped", err=True)


@main.command()
@_variant_opt
@_size_opt
@click.option("--iterations", default=10, show_default=True)
@click.option("--warmup", default=2, show_default=True)
@click.pass_context
def bench(ctx, variant, size, iterations, warmup):
    """Measure single-image forward latency."""
    from .profiling import bench_latency

    size_hw = _parse_size(size)
    model = _guard(_build_model, variant, size_hw, ctx.obj["seed"])
    report = _guard(bench_latency, model, size_hw, iterations=iterations,
                    warmup=warmup, seed=ctx.obj["seed"])
    for line in report.lines():
        click.echo(line)


@main.command("augment-preview")
@click.option("--index", default=0, show_default=True, help="Sample index in the dataset.")
@click.option("--policy", type=click.Choice(["default", "shifting"]),
              default="shifting", show_default=True)
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.argument("dataset", type=click.Path(exists=True))
@click.pass_context
def augment_preview(ctx, index, policy, out_dir, dataset):
    """Apply the augmentation policy to one sample and save the result."""
    import os as _os

    import numpy as np
    from PIL import Image as PILImage

    from .augment import default_policy, shifting_policy
    from .data import load_manifest, load_sample
    from .render import render_depth, save_png

    manifest = _guard(load_manifest, dataset)
    sample = _guard(load_sample, manifest, index)
    fn = default_policy if policy == "default" else shifting_policy
    out = _guard(fn, sample, ctx.obj["seed"])
    _os.makedirs(out_dir, exist_ok=True)
    rgb8 = (np.moveaxis(out.rgb[0], 0, -1) * 255).round().astype(np.uint8)
    PILImage.fromarray(rgb8).save(_os.path.join(out_dir, "rgb.png"))
    _guard(save_png, _guard(render_depth, out.depth), _os.path.join(out_dir, "depth.png"))
    click.echo(f"wrote {out_dir}/rgb.png and {out_dir}/depth.png (policy {policy}, "
               f"seed {ctx.obj['seed']})")


@main.command()
@click.option("--perturb-sobel", is_flag=True,
              help="Inject a fault into an edge kernel; the gradient check must fail.")
@click.pass_context
def selfcheck(ctx, perturb_sobel):
    """Run the numerical self-check suite (oracles, gradchecks, cost tables)."""
    from .selfcheck import run_selfcheck

    results = _guard(run_selfcheck, seed=ctx.obj["seed"], perturb_sobel=perturb_sobel)
    failures = 0
    for r in results:
        click.echo(r.line())
        failures += not r.passed
    click.echo(f"{len(results) - failures}/{len(results)} checks passed")
    if failures:
        sys.exit(1)


@main.command()
@click.option("--count", default=8, show_default=True)
@_size_opt
@click.option("--encoding", type=click.Choice(["png16_mm", "raw_f32_m"]),
              default="png16_mm", show_default=True)
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.pass_context
def synth(ctx, count, size, encoding, out_dir):
    """Generate a deterministic synthetic dataset with a manifest."""
    from .data import generate_synthetic_dataset

    size_hw = _parse_size(size)
    manifest = _guard(
        generate_synthetic_dataset,
        out_dir,
        count=count,
        size_hw=size_hw,
        seed=ctx.obj["seed"],
        depth_encoding=encoding,
    )
    click.echo(f"wrote {len(manifest)} samples to {out_dir}")


if __name__ == "__main__":
    main()
