"""Command-line entry points: single-image restoration, dataset
benchmarking, kernel-set generation, and weight-archive inspection.

Image I/O convention: 8-bit grayscale PNG or PGM only. Reading divides by
255; writing multiplies by 255, rounds half away from zero, and clamps to
[0, 255]. Color or 16-bit inputs raise an explicit unsupported-format error
rather than being converted silently.
"""

import json
import os
import sys

import click
import numpy as np
from PIL import Image as PILImage

from .bench import BenchSpec, run_bench, write_report
from .denoise import ArchiveError, load_weights, parse_denoiser
from .metrics import evaluate
from .operators import (
    DEFAULT_KERNEL_PARAMS,
    DegradationSpec,
    default_kernels,
    gaussian_kernel,
)
from .pnp import ALGORITHMS, default_config, initialize, run_algorithm

__all__ = ["main", "read_image", "write_image", "read_kernel", "write_kernel"]

ALGO_CHOICES = ("apnp-hqs", "apnp-admm", "pnp-hqs", "pnp-admm")


class UnsupportedImageError(ValueError):
    """Raised for color, paletted, or non-8-bit image files."""


def read_image(path):
    """Load an 8-bit grayscale PNG/PGM as a float array in [0, 1]."""
    with PILImage.open(path) as im:
        if im.mode != "L":
            raise UnsupportedImageError(
                f"{path}: mode {im.mode!r} not supported, need 8-bit "
                "grayscale (mode 'L')"
            )
        arr = np.asarray(im, dtype=np.float64)
    return arr / 255.0


def write_image(path, x):
    """Write a [0, 1] float array as 8-bit grayscale.

    Quantization rule: multiply by 255, round half away from zero, then
    clamp, so 0.4999 -> 127 and 0.5 -> 128 (at pixel value 127.5).
    """
    x = np.asarray(x, dtype=np.float64)
    v = x * 255.0
    q = np.sign(v) * np.floor(np.abs(v) + 0.5)
    q = np.clip(q, 0, 255).astype(np.uint8)
    PILImage.fromarray(q, mode="L").save(path)


def read_kernel(path):
    """Load a plain-text kernel: one 'rows cols' header line, then rows."""
    with open(path) as f:
        header = f.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: expected 'rows cols' header line")
        rows, cols = int(header[0]), int(header[1])
        k = np.loadtxt(f, ndmin=2)
    if k.shape != (rows, cols):
        raise ValueError(
            f"{path}: header says {rows}x{cols}, data is {k.shape}"
        )
    return k


def write_kernel(path, k):
    """Write a kernel as text with a one-line size header.

    Values use shortest round-trip float formatting, so regenerating the
    same kernel always produces a bitwise-identical file.
    """
    k = np.asarray(k, dtype=np.float64)
    lines = [f"{k.shape[0]} {k.shape[1]}"]
    for row in k:
        lines.append(" ".join(repr(float(v)) for v in row))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def resolve_kernel(text):
    """Kernel flag value: a file path or 'builtin:N' (N in 0..7)."""
    if text.startswith("builtin:"):
        idx = int(text.split(":", 1)[1])
        if not 0 <= idx < len(DEFAULT_KERNEL_PARAMS):
            raise ValueError(
                f"builtin kernel index {idx} out of range "
                f"0..{len(DEFAULT_KERNEL_PARAMS) - 1}"
            )
        return gaussian_kernel(*DEFAULT_KERNEL_PARAMS[idx])
    return read_kernel(text)


@click.group()
def main():
    """Plug-and-play image restoration with gradient-domain priors."""


@main.command()
@click.argument("input_path", type=click.Path(exists=True))
@click.option("--algo", type=click.Choice(ALGO_CHOICES), default="apnp-hqs",
              show_default=True)
@click.option("--denoiser", default="soft:1.0", show_default=True,
              help="identity | soft:W | neural:PATH")
@click.option("--kernel", default="builtin:0", show_default=True,
              help="kernel file path or builtin:N")
@click.option("--sf", type=click.Choice(["1", "2", "3"]), default="1",
              show_default=True, help="super-resolution scale factor")
@click.option("--noise", type=float, default=0.0, show_default=True,
              help="noise standard deviation on the 8-bit scale")
@click.option("--lambda", "lam", type=float, default=None,
              help="fidelity weight (per-algorithm default if omitted)")
@click.option("--iters", type=int, default=24, show_default=True)
@click.option("--schedule-scale", type=float, default=None)
@click.option("--sigma-floor", type=float, default=1 / 255)
@click.option("--sigma-max", type=float, default=49 / 255)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--gt", type=click.Path(exists=True), default=None,
              help="ground-truth image; prints PSNR/SSIM when given")
@click.option("--out", type=click.Path(), required=True)
def restore(input_path, algo, denoiser, kernel, sf, noise, lam, iters,
            schedule_scale, sigma_floor, sigma_max, seed, gt, out):
    """Restore a single degraded image and write the result."""
    algorithm = algo.replace("-", "_")
    try:
        k = resolve_kernel(kernel)
        y = read_image(input_path)
        spec = DegradationSpec(k, int(sf), noise / 255.0)
        den = parse_denoiser(denoiser, ALGORITHMS[algorithm][1])
        cfg = default_config(algorithm, lam=lam, iters=iters,
                             schedule_scale=schedule_scale,
                             sigma_floor=sigma_floor, sigma_max=sigma_max,
                             seed=seed)
        x_true = read_image(gt) if gt else None
        x, trace = run_algorithm(algorithm, cfg, spec, y, den, x_true=x_true)
    except (ValueError, ArchiveError, OSError, RuntimeError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    write_image(out, x)
    with open(out + ".trace.txt", "w") as f:
        f.write(trace.to_text() + "\n")
    if x_true is not None:
        crop = spec.scale if spec.scale > 1 else 0
        rep = evaluate(x, x_true, crop_border=crop)
        in_rep = evaluate(initialize(spec, y), x_true, crop_border=crop)
        click.echo(f"input   PSNR {in_rep.psnr:8.4f}  SSIM {in_rep.ssim:.4f}")
        click.echo(f"restored PSNR {rep.psnr:8.4f}  SSIM {rep.ssim:.4f}")


@main.command()
@click.option("--data", type=click.Path(exists=True, file_okay=False),
              required=True, help="directory of grayscale images")
@click.option("--kernels", default="builtin",
              help="'builtin' or a kernel-set manifest path")
@click.option("--sf", "sfs", multiple=True, type=int, default=(1, 2, 3),
              show_default=True)
@click.option("--noise", "noises", multiple=True, type=float,
              default=(0.0, 7.65), show_default=True)
@click.option("--algo", "algos", multiple=True,
              type=click.Choice(ALGO_CHOICES), default=ALGO_CHOICES,
              show_default=True)
@click.option("--denoiser", default="soft:1.0", show_default=True,
              help="denoiser used by every algorithm")
@click.option("--lambda", "lam", type=float, default=None,
              help="override every per-algorithm fidelity weight")
@click.option("--iters", type=int, default=24, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-dir", type=click.Path(), required=True)
def bench(data, kernels, sfs, noises, algos, denoiser, lam, iters, seed,
          out_dir):
    """Run the full benchmark grid and write reports.

    Cells are scale factor x noise level x algorithm; each cell averages
    over every kernel and every image in the dataset directory.
    """
    try:
        names = sorted(
            n for n in os.listdir(data)
            if n.lower().endswith((".png", ".pgm"))
        )
        if not names:
            raise ValueError(f"no PNG/PGM images in {data}")
        images = [(n, read_image(os.path.join(data, n))) for n in names]
        kernel_set = (default_kernels() if kernels == "builtin"
                      else load_kernel_set(kernels))
        algorithms = tuple(a.replace("-", "_") for a in algos)
        spec = BenchSpec(
            images=images,
            kernels=kernel_set,
            scales=tuple(sfs),
            noise_levels_8bit=tuple(noises),
            algorithms=algorithms,
            denoisers={a: denoiser for a in algorithms},
            lambdas={} if lam is None else {a: lam for a in algorithms},
            iters=iters,
            seed=seed,
        )
        report = run_bench(spec)
        path = write_report(report, out_dir)
    except (ValueError, ArchiveError, OSError, RuntimeError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    click.echo(report.table_text())
    click.echo(f"wrote {path}")


MANIFEST_NAME = "kernels.json"


def write_kernel_set(out_dir, params=DEFAULT_KERNEL_PARAMS):
    """Write kernel files plus a manifest describing their parameters."""
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for i, (sx, sy, th, sz) in enumerate(params):
        fname = f"kernel_{i}.txt"
        write_kernel(os.path.join(out_dir, fname),
                     gaussian_kernel(sx, sy, th, sz))
        entries.append({"file": fname, "sigma_x": sx, "sigma_y": sy,
                        "theta": th, "size": sz})
    manifest = os.path.join(out_dir, MANIFEST_NAME)
    with open(manifest, "w") as f:
        json.dump({"kernels": entries}, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest


def load_kernel_set(manifest_path):
    """Load (params, kernel) pairs from a kernel-set manifest."""
    with open(manifest_path) as f:
        manifest = json.load(f)
    base = os.path.dirname(manifest_path)
    out = []
    for e in manifest["kernels"]:
        params = (e["sigma_x"], e["sigma_y"], e["theta"], e["size"])
        out.append((params, read_kernel(os.path.join(base, e["file"]))))
    return out


@main.command("make-kernels")
@click.option("--out-dir", type=click.Path(), required=True)
def make_kernels(out_dir):
    """Write the built-in 8-kernel benchmark set and its manifest."""
    try:
        manifest = write_kernel_set(out_dir)
    except OSError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    click.echo(f"wrote {len(DEFAULT_KERNEL_PARAMS)} kernels and {manifest}")


@main.command("inspect-weights")
@click.argument("path", type=click.Path(exists=True))
def inspect_weights(path):
    """Validate a weight archive and print its header summary."""
    try:
        archive = load_weights(path)
    except (ArchiveError, OSError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    h = archive.header
    n_params = sum(int(np.prod(t["shape"])) for t in h["tensors"])
    click.echo(f"domain:      {archive.domain}")
    click.echo(f"channels:    {archive.in_channels} in, "
               f"{archive.out_channels} out")
    click.echo(f"predicts:    {archive.predicts}")
    click.echo(f"noise range: [{h['noise_range'][0]:.6f}, "
               f"{h['noise_range'][1]:.6f}]")
    click.echo(f"layers:      {len(h['layers'])}")
    for layer in h["layers"]:
        desc = layer["type"]
        if "weight" in layer:
            shape = next(t["shape"] for t in h["tensors"]
                         if t["name"] == layer["weight"])
            desc += f" {shape}"
        if "stride" in layer:
            desc += f" stride={layer['stride']}"
        if "save_as" in layer:
            desc += f" save_as={layer['save_as']}"
        if "from" in layer:
            desc += f" from={layer['from']}"
        click.echo(f"  {desc}")
    click.echo(f"tensors:     {len(h['tensors'])} ({n_params} parameters)")
    click.echo("checksum:    OK")


if __name__ == "__main__":
    main()
