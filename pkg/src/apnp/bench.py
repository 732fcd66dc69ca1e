"""Benchmark harness: runs every (scale, noise, algorithm) cell over a
directory of grayscale images and a kernel set, and writes a report whose
rows are scale-factor x noise level and whose columns are algorithms.

Determinism contract: the measurement noise of each run is seeded from
(seed, image index, kernel index, scale index, noise index) only, so adding
or removing algorithms never changes any other cell's inputs, and two runs
with the same seed produce bitwise-identical machine-readable reports.
Wall-clock timings are written to a separate sidecar file that is excluded
from that contract.
"""

import os
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .denoise import parse_denoiser
from .metrics import psnr, ssim
from .operators import DegradationSpec, forward_apply
from .pnp import ALGORITHMS, default_config, initialize, run_algorithm

__all__ = ["BenchSpec", "BenchReport", "run_bench", "load_report"]

DEFAULT_NOISE_LEVELS = (0.0, 7.65)  # 8-bit units, as reported


@dataclass
class BenchSpec:
    """Configuration of one benchmark sweep."""

    images: list  # list of (name, 2-D array in [0,1])
    kernels: list  # list of (params tuple, kernel array)
    scales: tuple = (1, 2, 3)
    noise_levels_8bit: tuple = DEFAULT_NOISE_LEVELS
    algorithms: tuple = ("pnp_hqs", "apnp_hqs", "pnp_admm", "apnp_admm")
    denoisers: dict = field(default_factory=dict)  # algorithm -> spec string
    lambdas: dict = field(default_factory=dict)  # algorithm -> float
    iters: int = 24
    seed: int = 0

    def denoiser_for(self, algorithm):
        text = self.denoisers.get(algorithm, "soft:1.0")
        return parse_denoiser(text, ALGORITHMS[algorithm][1])

    def config_for(self, algorithm):
        return default_config(
            algorithm, lam=self.lambdas.get(algorithm), iters=self.iters,
            seed=self.seed,
        )


@dataclass
class BenchReport:
    rows: list  # dicts: image, kernel, scale, noise, algorithm, psnr, ssim
    means: dict  # (scale, noise, algorithm) -> (psnr, ssim, count)
    config: dict
    timings: dict  # (scale, noise, algorithm) -> seconds

    def table_text(self):
        """Aligned table grouped like the published results: one row per
        (scale factor, noise level), one column pair per algorithm."""
        algos = self.config["algorithms"]
        lines = []
        for metric in ("PSNR", "SSIM"):
            lines.append(metric)
            head = f"{'SF':>3} {'Noise':>6} " + " ".join(
                f"{a:>10}" for a in algos
            )
            lines.append(head)
            for s in self.config["scales"]:
                for nz in self.config["noise_levels_8bit"]:
                    vals = []
                    for a in algos:
                        m = self.means.get((s, nz, a))
                        if m is None:
                            vals.append(f"{'-':>10}")
                        else:
                            v = m[0] if metric == "PSNR" else m[1]
                            vals.append(f"{v:>10.4f}")
                    lines.append(f"{s:>3} {nz:>6.2f} " + " ".join(vals))
            lines.append("")
        return "\n".join(lines)


def _center_crop_to_multiple(img, s):
    h, w = img.shape
    h2, w2 = (h // s) * s, (w // s) * s
    if (h2, w2) == (h, w):
        return img, False
    top, left = (h - h2) // 2, (w - w2) // 2
    return img[top : top + h2, left : left + w2], True


def _noise_seed(seed, image_idx, kernel_idx, scale_idx, noise_idx):
    tag = f"{seed}:{image_idx}:{kernel_idx}:{scale_idx}:{noise_idx}"
    return zlib.crc32(tag.encode())


def _run_one(spec, algorithm, image_idx, name, x_true, kernel_idx, kernel,
             scale_idx, s, noise_idx, noise8):
    sigma = noise8 / 255.0
    deg = DegradationSpec(kernel, s, sigma)
    x_in, cropped = _center_crop_to_multiple(x_true, s)
    y = forward_apply(
        deg, x_in, seed=_noise_seed(spec.seed, image_idx, kernel_idx,
                                    scale_idx, noise_idx)
    )
    cfg = spec.config_for(algorithm)
    den = spec.denoiser_for(algorithm)
    x, _ = run_algorithm(algorithm, cfg, deg, y, den)
    crop = s if s > 1 else 0
    return {
        "image": name,
        "kernel": kernel_idx,
        "scale": s,
        "noise": noise8,
        "algorithm": algorithm,
        "psnr": psnr(x, x_in, crop),
        "ssim": ssim(x[crop : x.shape[0] - crop or None,
                       crop : x.shape[1] - crop or None],
                     x_in[crop : x_in.shape[0] - crop or None,
                          crop : x_in.shape[1] - crop or None]),
        "cropped_input": cropped,
    }


def run_bench(spec, max_workers=None):
    """Run all cells; returns a BenchReport. Parallel across images."""
    if not spec.images:
        raise ValueError("empty image list")
    if max_workers is None:
        max_workers = int(os.environ.get("APNP_THREADS", "4"))

    jobs = []
    for scale_idx, s in enumerate(spec.scales):
        for noise_idx, nz in enumerate(spec.noise_levels_8bit):
            for algorithm in spec.algorithms:
                for kernel_idx, (_, kernel) in enumerate(spec.kernels):
                    for image_idx, (name, img) in enumerate(spec.images):
                        jobs.append((spec, algorithm, image_idx, name, img,
                                     kernel_idx, kernel, scale_idx, s,
                                     noise_idx, nz))

    cell_time = {}
    failures = []

    def run_job(job):
        t0 = time.perf_counter()
        try:
            row = _run_one(*job)
        except Exception as e:  # recorded, excluded from means
            return ("error", job, str(e), time.perf_counter() - t0)
        return ("ok", job, row, time.perf_counter() - t0)

    rows = []
    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as ex:
        for status, job, payload, dt in ex.map(run_job, jobs):
            s, nz, algorithm = job[8], job[10], job[1]
            cell_time[(s, nz, algorithm)] = cell_time.get((s, nz, algorithm), 0.0) + dt
            if status == "ok":
                rows.append(payload)
            else:
                failures.append((job[3], s, nz, algorithm, payload))

    rows.sort(key=lambda r: (r["scale"], r["noise"], r["algorithm"],
                             r["kernel"], r["image"]))
    means = _means_from_rows(rows)

    for f in failures:
        import logging
        logging.getLogger(__name__).warning("run failed, excluded: %s", f)
    for s in spec.scales:
        for nz in spec.noise_levels_8bit:
            for a in spec.algorithms:
                if (s, nz, a) not in means:
                    raise RuntimeError(
                        f"cell (scale={s}, noise={nz}, algo={a}) fully failed"
                    )

    config = {
        "seed": spec.seed,
        "iters": spec.iters,
        "scales": list(spec.scales),
        "noise_levels_8bit": list(spec.noise_levels_8bit),
        "algorithms": list(spec.algorithms),
        "kernels": [list(p) for p, _ in spec.kernels],
        "lambdas": {a: spec.config_for(a).lam for a in spec.algorithms},
        "schedule_scales": {a: spec.config_for(a).schedule_scale
                            for a in spec.algorithms},
        "denoisers": {a: spec.denoisers.get(a, "soft:1.0")
                      for a in spec.algorithms},
        "sigma_floor": spec.config_for(spec.algorithms[0]).sigma_floor,
        "sigma_max": spec.config_for(spec.algorithms[0]).sigma_max,
        "crop_border": "scale if scale > 1 else 0",
        "ssim_window": "gaussian 11x11 sigma 1.5",
        "prng": "numpy PCG64",
    }
    return BenchReport(rows=rows, means=means, config=config,
                       timings=cell_time)


def _means_from_rows(rows):
    acc = {}
    for r in rows:
        key = (r["scale"], r["noise"], r["algorithm"])
        acc.setdefault(key, []).append((r["psnr"], r["ssim"]))
    return {
        k: (float(np.mean([v[0] for v in vs])),
            float(np.mean([v[1] for v in vs])), len(vs))
        for k, vs in acc.items()
    }


ROW_COLUMNS = ("image", "kernel", "scale", "noise", "algorithm", "psnr", "ssim")


def write_report(report, out_dir):
    """Write results.csv (deterministic), report.txt, timings.csv."""
    os.makedirs(out_dir, exist_ok=True)
    lines = ["# apnp-bench v1"]
    for key in sorted(report.config):
        lines.append(f"# {key}={report.config[key]!r}")
    lines.append("# columns=" + ",".join(ROW_COLUMNS))
    for r in report.rows:
        lines.append(
            f"{r['image']},{r['kernel']},{r['scale']},{r['noise']!r},"
            f"{r['algorithm']},{r['psnr']!r},{r['ssim']!r}"
        )
    lines.append("# means: scale,noise,algorithm,psnr,ssim,count")
    for key in sorted(report.means):
        p, s, c = report.means[key]
        lines.append(f"@mean,{key[0]},{key[1]!r},{key[2]},{p!r},{s!r},{c}")
    path = os.path.join(out_dir, "results.csv")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
    with open(os.path.join(out_dir, "report.txt"), "w") as f:
        f.write(report.table_text())
    with open(os.path.join(out_dir, "timings.csv"), "w") as f:
        f.write("scale,noise,algorithm,seconds\n")
        for key in sorted(report.timings):
            f.write(f"{key[0]},{key[1]},{key[2]},{report.timings[key]:.3f}\n")
    return path


def load_report(path):
    """Parse results.csv and verify that stored means match the rows."""
    rows, means = [], {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("@mean,"):
                _, s, nz, a, p, ss, c = line.split(",")
                means[(int(s), float(nz), a)] = (float(p), float(ss), int(c))
            else:
                img, k, s, nz, a, p, ss = line.split(",")
                rows.append({
                    "image": img, "kernel": int(k), "scale": int(s),
                    "noise": float(nz), "algorithm": a, "psnr": float(p),
                    "ssim": float(ss),
                })
    recomputed = _means_from_rows(rows)
    for key, (p, s, c) in means.items():
        rp, rs, rc = recomputed[key]
        if abs(rp - p) > 1e-12 or abs(rs - s) > 1e-12 or rc != c:
            raise ValueError(f"stored mean for {key} inconsistent with rows")
    return rows, means
