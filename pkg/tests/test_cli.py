import json
import os

import numpy as np
import pytest
from click.testing import CliRunner
from PIL import Image as PILImage

from apnp.bench import BenchSpec, load_report, run_bench, write_report
from apnp.cli import (
    main,
    read_image,
    read_kernel,
    resolve_kernel,
    write_image,
    write_kernel,
    write_kernel_set,
)
from apnp.operators import DegradationSpec, forward_apply, gaussian_kernel

rng = np.random.default_rng(61)


def make_image(n, seed=0):
    x = np.zeros((n, n))
    yy, xx = np.mgrid[0:n, 0:n] / n
    x += 0.35 + 0.3 * np.sin(2 * np.pi * xx) * np.cos(2 * np.pi * yy)
    x[n // 4 : n // 2, n // 4 : 3 * n // 4] += 0.25
    return np.clip(x, 0, 1)


class TestImageIO:
    def test_quantized_round_trip(self, tmp_path):
        x = rng.integers(0, 256, (16, 16)) / 255.0
        p = str(tmp_path / "a.png")
        write_image(p, x)
        assert np.array_equal(read_image(p), x)

    def test_read_scaling(self, tmp_path):
        p = str(tmp_path / "a.png")
        PILImage.fromarray(np.full((8, 8), 128, np.uint8), "L").save(p)
        assert np.all(read_image(p) == 128 / 255)

    def test_rounding_half_away_from_zero(self, tmp_path):
        p = str(tmp_path / "a.png")
        # 0.4999 * 255 = 127.4745 rounds down; 127.5/255 rounds up
        write_image(p, np.array([[0.4999, 127.5 / 255]]))
        arr = np.asarray(PILImage.open(p))
        assert arr[0, 0] == 127 and arr[0, 1] == 128

    def test_out_of_range_clamped(self, tmp_path):
        p = str(tmp_path / "a.png")
        write_image(p, np.array([[-0.5, 1.5]]))
        arr = np.asarray(PILImage.open(p))
        assert arr[0, 0] == 0 and arr[0, 1] == 255

    def test_color_rejected(self, tmp_path):
        p = str(tmp_path / "c.png")
        PILImage.fromarray(np.zeros((8, 8, 3), np.uint8), "RGB").save(p)
        with pytest.raises(ValueError):
            read_image(p)

    def test_16bit_rejected(self, tmp_path):
        p = str(tmp_path / "d.png")
        PILImage.fromarray(np.zeros((8, 8), np.uint16)).save(p)
        with pytest.raises(ValueError):
            read_image(p)

    def test_pgm_round_trip(self, tmp_path):
        x = rng.integers(0, 256, (12, 12)) / 255.0
        p = str(tmp_path / "a.pgm")
        write_image(p, x)
        assert np.array_equal(read_image(p), x)


class TestKernelIO:
    def test_round_trip(self, tmp_path):
        k = gaussian_kernel(1.3, 0.9, 0.4, 7)
        p = str(tmp_path / "k.txt")
        write_kernel(p, k)
        assert np.array_equal(read_kernel(p), k)

    def test_header_mismatch(self, tmp_path):
        p = str(tmp_path / "k.txt")
        with open(p, "w") as f:
            f.write("3 3\n1.0 0.0\n0.0 0.0\n")
        with pytest.raises(ValueError):
            read_kernel(p)

    def test_builtin_resolution(self):
        k = resolve_kernel("builtin:1")
        assert k.shape == (25, 25)
        assert abs(k.sum() - 1.0) < 1e-12
        with pytest.raises(ValueError):
            resolve_kernel("builtin:99")

    def test_make_kernels_command(self, tmp_path):
        runner = CliRunner()
        out = str(tmp_path / "kern")
        res = runner.invoke(main, ["make-kernels", "--out-dir", out])
        assert res.exit_code == 0
        files = sorted(os.listdir(out))
        assert "kernels.json" in files and len(files) == 9
        with open(os.path.join(out, "kernels.json")) as f:
            manifest = json.load(f)
        assert len(manifest["kernels"]) == 8
        for e in manifest["kernels"]:
            k = read_kernel(os.path.join(out, e["file"]))
            assert abs(k.sum() - 1.0) < 1e-8

    def test_manifest_regeneration_bitwise(self, tmp_path):
        d1, d2 = str(tmp_path / "a"), str(tmp_path / "b")
        write_kernel_set(d1)
        with open(os.path.join(d1, "kernels.json")) as f:
            manifest = json.load(f)
        params = [(e["sigma_x"], e["sigma_y"], e["theta"], e["size"])
                  for e in manifest["kernels"]]
        write_kernel_set(d2, params)
        for e in manifest["kernels"]:
            with open(os.path.join(d1, e["file"]), "rb") as f1, \
                 open(os.path.join(d2, e["file"]), "rb") as f2:
                assert f1.read() == f2.read()


@pytest.fixture
def dataset(tmp_path):
    d = tmp_path / "data"
    d.mkdir()
    for i in range(3):
        write_image(str(d / f"img{i}.png"), make_image(32, i))
    return str(d)


@pytest.fixture
def small_kernels(tmp_path):
    params = [(0.8, 0.8, 0.0, 5), (1.4, 0.9, 0.5, 7)]
    return write_kernel_set(str(tmp_path / "kern"), params)


class TestRestore:
    def test_identity_round_trip(self, tmp_path):
        x = rng.integers(0, 256, (16, 16)) / 255.0
        inp, out = str(tmp_path / "in.png"), str(tmp_path / "out.png")
        kern = str(tmp_path / "ident.txt")
        write_image(inp, x)
        write_kernel(kern, np.array([[1.0]]))
        res = CliRunner().invoke(main, [
            "restore", inp, "--kernel", kern, "--denoiser", "identity",
            "--iters", "4", "--out", out,
        ])
        assert res.exit_code == 0
        assert np.array_equal(read_image(out), x)
        assert os.path.exists(out + ".trace.txt")

    def test_blurred_fixture_improves(self, tmp_path):
        x = make_image(40)
        k = gaussian_kernel(1.6, 1.6, 0.0, 9)
        y = forward_apply(DegradationSpec(k, 1, 0.02), x, seed=3)
        gt, inp, out = (str(tmp_path / n)
                        for n in ("gt.png", "in.png", "out.png"))
        kern = str(tmp_path / "k.txt")
        write_image(gt, x)
        write_image(inp, y)
        write_kernel(kern, k)
        res = CliRunner().invoke(main, [
            "restore", inp, "--algo", "apnp-hqs", "--denoiser", "soft:1.0",
            "--kernel", kern, "--noise", "5.1", "--lambda", "5.0",
            "--iters", "12", "--gt", gt, "--out", out,
        ])
        assert res.exit_code == 0
        lines = [l for l in res.output.splitlines() if "PSNR" in l]
        p_in = float(lines[0].split()[2])
        p_out = float(lines[1].split()[2])
        assert p_out > p_in

    def test_unknown_algorithm_exit_2(self, tmp_path):
        inp = str(tmp_path / "in.png")
        write_image(inp, make_image(16))
        res = CliRunner().invoke(main, [
            "restore", inp, "--algo", "magic", "--out", str(tmp_path / "o.png"),
        ])
        assert res.exit_code == 2

    def test_bad_denoiser_exit_1(self, tmp_path):
        inp = str(tmp_path / "in.png")
        write_image(inp, make_image(16))
        res = CliRunner().invoke(main, [
            "restore", inp, "--denoiser", "neural:/nonexistent.bin",
            "--out", str(tmp_path / "o.png"),
        ])
        assert res.exit_code == 1


BENCH_ARGS = [
    "--sf", "1", "--sf", "2", "--noise", "0", "--noise", "7.65",
    "--iters", "2", "--lambda", "5.0", "--seed", "0",
]


class TestBench:
    def test_counting_contract(self, dataset, small_kernels, tmp_path):
        out = str(tmp_path / "rep")
        res = CliRunner().invoke(main, [
            "bench", "--data", dataset, "--kernels", small_kernels,
            "--out-dir", out, *BENCH_ARGS,
        ])
        assert res.exit_code == 0, res.output
        rows, means = load_report(os.path.join(out, "results.csv"))
        # 2 scales x 2 noise levels x 4 algorithms, each over 2 kernels x 3 images
        assert len(means) == 16
        assert all(c == 6 for (_, _, c) in means.values())
        assert len(rows) == 96

    def test_rerun_bitwise_identical(self, dataset, small_kernels, tmp_path):
        outs = []
        for name in ("r1", "r2"):
            out = str(tmp_path / name)
            res = CliRunner().invoke(main, [
                "bench", "--data", dataset, "--kernels", small_kernels,
                "--out-dir", out, *BENCH_ARGS,
            ])
            assert res.exit_code == 0, res.output
            with open(os.path.join(out, "results.csv"), "rb") as f:
                outs.append(f.read())
        assert outs[0] == outs[1]

    def test_means_self_consistent(self, dataset, small_kernels, tmp_path):
        out = str(tmp_path / "rep")
        CliRunner().invoke(main, [
            "bench", "--data", dataset, "--kernels", small_kernels,
            "--out-dir", out, *BENCH_ARGS,
        ])
        rows, means = load_report(os.path.join(out, "results.csv"))
        for key, (p, s, c) in means.items():
            sel = [r for r in rows
                   if (r["scale"], r["noise"], r["algorithm"]) == key]
            assert abs(np.mean([r["psnr"] for r in sel]) - p) < 1e-12
            assert abs(np.mean([r["ssim"] for r in sel]) - s) < 1e-12

    def test_empty_dataset_fails(self, tmp_path, small_kernels):
        d = tmp_path / "empty"
        d.mkdir()
        res = CliRunner().invoke(main, [
            "bench", "--data", str(d), "--kernels", small_kernels,
            "--out-dir", str(tmp_path / "rep"),
        ])
        assert res.exit_code == 1

    def test_noise_seed_independent_of_algorithms(self, tmp_path):
        """Dropping an algorithm must not change surviving cells' rows."""
        images = [(f"i{j}", make_image(24, j)) for j in range(2)]
        kernels = [((0.8, 0.8, 0.0, 5), gaussian_kernel(0.8, 0.8, 0.0, 5))]
        common = dict(images=images, kernels=kernels, scales=(1,),
                      noise_levels_8bit=(7.65,), iters=2, seed=0)
        full = run_bench(BenchSpec(algorithms=("apnp_hqs", "pnp_hqs"), **common))
        solo = run_bench(BenchSpec(algorithms=("apnp_hqs",), **common))
        keep = [r for r in full.rows if r["algorithm"] == "apnp_hqs"]
        assert keep == solo.rows

    def test_non_divisible_images_cropped(self, tmp_path):
        images = [("odd", make_image(33))]
        kernels = [((0.8, 0.8, 0.0, 5), gaussian_kernel(0.8, 0.8, 0.0, 5))]
        rep = run_bench(BenchSpec(images=images, kernels=kernels, scales=(2,),
                                  noise_levels_8bit=(0.0,),
                                  algorithms=("apnp_hqs",), iters=2))
        assert rep.rows[0]["cropped_input"] is True

    def test_timings_sidecar_written(self, dataset, small_kernels, tmp_path):
        out = str(tmp_path / "rep")
        CliRunner().invoke(main, [
            "bench", "--data", dataset, "--kernels", small_kernels,
            "--out-dir", out, *BENCH_ARGS,
        ])
        assert os.path.exists(os.path.join(out, "timings.csv"))
        assert os.path.exists(os.path.join(out, "report.txt"))


class TestInspectWeights:
    def test_summary_and_bad_file(self, tmp_path):
        from apnp.denoise import save_weights

        header = {
            "domain": "gradient", "in_channels": 3, "out_channels": 2,
            "predicts": "residual", "noise_range": [0.0, 71 / 255],
            "layers": [
                {"type": "conv", "in": 3, "out": 4, "kernel": 3,
                 "weight": "w0", "bias": "b0"},
                {"type": "relu"},
                {"type": "conv", "in": 4, "out": 2, "kernel": 3,
                 "weight": "w1", "bias": "b1"},
            ],
            "tensors": [],
        }
        tensors = {
            "w0": rng.standard_normal((4, 3, 3, 3)).astype(np.float32),
            "b0": np.zeros(4, np.float32),
            "w1": rng.standard_normal((2, 4, 3, 3)).astype(np.float32),
            "b1": np.zeros(2, np.float32),
        }
        p = str(tmp_path / "w.bin")
        save_weights(p, header, tensors)
        res = CliRunner().invoke(main, ["inspect-weights", p])
        assert res.exit_code == 0
        assert "domain:      gradient" in res.output
        assert "checksum:    OK" in res.output

        bad = str(tmp_path / "bad.bin")
        with open(bad, "wb") as f:
            f.write(b"not an archive")
        res = CliRunner().invoke(main, ["inspect-weights", bad])
        assert res.exit_code == 1
