"""Compare the compiled kernel backend against the pure NumPy fallback.

Two views:
  * per-kernel timings on representative shapes (both backends imported
    side by side, min over repeats);
  * end-to-end per-phase timings on a synthetic sequence, one subprocess
    per backend because the backend is chosen at import time.

Usage: python3 benchmarks/bench_backends.py [--frames N] [--repeat K]
       [--width W] [--height H] [--kernels-only | --pipeline-only]
"""

import argparse
import json
import os
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from skyblendr import build_pyramid
from skyblendr._kernels import compiled_backend, numpy_backend


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def _kernel_cases(width, height):
    rng = np.random.default_rng(42)
    gray = rng.random((height, width))
    rgb = rng.random((height, width, 3))
    rgb2 = rng.random((height, width, 3))
    alpha = rng.random((height, width))
    offsets = rng.standard_normal(3)
    template = rng.random((height * 2, width * 2, 3))
    inv = np.array([[1.0, 0.0, 35.5], [0.0, 1.0, -12.25], [0.0, 0.0, 1.0]])
    pyr_a = build_pyramid(gray, 3)
    pyr_b = build_pyramid(np.roll(gray, 2, axis=1), 3)
    pts = np.column_stack([
        rng.uniform(30, width - 30, 200), rng.uniform(30, height - 30, 200)])

    matte = np.zeros((height, width))
    matte[: height // 2] = 1.0

    return [
        ("resize_bilinear (to 384 long side)",
         lambda b: b.resize_bilinear(rgb, 384, 384 * height // width)),
        ("warp_affine (wrap, full frame)",
         lambda b: b.warp_affine(template, inv, height, width, True)),
        ("box_filter (r=20)",
         lambda b: b.box_filter(gray, 20)),
        ("shi_tomasi_response",
         lambda b: b.shi_tomasi_response(gray)),
        ("sky_candidates",
         lambda b: b.sky_candidates(gray, matte)),
        ("lk_pyramid (200 points)",
         lambda b: b.lk_pyramid(pyr_a, pyr_b, pts, 21, 30, 0.01, 1e-4)),
        ("composite_over",
         lambda b: b.composite_over(rgb, rgb2, alpha)),
        ("channel_sums",
         lambda b: b.channel_sums(rgb)),
        ("add_channel_offsets",
         lambda b: b.add_channel_offsets(rgb, offsets)),
        ("shift_scale_clip",
         lambda b: b.shift_scale_clip(rgb, offsets, 1.05)),
        ("rec601_gray",
         lambda b: b.rec601_gray(rgb)),
        ("region_sums",
         lambda b: b.region_sums(rgb, rgb2, alpha, 0.5)),
    ]


def bench_kernels(width, height, repeat):
    compiled = compiled_backend()
    if compiled is None:
        print("compiled extension not built; kernel comparison skipped")
        return
    print(f"\nPer-kernel timings at {width}x{height} "
          f"(best of {repeat}, milliseconds):\n")
    print(f"{'kernel':38s} {'compiled':>10s} {'numpy':>10s} {'speedup':>9s}")
    for name, call in _kernel_cases(width, height):
        call(compiled)  # warm both paths before timing
        call(numpy_backend)
        t_c = _time(lambda: call(compiled), repeat) * 1000.0
        t_n = _time(lambda: call(numpy_backend), repeat) * 1000.0
        print(f"{name:38s} {t_c:9.3f}  {t_n:9.3f}  {t_n / t_c:7.1f}x")


def _write_scene(frame_dir, template_path, n_frames, width, height):
    from PIL import Image

    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    rng = np.random.default_rng(7)
    ground = rng.random((height - height // 2, width, 3)) * np.array(
        [0.5, 0.45, 0.1])
    for i in range(n_frames):
        shift = 1.5 * i
        tex = (0.08 * np.sin(0.05 * (xs - shift)) * np.cos(0.07 * ys)
               + 0.05 * np.sin(0.11 * (xs - shift) + 1.3)
               * np.cos(0.09 * ys + 0.4))
        frame = np.empty((height, width, 3))
        frame[..., 0] = 0.15 + tex
        frame[..., 1] = 0.25 + tex
        frame[..., 2] = 0.85 + tex
        frame[height // 2:] = ground
        out = (np.clip(frame, 0, 1) * 255).round().astype(np.uint8)
        Image.fromarray(out).save(frame_dir / f"frame_{i:06d}.png")

    tys, txs = np.mgrid[0:2 * height + 80, 0:2 * width + 160].astype(float)
    ttex = 0.1 * np.sin(2 * np.pi * txs / 160) * np.cos(2 * np.pi * tys / 120)
    template = np.stack(
        [0.75 + ttex, 0.55 + ttex, 0.40 + ttex], axis=-1)
    out = (np.clip(template, 0, 1) * 255).round().astype(np.uint8)
    Image.fromarray(out).save(template_path)


_RUNNER = """
import json, sys
from skyblendr import PipelineConfig, run
cfg = PipelineConfig(input_dir=sys.argv[1], output_dir=sys.argv[2],
                     template_path=sys.argv[3])
report = run(cfg)
print(json.dumps(report["summary"]))
"""


def bench_pipeline(n_frames, width, height):
    print(f"\nEnd-to-end pipeline, {n_frames} frames at {width}x{height} "
          f"(one subprocess per backend):\n")
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        frame_dir = tmp / "frames"
        frame_dir.mkdir()
        template_path = tmp / "sky.png"
        _write_scene(frame_dir, template_path, n_frames, width, height)

        rows = {}
        for backend in ("compiled", "numpy"):
            out_dir = tmp / f"out_{backend}"
            out_dir.mkdir()
            env = {**os.environ, "SKYBLENDR_BACKEND": backend}
            proc = subprocess.run(
                [sys.executable, "-c", _RUNNER, str(frame_dir),
                 str(out_dir), str(template_path)],
                capture_output=True, text=True, env=env)
            if proc.returncode != 0:
                print(f"{backend}: pipeline failed:\n{proc.stderr}")
                continue
            rows[backend] = json.loads(proc.stdout.strip().splitlines()[-1])

        if not rows:
            return
        phases = ("matting", "motion", "render", "blend")
        header = f"{'phase':10s}" + "".join(
            f"{b + ' ms/frame':>18s}" for b in rows)
        print(header)
        for phase in phases:
            line = f"{phase:10s}"
            for summary in rows.values():
                per_frame = summary["phase_seconds"][phase] \
                    / summary["frames"] * 1000.0
                line += f"{per_frame:18.2f}"
            print(line)
        line = f"{'total':10s}"
        for summary in rows.values():
            total = sum(summary["phase_seconds"].values())
            line += f"{total / summary['frames'] * 1000.0:18.2f}"
        print(line)
        line = f"{'fps':10s}"
        for summary in rows.values():
            total = sum(summary["phase_seconds"].values())
            line += f"{summary['frames'] / total:18.1f}"
        print(line)


def main():
    parser = argparse.ArgumentParser(
        description="benchmark compiled vs NumPy kernel backends")
    parser.add_argument("--frames", type=int, default=40,
                        help="frames for the end-to-end comparison")
    parser.add_argument("--repeat", type=int, default=20,
                        help="repeats per kernel timing (min is reported)")
    parser.add_argument("--width", type=int, default=640)
    parser.add_argument("--height", type=int, default=360)
    parser.add_argument("--kernels-only", action="store_true")
    parser.add_argument("--pipeline-only", action="store_true")
    args = parser.parse_args()

    if not args.pipeline_only:
        bench_kernels(args.width, args.height, args.repeat)
    if not args.kernels_only:
        bench_pipeline(args.frames, args.width, args.height)


if __name__ == "__main__":
    main()
