#!/usr/bin/env python3
"""Benchmark the pure NumPy/Python kernels against the compiled extension.

Usage:
    python benchmarks/bench_kernels.py [--repeat 5] [--boxes 400] [--cues 48]

The compiled column appears only when the extension is built
(`python setup.py build_ext --inplace`).
"""

from __future__ import annotations

import argparse
import statistics
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import numpy as np

from signeval._kernels import available_backends


def time_call(fn, repeat: int) -> float:
    samples = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return statistics.median(samples)


def make_boxes(rng, n: int) -> np.ndarray:
    mins = rng.uniform(0, 1000, (n, 2))
    sizes = rng.uniform(5, 200, (n, 2))
    return np.hstack([mins, mins + sizes])


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5, help="timing repetitions (median)")
    parser.add_argument("--boxes", type=int, default=400, help="boxes per side for iou_matrix")
    parser.add_argument("--dets", type=int, default=500, help="detections for greedy_assign")
    parser.add_argument("--gts", type=int, default=120, help="ground-truth boxes for greedy_assign")
    parser.add_argument("--cues", type=int, default=48, help="cues per side for max_value_matching")
    args = parser.parse_args()

    backends = available_backends()
    rng = np.random.default_rng(0)

    boxes_a = make_boxes(rng, args.boxes)
    boxes_b = make_boxes(rng, args.boxes)

    det_ious = rng.random((args.dets, args.gts))
    gt_ignore = (rng.random(args.gts) < 0.2).astype(np.uint8)
    scan = np.array(
        sorted(range(args.gts), key=lambda g: (int(gt_ignore[g]), g)), dtype=np.int64
    )

    weights = rng.integers(0, 40, (args.cues, args.cues))
    admissible = rng.random((args.cues, args.cues)) < 0.25
    values = np.where(admissible, int(weights.sum()) + 1 + weights, -1).astype(np.int64)

    cases = [
        (f"iou_matrix {args.boxes}x{args.boxes}", lambda k: k.iou_matrix(boxes_a, boxes_b)),
        (
            f"greedy_assign {args.dets}x{args.gts}",
            lambda k: k.greedy_assign(det_ious, scan, gt_ignore, 0.5),
        ),
        (
            f"max_value_matching {args.cues}x{args.cues}",
            lambda k: k.max_value_matching(values),
        ),
    ]

    names = sorted(backends)
    header = ["kernel"] + [f"{name} (ms)" for name in names]
    if set(names) >= {"pure", "compiled"}:
        header.append("speedup")
    rows = [header]
    for label, call in cases:
        timings = {
            name: time_call(lambda: call(backends[name]), args.repeat) for name in names
        }
        row = [label] + [f"{timings[name] * 1e3:.2f}" for name in names]
        if "pure" in timings and "compiled" in timings:
            row.append(f"{timings['pure'] / timings['compiled']:.1f}x")
        rows.append(row)

    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    for row in rows:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    if "compiled" not in backends:
        print("\ncompiled kernels not built; run: python setup.py build_ext --inplace")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
