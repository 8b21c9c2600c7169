"""Benchmark the rasterization kernels: compiled extension vs numpy fallback.

Run with: python -m meshwalk.bench [--sizes 2000,20000,200000] [--res 512]
"""

import argparse
import time

import numpy as np

from .camera import default_intrinsics, identity_pose
from .mesh import init_scene
from .raster import get_impl


def _grid_mesh(n_faces, rng):
    side = max(int(np.sqrt(n_faces / 2)) + 1, 2)
    img = rng.random((side, side, 3))
    dep = 1.0 + rng.random((side, side))
    cam = identity_pose(default_intrinsics(side, side))
    return init_scene(img, dep, cam)


def run_bench(sizes, res, repeats=3):
    rng = np.random.default_rng(0)
    intr = default_intrinsics(res, res)
    cam = identity_pose(intr)
    backends = []
    for name in ("cython", "python"):
        try:
            backends.append((name, get_impl(name)))
        except ImportError:
            print(f"[{name}] unavailable, skipping")
    print(f"{'faces':>10} " + " ".join(f"{name:>12}" for name, _ in backends)
          + f" {'speedup':>9}")
    for n in sizes:
        mesh = _grid_mesh(n, rng)
        verts = np.ascontiguousarray(mesh.positions)
        times = []
        for _, impl in backends:
            best = np.inf
            for _ in range(repeats):
                t0 = time.perf_counter()
                impl.rasterize(verts, mesh.colors, mesh.faces, res, res,
                               *intr, 1e-3)
                best = min(best, time.perf_counter() - t0)
            times.append(best)
        ratio = times[1] / times[0] if len(times) == 2 else float("nan")
        print(f"{mesh.num_faces:>10} " + " ".join(f"{t * 1e3:>10.1f}ms" for t in times)
              + f" {ratio:>8.1f}x")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="2000,20000,200000",
                        help="comma-separated face counts")
    parser.add_argument("--res", type=int, default=512)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    run_bench(sizes, args.res, args.repeats)


if __name__ == "__main__":
    main()
