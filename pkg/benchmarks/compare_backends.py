"""Benchmark the numba kernels against the pure-NumPy fallback.

Times the hot kernels on representative workloads and prints a table with
the speedup.  Run as:

    python benchmarks/compare_backends.py [--paths 200] [--steps 512]

The active backend for the library is chosen by RLFORWARD_BACKEND; this
script imports both implementations explicitly, so it works regardless of
the environment setting (numba must be importable for its column).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from rlforward import HurstConfig, SimulationGrid
from rlforward._backend import available_backends, get_kernels
from rlforward.experiments import isometry_r2d_tensor
from rlforward.gauss import default_rule
from rlforward.integrands import G_CODES
from rlforward.paths import lag_tables, simulate_brownian_batch


def _time(fn, repeat: int = 3) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--paths", type=int, default=200)
    parser.add_argument("--steps", type=int, default=512)
    parser.add_argument("--iso-steps", type=int, default=64)
    args = parser.parse_args()

    cfg = HurstConfig(H=0.75, T=1.0)
    grid = SimulationGrid(T=1.0, n=args.steps, ext=64)
    tab = lag_tables(cfg, grid)
    rule = default_rule()
    dW = simulate_brownian_batch(grid, 12345, args.paths)
    tgrid = grid.times()

    giso = SimulationGrid(T=1.0, n=args.iso_steps, ext=0)
    tab_iso = lag_tables(cfg, giso)
    r2d = isometry_r2d_tensor(cfg, giso)
    dW_iso = simulate_brownian_batch(giso, 999, args.paths)
    fa = np.zeros(giso.m + 1)
    fa[1:] = (np.arange(1, giso.m + 1) * giso.dt) ** 0.25

    backends = {}
    for name in available_backends():
        backends[name] = get_kernels(name)
    if "numba" not in backends:
        print("numba backend unavailable; timing numpy only")

    def bench_volterra(k):
        return lambda: k.volterra_nodes_batch(dW, tab.psi)

    def bench_kcal_state(k):
        def run():
            for p in range(min(args.paths, 8)):
                k.kcal_state(
                    dW[p], grid.n, rule.nodes, rule.weights, G_CODES["linear"],
                    grid.dt, tgrid, tab.sqth, tab.psi, tab.nu, tab.cw, tab.klag, tab.f2,
                )
        return run

    def bench_kcal_frac(k):
        zv = np.ones(grid.m + 1)
        sinw = np.zeros(grid.m + 1)
        pc = np.zeros(grid.m + 1)
        fa_full = np.zeros(grid.m + 1)
        fa_full[1:] = (np.arange(1, grid.m + 1) * grid.dt) ** 0.25

        def run():
            for p in range(min(args.paths, 32)):
                k.kcal_frac(dW[p], dW[p], zv, sinw, grid.n, grid.dt,
                            fa_full, tab.nu, tab.cw, pc, 0)
        return run

    def bench_iso(k):
        n = giso.n
        i = np.arange(n + 1)[:, None]
        r = np.arange(n)[None, :]
        phi1 = np.where(i > r, fa[np.clip(i - r, 0, giso.m)], 0.0)

        def run():
            for p in range(min(args.paths, 32)):
                k.iso_path_terms(dW_iso[p], phi1, tab_iso.nu, r2d, giso.dt, n)
        return run

    cases = [
        (f"volterra_nodes_batch ({args.paths}x{args.steps})", bench_volterra),
        (f"kcal_state linear (8 paths, n={args.steps})", bench_kcal_state),
        (f"kcal_frac one (32 paths, n={args.steps})", bench_kcal_frac),
        (f"iso_path_terms (32 paths, n={args.iso_steps})", bench_iso),
    ]

    # warm the JIT before timing
    if "numba" in backends:
        for _, factory in cases:
            factory(backends["numba"])()

    width = max(len(label) for label, _ in cases)
    header = f"{'kernel':<{width}}  " + "".join(f"{b:>12}" for b in backends) + "     speedup"
    print(header)
    print("-" * len(header))
    for label, factory in cases:
        times = {name: _time(factory(mod)) for name, mod in backends.items()}
        cells = "".join(f"{times[name] * 1e3:>10.1f}ms" for name in backends)
        if "numba" in times and "numpy" in times and times["numba"] > 0:
            ratio = f"{times['numpy'] / times['numba']:>10.1f}x"
        else:
            ratio = f"{'n/a':>11}"
        print(f"{label:<{width}}  {cells}{ratio}")


if __name__ == "__main__":
    main()
