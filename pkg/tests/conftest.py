"""Shared fixtures: JIT warm-up and statistical assertion helpers."""

from __future__ import annotations

import numpy as np
import pytest

from rlforward import HurstConfig, SimulationGrid
from rlforward._backend import kernels as _kern
from rlforward.experiments import isometry_r2d_tensor
from rlforward.gauss import default_rule
from rlforward.paths import lag_tables, simulate_brownian


@pytest.fixture(scope="session", autouse=True)
def warm_jit():
    """Compile (or load from cache) every hot kernel before anything is timed."""
    cfg = HurstConfig(H=0.75, T=1.0)
    grid = SimulationGrid(T=1.0, n=8, ext=4)
    tab = lag_tables(cfg, grid)
    rule = default_rule(8)
    W = simulate_brownian(grid, 0, 0)
    _kern.volterra_nodes_batch(W.dW, tab.psi)
    _kern.kcal_state(
        W.dW, grid.n, rule.nodes, rule.weights, 1, grid.dt, grid.times(),
        tab.sqth, tab.psi, tab.nu, tab.cw, tab.klag, tab.f2,
    )
    zv = np.ones(grid.m + 1)
    _kern.kcal_frac(
        W.dW, W.dW, zv, np.zeros(grid.m + 1), grid.n, grid.dt,
        tab.klag, tab.nu, tab.cw, np.zeros(grid.m + 1), 0,
    )
    r2d = isometry_r2d_tensor(cfg, grid)
    phi1 = np.zeros((grid.n + 1, grid.n))
    _kern.iso_path_terms(W.dW, phi1, tab.nu, r2d, grid.dt, grid.n)
    yield


def assert_within_sigma(value: float, target: float, stderr: float, n_sigma: float,
                        atol: float = 1e-9, label: str = "") -> None:
    """|value - target| <= n_sigma * stderr + atol, with a readable message."""
    bound = n_sigma * stderr + atol
    assert abs(value - target) <= bound, (
        f"{label}: {value} vs {target} differs by {abs(value - target):.3e} "
        f"> {n_sigma} sigma bound {bound:.3e}"
    )
