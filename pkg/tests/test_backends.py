"""The JIT kernels and the pure-NumPy fallback must agree on every surface."""

import numpy as np
import pytest

from rlforward import HurstConfig, SimulationGrid
from rlforward._backend import active_name, available_backends, get_kernels
from rlforward.experiments import isometry_r2d_tensor
from rlforward.gauss import default_rule
from rlforward.paths import lag_tables, simulate_brownian_batch

CFG = HurstConfig(H=0.75, T=1.0)

numba_missing = "numba" not in available_backends()
pytestmark = pytest.mark.skipif(
    numba_missing, reason="numba backend unavailable; nothing to compare"
)


@pytest.fixture(scope="module")
def setup():
    grid = SimulationGrid(T=1.0, n=24, ext=8)
    tab = lag_tables(CFG, grid)
    dw = simulate_brownian_batch(grid, 1234, 4)
    return grid, tab, dw


def _close(a, b, rtol=1e-10):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = max(float(np.max(np.abs(a))), 1e-12)
    assert float(np.max(np.abs(a - b))) / scale < rtol


def test_backend_names():
    assert get_kernels("numpy").NAME == "numpy"
    assert get_kernels("numba").NAME == "numba"
    assert active_name() in ("numba", "numpy")
    with pytest.raises(ValueError):
        get_kernels("cython")


def test_g_eval_agrees(setup):
    nb, npk = get_kernels("numba"), get_kernels("numpy")
    x = np.linspace(-2.0, 2.0, 17)
    t = np.linspace(0.0, 1.0, 17)
    for code in (1, 2, 3):
        _close(nb.g_eval(code, t, x), npk.g_eval(code, t, x), rtol=1e-14)


def test_volterra_agrees(setup):
    grid, tab, dw = setup
    nb, npk = get_kernels("numba"), get_kernels("numpy")
    _close(nb.volterra_nodes_batch(dw, tab.psi), npk.volterra_nodes_batch(dw, tab.psi))
    _close(
        nb.volterra_nodes_batch(dw[0], tab.psi), npk.volterra_nodes_batch(dw[0], tab.psi)
    )


@pytest.mark.parametrize("gcode", [1, 2, 3])
def test_kcal_state_agrees(setup, gcode):
    grid, tab, dw = setup
    nb, npk = get_kernels("numba"), get_kernels("numpy")
    rule = default_rule(16)
    args = (
        grid.n, rule.nodes, rule.weights, gcode, grid.dt, grid.times(),
        tab.sqth, tab.psi, tab.nu, tab.cw, tab.klag, tab.f2,
    )
    for p in range(dw.shape[0]):
        _close(nb.kcal_state(dw[p], *args), npk.kcal_state(dw[p], *args))


@pytest.mark.parametrize("has_phi2", [0, 1])
def test_kcal_frac_agrees(setup, has_phi2):
    grid, tab, dw = setup
    nb, npk = get_kernels("numba"), get_kernels("numpy")
    rng = np.random.default_rng(5)
    zv = np.cos(rng.standard_normal(grid.m + 1))
    sinw = np.sin(rng.standard_normal(grid.m + 1))
    pc = np.abs(rng.standard_normal(grid.m + 1))
    fa = tab.klag.copy()
    for p in range(dw.shape[0]):
        u = zv[: grid.m] * dw[p]
        a = nb.kcal_frac(dw[p], u, zv, sinw, grid.n, grid.dt, fa, tab.nu, tab.cw, pc, has_phi2)
        b = npk.kcal_frac(dw[p], u, zv, sinw, grid.n, grid.dt, fa, tab.nu, tab.cw, pc, has_phi2)
        _close(a, b)


def test_nelson_matrix_agrees(setup):
    grid, tab, dw = setup
    nb, npk = get_kernels("numba"), get_kernels("numpy")
    _close(
        nb.nelson_matrix(dw[0], tab.nu, grid.n), npk.nelson_matrix(dw[0], tab.nu, grid.n)
    )


def test_iso_terms_agree(setup):
    grid, tab, dw = setup
    nb, npk = get_kernels("numba"), get_kernels("numpy")
    r2d = isometry_r2d_tensor(CFG, grid)
    rng = np.random.default_rng(6)
    i = np.arange(grid.n + 1)[:, None]
    r = np.arange(grid.n)[None, :]
    phi1 = np.where(i > r, rng.standard_normal((grid.n + 1, grid.n)), 0.0)
    for p in range(dw.shape[0]):
        a = nb.iso_path_terms(dw[p], phi1, tab.nu, r2d, grid.dt, grid.n)
        b = npk.iso_path_terms(dw[p], phi1, tab.nu, r2d, grid.dt, grid.n)
        for x, y in zip(a, b):
            assert x == pytest.approx(y, rel=1e-9, abs=1e-12)


def test_numpy_backend_env(monkeypatch):
    monkeypatch.setenv("RLFORWARD_BACKEND", "numpy")
    from rlforward import _backend

    assert _backend.active_name() == "numpy"
    monkeypatch.setenv("RLFORWARD_BACKEND", "fortran")
    with pytest.raises(ValueError):
        _backend.active_name()
