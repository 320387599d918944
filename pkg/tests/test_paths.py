"""Path construction: reproducibility, CLT oracles, conditional fields."""

import io
import math

import numpy as np
import pytest

from rlforward import (
    HurstConfig,
    SimulationGrid,
    bold_D_field,
    bold_d_second_moment,
    build_rlfbm,
    conditional_mean_B,
    covariance_R,
    nelson_derivative,
    nelson_eps,
    nelson_variance,
    sigma2_cond,
    simulate_brownian,
    simulate_brownian_batch,
    simulate_rlfbm,
    write_path_csv,
)
from rlforward.paths import (
    bold_D_batch,
    conditional_mean_batch,
    lag_tables,
    nelson_batch,
)

from conftest import assert_within_sigma

CFG = HurstConfig(H=0.75, T=1.0)


class TestGrid:
    def test_nodes(self):
        grid = SimulationGrid(T=2.0, n=8, ext=2)
        assert grid.dt == 0.25
        assert grid.m == 10
        tv = grid.times()
        assert tv[0] == 0.0 and tv[-1] == pytest.approx(2.5)
        assert np.allclose(np.diff(tv), grid.dt)

    def test_validation(self):
        with pytest.raises(ValueError):
            SimulationGrid(T=0.0, n=8)
        with pytest.raises(ValueError):
            SimulationGrid(T=1.0, n=0)
        with pytest.raises(ValueError):
            SimulationGrid(T=1.0, n=8, ext=-1)

    def test_eps_steps(self):
        grid = SimulationGrid(T=1.0, n=16, ext=4)
        assert grid.eps_steps(2 * grid.dt) == 2
        with pytest.raises(ValueError):
            grid.eps_steps(3.7 * grid.dt)
        with pytest.raises(ValueError):
            grid.eps_steps(5 * grid.dt)  # beyond the extension
        with pytest.raises(ValueError):
            grid.eps_steps(0.0)


class TestBrownianReproducibility:
    def test_same_key_same_stream(self):
        grid = SimulationGrid(T=1.0, n=32, ext=8)
        a = simulate_brownian(grid, seed=7, path_index=5)
        b = simulate_brownian(grid, seed=7, path_index=5)
        assert np.array_equal(a.dW, b.dW)

    def test_distinct_indices_distinct_streams(self):
        grid = SimulationGrid(T=1.0, n=32, ext=0)
        a = simulate_brownian(grid, seed=7, path_index=0)
        b = simulate_brownian(grid, seed=7, path_index=1)
        assert not np.array_equal(a.dW, b.dW)

    def test_batch_rows_match_single_paths(self):
        grid = SimulationGrid(T=1.0, n=16, ext=0)
        batch = simulate_brownian_batch(grid, seed=3, n_paths=5, start_index=2)
        for p in range(5):
            single = simulate_brownian(grid, seed=3, path_index=2 + p)
            assert np.array_equal(batch[p], single.dW)

    def test_increment_moments_clt(self):
        grid = SimulationGrid(T=1.0, n=16, ext=0)
        n_paths = 100_000
        dw = simulate_brownian_batch(grid, seed=11, n_paths=n_paths)
        j = 7
        col = dw[:, j]
        se_mean = col.std(ddof=1) / math.sqrt(n_paths)
        assert_within_sigma(col.mean(), 0.0, se_mean, 5, label="increment mean")
        var = col.var(ddof=1)
        se_var = var * math.sqrt(2.0 / (n_paths - 1))
        assert_within_sigma(var, grid.dt, se_var, 5, label="increment variance")
        # cross-path independence at a fixed cell
        half = n_paths // 2
        corr = np.corrcoef(col[:half], col[half:])[0, 1]
        assert abs(corr) < 5.0 / math.sqrt(half)

    def test_wiener_nodes(self):
        grid = SimulationGrid(T=1.0, n=8, ext=0)
        w = simulate_brownian(grid, 0, 0)
        nodes = w.wiener_nodes()
        assert nodes[0] == 0.0
        assert np.allclose(np.diff(nodes), w.dW)


class TestRlfbm:
    def test_starts_at_zero(self):
        path = simulate_rlfbm(SimulationGrid(T=1.0, n=16, ext=2), CFG, 1, 0)
        assert path.B[0] == 0.0

    def test_construction_matches_weights(self):
        grid = SimulationGrid(T=1.0, n=8, ext=0)
        W = simulate_brownian(grid, 5, 0)
        path = build_rlfbm(W, CFG)
        tab = lag_tables(CFG, grid)
        for i in (1, 4, 8):
            manual = sum(tab.psi[i - j] * W.dW[j] for j in range(i))
            assert path.B[i] == pytest.approx(manual, rel=1e-12)

    def test_discrete_covariance_matches_closed_form(self):
        # weight-level covariance sum vs covariance_R, rel < 1% at n = 512
        for h in (0.6, 0.75, 0.9):
            cfg = HurstConfig(H=h, T=1.0)
            grid = SimulationGrid(T=1.0, n=512, ext=0)
            tab = lag_tables(cfg, grid)
            for (i, k) in [(512, 512), (256, 512), (128, 384), (64, 512), (500, 512)]:
                lo = min(i, k)
                wi = tab.psi[i - np.arange(lo)]
                wk = tab.psi[k - np.arange(lo)]
                disc = float(np.sum(wi * wk)) * grid.dt
                exact = covariance_R(cfg, i * grid.dt, k * grid.dt)
                assert disc == pytest.approx(exact, rel=0.01), (h, i, k)

    def test_batch_mean_is_zero(self):
        grid = SimulationGrid(T=1.0, n=64, ext=0)
        dw = simulate_brownian_batch(grid, 21, 20_000)
        from rlforward.paths import rlfbm_nodes_batch

        b = rlfbm_nodes_batch(CFG, grid, dw)
        col = b[:, 48]
        se = col.std(ddof=1) / math.sqrt(len(col))
        assert_within_sigma(col.mean(), 0.0, se, 5, label="B mean")

    def test_orthogonal_increment_decomposition(self):
        # B_t - B_s splits into a past-measurable and a future part that are
        # empirically uncorrelated
        grid = SimulationGrid(T=1.0, n=64, ext=0)
        tab = lag_tables(CFG, grid)
        s_idx, t_idx = 32, 56
        n_paths = 100_000
        dw = simulate_brownian_batch(grid, 33, n_paths)
        j_past = np.arange(s_idx)
        past = dw[:, :s_idx] @ (tab.psi[t_idx - j_past] - tab.psi[s_idx - j_past])
        j_fut = np.arange(s_idx, t_idx)
        fut = dw[:, s_idx:t_idx] @ tab.psi[t_idx - j_fut]
        corr = np.corrcoef(past, fut)[0, 1]
        assert abs(corr) < 5.0 / math.sqrt(n_paths)


class TestConditionalMean:
    def test_no_information_at_zero(self):
        path = simulate_rlfbm(SimulationGrid(T=1.0, n=16, ext=0), CFG, 2, 0)
        assert conditional_mean_B(CFG, path.source, 0, 10) == 0.0

    def test_full_information_recovers_value(self):
        grid = SimulationGrid(T=1.0, n=16, ext=0)
        path = simulate_rlfbm(grid, CFG, 2, 0)
        for t in (4, 9, 16):
            assert conditional_mean_B(CFG, path.source, t, t) == pytest.approx(
                path.B[t], rel=1e-12
            )

    def test_rejects_reversed_indices(self):
        path = simulate_rlfbm(SimulationGrid(T=1.0, n=16, ext=0), CFG, 2, 0)
        with pytest.raises(ValueError):
            conditional_mean_B(CFG, path.source, 12, 10)

    def test_measurability(self):
        # the conditional mean must not read increments at or beyond r
        grid = SimulationGrid(T=1.0, n=16, ext=0)
        a = simulate_brownian(grid, 4, 0)
        dw2 = a.dW.copy()
        dw2[8:] = 123.0
        from rlforward.paths import BrownianPath

        b = BrownianPath(grid=grid, dW=dw2, seed=4, path_index=0)
        assert conditional_mean_B(CFG, a, 8, 12) == conditional_mean_B(CFG, b, 8, 12)

    def test_variance_matches_sigma2(self):
        # Monte Carlo variance of E^r[B_t] against the closed form
        grid = SimulationGrid(T=1.0, n=256, ext=0)
        n_paths = 100_000
        dw = simulate_brownian_batch(grid, 44, n_paths)
        for (r, t) in [(64, 128), (128, 256), (192, 224)]:
            vals = conditional_mean_batch(CFG, grid, dw, r, t)
            var = vals.var(ddof=1)
            se = var * math.sqrt(2.0 / (n_paths - 1))
            exact = sigma2_cond(CFG, r * grid.dt, t * grid.dt)
            assert_within_sigma(var, exact, se, 3, label=f"sigma2 at ({r},{t})")

    def test_tower_property(self):
        grid = SimulationGrid(T=1.0, n=128, ext=0)
        n_paths = 50_000
        dw = simulate_brownian_batch(grid, 45, n_paths)
        vals = conditional_mean_batch(CFG, grid, dw, 64, 128)
        se = vals.std(ddof=1) / math.sqrt(n_paths)
        assert_within_sigma(vals.mean(), 0.0, se, 5, label="tower")


class TestNelson:
    def test_zero_at_origin(self):
        path = simulate_rlfbm(SimulationGrid(T=1.0, n=16, ext=0), CFG, 6, 0)
        assert nelson_derivative(CFG, path.source, 0, 8) == 0.0

    def test_diagonal_rejected(self):
        path = simulate_rlfbm(SimulationGrid(T=1.0, n=16, ext=0), CFG, 6, 0)
        with pytest.raises(ValueError):
            nelson_derivative(CFG, path.source, 8, 8)

    def test_variance_matches_closed_form(self):
        grid = SimulationGrid(T=1.0, n=256, ext=0)
        n_paths = 100_000
        dw = simulate_brownian_batch(grid, 47, n_paths)
        for (r, t) in [(64, 128), (96, 240)]:
            vals = nelson_batch(CFG, grid, dw, r, t)
            var = vals.var(ddof=1)
            se = var * math.sqrt(2.0 / (n_paths - 1))
            exact = nelson_variance(CFG, r * grid.dt, t * grid.dt)
            assert_within_sigma(var, exact, se, 3, label=f"nelson var ({r},{t})")

    def test_eps_quotient_converges_in_l2(self):
        # E|D^eps - D|^2 at fixed (r, t) decreases as eps halves; both fields
        # are linear in dW so the second moment is an exact weight sum
        grid = SimulationGrid(T=1.0, n=256, ext=64)
        tab = lag_tables(CFG, grid)
        r, t = 96, 192
        j = np.arange(r)
        exact_w = tab.nu[t - j]
        gaps = []
        for m_eps in (64, 32, 16, 8, 4):
            quot_w = (tab.psi[t + m_eps - j] - tab.psi[t - j]) / (m_eps * grid.dt)
            gaps.append(float(np.sum((quot_w - exact_w) ** 2) * grid.dt))
        assert all(a > b for a, b in zip(gaps, gaps[1:]))

    def test_eps_matches_monte_carlo(self):
        grid = SimulationGrid(T=1.0, n=64, ext=16)
        path = simulate_rlfbm(grid, CFG, 8, 3)
        r, t, m_eps = 24, 48, 8
        val = nelson_eps(CFG, path.source, r, t, m_eps * grid.dt)
        tab = lag_tables(CFG, grid)
        j = np.arange(r)
        w = (tab.psi[t + m_eps - j] - tab.psi[t - j]) / (m_eps * grid.dt)
        assert val == pytest.approx(float(w @ path.source.dW[:r]), rel=1e-12)

    def test_eps_domain(self):
        grid = SimulationGrid(T=1.0, n=64, ext=4)
        path = simulate_rlfbm(grid, CFG, 8, 3)
        with pytest.raises(ValueError):
            nelson_eps(CFG, path.source, 10, 10, 2 * grid.dt)
        with pytest.raises(ValueError):
            nelson_eps(CFG, path.source, 10, 63, 3.3 * grid.dt)
        with pytest.raises(ValueError):
            nelson_eps(CFG, path.source, 10, 66, 4 * grid.dt)

    def test_eps_weights_dominated_by_derivative_weights(self):
        # mean value theorem: the forward difference quotient of K in t never
        # exceeds dK/dt at the left time, so the eps-field L2 norm stays below
        # the Nelson-field one (the (t-r)^(H-1) envelope)
        grid = SimulationGrid(T=1.0, n=128, ext=8)
        tab = lag_tables(CFG, grid)
        r, t, m_eps = 48, 96, 1
        j = np.arange(r)
        quot = (tab.psi[t + m_eps - j] - tab.psi[t - j]) / (m_eps * grid.dt)
        assert np.all(quot <= tab.nu[t - j] * (1.0 + 1e-12))
        assert float(np.sum(quot**2) * grid.dt) <= nelson_variance(
            CFG, r * grid.dt, t * grid.dt
        ) * (1.0 + 1e-9)


class TestBoldD:
    def test_zero_at_origin(self):
        path = simulate_rlfbm(SimulationGrid(T=1.0, n=32, ext=0), CFG, 9, 0)
        assert bold_D_field(CFG, path.source, 16, 24, 0) == 0.0

    def test_domain(self):
        path = simulate_rlfbm(SimulationGrid(T=1.0, n=32, ext=0), CFG, 9, 0)
        with pytest.raises(ValueError):
            bold_D_field(CFG, path.source, 16, 16, 8)
        with pytest.raises(ValueError):
            bold_D_field(CFG, path.source, 16, 24, 20)

    def test_not_symmetric(self):
        path = simulate_rlfbm(SimulationGrid(T=1.0, n=32, ext=0), CFG, 9, 1)
        a = bold_D_field(CFG, path.source, 16, 28, 10)
        b = bold_D_field(CFG, path.source, 28, 16, 10)
        assert a != pytest.approx(b, rel=1e-6)

    def test_batch_matches_scalar(self):
        grid = SimulationGrid(T=1.0, n=32, ext=0)
        dw = simulate_brownian_batch(grid, 10, 4)
        from rlforward.paths import BrownianPath

        vals = bold_D_batch(CFG, grid, dw, 20, 28, 12)
        for p in range(4):
            W = BrownianPath(grid=grid, dW=dw[p], seed=10, path_index=p)
            assert vals[p] == pytest.approx(
                bold_D_field(CFG, W, 20, 28, 12), rel=1e-12, abs=1e-15
            )

    def test_second_moment_matches_closed_form(self):
        grid = SimulationGrid(T=1.0, n=256, ext=0)
        n_paths = 50_000
        dw = simulate_brownian_batch(grid, 52, n_paths)
        x1, x2, r = 128, 192, 64
        vals = bold_D_batch(CFG, grid, dw, x1, x2, r)
        m2 = float(np.mean(vals**2))
        se = float(np.std(vals**2, ddof=1) / math.sqrt(n_paths))
        exact = bold_d_second_moment(CFG, x1 * grid.dt, x2 * grid.dt, r * grid.dt)
        assert_within_sigma(m2, exact, se, 3, label="boldD moment")


class TestCsvExport:
    def test_schema_and_roundtrip(self):
        grid = SimulationGrid(T=1.0, n=4, ext=1)
        path = simulate_rlfbm(grid, CFG, 99, 0)
        buf = io.StringIO()
        write_path_csv(path, buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == "t,W,B"
        assert len(lines) == grid.m + 2
        t, w, b = (float(x) for x in lines[2].split(","))
        assert t == grid.dt
        assert w == path.source.wiener_nodes()[1]
        assert b == path.B[1]
