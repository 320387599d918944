"""Forward-integral estimators and the martingale-representation evaluator.

Two independent routes to int_0^T Y dB^- live here.

*Forward (regularization) route*: the left Riemann sum of
(1/eps) Y_t (B_{t+eps} - B_t) over [0, T), with eps a positive multiple of
the grid step so B_{t+eps} is always a node.

*Representation route*: drift + sum_r kcal(r) dW_r, where kcal(r) discretises

    int_r^T { E^r[Y_t] dK/dt(t,r) + phi1(t,r) D_{r,t}B
              + int_r^t phi2(t,v;r) dK/dt(t,v) dv } dt

with product integration: the smooth factor E^r[Y_t] is frozen at the left
node of each t-cell while the singular weight dK/dt(., r) is integrated
exactly (its antiderivative in t is K itself); the phi1 and phi2 blocks use
right-point dt sums, with the inner v-singularity again absorbed into exact
cell moments.  kcal(r) reads only dW_j with j < r, so the outer sum is a
left-point Ito sum of an adapted integrand.

The remainder i2_term isolates the part of the forward difference driven by
increments ahead of t; its second moment vanishes like eps^(2H-1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import kernels as _kern
from .integrands import (
    DeterministicIntegrand,
    FractionalMartingaleIntegrand,
    IntegrandModel,
    StateDependentIntegrand,
)
from .kernels import HurstConfig
from .paths import RlfbmPath, SimulationGrid, lag_tables, nelson_derivative


@dataclass(frozen=True)
class ForwardEstimate:
    """One path's forward-difference estimate at a fixed eps."""

    eps: float
    value: float
    n: int


@dataclass(frozen=True)
class RepresentationValue:
    """Drift + stochastic split of the representation; drift is path-free."""

    drift: float
    stochastic: float

    @property
    def total(self) -> float:
        return self.drift + self.stochastic


def _require_same_grid(Y: IntegrandModel, path: RlfbmPath) -> None:
    if Y.grid != path.grid:
        raise ValueError("integrand model and path were built on different grids")


def forward_estimate(Y: IntegrandModel, path: RlfbmPath, eps: float) -> ForwardEstimate:
    """Left Riemann sum of (1/eps) Y_t (B_{t+eps} - B_t) over t_i < T."""
    _require_same_grid(Y, path)
    grid = path.grid
    m_eps = grid.eps_steps(eps)
    n = grid.n
    vals = Y.value_nodes(path)[:n]
    diff = path.B[m_eps : n + m_eps] - path.B[:n]
    value = float(np.dot(vals, diff)) * grid.dt / eps
    return ForwardEstimate(eps=eps, value=value, n=n)


def i2_term(Y: IntegrandModel, path: RlfbmPath, eps: float) -> float:
    """Ahead-of-t remainder of the forward difference at scale eps.

    Discretises int_0^T Y_t (1/eps) int_t^{t+eps} K(t+eps, u) dW_u dt using
    the same cell-averaged kernel weights as the path construction.
    """
    _require_same_grid(Y, path)
    grid = path.grid
    m_eps = grid.eps_steps(eps)
    n = grid.n
    tab = lag_tables(Y.cfg, grid)
    vals = Y.value_nodes(path)[:n]
    dW = path.source.dW
    w = tab.psi[1 : m_eps + 1][::-1]
    windows = np.lib.stride_tricks.sliding_window_view(dW[: n + m_eps - 1], m_eps)
    inner = windows[:n] @ w
    return float(np.dot(vals, inner)) * grid.dt / eps


def kcal(Y: IntegrandModel, path: RlfbmPath, r_idx: int, grid: SimulationGrid | None = None) -> float:
    """Reference (scalar) evaluation of the representation integrand at r.

    Slow but direct composition of the model capabilities; the batch kernels
    in ``kcal_all`` are cross-checked against this in the tests.
    """
    grid = grid or path.grid
    n = grid.n
    if not 0 <= r_idx < n:
        raise ValueError(f"kcal requires 0 <= r_idx < n, got {r_idx}")
    cfg = Y.cfg
    tab = lag_tables(cfg, grid)
    dt = grid.dt
    acc = 0.0
    for i in range(r_idx, n):
        acc += Y.cond(path, r_idx, i) * tab.cw[i - r_idx + 1]
    for i in range(r_idx + 1, n + 1):
        acc += dt * Y.phi1(path, i, r_idx) * nelson_derivative(cfg, path.source, r_idx, i)
    for i in range(r_idx + 1, n + 1):
        inner = 0.0
        for j in range(r_idx + 1, i):
            inner += Y.phi2(path, i, j, r_idx) * tab.cw[i - j]
        acc += dt * inner
    return acc


def kcal_all(Y: IntegrandModel, path: RlfbmPath) -> np.ndarray:
    """Representation integrand kcal(r) for every r < n (fast backends)."""
    _require_same_grid(Y, path)
    grid = path.grid
    n = grid.n
    tab = lag_tables(Y.cfg, grid)
    dW = path.source.dW
    if isinstance(Y, DeterministicIntegrand):
        return _deterministic_kcal(Y, grid)
    if isinstance(Y, StateDependentIntegrand) and Y.g_code is not None:
        return _kern.kcal_state(
            dW,
            n,
            Y.rule.nodes,
            Y.rule.weights,
            Y.g_code,
            grid.dt,
            grid.times(),
            tab.sqth,
            tab.psi,
            tab.nu,
            tab.cw,
            tab.klag,
            tab.f2,
        )
    if isinstance(Y, FractionalMartingaleIntegrand):
        zv = Y.z_nodes(path)
        u = zv[: grid.m] * dW
        if Y.z_kind == "cos_of_w":
            sinw = np.sin(path.source.wiener_nodes())
            pc = _frac_cos_block(Y, grid, tab)
            has_phi2 = 1
        else:
            sinw = np.zeros(grid.m + 1)
            pc = np.zeros(grid.m + 1)
            has_phi2 = 0
        return _kern.kcal_frac(
            dW, u, zv, sinw, n, grid.dt, Y.fa, tab.nu, tab.cw, pc, has_phi2
        )
    # generic fallback: direct scalar evaluation
    return np.array([kcal(Y, path, r) for r in range(n)])


def _deterministic_kcal(Y: DeterministicIntegrand, grid: SimulationGrid) -> np.ndarray:
    """kcal for deterministic g: int_r^T g_t dK/dt(t,r) dt, exact cell moments."""
    n = grid.n
    tab = lag_tables(Y.cfg, grid)
    g_nodes = np.array([float(Y.g(i * grid.dt)) for i in range(n)])
    out = np.empty(n)
    for r in range(n):
        out[r] = float(np.dot(g_nodes[r:n], tab.cw[1 : n - r + 1]))
    return out


def _frac_cos_block(
    Y: FractionalMartingaleIntegrand, grid: SimulationGrid, tab
) -> np.ndarray:
    """Precomputed second-derivative block for the cos-of-W fractional model.

    term_c(r) = -sin(W_r) dt pc[n-r] with
      pc[l] = sum_{k=1}^{l} q^k hc[k-1],  hc[k] = sum_{j<=k} fa[j] cw[j] q^{-j},
    q = exp(-dt/2); follows from E^r[cos W_v] = cos(W_r) e^{-(v-r)/2}.
    """
    m = grid.m
    dt = grid.dt
    q = np.exp(-0.5 * dt)
    k = np.arange(m + 1, dtype=float)
    h = Y.fa * tab.cw
    hc = np.zeros(m + 1)
    np.cumsum(h[1:] * q ** (-k[1:]), out=hc[1:])
    pc = np.zeros(m + 1)
    np.cumsum(q ** k[1:] * hc[:-1], out=pc[1:])
    return pc


def drift_term(Y: IntegrandModel, grid: SimulationGrid | None = None) -> float:
    """Deterministic drift: product-integrated double sum of E[phi1] dK/dt.

    When the model exposes its diagonal exponent p (mean_phi1 = rho (t-u)^p
    with smooth rho), the full algebraic factor (t-u)^(p + H - 3/2) is
    integrated exactly over every u-cell and only rho is frozen at the left
    node; freezing mean_phi1 itself (the fallback for opaque models) biases
    the sum by O(dt^(2H-1)) because mean_phi1 is merely Hoelder at u = t.
    Finiteness is the discrete counterpart of the integrability of
    int int |E[phi1(t,u)]| dK/dt(t,u) du dt.  Cached per model instance.
    """
    grid = grid or Y.grid
    if Y._drift_cache is not None:
        return Y._drift_cache
    n = grid.n
    cfg = Y.cfg
    tab = lag_tables(cfg, grid)
    dt = grid.dt
    p = Y.mean_phi1_power()
    total = 0.0
    if p is None:
        for s in range(1, n + 1):
            inner = 0.0
            for u in range(s):
                mp = Y.mean_phi1(s, u)
                if mp != 0.0:
                    inner += mp * tab.cw[s - u]
            total += inner * dt
    else:
        pe = p + cfg.alpha_k
        if pe <= 0.0:
            raise ValueError("mean_phi1_power too singular: p + H - 1/2 must be > 0")
        k = np.arange(n + 1, dtype=float)
        wc = np.zeros(n + 1)
        wc[1:] = cfg.c_H / pe * (dt**pe) * (k[1:] ** pe - (k[1:] - 1.0) ** pe)
        for s in range(1, n + 1):
            inner = 0.0
            for u in range(s):
                mp = Y.mean_phi1(s, u)
                if mp != 0.0:
                    rho = mp / ((s - u) * dt) ** p
                    inner += rho * wc[s - u]
            total += inner * dt
    Y._drift_cache = total
    return total


def representation_rhs(Y: IntegrandModel, path: RlfbmPath) -> RepresentationValue:
    """Drift + left-point Ito sum of kcal against the Brownian increments."""
    grid = path.grid
    kc = kcal_all(Y, path)
    stoch = float(np.dot(kc, path.source.dW[: grid.n]))
    return RepresentationValue(drift=drift_term(Y, grid), stochastic=stoch)


def wiener_integral(g, path: RlfbmPath, cfg: HurstConfig) -> float:
    """Wiener-case representation sum_r (int_r^T g_t dK/dt(t,r) dt) dW_r.

    For deterministic g this coincides exactly (same sums) with
    ``representation_rhs`` of the deterministic model built from g.
    """
    grid = path.grid
    n = grid.n
    tab = lag_tables(cfg, grid)
    g_nodes = np.array([float(g(i * grid.dt)) for i in range(n)])
    coeffs = np.empty(n)
    for r in range(n):
        coeffs[r] = float(np.dot(g_nodes[r:n], tab.cw[1 : n - r + 1]))
    return float(np.dot(coeffs, path.source.dW[:n]))
