"""Simulation grid, Brownian increments, and RLFBM path construction.

Paths are value objects: a ``BrownianPath`` is fully determined by
``(seed, path_index)`` through a counter-based Philox stream (jump-ahead per
path index), so batches are bit-reproducible regardless of scheduling.  The
RLFBM values are discrete Volterra sums

    B_{t_i} = sum_{j<i} psi_{i-j} dW_j,
    psi_k   = (1/dt) int_{cell k} K(t_i, u) du,

with cell-averaged kernel weights: the exact kernel moment over each cell
replaces pointwise evaluation, which near the singular diagonal would bias
the variance low.  The grid genuinely extends beyond T by ``ext`` cells so
that B_{t+eps} is always a grid node for every eps requested from the
forward estimator (no interpolation, and no zero-extension of B).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._backend import kernels as _kern
from .kernels import HurstConfig


@dataclass(frozen=True)
class SimulationGrid:
    """Uniform grid on [0, T + ext*dt] with dt = T/n.

    ``n`` cells cover [0, T]; ``ext`` extra cells provide the overshoot used
    by the forward-difference estimators (ext*dt must dominate every eps the
    caller will request).
    """

    T: float
    n: int
    ext: int = 0

    def __post_init__(self) -> None:
        if self.T <= 0.0:
            raise ValueError(f"grid horizon T must be positive, got {self.T}")
        if self.n < 1:
            raise ValueError(f"grid needs at least one step, got n={self.n}")
        if self.ext < 0:
            raise ValueError(f"ext must be nonnegative, got {self.ext}")

    @property
    def dt(self) -> float:
        return self.T / self.n

    @property
    def m(self) -> int:
        """Total number of cells, n + ext."""
        return self.n + self.ext

    def times(self) -> np.ndarray:
        """Node times t_i = i*dt, i = 0..n+ext."""
        return np.arange(self.m + 1) * self.dt

    def eps_steps(self, eps: float) -> int:
        """Validate eps as a positive integer multiple of dt within ext."""
        ratio = eps / self.dt
        m_eps = int(round(ratio))
        if m_eps < 1 or abs(ratio - m_eps) > 1e-9:
            raise ValueError(
                f"eps={eps} is not a positive integer multiple of dt={self.dt}"
            )
        if m_eps > self.ext:
            raise ValueError(
                f"eps={eps} exceeds the grid extension ext*dt={self.ext * self.dt}"
            )
        return m_eps


@dataclass(frozen=True)
class BrownianPath:
    """Brownian increments dW_j ~ N(0, dt) on a grid, one per cell."""

    grid: SimulationGrid
    dW: np.ndarray
    seed: int
    path_index: int

    def wiener_nodes(self) -> np.ndarray:
        """Standard Brownian motion at the nodes (W_0 = 0)."""
        out = np.empty(self.grid.m + 1)
        out[0] = 0.0
        np.cumsum(self.dW, out=out[1:])
        return out


@dataclass(frozen=True)
class RlfbmPath:
    """RLFBM node values B (B_0 = 0) built from a BrownianPath."""

    grid: SimulationGrid
    B: np.ndarray
    source: BrownianPath


class LagTables:
    """Per-(cfg, grid) lag arrays consumed by the hot kernels.

    psi[k]   cell-averaged Volterra weight, k = 1..m
    klag[k]  pointwise kernel K at lag k (klag[0] = 0)
    cw[k]    exact cell integral of dK/dt at lag k = klag[k] - klag[k-1]
    nu[k]    cw[k] / dt (Nelson-field weights)
    theta[k] conditional remainder variance (k*dt)^(2H); sqth = sqrt(theta)
    f2[k]    cumulative sum_{j<=k} klag[j] cw[j] (second-derivative block)
    """

    __slots__ = ("cfg", "grid", "psi", "klag", "cw", "nu", "theta", "sqth", "f2")

    def __init__(self, cfg: HurstConfig, grid: SimulationGrid) -> None:
        self.cfg = cfg
        self.grid = grid
        m = grid.m
        dt = grid.dt
        k = np.arange(m + 1, dtype=float)
        al = cfg.alpha_k
        p = cfg.H + 0.5
        self.klag = np.zeros(m + 1)
        self.klag[1:] = cfg.c_K * (k[1:] * dt) ** al
        self.psi = np.zeros(m + 1)
        self.psi[1:] = cfg.c_K / p * ((k[1:] * dt) ** p - ((k[1:] - 1.0) * dt) ** p) / dt
        self.cw = np.zeros(m + 1)
        self.cw[1:] = np.diff(self.klag)
        self.nu = self.cw / dt
        self.theta = (k * dt) ** (2.0 * cfg.H)
        self.sqth = np.sqrt(self.theta)
        f2 = np.zeros(m + 1)
        np.cumsum(self.klag[1:] * self.cw[1:], out=f2[1:])
        self.f2 = f2


@lru_cache(maxsize=64)
def _cached_tables(cfg: HurstConfig, grid: SimulationGrid) -> LagTables:
    return LagTables(cfg, grid)


def lag_tables(cfg: HurstConfig, grid: SimulationGrid) -> LagTables:
    """Memoised lag-weight tables for a (cfg, grid) pair."""
    return _cached_tables(cfg, grid)


def _generator(seed: int, path_index: int) -> np.random.Generator:
    bitgen = np.random.Philox(np.random.SeedSequence(seed))
    if path_index:
        bitgen = bitgen.jumped(path_index)
    return np.random.Generator(bitgen)


def simulate_brownian(grid: SimulationGrid, seed: int, path_index: int = 0) -> BrownianPath:
    """Draw the increments of one path; deterministic in (seed, path_index)."""
    rng = _generator(seed, path_index)
    dW = rng.standard_normal(grid.m) * np.sqrt(grid.dt)
    dW.setflags(write=False)
    return BrownianPath(grid=grid, dW=dW, seed=seed, path_index=path_index)


def simulate_brownian_batch(
    grid: SimulationGrid, seed: int, n_paths: int, start_index: int = 0
) -> np.ndarray:
    """Increment matrix (n_paths, m); row p is path ``start_index + p``.

    Row p is bit-identical to ``simulate_brownian(grid, seed, start_index+p).dW``.
    """
    out = np.empty((n_paths, grid.m))
    root = np.random.Philox(np.random.SeedSequence(seed))
    sq = np.sqrt(grid.dt)
    for p in range(n_paths):
        idx = start_index + p
        # jumped() copies; the root state itself is never consumed
        bitgen = root.jumped(idx) if idx else root.jumped(0)
        out[p] = np.random.Generator(bitgen).standard_normal(grid.m) * sq
    return out


def build_rlfbm(W: BrownianPath, cfg: HurstConfig) -> RlfbmPath:
    """Volterra construction of the RLFBM path from Brownian increments."""
    tables = lag_tables(cfg, W.grid)
    B = _kern.volterra_nodes_batch(W.dW, tables.psi)
    B.setflags(write=False)
    return RlfbmPath(grid=W.grid, B=B, source=W)


def rlfbm_nodes_batch(cfg: HurstConfig, grid: SimulationGrid, dW: np.ndarray) -> np.ndarray:
    """Batch Volterra construction: (n_paths, m) increments -> (n_paths, m+1) nodes."""
    return _kern.volterra_nodes_batch(dW, lag_tables(cfg, grid).psi)


def simulate_rlfbm(
    grid: SimulationGrid, cfg: HurstConfig, seed: int, path_index: int = 0
) -> RlfbmPath:
    """Convenience: simulate the Brownian path and build the RLFBM on it."""
    return build_rlfbm(simulate_brownian(grid, seed, path_index), cfg)


def conditional_mean_B(
    cfg: HurstConfig, W: BrownianPath, r_idx: int, t_idx: int
) -> float:
    """Conditional mean E[B_{t} | F_{t_r}] = sum_{j<r} psi_{t-j} dW_j, r <= t."""
    if r_idx > t_idx:
        raise ValueError(f"conditional_mean_B requires r_idx <= t_idx, got {r_idx} > {t_idx}")
    if r_idx == 0:
        return 0.0
    psi = lag_tables(cfg, W.grid).psi
    lags = psi[t_idx - r_idx + 1 : t_idx + 1][::-1]
    return float(np.dot(W.dW[:r_idx], lags))


def nelson_derivative(
    cfg: HurstConfig, W: BrownianPath, r_idx: int, t_idx: int
) -> float:
    """Discrete Nelson derivative D_{r,t}B = sum_{j<r} nu_{t-j} dW_j, r < t strictly.

    The field has no extension to the diagonal, hence r_idx = t_idx is
    rejected.
    """
    if r_idx >= t_idx:
        raise ValueError(
            f"nelson_derivative requires r_idx < t_idx, got r_idx={r_idx}, t_idx={t_idx}"
        )
    if r_idx == 0:
        return 0.0
    nu = lag_tables(cfg, W.grid).nu
    lags = nu[t_idx - r_idx + 1 : t_idx + 1][::-1]
    return float(np.dot(W.dW[:r_idx], lags))


def nelson_eps(
    cfg: HurstConfig, W: BrownianPath, r_idx: int, t_idx: int, eps: float
) -> float:
    """Forward difference quotient (1/eps) E[B_{t+eps} - B_t | F_{t_r}], r < t.

    eps must be a positive integer multiple of dt inside the grid extension.
    """
    if r_idx >= t_idx:
        raise ValueError(
            f"nelson_eps requires r_idx < t_idx, got r_idx={r_idx}, t_idx={t_idx}"
        )
    grid = W.grid
    m_eps = grid.eps_steps(eps)
    if t_idx + m_eps > grid.m:
        raise ValueError(
            f"t_idx + eps/dt = {t_idx + m_eps} exceeds the extended grid ({grid.m})"
        )
    if r_idx == 0:
        return 0.0
    psi = lag_tables(cfg, grid).psi
    hi = psi[t_idx + m_eps - r_idx + 1 : t_idx + m_eps + 1][::-1]
    lo = psi[t_idx - r_idx + 1 : t_idx + 1][::-1]
    return float(np.dot(W.dW[:r_idx], hi - lo)) / eps


def bold_D_field(
    cfg: HurstConfig, W: BrownianPath, x1_idx: int, x2_idx: int, r_idx: int
) -> float:
    """Iterated Nelson field: left-point Ito sum of D_{s,x1}B against dD_{s,x2}B.

    Requires r < min(x1, x2) and x1 != x2 (the field is not symmetric).
    """
    if x1_idx == x2_idx:
        raise ValueError("bold_D_field requires x1_idx != x2_idx")
    if r_idx >= min(x1_idx, x2_idx):
        raise ValueError(
            f"bold_D_field requires r_idx < min(x1_idx, x2_idx), got r_idx={r_idx}"
        )
    if r_idx == 0:
        return 0.0
    nu = lag_tables(cfg, W.grid).nu
    dW = W.dW
    acc = 0.0
    for j in range(1, r_idx):
        d_j = float(np.dot(dW[:j], nu[x1_idx - j + 1 : x1_idx + 1][::-1]))
        acc += d_j * nu[x2_idx - j] * dW[j]
    return acc


def conditional_mean_batch(
    cfg: HurstConfig, grid: SimulationGrid, dW: np.ndarray, r_idx: int, t_idx: int
) -> np.ndarray:
    """Vectorised conditional means over a batch of increment rows."""
    if r_idx == 0:
        return np.zeros(np.atleast_2d(dW).shape[0])
    psi = lag_tables(cfg, grid).psi
    lags = psi[t_idx - r_idx + 1 : t_idx + 1][::-1]
    return np.atleast_2d(dW)[:, :r_idx] @ lags


def nelson_batch(
    cfg: HurstConfig, grid: SimulationGrid, dW: np.ndarray, r_idx: int, t_idx: int
) -> np.ndarray:
    """Vectorised Nelson derivatives over a batch of increment rows."""
    if r_idx >= t_idx:
        raise ValueError("nelson_batch requires r_idx < t_idx")
    if r_idx == 0:
        return np.zeros(np.atleast_2d(dW).shape[0])
    nu = lag_tables(cfg, grid).nu
    lags = nu[t_idx - r_idx + 1 : t_idx + 1][::-1]
    return np.atleast_2d(dW)[:, :r_idx] @ lags


def bold_D_batch(
    cfg: HurstConfig,
    grid: SimulationGrid,
    dW: np.ndarray,
    x1_idx: int,
    x2_idx: int,
    r_idx: int,
) -> np.ndarray:
    """Vectorised iterated Nelson fields over a batch of increment rows."""
    if x1_idx == x2_idx or r_idx >= min(x1_idx, x2_idx):
        raise ValueError("bold_D_batch domain: r < min(x1, x2), x1 != x2")
    dW = np.atleast_2d(dW)
    if r_idx == 0:
        return np.zeros(dW.shape[0])
    nu = lag_tables(cfg, grid).nu
    # running D_{t_j, x1} per path, then the left-point Ito sum against x2
    w1 = nu[x1_idx - np.arange(r_idx)]
    inner = np.cumsum(dW[:, :r_idx] * w1, axis=1)
    d_run = np.zeros_like(inner)
    d_run[:, 1:] = inner[:, :-1]
    w2 = nu[x2_idx - np.arange(r_idx)]
    return np.sum(d_run * w2 * dW[:, :r_idx], axis=1)


def write_path_csv(path: RlfbmPath, file) -> None:
    """Export a path as CSV rows (t, W, B), one row per grid node."""
    own = isinstance(file, (str, bytes))
    fh = open(file, "w", newline="", encoding="utf-8") if own else file
    try:
        writer = csv.writer(fh)
        writer.writerow(["t", "W", "B"])
        tv = path.grid.times()
        wv = path.source.wiener_nodes()
        for i in range(path.grid.m + 1):
            writer.writerow([repr(float(tv[i])), repr(float(wv[i])), repr(float(path.B[i]))])
    finally:
        if own:
            fh.close()
