"""Integrand models: the capability set consumed by the representation.

Every model evaluates, on the nodes of a given path,

    value(t)          Y_t
    cond(r, t)        E[Y_t | F_r],  r <= t  (cond(t,t) = value(t))
    phi1(t, r)        first martingale derivative, r < t
    phi2(t, v, r)     second martingale derivative, r < v < t
    mean(t)           E[Y_t]
    mean_phi1(t, u)   E[phi1(t, u)], u < t

Three families are provided: deterministic functions of time (both
derivatives vanish), state-dependent Y_t = g(t, B_t) whose derivatives come
from the heat semigroup in score-function form, and fractional martingales
Y_t = int_0^t (t-s)^a Z_s dW_s with Z = 1 or Z = cos(W).

Models are immutable after construction; per-path evaluation state belongs to
the caller, so concurrent evaluation on distinct paths is safe.
"""

from __future__ import annotations

import abc
import math

import numpy as np

from . import gauss
from .gauss import QuadratureRule, default_rule
from .kernels import HurstConfig, kernel_K, theta_var
from .paths import RlfbmPath, SimulationGrid, lag_tables

#: integer codes used by the fast backends to inline the state function
G_CODES = {"linear": 1, "quadratic": 2, "cosine": 3}

_G_FUNCS = {
    "linear": lambda t, x: np.asarray(x, dtype=float),
    "quadratic": lambda t, x: np.asarray(x, dtype=float) ** 2,
    "cosine": lambda t, x: np.cos(np.asarray(x, dtype=float)),
}


class IntegrandModel(abc.ABC):
    """Abstract capability set; see the module docstring for the contract."""

    kind: str = "abstract"

    def __init__(self, cfg: HurstConfig, grid: SimulationGrid) -> None:
        self.cfg = cfg
        self.grid = grid
        self._drift_cache: float | None = None

    # -- scalar capabilities -------------------------------------------------
    @abc.abstractmethod
    def value(self, path: RlfbmPath, t_idx: int) -> float: ...

    @abc.abstractmethod
    def cond(self, path: RlfbmPath, r_idx: int, t_idx: int) -> float: ...

    @abc.abstractmethod
    def phi1(self, path: RlfbmPath, t_idx: int, r_idx: int) -> float: ...

    @abc.abstractmethod
    def phi2(self, path: RlfbmPath, t_idx: int, v_idx: int, r_idx: int) -> float: ...

    @abc.abstractmethod
    def mean(self, t_idx: int) -> float: ...

    @abc.abstractmethod
    def mean_phi1(self, t_idx: int, u_idx: int) -> float: ...

    def mean_phi1_power(self) -> float | None:
        """Diagonal exponent p with mean_phi1(t, u) = rho(t, u) (t-u)^p, rho smooth.

        Exposing p lets the drift quadrature integrate the full algebraic
        singularity (t-u)^(p + H - 3/2) exactly instead of freezing the
        Hoelder factor at grid nodes.  ``None`` disables the factorisation.
        """
        return None

    # -- batch hooks (defaults fall back to scalar loops) ---------------------
    def value_nodes(self, path: RlfbmPath) -> np.ndarray:
        """Y at nodes 0..n (vectorised where the family allows it)."""
        return np.array([self.value(path, i) for i in range(self.grid.n + 1)])

    def phi1_matrix(self, path: RlfbmPath) -> np.ndarray:
        """phi1[i, r] for 0 <= r < i <= n, zeros elsewhere."""
        n = self.grid.n
        out = np.zeros((n + 1, n))
        for i in range(1, n + 1):
            for r in range(min(i, n)):
                out[i, r] = self.phi1(path, i, r)
        return out

    # -- batch-over-paths hooks (rows of dW, one per path) ---------------------
    def value_batch(self, dW: np.ndarray, B: np.ndarray, t_idx: int) -> np.ndarray:
        """Y_{t} per path for an increment matrix and matching node matrix."""
        raise NotImplementedError

    def phi1_batch(self, dW: np.ndarray, t_idx: int) -> np.ndarray:
        """phi1(t, r) for all r < t, per path: shape (n_paths, t_idx)."""
        raise NotImplementedError

    def phi1_ito_batch(self, dW: np.ndarray, t_idx: int) -> np.ndarray:
        """Coefficients of the discrete representation sum value = mean + sum c_r dW_r.

        Defaults to ``phi1_batch``.  State-dependent models override this to
        carry the cell-averaged kernel factor instead of the pointwise one,
        matching the Volterra weights the paths themselves are built from;
        with pointwise sampling the near-diagonal kernel cells overweight the
        sum by O(dt^(H-1/2)) relative.
        """
        return self.phi1_batch(dW, t_idx)

    def phi2_batch(self, dW: np.ndarray, t_idx: int, s_idx: int) -> np.ndarray:
        """phi2(t, s; r) for all r < s, per path: shape (n_paths, s_idx)."""
        raise NotImplementedError

    def phi2_vrow(self, dW: np.ndarray, t_idx: int, r_idx: int) -> np.ndarray:
        """phi2(t, v; r) for all r < v < t, per path: shape (n_paths, t-r-1)."""
        raise NotImplementedError

    def _check_pair(self, r_idx: int, t_idx: int, strict: bool) -> None:
        if strict and r_idx >= t_idx:
            raise ValueError(f"need r < t on the grid, got r={r_idx}, t={t_idx}")
        if not strict and r_idx > t_idx:
            raise ValueError(f"need r <= t on the grid, got r={r_idx}, t={t_idx}")


class DeterministicIntegrand(IntegrandModel):
    """Y_t = g(t): both martingale derivatives vanish identically."""

    kind = "deterministic"

    def __init__(self, cfg, grid, g, name: str = "deterministic") -> None:
        super().__init__(cfg, grid)
        self.g = g
        self.name = name

    def value(self, path, t_idx):
        return float(self.g(t_idx * self.grid.dt))

    def cond(self, path, r_idx, t_idx):
        self._check_pair(r_idx, t_idx, strict=False)
        return float(self.g(t_idx * self.grid.dt))

    def phi1(self, path, t_idx, r_idx):
        self._check_pair(r_idx, t_idx, strict=True)
        return 0.0

    def phi2(self, path, t_idx, v_idx, r_idx):
        if not r_idx < v_idx < t_idx:
            raise ValueError("phi2 requires r < v < t")
        return 0.0

    def mean(self, t_idx):
        return float(self.g(t_idx * self.grid.dt))

    def mean_phi1(self, t_idx, u_idx):
        self._check_pair(u_idx, t_idx, strict=True)
        return 0.0

    def value_nodes(self, path):
        tv = np.arange(self.grid.n + 1) * self.grid.dt
        return np.asarray([float(self.g(t)) for t in tv])

    def phi1_matrix(self, path):
        return np.zeros((self.grid.n + 1, self.grid.n))

    def value_batch(self, dW, B, t_idx):
        return np.full(np.atleast_2d(dW).shape[0], float(self.g(t_idx * self.grid.dt)))

    def phi1_batch(self, dW, t_idx):
        return np.zeros((np.atleast_2d(dW).shape[0], t_idx))

    def phi2_batch(self, dW, t_idx, s_idx):
        return np.zeros((np.atleast_2d(dW).shape[0], s_idx))

    def phi2_vrow(self, dW, t_idx, r_idx):
        return np.zeros((np.atleast_2d(dW).shape[0], max(t_idx - r_idx - 1, 0)))


class StateDependentIntegrand(IntegrandModel):
    """Y_t = g(t, B_t) for Borel g with polynomial growth.

    Conditional quantities are heat-semigroup evaluations at the conditional
    mean E^r[B_t] with variance theta(r,t) = (t-r)^(2H):

        cond(r,t)    = (P_theta g)(t, E^r[B_t])
        phi1(t,r)    = d_x (P_theta g)(t, E^r[B_t]) K(t,r)
        phi2(t,v;r)  = d_xx(P_theta g)(t, E^r[B_t]) K(t,r) K(t,v)
        mean(t)      = (P_{t^(2H)} g)(t, 0)          [B_t ~ N(0, t^(2H))]
        mean_phi1    = Gaussian-regression identity  * K(t,u)

    phi1/phi2 one cell away from the diagonal are evaluated with the tiny
    variance theta = dt^(2H); downstream weights keep the products integrable.
    """

    kind = "state"

    def __init__(self, cfg, grid, g, rule: QuadratureRule | None = None,
                 name: str = "state", g_code: int | None = None) -> None:
        super().__init__(cfg, grid)
        self.g = g
        self.rule = rule if rule is not None else default_rule()
        self.name = name
        self.g_code = g_code

    def _emean(self, path, r_idx, t_idx) -> float:
        if r_idx == 0:
            return 0.0
        psi = lag_tables(self.cfg, self.grid).psi
        lags = psi[t_idx - r_idx + 1 : t_idx + 1][::-1]
        return float(np.dot(path.source.dW[:r_idx], lags))

    def value(self, path, t_idx):
        return float(self.g(t_idx * self.grid.dt, path.B[t_idx]))

    def cond(self, path, r_idx, t_idx):
        self._check_pair(r_idx, t_idx, strict=False)
        if r_idx == t_idx:
            return self.value(path, t_idx)
        dt = self.grid.dt
        th = theta_var(self.cfg, r_idx * dt, t_idx * dt)
        return gauss.heat_apply(self.g, t_idx * dt, self._emean(path, r_idx, t_idx), th, self.rule)

    def phi1(self, path, t_idx, r_idx):
        self._check_pair(r_idx, t_idx, strict=True)
        dt = self.grid.dt
        th = theta_var(self.cfg, r_idx * dt, t_idx * dt)
        d1 = gauss.heat_dx(self.g, t_idx * dt, self._emean(path, r_idx, t_idx), th, self.rule)
        return d1 * kernel_K(self.cfg, t_idx * dt, r_idx * dt)

    def phi2(self, path, t_idx, v_idx, r_idx):
        if not r_idx < v_idx < t_idx:
            raise ValueError("phi2 requires r < v < t")
        dt = self.grid.dt
        th = theta_var(self.cfg, r_idx * dt, t_idx * dt)
        d2 = gauss.heat_d2x(self.g, t_idx * dt, self._emean(path, r_idx, t_idx), th, self.rule)
        return (
            d2
            * kernel_K(self.cfg, t_idx * dt, r_idx * dt)
            * kernel_K(self.cfg, t_idx * dt, v_idx * dt)
        )

    def mean(self, t_idx):
        dt = self.grid.dt
        if t_idx == 0:
            return float(self.g(0.0, np.float64(0.0)))
        return gauss.heat_apply(self.g, t_idx * dt, 0.0, theta_var(self.cfg, 0.0, t_idx * dt), self.rule)

    def mean_phi1(self, t_idx, u_idx):
        self._check_pair(u_idx, t_idx, strict=True)
        dt = self.grid.dt
        t = t_idx * dt
        if u_idx == 0:
            # E^0[B_t] = 0 deterministically: direct score-function form
            d1 = gauss.heat_dx(self.g, t, 0.0, theta_var(self.cfg, 0.0, t), self.rule)
        else:
            d1 = gauss.regression_mean_phi1(self.g, t, u_idx * dt, self.cfg, self.rule)
        return d1 * kernel_K(self.cfg, t, u_idx * dt)

    def mean_phi1_power(self):
        return self.cfg.alpha_k

    def value_nodes(self, path):
        n = self.grid.n
        tv = np.arange(n + 1) * self.grid.dt
        return np.asarray(self.g(tv, path.B[: n + 1]), dtype=float)

    def phi1_matrix(self, path):
        n = self.grid.n
        dt = self.grid.dt
        tab = lag_tables(self.cfg, self.grid)
        dW = path.source.dW
        out = np.zeros((n + 1, n))
        z = self.rule.nodes
        wz = self.rule.weights * z
        tv = np.arange(n + 1) * dt
        emean = np.zeros(n + 1)
        for r in range(n):
            if r > 0:
                emean[r:] += tab.psi[1 : n - r + 2] * dW[r - 1]
            i = np.arange(r + 1, n + 1)
            sv = tab.sqth[i - r]
            gm = np.asarray(
                self.g(tv[i][:, None], emean[i][:, None] + sv[:, None] * z[None, :]),
                dtype=float,
            )
            out[r + 1 :, r] = (gm @ wz) / sv * tab.klag[i - r]
        return out

    def _emean_batch(self, dW: np.ndarray, t_idx: int, r_hi: int) -> np.ndarray:
        """E^r[B_t] per path for r = 0..r_hi-1: shape (n_paths, r_hi)."""
        dW = np.atleast_2d(dW)
        tab = lag_tables(self.cfg, self.grid)
        lags = tab.psi[t_idx - np.arange(r_hi)]
        out = np.zeros((dW.shape[0], r_hi))
        if r_hi > 1:
            np.cumsum(dW[:, : r_hi - 1] * lags[: r_hi - 1], axis=1, out=out[:, 1:])
        return out

    def _heat_cols(self, dW: np.ndarray, t_idx: int, r_hi: int, kind: int) -> np.ndarray:
        # kind 1 -> d_x, kind 2 -> d_xx of the semigroup at (E^r[B_t], theta(r,t))
        tab = lag_tables(self.cfg, self.grid)
        em = self._emean_batch(dW, t_idx, r_hi)
        sv = tab.sqth[t_idx - np.arange(r_hi)]
        t = t_idx * self.grid.dt
        z, w = self.rule.nodes, self.rule.weights
        wgt = w * z if kind == 1 else w * (z * z - 1.0)
        acc = np.zeros_like(em)
        for k in range(z.size):
            acc += wgt[k] * np.asarray(self.g(t, em + sv[None, :] * z[k]), dtype=float)
        return acc / sv[None, :] if kind == 1 else acc / (sv * sv)[None, :]

    def value_batch(self, dW, B, t_idx):
        return np.asarray(
            self.g(t_idx * self.grid.dt, np.atleast_2d(B)[:, t_idx]), dtype=float
        )

    def phi1_batch(self, dW, t_idx):
        tab = lag_tables(self.cfg, self.grid)
        cols = self._heat_cols(dW, t_idx, t_idx, kind=1)
        return cols * tab.klag[t_idx - np.arange(t_idx)][None, :]

    def phi1_ito_batch(self, dW, t_idx):
        tab = lag_tables(self.cfg, self.grid)
        cols = self._heat_cols(dW, t_idx, t_idx, kind=1)
        return cols * tab.psi[t_idx - np.arange(t_idx)][None, :]

    def phi2_batch(self, dW, t_idx, s_idx):
        tab = lag_tables(self.cfg, self.grid)
        cols = self._heat_cols(dW, t_idx, s_idx, kind=2)
        kl = tab.klag[t_idx - np.arange(s_idx)] * tab.klag[t_idx - s_idx]
        return cols * kl[None, :]

    def phi2_vrow(self, dW, t_idx, r_idx):
        tab = lag_tables(self.cfg, self.grid)
        col = self._heat_cols(dW, t_idx, r_idx + 1, kind=2)[:, r_idx]
        kl = tab.klag[t_idx - r_idx] * tab.klag[t_idx - np.arange(r_idx + 1, t_idx)]
        return col[:, None] * kl[None, :]


class FractionalMartingaleIntegrand(IntegrandModel):
    """Y_t = int_0^t (t-s)^a Z_s dW_s with a > 1/2 - H (left-point Ito sums).

    Z = 1 (phi2 = 0) or Z = cos(W): then phi1_Z(v, r) = -sin(W_r) e^{-(v-r)/2}
    and mean_phi1(t, u) = (t-u)^a e^{-u/2} since E[cos W_u] = e^{-u/2}.
    """

    kind = "fractional"

    def __init__(self, cfg, grid, alpha: float, z_kind: str = "constant_one") -> None:
        super().__init__(cfg, grid)
        if not alpha > 0.5 - cfg.H:
            raise ValueError(
                f"fractional martingale requires alpha > 1/2 - H = {0.5 - cfg.H}, got {alpha}"
            )
        z_norm = z_kind.strip().lower()
        if z_norm in ("constant_one", "one", "1"):
            self.z_kind = "constant_one"
        elif z_norm in ("cos_of_w", "cosw", "cos"):
            self.z_kind = "cos_of_w"
        else:
            raise ValueError(f"unknown z_kind {z_kind!r}")
        self.alpha = alpha
        m = grid.m
        fa = np.zeros(m + 1)
        fa[1:] = (np.arange(1, m + 1) * grid.dt) ** alpha
        self.fa = fa
        self.name = f"fracmart(alpha={alpha}, z={self.z_kind})"

    # -- helpers --------------------------------------------------------------
    def z_nodes(self, path: RlfbmPath) -> np.ndarray:
        if self.z_kind == "constant_one":
            return np.ones(self.grid.m + 1)
        return np.cos(path.source.wiener_nodes())

    def _zsum(self, path, j_hi: int, t_idx: int) -> float:
        # sum_{j < j_hi} (t - t_j)^a Z_j dW_j
        if j_hi == 0:
            return 0.0
        zv = self.z_nodes(path)[:j_hi]
        lags = self.fa[t_idx - j_hi + 1 : t_idx + 1][::-1]
        return float(np.dot(zv * path.source.dW[:j_hi], lags))

    def value(self, path, t_idx):
        return self._zsum(path, t_idx, t_idx)

    def cond(self, path, r_idx, t_idx):
        self._check_pair(r_idx, t_idx, strict=False)
        # future increments have zero conditional mean for both Z choices
        return self._zsum(path, r_idx, t_idx)

    def phi1(self, path, t_idx, r_idx):
        self._check_pair(r_idx, t_idx, strict=True)
        z_r = 1.0 if self.z_kind == "constant_one" else math.cos(path.source.wiener_nodes()[r_idx])
        return self.fa[t_idx - r_idx] * z_r

    def phi2(self, path, t_idx, v_idx, r_idx):
        if not r_idx < v_idx < t_idx:
            raise ValueError("phi2 requires r < v < t")
        if self.z_kind == "constant_one":
            return 0.0
        dt = self.grid.dt
        w_r = path.source.wiener_nodes()[r_idx]
        return self.fa[t_idx - v_idx] * (-math.sin(w_r)) * math.exp(-0.5 * (v_idx - r_idx) * dt)

    def mean(self, t_idx):
        return 0.0

    def mean_phi1(self, t_idx, u_idx):
        self._check_pair(u_idx, t_idx, strict=True)
        ez = 1.0 if self.z_kind == "constant_one" else math.exp(-0.5 * u_idx * self.grid.dt)
        return self.fa[t_idx - u_idx] * ez

    def mean_phi1_power(self):
        return self.alpha

    def value_nodes(self, path):
        from ._backend import kernels as _kern

        n = self.grid.n
        zv = self.z_nodes(path)
        u = zv[: self.grid.m] * path.source.dW
        nodes = _kern.volterra_nodes_batch(u, self.fa)
        return nodes[: n + 1]

    def phi1_matrix(self, path):
        n = self.grid.n
        zv = self.z_nodes(path)[:n]
        i = np.arange(n + 1)[:, None]
        r = np.arange(n)[None, :]
        out = np.where(i > r, self.fa[np.clip(i - r, 0, self.grid.m)], 0.0) * zv[None, :]
        return out

    def _w_nodes_batch(self, dW: np.ndarray, hi: int) -> np.ndarray:
        dW = np.atleast_2d(dW)
        out = np.zeros((dW.shape[0], hi))
        if hi > 1:
            np.cumsum(dW[:, : hi - 1], axis=1, out=out[:, 1:])
        return out

    def value_batch(self, dW, B, t_idx):
        dW = np.atleast_2d(dW)
        if t_idx == 0:
            return np.zeros(dW.shape[0])
        if self.z_kind == "constant_one":
            zv = np.ones((dW.shape[0], t_idx))
        else:
            zv = np.cos(self._w_nodes_batch(dW, t_idx))
        lags = self.fa[t_idx - np.arange(t_idx)]
        return (zv * dW[:, :t_idx]) @ lags

    def phi1_batch(self, dW, t_idx):
        dW = np.atleast_2d(dW)
        lags = self.fa[t_idx - np.arange(t_idx)]
        if self.z_kind == "constant_one":
            return np.tile(lags, (dW.shape[0], 1))
        return np.cos(self._w_nodes_batch(dW, t_idx)) * lags[None, :]

    def phi2_batch(self, dW, t_idx, s_idx):
        dW = np.atleast_2d(dW)
        if self.z_kind == "constant_one":
            return np.zeros((dW.shape[0], s_idx))
        dt = self.grid.dt
        w = self._w_nodes_batch(dW, s_idx)
        decay = np.exp(-0.5 * (s_idx - np.arange(s_idx)) * dt)
        return self.fa[t_idx - s_idx] * (-np.sin(w)) * decay[None, :]

    def phi2_vrow(self, dW, t_idx, r_idx):
        dW = np.atleast_2d(dW)
        nv = max(t_idx - r_idx - 1, 0)
        if self.z_kind == "constant_one" or nv == 0:
            return np.zeros((dW.shape[0], nv))
        dt = self.grid.dt
        w_r = self._w_nodes_batch(dW, r_idx + 1)[:, r_idx]
        v = np.arange(r_idx + 1, t_idx)
        decay = np.exp(-0.5 * (v - r_idx) * dt)
        return (-np.sin(w_r))[:, None] * (self.fa[t_idx - v] * decay)[None, :]


def make_deterministic(cfg, grid, g, name: str = "deterministic") -> DeterministicIntegrand:
    """Deterministic integrand from a scalar function of time."""
    return DeterministicIntegrand(cfg, grid, g, name=name)


def make_state_dependent(
    cfg, grid, g, rule: QuadratureRule | None = None, name: str | None = None
) -> StateDependentIntegrand:
    """State-dependent integrand from g(t, x) (callable or registry name)."""
    if isinstance(g, str):
        if g not in _G_FUNCS:
            raise ValueError(f"unknown state function {g!r}; choose from {sorted(_G_FUNCS)}")
        return StateDependentIntegrand(
            cfg, grid, _G_FUNCS[g], rule=rule, name=name or g, g_code=G_CODES[g]
        )
    return StateDependentIntegrand(cfg, grid, g, rule=rule, name=name or "state", g_code=None)


def make_fractional_martingale(
    cfg, grid, alpha: float, z_kind: str = "constant_one"
) -> FractionalMartingaleIntegrand:
    """Fractional martingale integrand; requires alpha > 1/2 - H."""
    return FractionalMartingaleIntegrand(cfg, grid, alpha, z_kind)


def model_from_name(cfg, grid, name: str, params: dict | None = None) -> IntegrandModel:
    """CLI-facing registry: model selection by name + parameter map."""
    params = dict(params or {})
    name = name.strip().lower()
    if name == "deterministic":
        gname = str(params.pop("g", "one"))
        if gname == "one":
            g = lambda t: 1.0  # noqa: E731
        elif gname == "ramp":
            g = lambda t: t  # noqa: E731
        else:
            raise ValueError(f"deterministic g must be 'one' or 'ramp', got {gname!r}")
        _reject_extra(name, params)
        return make_deterministic(cfg, grid, g, name=f"deterministic({gname})")
    if name in _G_FUNCS:
        order = int(params.pop("order", gauss.DEFAULT_ORDER))
        _reject_extra(name, params)
        return make_state_dependent(cfg, grid, name, rule=default_rule(order))
    if name == "fracmart":
        alpha = float(params.pop("alpha", 0.25))
        z_kind = str(params.pop("z", "one"))
        _reject_extra(name, params)
        return make_fractional_martingale(cfg, grid, alpha, z_kind)
    raise ValueError(
        f"unknown model {name!r}; choose from deterministic, linear, quadratic, "
        "cosine, fracmart"
    )


def _reject_extra(name: str, params: dict) -> None:
    if params:
        raise ValueError(f"unused parameters for model {name!r}: {sorted(params)}")
