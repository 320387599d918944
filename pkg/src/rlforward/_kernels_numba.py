"""Numba JIT implementations of the hot kernels.

Loop-level twins of ``_kernels_numpy`` (same signatures, same index
conventions; see that module's docstring).  All kernels release the GIL so a
thread pool over path blocks scales.
"""

from __future__ import annotations

import numpy as np
from numba import njit

NAME = "numba"


@njit(cache=True, nogil=True, inline="always")
def _g(code: int, t: float, x: float) -> float:
    if code == 1:
        return x
    if code == 2:
        return x * x
    if code == 3:
        return np.cos(x)
    return np.nan


def g_eval(code: int, t, x):
    # vectorised entry point kept for signature parity with the numpy backend
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    tb, xb = np.broadcast_arrays(t, x)
    return _g_eval_arr(code, np.ascontiguousarray(tb.ravel()), np.ascontiguousarray(xb.ravel())).reshape(xb.shape)


@njit(cache=True, nogil=True)
def _g_eval_arr(code: int, t: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = _g(code, t[i], x[i])
    return out


@njit(cache=True, nogil=True)
def _volterra_nodes_batch(inc: np.ndarray, lags: np.ndarray) -> np.ndarray:
    p, m = inc.shape
    out = np.zeros((p, m + 1))
    for ip in range(p):
        for j in range(m):
            x = inc[ip, j]
            for i in range(j + 1, m + 1):
                out[ip, i] += lags[i - j] * x
    return out


def volterra_nodes_batch(increments: np.ndarray, lags: np.ndarray) -> np.ndarray:
    """Batch lag convolution: out[p, i] = sum_{j<i} lags[i-j] * increments[p, j]."""
    inc = np.ascontiguousarray(np.atleast_2d(np.asarray(increments, dtype=float)))
    out = _volterra_nodes_batch(inc, np.ascontiguousarray(lags, dtype=np.float64))
    if np.asarray(increments).ndim == 1:
        return out[0]
    return out


@njit(cache=True, nogil=True)
def _kcal_state(dw, n, z, w, gcode, dt, tgrid, sqth, psi, nu, cw, klag, f2):
    q = z.shape[0]
    E = np.zeros(n + 1)
    D = np.zeros(n + 1)
    out = np.zeros(n)
    for r in range(n):
        acc = 0.0
        for i in range(r, n + 1):
            lag = i - r
            ti = tgrid[i]
            x = E[i]
            sv = sqth[lag]
            s0 = 0.0
            s1 = 0.0
            s2 = 0.0
            for k in range(q):
                gv = _g(gcode, ti, x + sv * z[k])
                s0 += w[k] * gv
                s1 += w[k] * z[k] * gv
                s2 += w[k] * (z[k] * z[k] - 1.0) * gv
            if i < n:
                acc += s0 * cw[lag + 1]
            if lag >= 1:
                h1 = s1 / sv
                h2 = s2 / (sv * sv)
                acc += dt * h1 * klag[lag] * D[i]
                acc += dt * h2 * klag[lag] * f2[lag - 1]
        out[r] = acc
        dwr = dw[r]
        for i in range(r + 1, n + 1):
            E[i] += psi[i - r] * dwr
            D[i] += nu[i - r] * dwr
    return out


def kcal_state(dw, n, z, w, gcode, dt, tgrid, sqth, psi, nu, cw, klag, f2):
    """Representation integrand for a state-dependent model, all r < n."""
    return _kcal_state(
        np.ascontiguousarray(dw, dtype=np.float64),
        int(n),
        np.ascontiguousarray(z, dtype=np.float64),
        np.ascontiguousarray(w, dtype=np.float64),
        int(gcode),
        float(dt),
        np.ascontiguousarray(tgrid, dtype=np.float64),
        np.ascontiguousarray(sqth, dtype=np.float64),
        np.ascontiguousarray(psi, dtype=np.float64),
        np.ascontiguousarray(nu, dtype=np.float64),
        np.ascontiguousarray(cw, dtype=np.float64),
        np.ascontiguousarray(klag, dtype=np.float64),
        np.ascontiguousarray(f2, dtype=np.float64),
    )


@njit(cache=True, nogil=True)
def _kcal_frac(dw, u, zv, sinw, n, dt, fa, nu, cw, pc, has_phi2):
    C = np.zeros(n + 1)
    D = np.zeros(n + 1)
    out = np.zeros(n)
    for r in range(n):
        acc = 0.0
        for i in range(r, n):
            acc += C[i] * cw[i - r + 1]
        sb = 0.0
        for i in range(r + 1, n + 1):
            sb += fa[i - r] * D[i]
        acc += zv[r] * dt * sb
        if has_phi2 != 0:
            acc += -sinw[r] * dt * pc[n - r]
        out[r] = acc
        dwr = dw[r]
        ur = u[r]
        for i in range(r + 1, n + 1):
            C[i] += fa[i - r] * ur
            D[i] += nu[i - r] * dwr
    return out


def kcal_frac(dw, u, zv, sinw, n, dt, fa, nu, cw, pc, has_phi2):
    """Representation integrand for a fractional martingale model, all r < n."""
    return _kcal_frac(
        np.ascontiguousarray(dw, dtype=np.float64),
        np.ascontiguousarray(u, dtype=np.float64),
        np.ascontiguousarray(zv, dtype=np.float64),
        np.ascontiguousarray(sinw, dtype=np.float64),
        int(n),
        float(dt),
        np.ascontiguousarray(fa, dtype=np.float64),
        np.ascontiguousarray(nu, dtype=np.float64),
        np.ascontiguousarray(cw, dtype=np.float64),
        np.ascontiguousarray(pc, dtype=np.float64),
        int(has_phi2),
    )


@njit(cache=True, nogil=True)
def _nelson_matrix(dw, nu, n):
    D = np.zeros((n, n + 1))
    for r in range(1, n):
        dwr = dw[r - 1]
        for i in range(r, n + 1):
            D[r, i] = D[r - 1, i] + nu[i - r + 1] * dwr
    return D


def nelson_matrix(dw, nu, n):
    """Discrete Nelson field D[r, i] = sum_{j<r} nu[i-j] dw_j, 0 <= r < i <= n."""
    return _nelson_matrix(
        np.ascontiguousarray(dw, dtype=np.float64),
        np.ascontiguousarray(nu, dtype=np.float64),
        int(n),
    )


@njit(cache=True, nogil=True)
def _iso_path_terms(dw, phi1, nu, r2d, dt, n):
    D = _nelson_matrix(dw, nu, n)
    lhs = 0.0
    t1 = 0.0
    for r in range(n):
        v = 0.0
        for i in range(r + 1, n + 1):
            v += phi1[i, r] * D[r, i]
        v *= dt
        lhs += dt * v * v
        s1 = 0.0
        for i1 in range(r + 1, n + 1):
            for i2 in range(r + 1, n + 1):
                s1 += phi1[i1, r] * phi1[i2, r] * r2d[r, i1, i2]
        t1 += dt * dt * dt * s1
    t23 = 0.0
    for i1 in range(1, n + 1):
        for i2 in range(1, n + 1):
            mn = min(i1, i2)
            full = 0.0
            for rr in range(mn):
                full += dt * phi1[i1, rr] * phi1[i2, rr]
            run = 0.0
            acc = 0.0
            for j in range(mn - 1):
                run += dt * phi1[i1, j] * phi1[i2, j]
                br = full - run
                acc += (D[j, i1] * nu[i2 - j] + D[j, i2] * nu[i1 - j]) * dw[j] * br
            t23 += acc
    t23 *= dt * dt
    return lhs, t1, t23


def iso_path_terms(dw, phi1, nu, r2d, dt, n):
    """Per-path pieces of the isometry expansion (lhs, quadratic, iterated)."""
    return _iso_path_terms(
        np.ascontiguousarray(dw, dtype=np.float64),
        np.ascontiguousarray(phi1, dtype=np.float64),
        np.ascontiguousarray(nu, dtype=np.float64),
        np.ascontiguousarray(r2d, dtype=np.float64),
        float(dt),
        int(n),
    )
