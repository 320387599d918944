"""Pure-NumPy implementations of the hot kernels.

Same signatures as ``_kernels_numba``; vectorised over nodes where possible.
Index conventions (shared by both backends):

  dw        Brownian increments, length m = n + ext
  psi[k]    cell-averaged Volterra weight at lag k >= 1 (psi[0] unused)
  nu[k]     cell-averaged dK/dt weight at lag k (nu = cw / dt)
  cw[k]     exact cell integral of dK/dt at lag k; cw[k] = klag[k] - klag[k-1]
  klag[k]   pointwise kernel K at lag k (klag[0] = 0)
  sqth[k]   sqrt of conditional remainder variance (k*dt)^H
  f2[k]     cumulative sum_{j<=k} klag[j] * cw[j]
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def g_eval(code: int, t, x):
    """Registry state functions g(t, x) selected by integer code."""
    if code == 1:
        return np.asarray(x, dtype=float) + 0.0 * np.asarray(t)
    if code == 2:
        x = np.asarray(x, dtype=float)
        return x * x
    if code == 3:
        return np.cos(np.asarray(x, dtype=float))
    raise ValueError(f"unknown g code {code}")


def volterra_nodes_batch(increments: np.ndarray, lags: np.ndarray) -> np.ndarray:
    """Batch lag convolution: out[p, i] = sum_{j<i} lags[i-j] * increments[p, j]."""
    inc = np.atleast_2d(np.asarray(increments, dtype=float))
    m = inc.shape[1]
    idx = np.arange(m + 1)[:, None] - np.arange(m)[None, :]
    mat = np.where(idx > 0, lags[np.clip(idx, 0, m)], 0.0)
    out = inc @ mat.T
    if np.asarray(increments).ndim == 1:
        return out[0]
    return out


def kcal_state(
    dw: np.ndarray,
    n: int,
    z: np.ndarray,
    w: np.ndarray,
    gcode: int,
    dt: float,
    tgrid: np.ndarray,
    sqth: np.ndarray,
    psi: np.ndarray,
    nu: np.ndarray,
    cw: np.ndarray,
    klag: np.ndarray,
    f2: np.ndarray,
) -> np.ndarray:
    """Representation integrand for a state-dependent model, all r < n.

    Term (a) freezes the conditional mean at the left node of each t-cell and
    integrates the singular weight exactly; (b) pairs the first martingale
    derivative with the discrete Nelson field; (c) sums the second-derivative
    block through the cumulative kernel moments f2.
    """
    dw = np.asarray(dw, dtype=float)
    E = np.zeros(n + 1)
    D = np.zeros(n + 1)
    out = np.zeros(n)
    wz = w * z
    wz2 = w * (z * z - 1.0)
    for r in range(n):
        i = np.arange(r, n + 1)
        lag = i - r
        sv = sqth[lag]
        x = E[r : n + 1]
        gm = g_eval(gcode, tgrid[i][:, None], x[:, None] + sv[:, None] * z[None, :])
        s0 = gm @ w
        acc = float(np.dot(s0[: n - r], cw[1 : n - r + 1]))
        if n - r >= 1:
            h1 = (gm[1:] @ wz) / sv[1:]
            h2 = (gm[1:] @ wz2) / (sv[1:] * sv[1:])
            kl = klag[1 : n - r + 1]
            acc += dt * float(np.dot(h1 * kl, D[r + 1 : n + 1]))
            acc += dt * float(np.dot(h2 * kl, f2[0 : n - r]))
        out[r] = acc
        if r + 1 <= n:
            E[r + 1 : n + 1] += psi[1 : n - r + 1] * dw[r]
            D[r + 1 : n + 1] += nu[1 : n - r + 1] * dw[r]
    return out


def kcal_frac(
    dw: np.ndarray,
    u: np.ndarray,
    zv: np.ndarray,
    sinw: np.ndarray,
    n: int,
    dt: float,
    fa: np.ndarray,
    nu: np.ndarray,
    cw: np.ndarray,
    pc: np.ndarray,
    has_phi2: int,
) -> np.ndarray:
    """Representation integrand for a fractional martingale model, all r < n.

    ``u`` holds the products Z_j dW_j driving the conditional-mean prefix
    sums; ``pc`` carries the precomputed second-derivative block for the
    cos-of-W choice (zero block otherwise).
    """
    dw = np.asarray(dw, dtype=float)
    C = np.zeros(n + 1)
    D = np.zeros(n + 1)
    out = np.zeros(n)
    for r in range(n):
        acc = float(np.dot(C[r:n], cw[1 : n - r + 1]))
        acc += zv[r] * dt * float(np.dot(fa[1 : n - r + 1], D[r + 1 : n + 1]))
        if has_phi2:
            acc += -sinw[r] * dt * pc[n - r]
        out[r] = acc
        if r + 1 <= n:
            C[r + 1 : n + 1] += fa[1 : n - r + 1] * u[r]
            D[r + 1 : n + 1] += nu[1 : n - r + 1] * dw[r]
    return out


def nelson_matrix(dw: np.ndarray, nu: np.ndarray, n: int) -> np.ndarray:
    """Discrete Nelson field D[r, i] = sum_{j<r} nu[i-j] dw_j, 0 <= r < i <= n."""
    dw = np.asarray(dw, dtype=float)
    D = np.zeros((n, n + 1))
    for r in range(1, n):
        i = np.arange(r, n + 1)
        D[r, r:] = D[r - 1, r:] + nu[i - r + 1] * dw[r - 1]
    return D


def iso_path_terms(
    dw: np.ndarray,
    phi1: np.ndarray,
    nu: np.ndarray,
    r2d: np.ndarray,
    dt: float,
    n: int,
) -> tuple[float, float, float]:
    """Per-path pieces of the isometry expansion.

    Returns (lhs, quadratic term, iterated-field terms):
      lhs  = sum_r dt (sum_{i>r} dt phi1[i,r] D[r,i])^2
      t1   = sum_r dt sum_{i1,i2>r} dt^2 phi1 phi1 r2d[r,i1,i2]
      t23  = the two iterated (bold-D) field terms, reorganised as sums over
             the inner Ito index.
    """
    dw = np.asarray(dw, dtype=float)
    D = nelson_matrix(dw, nu, n)
    lhs = 0.0
    t1 = 0.0
    for r in range(n):
        v = dt * float(np.dot(phi1[r + 1 :, r], D[r, r + 1 :]))
        lhs += dt * v * v
        pp = np.outer(phi1[r + 1 :, r], phi1[r + 1 :, r])
        t1 += dt * dt * dt * float(np.sum(pp * r2d[r, r + 1 :, r + 1 :]))
    # cumulative phi products: phc[j, i1, i2] = sum_{rho<=j} dt phi1[i1,rho] phi1[i2,rho]
    phc = np.zeros((n, n + 1, n + 1))
    run = np.zeros((n + 1, n + 1))
    for j in range(n):
        run = run + dt * np.outer(phi1[:, j], phi1[:, j])
        phc[j] = run
    mn = np.minimum(np.arange(n + 1)[:, None], np.arange(n + 1)[None, :])
    full = np.zeros((n + 1, n + 1))
    valid = mn >= 1
    full[valid] = phc[mn[valid] - 1, np.nonzero(valid)[0], np.nonzero(valid)[1]]
    t23 = 0.0
    for j in range(n - 1):
        sl = slice(j + 2, n + 1)
        br = full[sl, sl] - phc[j][sl, sl]
        a = D[j, sl]
        b = nu[np.arange(j + 2, n + 1) - j]
        t23 += dw[j] * (a @ br @ b + b @ br @ a)
    t23 *= dt * dt
    return lhs, t1, t23
