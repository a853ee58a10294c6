"""Product quadrature for causal convolutions with piecewise-linear densities.

For a kernel ``K(s)`` and a density ``g`` that is linear between the nodes
``t_n = n dt``, every convolution reduces to per-lag weights:

* ``w[l]     = (1/dt) int_{l dt}^{(l+1) dt} K(s) ds``  (pairs with the slope of ``g``)
* ``alpha[l] = int K(s) ((l+1) dt - s) / dt ds``       (pairs with ``g(t_{n-l})``)
* ``beta[l]  = int K(s) (s - l dt) / dt ds``            (pairs with ``g(t_{n-l-1})``)

so that ``int_0^{t_n} K(t_n - tau) g'(tau) dtau = sum_l w[l] (g_{n-l} - g_{n-l-1})``
and ``int_0^{t_n} K(t_n - tau) g(tau) dtau = sum_l alpha[l] g_{n-l} + beta[l] g_{n-l-1}``.
Each lag interval is integrated with Gauss-Legendre.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla

DEFAULT_ORDER = 16


@dataclass(frozen=True)
class LagWeights:
    w: np.ndarray      # (L, P)
    alpha: np.ndarray  # (L, P)
    beta: np.ndarray   # (L, P)


def lag_weights(kernel: Callable[[np.ndarray], np.ndarray], dt: float, n_lags: int,
                order: int = DEFAULT_ORDER, need_values: bool = True) -> LagWeights:
    """Weights for lags ``0..n_lags-1``.

    ``kernel`` maps an array of lags of shape ``(q, 1)`` to kernel values of
    shape ``(q, P)``.
    """
    x, wq = np.polynomial.legendre.leggauss(order)
    u = 0.5 * (x + 1.0)          # position inside the lag interval, in [0, 1]
    wq = 0.5 * wq
    w_out, a_out, b_out = [], [], []
    for lag in range(n_lags):
        s = (lag + u) * dt
        vals = kernel(s[:, None])  # (q, P)
        w_out.append(wq @ vals)
        if need_values:
            a_out.append(dt * ((wq * (1.0 - u)) @ vals))
            b_out.append(dt * ((wq * u) @ vals))
    w = np.array(w_out)
    if need_values:
        return LagWeights(w, np.array(a_out), np.array(b_out))
    return LagWeights(w, np.empty((0,) + w.shape[1:]), np.empty((0,) + w.shape[1:]))


def convolve_values(alpha: np.ndarray, beta: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Evaluate ``sum_l alpha[l] g_{n-l} + beta[l] g_{n-l-1}`` for every node ``n``.

    ``alpha`` and ``beta`` have shape ``(L, X, S)`` (lag, target, source) and
    ``g`` shape ``(S, N+1)``.  Returns ``(X, N+1)``; node 0 is always 0.
    """
    L = alpha.shape[0]
    n_nodes = g.shape[1]
    out = np.zeros((alpha.shape[1], n_nodes))
    for lag in range(min(L, n_nodes - 1)):
        # nodes n = lag+1 .. N use g_{n-lag} and g_{n-lag-1}
        out[:, lag + 1:] += alpha[lag] @ g[:, 1:n_nodes - lag] + beta[lag] @ g[:, 0:n_nodes - lag - 1]
    return out


def dedupe(keys: np.ndarray, decimals: int = 12) -> tuple[np.ndarray, np.ndarray]:
    """Unique rows of ``keys`` (rounded) and the inverse index."""
    k = np.round(np.asarray(keys, dtype=float), decimals)
    if k.ndim == 1:
        uniq, inv = np.unique(k, return_inverse=True)
    else:
        uniq, inv = np.unique(k, axis=0, return_inverse=True)
    return uniq, inv.reshape(-1)


def march_lower_triangular(A: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Solve ``g_n + sum_{l=0}^{n-1} A[l] (g_{n-l} - g_{n-l-1}) = F_n`` with ``g_0 = 0``.

    ``A`` has shape ``(L, N, N)`` with ``L >= n_nodes - 1``.  The step matrix
    ``I + A[0]`` is factorised once.
    """
    n_unknowns, n_nodes = F.shape
    step = np.eye(n_unknowns) + A[0]
    cond = np.linalg.cond(step)
    if not np.isfinite(cond) or cond > 1e13:
        raise np.linalg.LinAlgError(f"singular step matrix (condition number {cond:.3e})")
    lu = sla.lu_factor(step)
    g = np.zeros((n_unknowns, n_nodes))
    dg = np.zeros((n_nodes, n_unknowns))  # dg[m] = g_m - g_{m-1}
    for n in range(1, n_nodes):
        rhs = F[:, n] + A[0] @ g[:, n - 1]
        if n > 1:
            # lags 1..n-1 pair with increments dg[n-1], ..., dg[1]
            rhs -= np.einsum("lij,lj->i", A[1:n], dg[n - 1:0:-1])
        g[:, n] = sla.lu_solve(lu, rhs)
        dg[n] = g[:, n] - g[:, n - 1]
    return g
