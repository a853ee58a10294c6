"""Source amplitudes and time marching of the particle heat-strength system.

The unknowns are the heat strengths ``sigma_i(t)`` solving

    sigma_i(t) + sum_{j != i} b_j int_0^t Phi(z_i - z_j, t - tau) sigma_j'(tau) dtau = F_i(t)

with ``sigma_i(0) = 0``.  Densities are piecewise linear on a uniform grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .cluster import ParticleCluster, pairwise_kernel_sums
from .kernels import heat_kernel_dt_r, heat_kernel_r
from .materials import MaterialParams, Modulation, derived_contrasts, heat_coefficients, modulation_f
from .maxwell_foldy import DipoleSet, InvertibilityError, SolverError
from .timequad import DEFAULT_ORDER, dedupe, lag_weights, march_lower_triangular


@dataclass(frozen=True)
class TimeGrid:
    T: float
    N_t: int

    def __post_init__(self) -> None:
        if not self.T > 0:
            raise ValueError("T must be positive")
        if int(self.N_t) != self.N_t or self.N_t < 2:
            raise ValueError("N_t must be an integer >= 2")

    @property
    def dt(self) -> float:
        return self.T / self.N_t

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.N_t + 1) * self.dt


@dataclass(frozen=True, eq=False)
class SigmaTrajectories:
    sigma: np.ndarray  # (M, N_t + 1)
    F: np.ndarray      # (M, N_t + 1)
    tgrid: TimeGrid


def heat_source_amplitudes(Q: DipoleSet | np.ndarray, P_B: np.ndarray, params: MaterialParams,
                           modulation: Modulation, tgrid: TimeGrid, *, k: float,
                           vol_B: float = 4.0 * np.pi / 3.0, zeta: float | None = None) -> np.ndarray:
    """``F_i(t_n) = a_bar delta**(beta-h) f(t_n) Re(conj(Q_i) . P_B Q_i)``."""
    q = Q.Q if isinstance(Q, DipoleSet) else np.asarray(Q, dtype=complex)
    c = derived_contrasts(k, params, vol_B, zeta)
    quad = np.real(np.einsum("ia,ab,ib->i", np.conj(q), np.asarray(P_B), q))
    scale = c.a_bar * params.delta ** (params.beta - params.h)
    return scale * quad[:, None] * modulation_f(tgrid.nodes, modulation)[None, :]


def check_heat_invertibility(cluster: ParticleCluster, b: float | np.ndarray) -> tuple[bool, float]:
    """``margin = 1 - max_j b_j * max_i sum_{j != i} |z_i - z_j|**-2``."""
    bmax = float(np.max(np.abs(b)))
    margin = 1.0 - bmax * pairwise_kernel_sums(cluster, 2.0)
    return margin > 0, margin


def pair_lag_weights(centers: np.ndarray, kappa_m: float, tgrid: TimeGrid,
                     order: int = DEFAULT_ORDER, form: str = "sigma_prime") -> np.ndarray:
    """Per-lag weights ``w[l, i, j]`` of the off-diagonal kernel (zero diagonal).

    ``form='sigma_prime'`` integrates ``Phi`` against ``sigma'``;
    ``form='kernel_dt'`` integrates ``d_t Phi`` against ``sigma`` (returned
    as ``alpha`` and ``beta`` stacked on a leading axis).
    """
    M = len(centers)
    r = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=-1)
    off = ~np.eye(M, dtype=bool)
    uniq, inv = dedupe(r[off])
    if form == "sigma_prime":
        lw = lag_weights(lambda s: heat_kernel_r(uniq[None, :], s, kappa_m), tgrid.dt, tgrid.N_t,
                         order, need_values=False)
        out = np.zeros((tgrid.N_t, M, M))
        out[:, off] = lw.w[:, inv]
        return out
    if form == "kernel_dt":
        lw = lag_weights(lambda s: heat_kernel_dt_r(uniq[None, :], s, kappa_m), tgrid.dt, tgrid.N_t, order)
        out = np.zeros((2, tgrid.N_t, M, M))
        out[0][:, off] = lw.alpha[:, inv]
        out[1][:, off] = lw.beta[:, inv]
        return out
    raise ValueError(f"unknown form {form!r}")


def march_volterra(cluster: ParticleCluster, params: MaterialParams, F: np.ndarray, tgrid: TimeGrid,
                   b: float | np.ndarray | None = None, *, force: bool = False,
                   form: str = "sigma_prime", order: int = DEFAULT_ORDER) -> SigmaTrajectories:
    """March the heat-strength system on ``tgrid``.

    ``b`` defaults to the per-particle coefficient derived from ``params``
    (ball reference shape).  The invertibility gate is enforced unless
    ``force`` is set.
    """
    F = np.asarray(F, dtype=float)
    M = cluster.M
    if F.shape != (M, tgrid.N_t + 1):
        raise ValueError(f"F must have shape {(M, tgrid.N_t + 1)}, got {F.shape}")
    if b is None:
        b = heat_coefficients(params, cluster.vol_B)[2]
    bvec = np.broadcast_to(np.asarray(b, dtype=float), (M,))
    ok, margin = check_heat_invertibility(cluster, bvec)
    if not ok and not force:
        raise InvertibilityError(f"heat invertibility condition violated (margin {margin:.6g})", margin)
    if M == 1 or not np.any(bvec):
        return SigmaTrajectories(F.copy(), F, tgrid)
    try:
        if form == "sigma_prime":
            A = pair_lag_weights(cluster.centers, params.kappa_m, tgrid, order) * bvec[None, None, :]
            sigma = march_lower_triangular(A, F)
        else:
            sigma = _march_kernel_dt(cluster, params, F, tgrid, bvec, order)
    except np.linalg.LinAlgError as exc:
        raise SolverError(str(exc)) from exc
    return SigmaTrajectories(sigma, F, tgrid)


def _march_kernel_dt(cluster, params, F, tgrid, bvec, order):
    """Integration-by-parts variant: ``sigma_i + sum b_j int d_t Phi sigma_j = F_i``."""
    ab = pair_lag_weights(cluster.centers, params.kappa_m, tgrid, order, form="kernel_dt")
    alpha = ab[0] * bvec[None, None, :]
    beta = ab[1] * bvec[None, None, :]
    M, n_nodes = F.shape
    lu = sla.lu_factor(np.eye(M) + alpha[0])
    sig = np.zeros((M, n_nodes))
    for n in range(1, n_nodes):
        rhs = F[:, n] - beta[0] @ sig[:, n - 1]
        for lag in range(1, n):
            rhs -= alpha[lag] @ sig[:, n - lag] + beta[lag] @ sig[:, n - lag - 1]
        sig[:, n] = sla.lu_solve(lu, rhs)
    return sig


def h1_norm_sq(g: np.ndarray, dt: float) -> np.ndarray:
    """Discrete ``H^1(0, T)`` norm squared along the last axis (trapezoid + forward differences)."""
    g = np.asarray(g, dtype=float)
    l2 = dt * (np.sum(g**2, axis=-1) - 0.5 * (g[..., 0] ** 2 + g[..., -1] ** 2))
    d1 = np.sum(np.diff(g, axis=-1) ** 2, axis=-1) / dt
    return l2 + d1


@dataclass(frozen=True)
class H1BoundReport:
    lhs: float
    rhs: float
    margin: float
    passed: bool


def sigma_h1_bound_check(traj: SigmaTrajectories, F: np.ndarray, margin: float) -> H1BoundReport:
    """Check ``||sigma||_{H1} <= ||F||_{H1} / margin`` (summed over particles)."""
    dt = traj.tgrid.dt
    lhs = float(np.sqrt(np.sum(h1_norm_sq(traj.sigma, dt))))
    rhs = float(np.sqrt(np.sum(h1_norm_sq(F, dt))) / margin) if margin > 0 else np.inf
    return H1BoundReport(lhs, rhs, margin, lhs <= rhs * (1.0 + 1e-6))


def volterra_remainder_order(cluster: ParticleCluster, params: MaterialParams) -> float:
    """Magnitude of the neglected ``O(delta**(4+beta-h) sum d^-3)`` remainder."""
    p = params
    return p.delta ** (4.0 + p.beta - p.h) * pairwise_kernel_sums(cluster, 3.0)
