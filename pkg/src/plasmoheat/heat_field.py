"""Exterior heat fields from the particle strengths and from the effective density."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cluster import DomainOmega, ParticleCluster
from .heat_volterra import SigmaTrajectories, TimeGrid
from .kernels import heat_kernel_cube_average, heat_kernel_r
from .materials import MaterialParams, heat_coefficients
from .timequad import DEFAULT_ORDER, convolve_values, dedupe, lag_weights


class ProbeError(ValueError):
    def __init__(self, message: str, offending: np.ndarray):
        super().__init__(message)
        self.offending = offending


@dataclass(frozen=True, eq=False)
class FieldSamples:
    points: np.ndarray   # (X, 3)
    times: np.ndarray    # (T,)
    values: np.ndarray   # (X, T)


def _select_times(tgrid: TimeGrid, time_indices) -> np.ndarray:
    if time_indices is None:
        return np.arange(tgrid.N_t + 1)
    idx = np.asarray(time_indices, dtype=int)
    if np.any(idx < 0) or np.any(idx > tgrid.N_t):
        raise ValueError("time indices outside the grid")
    return idx


def point_source_potential(points: np.ndarray, sources: np.ndarray, density: np.ndarray,
                           kappa_m: float, tgrid: TimeGrid, order: int = DEFAULT_ORDER) -> np.ndarray:
    """``sum_j int_0^t Phi(x - z_j, t - tau) g_j(tau) dtau`` for piecewise-linear ``g``."""
    r = np.linalg.norm(points[:, None, :] - sources[None, :, :], axis=-1)
    uniq, inv = dedupe(r.reshape(-1))
    lw = lag_weights(lambda s: heat_kernel_r(uniq[None, :], s, kappa_m), tgrid.dt, tgrid.N_t, order)
    shape = (tgrid.N_t,) + r.shape
    return convolve_values(lw.alpha[:, inv].reshape(shape), lw.beta[:, inv].reshape(shape), density)


def cell_potential(points: np.ndarray, cell_centers: np.ndarray, half_width: float, density: np.ndarray,
                   kappa_m: float, tgrid: TimeGrid, order: int = DEFAULT_ORDER) -> np.ndarray:
    """``sum_j int_0^t int_{cell_j} Phi(x - y, t - tau) g_j(tau) dy dtau``.

    Each cell carries a constant-in-space, piecewise-linear-in-time density;
    the space integral over a cube is exact (product of ``erf``).
    """
    off = points[:, None, :] - cell_centers[None, :, :]
    uniq, inv = dedupe(off.reshape(-1, 3))
    lw = lag_weights(lambda s: heat_kernel_cube_average(uniq[None, :, :], half_width, s, kappa_m),
                     tgrid.dt, tgrid.N_t, order)
    shape = (tgrid.N_t,) + off.shape[:2]
    return convolve_values(lw.alpha[:, inv].reshape(shape), lw.beta[:, inv].reshape(shape), density)


def reconstruct_usc(traj: SigmaTrajectories, cluster: ParticleCluster, params: MaterialParams,
                    points, tgrid: TimeGrid | None = None, *, b=None, rho_min: float | None = None,
                    time_indices=None, order: int = DEFAULT_ORDER) -> FieldSamples:
    """``u^sc(x, t) = -sum_i b_i int_0^t Phi(x - z_i, t - tau) sigma_i(tau) dtau``."""
    tgrid = tgrid or traj.tgrid
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    rho = 5.0 * cluster.delta if rho_min is None else rho_min
    dist = np.min(np.linalg.norm(pts[:, None, :] - cluster.centers[None, :, :], axis=-1), axis=1)
    bad = pts[dist < rho]
    if len(bad):
        raise ProbeError(f"{len(bad)} probe point(s) within {rho:g} of a particle: {bad.tolist()}", bad)
    if b is None:
        b = heat_coefficients(params, cluster.vol_B)[2]
    bvec = np.broadcast_to(np.asarray(b, dtype=float), (cluster.M,))
    idx = _select_times(tgrid, time_indices)
    vals = -point_source_potential(pts, cluster.centers, bvec[:, None] * traj.sigma,
                                   params.kappa_m, tgrid, order)
    return FieldSamples(pts, tgrid.nodes[idx], vals[:, idx])


def reconstruct_wsc(Y: np.ndarray, grid, b_bar: float, params: MaterialParams, points,
                    tgrid: TimeGrid, *, time_indices=None, space_rule: str = "midpoint",
                    order: int = DEFAULT_ORDER) -> FieldSamples:
    """``W^sc(x, t) = -b_bar int_0^t int_Omega Phi(x - y, t - tau) Y(y, tau) dy dtau`` outside Omega.

    ``grid`` is an :class:`~plasmoheat.effective_media.EffectiveGrid`; ``Y``
    holds one trajectory per cell.  ``space_rule='midpoint'`` lumps each cell
    at its centroid; ``'exact'`` integrates the kernel over the cube.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    omega: DomainOmega = grid.omega
    inside = np.atleast_1d(omega.contains(pts))
    if np.any(inside):
        raise ProbeError("probe point(s) inside the domain", pts[inside])
    idx = _select_times(tgrid, time_indices)
    if b_bar == 0.0:
        return FieldSamples(pts, tgrid.nodes[idx], np.zeros((len(pts), len(idx))))
    Y = np.asarray(Y, dtype=float)
    if space_rule == "midpoint":
        vals = point_source_potential(pts, grid.cell_centers, grid.cell_volume * Y, params.kappa_m, tgrid, order)
    elif space_rule == "exact":
        vals = cell_potential(pts, grid.cell_centers, 0.5 * grid.cell_size, Y, params.kappa_m, tgrid, order)
    else:
        raise ValueError(f"unknown space rule {space_rule!r}")
    vals = -b_bar * vals
    return FieldSamples(pts, tgrid.nodes[idx], vals[:, idx])
