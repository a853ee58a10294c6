"""Continuum model on the cell grid: effective Maxwell and effective heat equations.

The domain is split into the same cubic cells as the particle lattice.  The
Maxwell equation is collocated at the cell centroids with a self-cell
correction; the heat equation is marched in time with exact cube integrals of
the heat kernel (self cell included).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cluster import DomainOmega, cell_lattice
from .heat_field import cell_potential
from .heat_volterra import TimeGrid
from .kernels import heat_kernel_cube_average
from .materials import MaterialParams, Modulation, derived_contrasts, modulation_f
from .maxwell_foldy import IncidentWave, SolverError, _block_matrix, incident_field, solve_dense_or_iterative
from .timequad import DEFAULT_ORDER, convolve_values, dedupe, lag_weights, march_lower_triangular

#: Self-cell average of the Hessian of the Newtonian potential for a cube.
H_CELL = -np.eye(3) / 3.0


@dataclass(frozen=True, eq=False)
class EffectiveGrid:
    omega: DomainOmega
    cell_size: float
    cell_centers: np.ndarray

    @property
    def cell_volume(self) -> float:
        return self.cell_size**3

    @property
    def n_cells(self) -> int:
        return len(self.cell_centers)


@dataclass(frozen=True, eq=False)
class EffectiveEMField:
    """Cell fields of the effective Maxwell model.

    ``E_hat`` is the collocation unknown (the field exciting each cell,
    comparable with the Foldy-Lax unknown); ``E_f`` is the field inside
    the effective medium, ``E_f = (I + H_cell A_B)^{-1} E_hat``.
    """

    grid: EffectiveGrid
    E_hat: np.ndarray  # (N, 3)
    E_f: np.ndarray    # (N, 3)
    A_B: np.ndarray
    eps_m: complex
    residual: float

    def eps_ef(self, x) -> np.ndarray:
        return effective_permittivity(self.A_B, self.grid.omega, x, self.eps_m)


@dataclass(frozen=True, eq=False)
class EffectiveHeatField:
    """``Y`` solves the cell Volterra equation; ``W_interior`` is ``-b_bar int int Phi Y`` at the centers."""

    grid: EffectiveGrid
    Y: np.ndarray           # (N, N_t + 1)
    W_interior: np.ndarray  # (N, N_t + 1)
    F_eff: np.ndarray       # (N, N_t + 1)
    b_bar: float
    tgrid: TimeGrid


def build_grid(omega: DomainOmega, d: float) -> EffectiveGrid:
    """Cubic cells of side ``d`` inside ``omega``; same ordering as the particle lattice."""
    return EffectiveGrid(omega, float(d), cell_lattice(omega, d))


def cell_polarization(A_B: np.ndarray, d: float) -> np.ndarray:
    """``d**3 (I + A_B H_cell)^{-1} A_B``."""
    A = np.asarray(A_B, dtype=complex)
    return d**3 * np.linalg.solve(np.eye(3) + A @ H_CELL, A)


def assemble_effective_maxwell(grid: EffectiveGrid, A_B: np.ndarray, wave: IncidentWave,
                               P_cell: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Matrix and right-hand side of ``E_i - sum_{j != i} Upsilon(z_i, z_j) P_cell E_j = E^in(z_i)``.

    ``P_cell`` (a 3x3 matrix or an ``(N, 3, 3)`` stack) overrides the
    polarization derived from ``A_B``.
    """
    N = grid.n_cells
    P = cell_polarization(A_B, grid.cell_size) if P_cell is None else np.asarray(P_cell, dtype=complex)
    P = np.broadcast_to(P, (N, 3, 3)) if P.ndim == 2 else P
    mat = _block_matrix(grid.cell_centers, wave.k_background, P)
    rhs = incident_field(wave, grid.cell_centers).reshape(-1)
    return mat, rhs


def solve_effective_maxwell(grid: EffectiveGrid, A_B: np.ndarray, wave: IncidentWave,
                            tol: float = 1e-8) -> EffectiveEMField:
    if not wave.k > 0:
        raise ValueError("wavenumber must be positive")
    A = np.asarray(A_B, dtype=complex)
    mat, rhs = assemble_effective_maxwell(grid, A, wave)
    x, res = solve_dense_or_iterative(mat, rhs, tol)
    E_hat = x.reshape(grid.n_cells, 3)
    recover = np.eye(3) + H_CELL @ A
    E_f = np.linalg.solve(recover, E_hat.T).T
    return EffectiveEMField(grid, E_hat, E_f, A, complex(wave.eps_m), res)


def effective_permittivity(A_B: np.ndarray, omega: DomainOmega, x, eps_m: complex = 1.0) -> np.ndarray:
    """``eps_m I + A_B`` at points of the closed domain, ``eps_m I`` elsewhere.

    Vectorised: ``x`` of shape ``(3,)`` gives a 3x3 matrix, ``(N, 3)`` an
    ``(N, 3, 3)`` stack.
    """
    inside = np.asarray(omega.contains(x))
    base = complex(eps_m) * np.eye(3)
    out = base + inside[..., None, None] * np.asarray(A_B, dtype=complex)
    return out


def effective_heat_source(emf: EffectiveEMField, A_B: np.ndarray, P_B: np.ndarray, params: MaterialParams,
                          modulation: Modulation, tgrid: TimeGrid, *, k: float, weight: np.ndarray | None = None,
                          vol_B: float = 4.0 * np.pi / 3.0, zeta: float | None = None) -> np.ndarray:
    """``F = a_bar f(t) Re(conj(E_hat) . W E_hat)`` with ``E_hat = P_B^{-1} A_B E_f``.

    ``weight`` defaults to ``P_B``, which gives ``a_bar f A_B P_B^{-1} A_B E_f . conj(E_f)``
    for commuting matrices.
    """
    P = np.asarray(P_B, dtype=complex)
    cond = np.linalg.cond(P)
    if not np.isfinite(cond) or cond > 1e12:
        raise ValueError(f"P_B is singular (condition number {cond:.3e})")
    E_hat = np.linalg.solve(P, np.asarray(A_B, dtype=complex) @ emf.E_f.T).T
    W = P if weight is None else np.asarray(weight)
    quad = np.real(np.einsum("ia,ab,ib->i", np.conj(E_hat), W, E_hat))
    a_bar = derived_contrasts(k, params, vol_B, zeta).a_bar
    return a_bar * quad[:, None] * modulation_f(tgrid.nodes, modulation)[None, :]


def _cell_weights(grid: EffectiveGrid, kappa_m: float, tgrid: TimeGrid, order: int):
    """Lag weights of ``int_{cell_j} Phi(z_i - y, s) dy`` for every cell pair.

    The cube integral is even in each coordinate and symmetric under axis
    permutations, so the pairs are deduplicated on sorted absolute offsets.
    """
    off = grid.cell_centers[:, None, :] - grid.cell_centers[None, :, :]
    keys = np.sort(np.abs(off), axis=-1).reshape(-1, 3)
    uniq, inv = dedupe(keys)
    half = 0.5 * grid.cell_size
    lw = lag_weights(lambda s: heat_kernel_cube_average(uniq[None, :, :], half, s, kappa_m),
                     tgrid.dt, tgrid.N_t, order)
    return lw, inv


def march_effective_heat(grid: EffectiveGrid, b_bar: float, F_eff: np.ndarray, params: MaterialParams,
                         tgrid: TimeGrid, order: int = DEFAULT_ORDER) -> EffectiveHeatField:
    """March ``Y + b_bar int_0^t int_Omega Phi d_tau Y = F`` on the cells."""
    if b_bar < 0:
        raise ValueError("b_bar must be non-negative")
    F = np.asarray(F_eff, dtype=float)
    N = grid.n_cells
    if F.shape != (N, tgrid.N_t + 1):
        raise ValueError(f"F_eff must have shape {(N, tgrid.N_t + 1)}, got {F.shape}")
    if b_bar == 0.0:
        return EffectiveHeatField(grid, F.copy(), np.zeros_like(F), F, 0.0, tgrid)
    lw, inv = _cell_weights(grid, params.kappa_m, tgrid, order)
    shape = (tgrid.N_t, N, N)
    A = b_bar * lw.w[:, inv].reshape(shape)
    try:
        Y = march_lower_triangular(A, F)
    except np.linalg.LinAlgError as exc:
        raise SolverError(str(exc)) from exc
    W = -b_bar * convolve_values(lw.alpha[:, inv].reshape(shape), lw.beta[:, inv].reshape(shape), Y)
    return EffectiveHeatField(grid, Y, W, F, float(b_bar), tgrid)


def effective_potential_at(field: EffectiveHeatField, params: MaterialParams, points,
                           order: int = DEFAULT_ORDER) -> np.ndarray:
    """``-b_bar int_0^t int_Omega Phi Y`` at arbitrary points (exact cube integrals), shape ``(P, N_t + 1)``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if field.b_bar == 0.0:
        return np.zeros((len(pts), field.tgrid.N_t + 1))
    return -field.b_bar * cell_potential(pts, field.grid.cell_centers, 0.5 * field.grid.cell_size,
                                         field.Y, params.kappa_m, field.tgrid, order)


@dataclass(frozen=True)
class ResidualReport:
    max_residual: float
    scale: float
    ratio: float
    passed: bool


def parabolic_residual_check(W, F: np.ndarray, points, tgrid: TimeGrid, b_bar: float, kappa_m: float,
                             step: float, chi=None, threshold: float = 0.1) -> ResidualReport:
    """Finite-difference residual of ``(kappa + kappa b_bar chi) d_t W - Lap W = -kappa b_bar chi F``.

    ``W`` maps an ``(P, 3)`` array of points to values at every time node,
    shape ``(P, N_t + 1)``.  ``F`` holds the source at the probe points,
    ``chi`` marks probes inside the domain (all by default).  Time
    derivatives are central differences at the interior nodes; the
    Laplacian uses the seven-point stencil with spacing ``step``.  The
    report gives ``max |residual| / max |kappa b_bar F|``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    P = len(pts)
    chi = np.ones(P) if chi is None else np.asarray(chi, dtype=float)
    shifts = [np.zeros(3)]
    for ax in range(3):
        for sgn in (1.0, -1.0):
            e = np.zeros(3)
            e[ax] = sgn * step
            shifts.append(e)
    allpts = np.concatenate([pts + s for s in shifts])
    vals = np.asarray(W(allpts), dtype=float).reshape(len(shifts), P, -1)
    centre = vals[0]
    lap = (np.sum(vals[1:], axis=0) - 6.0 * centre) / step**2
    dt = tgrid.dt
    dWdt = (centre[:, 2:] - centre[:, :-2]) / (2.0 * dt)
    src = kappa_m * b_bar * chi[:, None] * np.asarray(F, dtype=float)
    res = (kappa_m * (1.0 + b_bar * chi[:, None])) * dWdt - lap[:, 1:-1] + src[:, 1:-1]
    max_res = float(np.max(np.abs(res))) if res.size else 0.0
    scale = float(np.max(np.abs(src))) if src.size else 0.0
    if scale == 0.0:
        ratio = 0.0 if max_res == 0.0 else np.inf
    else:
        ratio = max_res / scale
    return ResidualReport(max_res, scale, ratio, ratio < threshold)
