"""Foldy-Lax point-dipole system for the cluster and its solvability check."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator, gmres

from .cluster import ParticleCluster
from .kernels import dyadic_green_batch

DENSE_LIMIT = 3000  # largest system size solved by dense LU


class SolverError(RuntimeError):
    def __init__(self, message: str, residual: float = math.nan):
        super().__init__(message)
        self.residual = residual


class InvertibilityError(RuntimeError):
    def __init__(self, message: str, margin: float):
        super().__init__(message)
        self.margin = margin


@dataclass(frozen=True, eq=False)
class IncidentWave:
    """Plane wave ``E0 exp(i k sqrt(Re eps_m) theta.x)``."""

    k: float
    theta: np.ndarray
    E0: np.ndarray
    eps_m: complex = 1.0

    def __post_init__(self) -> None:
        th = np.asarray(self.theta, dtype=float)
        e0 = np.asarray(self.E0, dtype=complex)
        if not self.k > 0:
            raise ValueError("wavenumber must be positive")
        if abs(np.linalg.norm(th) - 1.0) > 1e-12:
            raise ValueError("propagation direction must be a unit vector")
        if abs(np.linalg.norm(e0) - 1.0) > 1e-12:
            raise ValueError("polarization must be a unit vector")
        if abs(np.dot(th, e0)) > 1e-12:
            raise ValueError("polarization not transverse")
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "E0", e0)
        object.__setattr__(self, "eps_m", complex(self.eps_m))

    @property
    def k_background(self) -> float:
        return self.k * math.sqrt(self.eps_m.real)


def incident_field(wave: IncidentWave, x, amplitude: complex = 1.0) -> np.ndarray:
    """Incident field at points ``x`` of shape ``(3,)`` or ``(N, 3)``."""
    x = np.asarray(x, dtype=float)
    phase = np.exp(1j * wave.k_background * (x @ wave.theta))
    return amplitude * phase[..., None] * wave.E0


@dataclass(frozen=True, eq=False)
class FoldySystem:
    matrix: np.ndarray
    rhs: np.ndarray
    M: int


@dataclass(frozen=True, eq=False)
class DipoleSet:
    Q: np.ndarray  # (M, 3) complex
    residual: float = 0.0


def _block_matrix(centers: np.ndarray, k: float, couplings: np.ndarray) -> np.ndarray:
    """``I - sum_{j != i} Upsilon(z_i, z_j) C_j`` as a dense ``3M x 3M`` matrix.

    ``couplings`` has shape ``(M, 3, 3)`` (already including the contrast).
    """
    M = len(centers)
    diff = centers[:, None, :] - centers[None, :, :]
    if M > 1:
        r = np.linalg.norm(diff, axis=-1)
        off = ~np.eye(M, dtype=bool)
        if np.any(r[off] == 0.0):
            raise ValueError("coincident centers")
    mat = np.zeros((M, 3, M, 3), dtype=complex)
    rows = np.arange(M)
    for i0 in range(0, M, 256):
        i1 = min(M, i0 + 256)
        U = dyadic_green_batch(k, diff[i0:i1])  # (b, M, 3, 3)
        U[rows[i0:i1] - i0, rows[i0:i1]] = 0.0
        mat[i0:i1] = -np.einsum("ijab,jbc->iajc", U, couplings)
    mat = mat.reshape(3 * M, 3 * M)
    mat[np.diag_indices(3 * M)] += 1.0
    return mat


def assemble_foldy(cluster: ParticleCluster, P_D, eta: complex, wave: IncidentWave) -> FoldySystem:
    """Assemble ``Q_i - eta sum_{j != i} Upsilon(z_i, z_j) P_Dj Q_j = E^in(z_i)``.

    ``P_D`` is a single 3x3 matrix shared by all particles or an ``(M, 3, 3)`` stack.
    """
    M = cluster.M
    P = np.asarray(P_D, dtype=complex)
    P = np.broadcast_to(P, (M, 3, 3)) if P.ndim == 2 else P
    mat = _block_matrix(cluster.centers, wave.k_background, eta * P)
    rhs = incident_field(wave, cluster.centers).reshape(-1)
    return FoldySystem(mat, rhs, M)


def check_foldy_invertibility(cluster: ParticleCluster, P_D, eta: complex) -> tuple[bool, float]:
    """``margin = 1 - |eta| max_i ||P_Di||_2 / spacing**3``."""
    P = np.asarray(P_D, dtype=complex)
    P = P[None] if P.ndim == 2 else P
    if cluster.M < 2 or eta == 0:
        return True, 1.0
    norm = max(float(np.linalg.norm(Pi, 2)) for Pi in P)
    margin = 1.0 - abs(eta) * norm / cluster.spacing**3
    return margin > 0, margin


def relative_residual(matrix: np.ndarray, x: np.ndarray, rhs: np.ndarray) -> float:
    nb = np.linalg.norm(rhs)
    return float(np.linalg.norm(matrix @ x - rhs) / (nb if nb > 0 else 1.0))


def solve_dense_or_iterative(matrix: np.ndarray, rhs: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, float]:
    """Dense LU up to :data:`DENSE_LIMIT` unknowns, restarted GMRES beyond."""
    n = matrix.shape[0]
    if n <= DENSE_LIMIT:
        try:
            x = sla.solve(matrix, rhs, check_finite=True)
        except (sla.LinAlgError, ValueError) as exc:
            raise SolverError(f"dense solve failed: {exc}") from exc
    else:
        op = LinearOperator(matrix.shape, matvec=lambda v: matrix @ v, dtype=matrix.dtype)
        x, info = gmres(op, rhs, rtol=tol * 1e-2, atol=0.0, restart=200, maxiter=50)
        if info != 0:
            raise SolverError("GMRES did not converge", relative_residual(matrix, x, rhs))
    res = relative_residual(matrix, x, rhs)
    if not np.isfinite(res) or res > tol:
        raise SolverError(f"residual {res:.3e} exceeds tolerance {tol:.1e}", res)
    return x, res


def solve_foldy(system: FoldySystem, tol: float = 1e-10) -> DipoleSet:
    x, res = solve_dense_or_iterative(system.matrix, system.rhs, tol)
    return DipoleSet(x.reshape(system.M, 3), res)


def solve_cluster(cluster: ParticleCluster, P_D, eta: complex, wave: IncidentWave,
                  force: bool = False) -> DipoleSet:
    """Assemble and solve with the invertibility gate enforced unless ``force``."""
    ok, margin = check_foldy_invertibility(cluster, P_D, eta)
    if not ok and not force:
        raise InvertibilityError(f"Foldy-Lax invertibility condition violated (margin {margin:.6g})", margin)
    return solve_foldy(assemble_foldy(cluster, P_D, eta, wave))


def physical_moments(Q: DipoleSet, P_D) -> np.ndarray:
    """Dipole moments ``P_Di Q_i`` of the particles."""
    P = np.asarray(P_D, dtype=complex)
    if P.ndim == 2:
        return Q.Q @ P.T
    return np.einsum("iab,ib->ia", P, Q.Q)


def foldy_remainder_order(M: int, delta: float, h: float) -> float:
    """Magnitude of the neglected ``O(M delta**(4-h))`` remainder."""
    return M * delta ** (4.0 - h)
