"""Resonant spectral data of the reference shape and polarization matrices.

Notation: ``v_m`` are the moments ``int_B e_m`` of the unit-L2 resonant modes
on the reference shape ``B``, ``S = sum_m v_m v_m^T`` their Gram matrix and
``H`` the average Hessian of the Newtonian potential of ``B`` at its center.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .materials import MaterialParams


class PolarizationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ShapeSpectralData:
    lambda_n0: float
    mode_moments: np.ndarray
    vol_B: float
    newtonian_hessian_avg: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.mode_moments, dtype=float).reshape(-1, 3)
        H = np.array(self.newtonian_hessian_avg, dtype=float).reshape(3, 3)
        if not 0.0 < self.lambda_n0 < 1.0:
            raise PolarizationError("resonant eigenvalue must lie in (0, 1)")
        if not self.vol_B > 0:
            raise PolarizationError("vol_B must be positive")
        S = v.T @ v
        if np.min(np.linalg.eigvalsh(S)) < -1e-12 * max(1.0, np.abs(S).max()):
            raise PolarizationError("mode Gram matrix is not positive semidefinite")
        v.setflags(write=False)
        H.setflags(write=False)
        object.__setattr__(self, "mode_moments", v)
        object.__setattr__(self, "newtonian_hessian_avg", H)

    @property
    def gram(self) -> np.ndarray:
        """``sum_m v_m (x) v_m``."""
        return self.mode_moments.T @ self.mode_moments


@dataclass(frozen=True, eq=False)
class PolarizationSet:
    P_Di: np.ndarray
    P_B: np.ndarray
    A_B: np.ndarray
    C_B: float


def ball_spectral_data() -> ShapeSpectralData:
    """Unit ball: ``lambda = 1/3``, ``v_m = sqrt(vol) e_m``, ``H = -I/3``."""
    vol = 4.0 * math.pi / 3.0
    return ShapeSpectralData(
        lambda_n0=1.0 / 3.0,
        mode_moments=math.sqrt(vol) * np.eye(3),
        vol_B=vol,
        newtonian_hessian_avg=-np.eye(3) / 3.0,
    )


def load_spectral_csv(path: str | Path) -> ShapeSpectralData:
    """Read spectral data from a ``kind,c1,c2,c3`` CSV.

    Rows: one ``lambda`` (value in ``c1``), one ``vol_B`` (value in ``c1``),
    any number of ``moment`` rows and exactly three ``hessian`` rows.
    """
    lam = vol = None
    moments, hess = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            kind = row["kind"].strip()
            if kind == "lambda":
                lam = float(row["c1"])
            elif kind == "vol_B":
                vol = float(row["c1"])
            elif kind == "moment":
                moments.append([float(row[c]) for c in ("c1", "c2", "c3")])
            elif kind == "hessian":
                hess.append([float(row[c]) for c in ("c1", "c2", "c3")])
            else:
                raise PolarizationError(f"unknown row kind {kind!r} in {path}")
    if lam is None or vol is None or not moments or len(hess) != 3:
        raise PolarizationError(f"incomplete spectral data in {path}")
    return ShapeSpectralData(lam, np.array(moments), vol, np.array(hess))


def polarization_P_Di(spectra: ShapeSpectralData, eta: complex, delta: float) -> np.ndarray:
    """Resonant polarization ``delta**3 / (1 + eta lambda) * S``."""
    denom = 1.0 + eta * spectra.lambda_n0
    if abs(denom) < 1e-14:
        raise PolarizationError("exact resonance: 1 + eta*lambda vanishes")
    return (delta**3 / denom) * spectra.gram.astype(complex)


def compute_C_B(lambda_n0: float, k_p: float, k_n0: float, zeta_n0: float) -> float:
    if not k_n0 > 0:
        raise PolarizationError("k_n0 must be positive")
    return 1.0 / (lambda_n0 * k_p**2 * k_n0 * math.sqrt(5.0) / (k_n0**4 + (zeta_n0 * k_n0) ** 2))


def polarization_P_B(spectra: ShapeSpectralData, params: MaterialParams,
                     k_n0: float, zeta_n0: float) -> tuple[np.ndarray, float]:
    """Real scaled polarization ``P_B = C_B * S`` and the constant ``C_B``."""
    C_B = compute_C_B(spectra.lambda_n0, params.k_p, k_n0, zeta_n0)
    return C_B * spectra.gram, C_B


def effective_polarization_A_B(P_B: np.ndarray, spectra: ShapeSpectralData) -> np.ndarray:
    """``A_B = (I - H P_B)^{-1} P_B``.  Works for real or complex ``P_B``."""
    P = np.asarray(P_B)
    lhs = np.eye(3) - spectra.newtonian_hessian_avg @ P
    cond = np.linalg.cond(lhs)
    if not np.isfinite(cond) or cond > 1e12:
        raise PolarizationError(f"I - H P_B is singular (condition number {cond:.3e})")
    return np.linalg.solve(lhs, P)


def recover_P_B(A_B: np.ndarray, spectra: ShapeSpectralData) -> np.ndarray:
    """Inverse map of :func:`effective_polarization_A_B`.

    ``A = (I - H P)^{-1} P`` is equivalent to ``P + H P A = A``, a linear
    equation in ``P`` solved here through its 9x9 Kronecker form.  When ``H``
    and ``A`` commute (the ball) this is ``(I + H A)^{-1} A``.
    """
    A = np.asarray(A_B)
    H = spectra.newtonian_hessian_avg
    # Row-major vec: vec(H P A) = kron(H, A.T) vec(P).
    op = np.eye(9) + np.kron(H, A.T)
    return np.linalg.solve(op, A.reshape(9)).reshape(3, 3)


def resonant_em_polarization(spectra: ShapeSpectralData, eta0: complex, slope: complex) -> np.ndarray:
    """Delta-independent complex polarization of the resonant regime.

    When ``1 + eta lambda = slope * delta**h + O(delta**(2h))`` the product
    ``eta * P_Di`` behaves like ``delta**(3-h) * eta0 * S / slope``; this
    returns the bracketed limit, which plays the role of ``P_B`` in the
    effective Maxwell model.
    """
    if slope == 0:
        raise PolarizationError("vanishing resonance slope")
    return (eta0 / slope) * spectra.gram.astype(complex)
