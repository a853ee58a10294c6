"""Closed-form kernels: heat fundamental solution, Helmholtz Green's function
and the electromagnetic dyadic Green's function.

Every function here is pure.  Point-wise entry points take 3-vectors; the
``*_r`` and ``*_batch`` variants take distances or difference vectors as
arrays and are what the assembly code uses.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf, erfc

FOUR_PI = 4.0 * np.pi


class KernelDomainError(ValueError):
    """Raised when a kernel is evaluated on its singular set."""


def _diff(x, y) -> np.ndarray:
    return np.asarray(x, dtype=float) - np.asarray(y, dtype=float)


def heat_kernel_r(r, s, kappa_m: float):
    """Heat kernel as a function of distance ``r`` and lag ``s = t - tau``.

    Vectorised over broadcastable ``r`` and ``s``; returns exactly zero
    wherever ``s <= 0``.
    """
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    pos = s > 0
    s_safe = np.where(pos, s, 1.0)
    # Log form: at tiny lags the prefactor alone would overflow and meet exp(-inf) as inf * 0.
    with np.errstate(over="ignore"):
        val = np.exp(1.5 * (np.log(kappa_m / FOUR_PI) - np.log(s_safe)) - kappa_m * r * r / (4.0 * s_safe))
    out = np.where(pos, val, 0.0)
    return out if out.ndim else float(out)


def heat_kernel(x, t: float, y, tau: float, kappa_m: float) -> float:
    """Free-space heat kernel ``Phi(x, t; y, tau)``.

    ``(kappa_m / (4 pi (t - tau)))**1.5 * exp(-kappa_m |x - y|**2 / (4 (t - tau)))``
    for ``t > tau`` and exactly ``0.0`` otherwise.
    """
    if kappa_m <= 0:
        raise ValueError("kappa_m must be positive")
    r = float(np.linalg.norm(_diff(x, y)))
    return float(heat_kernel_r(r, float(t) - float(tau), kappa_m))


def heat_kernel_dt_r(r, s, kappa_m: float):
    """Time derivative of :func:`heat_kernel_r` with respect to ``t``."""
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    pos = s > 0
    s_safe = np.where(pos, s, 1.0)
    phi = heat_kernel_r(r, s_safe, kappa_m)
    val = phi * (kappa_m * r * r / (4.0 * s_safe**2) - 1.5 / s_safe)
    out = np.where(pos, val, 0.0)
    return out if out.ndim else float(out)


def heat_kernel_dt(x, t: float, y, tau: float, kappa_m: float) -> float:
    """Analytic ``d/dt`` of :func:`heat_kernel`.

    Only meaningful off the diagonal.  For ``x != y`` and ``t <= tau`` the
    kernel vanishes identically near ``t = tau`` so the derivative is 0; for
    ``x == y`` and ``t <= tau`` the derivative does not exist.
    """
    r = float(np.linalg.norm(_diff(x, y)))
    s = float(t) - float(tau)
    if s <= 0:
        if r == 0.0:
            raise KernelDomainError("heat_kernel_dt undefined for x == y and t <= tau")
        return 0.0
    return float(heat_kernel_dt_r(r, s, kappa_m))


def heat_kernel_time_integral_r(r, s, kappa_m: float):
    """``int_0^s Phi(r, u) du = kappa_m / (4 pi r) * erfc(r sqrt(kappa_m) / (2 sqrt(s)))``.

    Requires ``r > 0``.  Returns 0 for ``s <= 0``.
    """
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    pos = s > 0
    s_safe = np.where(pos, s, 1.0)
    val = kappa_m / (FOUR_PI * r) * erfc(r * np.sqrt(kappa_m) / (2.0 * np.sqrt(s_safe)))
    out = np.where(pos, val, 0.0)
    return out if out.ndim else float(out)


def heat_kernel_cube_average(offset, half_width: float, s, kappa_m: float):
    """Integral of the heat kernel over an axis-aligned cube.

    Returns ``int_cube Phi(x - y, s) dy`` where ``offset = x - center`` has
    shape ``(..., 3)`` and the cube has half-width ``half_width``.  The
    Gaussian factorises, so the result is a product of ``erf`` differences.
    ``s`` broadcasts against ``offset[..., 0]``; ``s <= 0`` yields 0.
    """
    off = np.asarray(offset, dtype=float)
    s = np.asarray(s, dtype=float)
    pos = s > 0
    scale = np.sqrt(kappa_m) / (2.0 * np.sqrt(np.where(pos, s, 1.0)))
    out = np.ones(np.broadcast_shapes(off.shape[:-1], s.shape))
    for ax in range(3):
        x = off[..., ax]
        out = out * 0.5 * (erf((half_width - x) * scale) + erf((half_width + x) * scale))
    return np.where(pos, out, 0.0)


def helmholtz_green_r(k: float, r):
    """``exp(i k r) / (4 pi r)`` for an array of distances ``r > 0``."""
    r = np.asarray(r, dtype=float)
    return np.exp(1j * k * r) / (FOUR_PI * r)


def helmholtz_green(k: float, x, y) -> complex:
    """Outgoing Helmholtz Green's function ``exp(i k |x-y|) / (4 pi |x-y|)``."""
    r = float(np.linalg.norm(_diff(x, y)))
    if r == 0.0:
        raise KernelDomainError("helmholtz_green is singular at x == y")
    return complex(helmholtz_green_r(k, r))


def dyadic_green_batch(k: float, diff) -> np.ndarray:
    """Dyadic Green's function for difference vectors ``diff`` of shape ``(..., 3)``.

    ``Hess G + k**2 G I`` written in closed form as
    ``G [(3/r^2 - 3ik/r - k^2) rr + (k^2 + ik/r - 1/r^2) I]``.
    Returns an array of shape ``(..., 3, 3)``.  Zero-length differences
    produce non-finite entries; callers mask them.
    """
    d = np.asarray(diff, dtype=float)
    r = np.sqrt(np.einsum("...i,...i->...", d, d))
    with np.errstate(divide="ignore", invalid="ignore"):
        rhat = d / r[..., None]
        g = np.exp(1j * k * r) / (FOUR_PI * r)
        inv_r = 1.0 / r
        a = g * (3.0 * inv_r**2 - 3j * k * inv_r - k * k)
        b = g * (k * k + 1j * k * inv_r - inv_r**2)
    out = a[..., None, None] * (rhat[..., :, None] * rhat[..., None, :])
    idx = np.arange(3)
    out[..., idx, idx] += b[..., None]
    return out


def dyadic_green(k: float, x, y) -> np.ndarray:
    """Dyadic Green's function ``Upsilon^(k)(x, y)`` as a 3x3 complex matrix."""
    d = _diff(x, y)
    if not np.any(d):
        raise KernelDomainError("dyadic_green is singular at x == y")
    return dyadic_green_batch(k, d)
