"""Material laws, contrasts, resonance selection and the laser time profile."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class NoResonanceError(ValueError):
    """The closed-form resonance has no real solution for the given material."""


@dataclass(frozen=True)
class MaterialParams:
    """Electromagnetic and thermal constants together with the scaling exponents.

    Attributes
    ----------
    eps_inf, eps0_drude, k_p, zeta
        Drude parameters: high-frequency factor, offset, plasma frequency, damping.
    eps_m
        Background permittivity (``Im eps_m >= 0``).
    kappa_m
        Background diffusivity ratio ``c_m / gamma_m``.
    gamma_m, gamma_p, c_m, c_p
        Thermal conductivities and heat capacities.
    h, beta
        Exponents of the damping (``zeta ~ delta**h``) and conductivity
        (``gamma_p ~ delta**-beta``) regimes.
    delta
        Particle radius scale.
    """

    eps_inf: float = 1.0
    eps0_drude: float = 9.84
    k_p: float = 9.096
    zeta: float = 0.072
    eps_m: complex = 1.0
    kappa_m: float = 1.0
    gamma_m: float = 1.0
    gamma_p: float = 10.0
    c_m: float = 1.0
    c_p: float = 1.0
    h: float = 1.9
    beta: float = 1.9
    delta: float = 0.05

    def __post_init__(self) -> None:
        object.__setattr__(self, "eps_m", complex(self.eps_m))
        problems = []
        for name in ("eps_inf", "eps0_drude", "k_p", "kappa_m", "gamma_m", "gamma_p", "c_m", "c_p", "delta"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be positive")
        if self.zeta < 0:
            problems.append("zeta must be non-negative")
        if self.eps_m.imag < 0:
            problems.append("Im eps_m must be non-negative")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def gamma_p_bar(self) -> float:
        """Scaled conductivity ``gamma_p * delta**beta``."""
        return self.gamma_p * self.delta**self.beta


@dataclass(frozen=True)
class DerivedContrasts:
    eta: complex
    alpha: float
    alpha_bar: float
    a_bar: float
    b_bar: float
    b_i: float


@dataclass(frozen=True)
class Modulation:
    """Laser time profile ``f(t) = t**r * phi(t)`` with a smooth cutoff on ``(ell/2, ell)``."""

    r: int = 1
    ell: float = 1.0
    T: float = 1.0

    def __post_init__(self) -> None:
        if self.r < 0 or int(self.r) != self.r:
            raise ValueError("r must be a non-negative integer")
        if not self.ell > 0 or not self.T > 0:
            raise ValueError("ell and T must be positive")


def drude_permittivity(k, params: MaterialParams, zeta: float | None = None):
    """Drude permittivity ``eps_inf * (eps0 - k_p**2 / (k**2 + i zeta k))``.

    ``zeta`` overrides ``params.zeta`` when given.  Vectorised over ``k``.
    """
    z = params.zeta if zeta is None else zeta
    k = np.asarray(k, dtype=float)
    if np.any(k <= 0):
        raise ValueError("k must be positive")
    out = params.eps_inf * (params.eps0_drude - params.k_p**2 / (k * k + 1j * z * k))
    return out if out.ndim else complex(out)


def contrast(k, params: MaterialParams, zeta: float | None = None):
    """Permittivity jump ``eta = eps_p - eps_m``."""
    return drude_permittivity(k, params, zeta) - params.eps_m


def resonant_frequency(lambda_n0: float, params: MaterialParams) -> tuple[float, float]:
    """Closed-form resonant wavenumber and damping ``(k_n0, zeta_n0)``."""
    ei = params.eps_inf
    e0 = params.eps0_drude
    em = params.eps_m
    denom = 1.0 - lambda_n0 * (em - ei * e0)
    if abs(denom) == 0.0:
        raise NoResonanceError("no real resonance for these parameters (vanishing denominator)")
    radicand = params.k_p**2 * ei * lambda_n0 * (1.0 - lambda_n0 * (em.real - ei * e0)) / abs(denom) ** 2
    if not radicand > 0:
        raise NoResonanceError("no real resonance for these parameters (radicand <= 0)")
    k_n0 = math.sqrt(radicand)
    zeta_n0 = em.imag * lambda_n0 * k_n0 / denom
    # The closed form is real whenever Im eps_m = 0; otherwise keep the real part.
    return k_n0, float(np.real(zeta_n0))


def resonance_gap(k, zeta: float, lambda_n: float, params: MaterialParams):
    """``|1 + eta(k, zeta) * lambda_n|``."""
    out = np.abs(1.0 + contrast(k, params, zeta) * lambda_n)
    return out if np.ndim(out) else float(out)


def resonance_offset_slope(lambda_n0: float, params: MaterialParams,
                           c_k: float, c_zeta: float) -> tuple[complex, complex]:
    """Leading-order behaviour of ``1 + eta lambda`` near the resonance.

    With ``k = k_n0 + c_k s`` and ``zeta = zeta_n0 + c_zeta s`` one has
    ``1 + eta lambda = g s + O(s**2)`` when ``1 + eta lambda`` vanishes at
    ``(k_n0, zeta_n0)``.  Returns ``(eta_0, g)`` where ``eta_0`` is the
    contrast at the resonance point.
    """
    k0, z0 = resonant_frequency(lambda_n0, params)
    w = k0 * k0 + 1j * z0 * k0
    dk = params.eps_inf * params.k_p**2 * (2.0 * k0 + 1j * z0) / w**2
    dz = params.eps_inf * params.k_p**2 * (1j * k0) / w**2
    eta0 = complex(contrast(k0, params, z0))
    return eta0, complex(lambda_n0 * (dk * c_k + dz * c_zeta))


def heat_coefficients(params: MaterialParams, vol_B: float) -> tuple[float, float, float]:
    """``(alpha_bar, b_bar, b_i)`` of the thermal contrast; independent of ``k``."""
    p = params
    alpha_bar = (p.gamma_p - p.gamma_m) * p.delta**p.beta
    b_bar = alpha_bar / p.kappa_m * vol_B
    return alpha_bar, b_bar, b_bar * p.delta ** (3.0 - p.beta)


def derived_contrasts(k: float, params: MaterialParams, vol_B: float,
                      zeta: float | None = None) -> DerivedContrasts:
    """Contrasts and the scaled heat constants at wavenumber ``k``."""
    p = params
    eps_p = drude_permittivity(k, p, zeta)
    eta = eps_p - p.eps_m
    alpha = p.gamma_p - p.gamma_m
    alpha_bar, b_bar, b_i = heat_coefficients(p, vol_B)
    eps_p_bar = p.delta ** (-p.h) * eps_p.imag
    a_bar = (p.gamma_m / p.gamma_p_bar) * (k * eps_p_bar) / (2.0 * np.pi * p.kappa_m)
    return DerivedContrasts(eta=complex(eta), alpha=alpha, alpha_bar=alpha_bar,
                            a_bar=float(a_bar), b_bar=float(b_bar), b_i=float(b_i))


def _psi(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)


def smooth_cutoff(t, ell: float):
    """C-infinity cutoff: 1 on ``[0, ell/2]``, 0 for ``t >= ell``, smooth step in between."""
    t = np.asarray(t, dtype=float)
    s = (t - 0.5 * ell) / (0.5 * ell)
    a = _psi(1.0 - s)
    b = _psi(s)
    with np.errstate(invalid="ignore"):
        step = np.where(s <= 0, 1.0, np.where(s >= 1, 0.0, a / (a + b)))
    return step


def modulation_f(t, m: Modulation):
    """Laser profile ``f(t)``; vectorised over ``t``."""
    t = np.asarray(t, dtype=float)
    tp = np.where(t > 0, t, 0.0)
    out = np.where(t > 0, tp ** m.r * smooth_cutoff(tp, m.ell), 0.0)
    return out if out.ndim else float(out)


@dataclass
class RegimeReport:
    checks: list[tuple[str, str, str]] = field(default_factory=list)

    def add(self, name: str, ok: bool, detail: str) -> None:
        self.checks.append((name, "pass" if ok else "warn", detail))

    @property
    def all_pass(self) -> bool:
        return all(status == "pass" for _, status, _ in self.checks)

    def warnings(self) -> list[str]:
        return [f"{n}: {d}" for n, s, d in self.checks if s != "pass"]


def validate_regime(params: MaterialParams, cluster_summary: dict) -> RegimeReport:
    """Diagnostics on the scaling regime.

    ``cluster_summary`` needs ``M`` and ``d`` (center spacing); optional keys
    are ``vol_omega`` (default 1), ``effective`` (bool) and ``resonance``
    (bool, default True).
    """
    rep = RegimeReport()
    if cluster_summary.get("resonance", True):
        ok = 9.0 / 5.0 < params.h < 2.0
        rep.add("h", ok, f"h={params.h:g}" + ("" if ok else " outside (9/5,2)"))
    gpb = params.gamma_p_bar
    rep.add("gamma_p_scale", 0.1 <= gpb <= 10.0, f"gamma_p*delta^beta={gpb:.4g}")
    rep.add("c_p_scale", 0.1 <= params.c_p <= 10.0, f"c_p={params.c_p:.4g}")
    M = int(cluster_summary["M"])
    d = float(cluster_summary["d"])
    vol = float(cluster_summary.get("vol_omega", 1.0))
    if cluster_summary.get("effective", False):
        lam = math.log(d) / math.log(params.delta)
        target = 1.0 - params.beta / 3.0
        ok = abs(lam - target) <= 0.15
        rep.add("spacing_exponent", ok, f"log d/log delta={lam:.4f}, target {target:.4f}")
    if M == 1:
        rep.add("density", False, "single particle: M*d^3 convention not applicable")
    else:
        md3 = M * d**3 / vol
        rep.add("density", 0.2 <= md3 <= 5.0, f"M*d^3/vol={md3:.4g}")
    return rep
