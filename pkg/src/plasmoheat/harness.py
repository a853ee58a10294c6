"""Discrete-versus-effective comparisons and the reference-oracle suite.

The discrete pipeline (Foldy-Lax dipoles, heat strengths, exterior ``u^sc``)
and the effective pipeline (cell Maxwell solve, cell heat marching, exterior
``W^sc``) run on exactly the same lattice so that only the modelling error
separates them.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import kernels, oracles
from .cluster import DomainOmega, ParticleCluster, lattice_cluster, lattice_spacing
from .effective_media import (
    build_grid,
    effective_heat_source,
    march_effective_heat,
    solve_effective_maxwell,
)
from .heat_field import reconstruct_usc, reconstruct_wsc
from .heat_volterra import TimeGrid, heat_source_amplitudes, march_volterra
from .materials import (
    MaterialParams,
    Modulation,
    contrast,
    heat_coefficients,
    modulation_f,
    resonance_offset_slope,
    resonant_frequency,
)
from .maxwell_foldy import (
    IncidentWave,
    assemble_foldy,
    check_foldy_invertibility,
    solve_cluster,
    solve_foldy,
)
from .polarization import (
    ShapeSpectralData,
    ball_spectral_data,
    effective_polarization_A_B,
    polarization_P_B,
    polarization_P_Di,
    resonant_em_polarization,
)

#: Tolerances of every reference oracle, in one place.
TOLERANCES: dict[str, float] = {
    "gaussian_mass": 1e-8,
    "dyadic_fd_hessian": 1e-6,
    "ball_eigenvalue": 1e-8,
    "ball_newtonian_hessian": 1e-8,
    "cube_newtonian_hessian": 1e-6,
    "foldy_neumann_series": 1e-8,
    "volterra_dense_collocation": 1e-6,
    "crank_nicolson_parabolic": 5e-2,
}


@dataclass(frozen=True)
class ComparisonConfig:
    """One matched discrete/effective experiment.

    The wave is tuned near the plasmonic resonance,
    ``k = k_n0 + c_k delta**h`` and ``zeta = zeta_n0 + c_zeta delta**h``.
    ``b_bar_target`` (if set) fixes the scaled heat coefficient by choosing
    ``gamma_p``; ``probes`` are exterior observation points.
    """

    params: MaterialParams
    omega: DomainOmega = DomainOmega("box", (0.0, 0.0, 0.0), 0.5)
    theta: tuple[float, float, float] = (0.0, 0.0, 1.0)
    E0: tuple[float, float, float] = (1.0, 0.0, 0.0)
    c_k: float = 5.0
    c_zeta: float = 10.0
    T: float = 0.5
    N_t: int = 50
    r: int = 1
    ell: float = 0.5
    b_bar_target: float | None = None
    probes: tuple[tuple[float, float, float], ...] = ((1.2, 0.0, 0.0), (0.0, 1.2, 0.3), (-0.9, -0.9, 0.9))
    spectra: ShapeSpectralData = field(default_factory=ball_spectral_data)

    def with_delta(self, delta: float) -> "ComparisonConfig":
        p = replace(self.params, delta=delta)
        if self.b_bar_target is not None:
            gamma_p = p.gamma_m + self.b_bar_target * p.kappa_m / (self.spectra.vol_B * delta**p.beta)
            p = replace(p, gamma_p=gamma_p)
        return replace(self, params=p)


@dataclass
class MatchedRun:
    """Everything produced by one matched run (both models)."""

    config: ComparisonConfig
    k: float
    zeta: float
    cluster: object
    grid: object
    Q_tilde: np.ndarray
    E_hat: np.ndarray
    u_sc: np.ndarray | None = None
    W_sc: np.ndarray | None = None
    sigma: object = None
    heat_field: object = None
    emf: object = None
    foldy_margin: float = math.nan


def _wave(cfg: ComparisonConfig, k: float) -> IncidentWave:
    return IncidentWave(k, np.asarray(cfg.theta, float), np.asarray(cfg.E0, float), cfg.params.eps_m)


def run_matched(cfg: ComparisonConfig, *, heat: bool = True, force: bool = False) -> MatchedRun:
    """Run the discrete and the effective pipelines on the same lattice."""
    p = cfg.params
    spectra = cfg.spectra
    k_n0, zeta_n0 = resonant_frequency(spectra.lambda_n0, p)
    s = p.delta**p.h
    k = k_n0 + cfg.c_k * s
    zeta = zeta_n0 + cfg.c_zeta * s
    wave = _wave(cfg, k)

    # discrete model
    cluster = lattice_cluster(cfg.omega, p.delta, p.beta)
    eta = complex(contrast(k, p, zeta))
    P_D = polarization_P_Di(spectra, eta, p.delta)
    _, margin = check_foldy_invertibility(cluster, P_D, eta)
    dip = solve_cluster(cluster, P_D, eta, wave, force=force)

    # effective model
    eta0, slope = resonance_offset_slope(spectra.lambda_n0, p, cfg.c_k, cfg.c_zeta)
    P_em = resonant_em_polarization(spectra, eta0, slope)
    A_em = effective_polarization_A_B(P_em, spectra)
    grid = build_grid(cfg.omega, lattice_spacing(p.delta, p.beta))
    emf = solve_effective_maxwell(grid, A_em, wave)

    run = MatchedRun(cfg, k, zeta, cluster, grid, dip.Q, emf.E_hat, emf=emf, foldy_margin=margin)
    if not heat:
        return run

    tg = TimeGrid(cfg.T, cfg.N_t)
    mod = Modulation(cfg.r, cfg.ell, cfg.T)
    P_heat, _ = polarization_P_B(spectra, p, k_n0, zeta_n0)
    _, b_bar, b_i = heat_coefficients(p, spectra.vol_B)
    probes = np.asarray(cfg.probes, dtype=float)

    F = heat_source_amplitudes(dip, P_heat, p, mod, tg, k=k, vol_B=spectra.vol_B, zeta=zeta)
    sig = march_volterra(cluster, p, F, tg, b=b_i, force=force)
    run.sigma = sig
    run.u_sc = reconstruct_usc(sig, cluster, p, probes, tg, b=b_i).values

    F_eff = effective_heat_source(emf, A_em, P_em, p, mod, tg, k=k, weight=P_heat, vol_B=spectra.vol_B, zeta=zeta)
    hf = march_effective_heat(grid, b_bar, F_eff, p, tg)
    run.heat_field = hf
    run.W_sc = reconstruct_wsc(hf.Y, grid, b_bar, p, probes, tg).values
    return run


def em_error(Q_tilde: np.ndarray, E_hat: np.ndarray) -> float:
    """RMS over particles of ``| |E_hat|^2 - |Q_tilde|^2 |`` divided by the RMS of ``|Q_tilde|^2``."""
    q2 = np.sum(np.abs(Q_tilde) ** 2, axis=1)
    e2 = np.sum(np.abs(E_hat) ** 2, axis=1)
    denom = math.sqrt(float(np.mean(q2**2)))
    num = math.sqrt(float(np.mean((e2 - q2) ** 2)))
    if denom == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / denom


def heat_error(u_sc: np.ndarray, W_sc: np.ndarray) -> float:
    """``sup |u^sc - W^sc| / sup |W^sc|`` over probes and times (0 when both vanish)."""
    num = float(np.max(np.abs(u_sc - W_sc)))
    denom = float(np.max(np.abs(W_sc)))
    if denom == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / denom


def _check_probes(cfg: ComparisonConfig) -> None:
    clearance = 0.2 * cfg.omega.diameter
    dist = cfg.omega.distance_outside(np.asarray(cfg.probes, dtype=float))
    if np.any(dist < clearance):
        raise ValueError(f"probe points must be at least {clearance:.4g} outside the domain")


def compare_em(cfg: ComparisonConfig, force: bool = False) -> float:
    run = run_matched(cfg, heat=False, force=force)
    return em_error(run.Q_tilde, run.E_hat)


def compare_heat(cfg: ComparisonConfig, force: bool = False) -> float:
    _check_probes(cfg)
    run = run_matched(cfg, force=force)
    return heat_error(run.u_sc, run.W_sc)


def fit_rate(deltas, errors) -> float:
    """Weighted least-squares slope of ``log error`` against ``log delta``.

    The two smallest ``delta`` values get double weight.
    """
    x = np.log(np.asarray(deltas, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    w = np.ones_like(x)
    w[np.argsort(x)[:2]] = 2.0
    A = np.stack([x, np.ones_like(x)], axis=1) * np.sqrt(w)[:, None]
    coef, *_ = np.linalg.lstsq(A, y * np.sqrt(w), rcond=None)
    return float(coef[0])


@dataclass
class ComparisonReport:
    delta_values: list[float]
    em_errors: list[float]
    heat_errors: list[float]
    fitted_rates: dict[str, float]
    runtimes: list[float]

    def strictly_decreasing(self, key: str) -> bool:
        errs = self.em_errors if key == "em" else self.heat_errors
        # errors are listed in the order of delta_values; sort by decreasing delta
        order = np.argsort(self.delta_values)[::-1]
        e = np.asarray(errs)[order]
        return bool(np.all(np.diff(e) < 0))


def run_sweep(base: ComparisonConfig, deltas=(0.08, 0.05, 0.03)) -> ComparisonReport:
    _check_probes(base)
    em, ht, times = [], [], []
    for d in deltas:
        t0 = time.perf_counter()
        run = run_matched(base.with_delta(d))
        em.append(em_error(run.Q_tilde, run.E_hat))
        ht.append(heat_error(run.u_sc, run.W_sc))
        times.append(time.perf_counter() - t0)
    rates = {"em": fit_rate(deltas, em), "heat": fit_rate(deltas, ht)}
    return ComparisonReport(list(deltas), em, ht, rates, times)


def default_sweep_config() -> ComparisonConfig:
    """Desk-scale sweep configuration with ``h = beta = 1.9``."""
    params = MaterialParams(h=1.9, beta=1.9, kappa_m=4.0, gamma_m=1.0, delta=0.05)
    return ComparisonConfig(params=params, b_bar_target=0.2)


# ---------------------------------------------------------------------------
# oracle suite
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OracleResult:
    name: str
    error: float
    tolerance: float
    passed: bool
    detail: str = ""


@dataclass
class OracleReport:
    results: list[OracleResult]

    @property
    def all_pass(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, name: str) -> OracleResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)


def _result(name: str, error: float, detail: str = "") -> OracleResult:
    tol = TOLERANCES[name]
    return OracleResult(name, float(error), tol, bool(np.isfinite(error) and error <= tol), detail)


def _oracle_gaussian_mass(scale: float) -> OracleResult:
    kernel = lambda x, t, y, tau, kap: scale * kernels.heat_kernel(x, t, y, tau, kap)
    errs = [abs(oracles.gaussian_mass(kernel, kap, t) - 1.0)
            for kap in (0.5, 1.0, 4.0 * np.pi) for t in (0.1, 1.0)]
    return _result("gaussian_mass", max(errs), "kappa in {0.5, 1, 4 pi}")


def _oracle_dyadic() -> OracleResult:
    rng = np.random.default_rng(20)
    worst = 0.0
    for _ in range(20):
        x, y = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
        k = rng.uniform(0.5, 3.0)
        g = lambda z: kernels.helmholtz_green(k, z, y)
        ref = oracles.fd_hessian(g, x, 2e-4) + k * k * g(x) * np.eye(3)
        val = kernels.dyadic_green(k, x, y)
        worst = max(worst, float(np.linalg.norm(val - ref) / np.linalg.norm(ref)))
    return _result("dyadic_fd_hessian", worst, "20 random pairs")


def _oracle_ball() -> list[OracleResult]:
    spectra = ball_spectral_data()
    eig = oracles.ball_magnetization_spectrum()
    err = max(abs(eig["eigenvalues"][0] - spectra.lambda_n0),
              float(np.max(np.abs(eig["gram"] - spectra.gram))) / float(np.max(np.abs(spectra.gram))))
    if eig["multiplicity"] != 3:
        err = math.inf
    out = [_result("ball_eigenvalue", err, "Galerkin eigen-oracle")]
    out.append(_result("ball_newtonian_hessian",
                       float(np.max(np.abs(oracles.ball_newtonian_hessian() - spectra.newtonian_hessian_avg)))))
    out.append(_result("cube_newtonian_hessian",
                       float(np.max(np.abs(oracles.cube_newtonian_hessian() + np.eye(3) / 3.0)))))
    return out


def _oracle_foldy() -> OracleResult:
    rng = np.random.default_rng(3)
    spectra = ball_spectral_data()
    wave = IncidentWave(2.0, np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]))
    worst = 0.0
    for M in (2, 5, 12, 20):
        while True:
            cl = ParticleCluster(rng.uniform(-0.5, 0.5, (M, 3)), 0.01)
            if cl.spacing > 0.15:
                break
        eta = -2.5 + 0.3j
        P_D = polarization_P_Di(spectra, eta, 0.03)
        _, margin = check_foldy_invertibility(cl, P_D, eta)
        if margin < 0.6:  # rescale so that the contraction margin is 0.6
            P_D = P_D * (0.4 / (1.0 - margin))
        sysm = assemble_foldy(cl, P_D, eta, wave)
        Q = solve_foldy(sysm).Q
        ref, _ = oracles.foldy_fixed_point(cl.centers, wave.k_background,
                                           np.broadcast_to(eta * P_D, (M, 3, 3)), sysm.rhs.reshape(M, 3))
        worst = max(worst, float(np.linalg.norm(Q - ref) / np.linalg.norm(ref)))
    return _result("foldy_neumann_series", worst, "M in {2, 5, 12, 20}")


def _oracle_volterra() -> OracleResult:
    cl = ParticleCluster([[0, 0, 0], [0.6, 0.1, 0], [0.1, 0.5, 0.4]], 0.05)
    p = MaterialParams(kappa_m=1.0)
    tg = TimeGrid(1.0, 200)
    b = np.array([0.05, 0.08, 0.06])
    F = np.array([1.0, 0.7, 1.3])[:, None] * modulation_f(tg.nodes, Modulation(2, 1.0, 1.0))[None, :]
    sig = march_volterra(cl, p, F, tg, b=b).sigma
    ref = oracles.volterra_dense_collocation(cl.centers, b, 1.0, F, tg.T)
    return _result("volterra_dense_collocation", float(np.linalg.norm(sig - ref) / np.linalg.norm(ref)),
                   "M=3, N_t=200")


def crank_nicolson_comparison(b_bar: float = 0.5, N_t: int = 200) -> float:
    """Relative L2 distance between the marched effective heat field and the finite-difference solution."""
    omega = DomainOmega("box", (0.0, 0.0, 0.0), 0.5)
    grid = build_grid(omega, 0.25)
    tg = TimeGrid(0.25, N_t)
    mod = Modulation(2, tg.T, tg.T)
    amp = lambda c: 1.0 + 0.5 * c[:, 0] - 0.3 * c[:, 1] * c[:, 2]
    F = amp(grid.cell_centers)[:, None] * modulation_f(tg.nodes, mod)[None, :]
    hf = march_effective_heat(grid, b_bar, F, MaterialParams(kappa_m=1.0), tg)

    def source(x, t):
        c = (np.floor((x + 0.5) / 0.25) + 0.5) * 0.25 - 0.5
        return amp(c) * modulation_f(t, mod)

    X, W = oracles.crank_nicolson_parabolic(0.5, b_bar, 1.0, source, tg.T, tg.N_t)
    idx = [int(np.argmin(np.sum((X - c) ** 2, axis=1))) for c in grid.cell_centers]
    ref = W[:, idx].T
    return float(np.linalg.norm(hf.W_interior - ref) / np.linalg.norm(ref))


def run_oracles(heat_kernel_scale: float = 1.0, include_slow: bool = True) -> OracleReport:
    """Run every reference oracle; failures are report entries, not exceptions.

    ``heat_kernel_scale`` multiplies the heat kernel seen by the
    Gaussian-mass oracle (a sensitivity hook for tests).
    """
    tasks: list[Callable[[], OracleResult | list[OracleResult]]] = [
        lambda: _oracle_gaussian_mass(heat_kernel_scale),
        _oracle_dyadic,
        _oracle_ball,
        _oracle_foldy,
        _oracle_volterra,
    ]
    if include_slow:
        tasks.append(lambda: _result("crank_nicolson_parabolic", crank_nicolson_comparison(), "4^3 cells, 48^3 box"))
    results: list[OracleResult] = []
    for task in tasks:
        try:
            out = task()
        except Exception as exc:  # report, never raise
            name = getattr(task, "__name__", "oracle")
            results.append(OracleResult(name, math.inf, math.nan, False, f"raised {exc!r}"))
            continue
        results.extend(out if isinstance(out, list) else [out])
    return OracleReport(results)
