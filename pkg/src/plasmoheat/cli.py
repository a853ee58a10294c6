"""Command-line interface: one subcommand per mode.

Exit codes: 0 success, 2 invertibility condition violated, 3 invalid
configuration, 4 solver failure.  Outputs are only written on success.
"""

from __future__ import annotations

import math
import os
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import click

from .config import MODES, ConfigError, SimulationConfig, parse_config

EXIT_OK = 0
EXIT_GATE = 2
EXIT_CONFIG = 3
EXIT_SOLVER = 4

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


class GateViolation(RuntimeError):
    def __init__(self, message: str, margin: float):
        super().__init__(message)
        self.margin = margin


@dataclass
class RunResult:
    code: int
    summary: list[str]
    written: list[Path]


# ---------------------------------------------------------------------------
# building blocks shared by the modes
# ---------------------------------------------------------------------------

def _delta(cfg: SimulationConfig) -> float:
    if cfg.cluster is not None and cfg.cluster.lattice is not None:
        return cfg.cluster.lattice.delta
    if cfg.cluster is not None and cfg.cluster.delta is not None:
        return cfg.cluster.delta
    return cfg.material.delta if cfg.material.delta is not None else 0.05


def _params(cfg: SimulationConfig):
    from .materials import MaterialParams

    m = cfg.material
    beta = m.beta
    if cfg.cluster is not None and cfg.cluster.lattice is not None and cfg.cluster.lattice.beta is not None:
        beta = cfg.cluster.lattice.beta
    try:
        return MaterialParams(eps_inf=m.eps_inf, eps0_drude=m.eps0_drude, k_p=m.k_p, zeta=m.zeta,
                              eps_m=complex(m.eps_m, m.eps_m_imag), kappa_m=m.kappa_m, gamma_m=m.gamma_m,
                              gamma_p=m.gamma_p, c_m=m.c_m, c_p=m.c_p, h=m.h, beta=beta, delta=_delta(cfg))
    except ValueError as exc:
        raise ConfigError([f"material: {exc}"]) from None


def _spectra(cfg: SimulationConfig):
    from .polarization import ball_spectral_data, load_spectral_csv

    if cfg.shape.kind == "ball":
        return ball_spectral_data()
    return load_spectral_csv(cfg.resolve(cfg.shape.spectral_csv))


def _omega(cfg: SimulationConfig):
    from .cluster import DomainOmega

    o = cfg.cluster.lattice.omega if (cfg.cluster and cfg.cluster.lattice) else None
    if o is None:
        return DomainOmega("box", (0.0, 0.0, 0.0), 0.5)
    return DomainOmega(o.kind, o.center, o.extent)


def _cluster(cfg: SimulationConfig, params, spectra):
    import numpy as np

    from .cluster import ParticleCluster, lattice_cluster
    from .io import read_points_csv

    c = cfg.cluster
    if c.lattice is not None:
        cl = lattice_cluster(_omega(cfg), params.delta, params.beta)
        return ParticleCluster(cl.centers, cl.delta, vol_B=spectra.vol_B)
    pts = np.asarray(c.centers, dtype=float) if c.centers is not None else read_points_csv(cfg.resolve(c.centers_file))
    return ParticleCluster(pts, params.delta, vol_B=spectra.vol_B)


def _probes(cfg: SimulationConfig):
    import numpy as np

    from .io import read_points_csv

    p = cfg.probes
    if p.points is not None:
        return np.asarray(p.points, dtype=float)
    if p.points_file is not None:
        return read_points_csv(cfg.resolve(p.points_file))
    ray = p.ray
    d = np.asarray(ray.direction, dtype=float)
    d = d / np.linalg.norm(d)
    return np.asarray(ray.origin)[None, :] + (ray.start + ray.step * np.arange(ray.count))[:, None] * d[None, :]


@dataclass
class _Wave:
    k: float
    zeta: float
    k_n0: float
    zeta_n0: float
    resonance_available: bool


def _wave_numbers(cfg: SimulationConfig, params, spectra) -> _Wave:
    from .materials import NoResonanceError, resonant_frequency

    try:
        k_n0, zeta_n0 = resonant_frequency(spectra.lambda_n0, params)
        have = True
    except NoResonanceError as exc:
        if cfg.wave.k == "resonant":
            raise ConfigError([f"wave.k: 'resonant' needs a resonance ({exc})"]) from None
        k_n0, zeta_n0, have = math.nan, math.nan, False
    s = params.delta**params.h
    if cfg.wave.k == "resonant":
        k = k_n0 + cfg.wave.c * s
        zeta = zeta_n0 + cfg.wave.c_zeta * s if cfg.wave.c_zeta is not None else params.zeta
    else:
        k = float(cfg.wave.k)
        zeta = params.zeta
    if not k > 0:
        raise ConfigError([f"wave: resulting wavenumber {k:g} is not positive"])
    return _Wave(k, zeta, k_n0, zeta_n0, have)


def _incident(cfg: SimulationConfig, params, k: float):
    import numpy as np

    from .maxwell_foldy import IncidentWave

    return IncidentWave(k, np.asarray(cfg.wave.theta), np.asarray(cfg.wave.E0), params.eps_m)


def _time(cfg: SimulationConfig):
    from .heat_volterra import TimeGrid
    from .materials import Modulation

    t = cfg.time
    tg = TimeGrid(t.T, t.N_t)
    return tg, Modulation(t.r, t.ell if t.ell is not None else t.T, t.T)


def _gate(ok: bool, margin: float, what: str, force: bool, summary: list[str]) -> None:
    summary.append(f"{what} margin: {margin:.6g}")
    if ok:
        return
    msg = f"{what} invertibility condition violated (margin {margin:.6g})"
    if not force:
        raise GateViolation(msg, margin)
    warnings.warn(msg + "; continuing because of --force", stacklevel=2)
    summary.append("warning: " + msg + "; continuing because of --force")


def _heat_polarization(spectra, params, wv: _Wave):
    from .polarization import polarization_P_B

    if not wv.resonance_available:
        raise ConfigError(["material: heat modes need a real resonance to fix P_B"])
    return polarization_P_B(spectra, params, wv.k_n0, wv.zeta_n0)[0]


def _regime(summary: list[str], params, cluster, omega_vol: float, effective: bool) -> None:
    from .materials import validate_regime

    rep = validate_regime(params, {"M": cluster.M, "d": cluster.spacing if cluster.M > 1 else 1.0,
                                   "vol_omega": omega_vol, "effective": effective})
    for w in rep.warnings():
        summary.append(f"regime warning: {w}")


# ---------------------------------------------------------------------------
# modes
# ---------------------------------------------------------------------------

def resonance_scan(cfg: SimulationConfig):
    """Uniform scan of ``|1 + eta(k) lambda|``; returns ``(ks, gaps, k_n0)`` (``k_n0`` may be NaN)."""
    import numpy as np

    from .materials import NoResonanceError, resonance_gap, resonant_frequency

    params = _params(cfg)
    spectra = _spectra(cfg)
    lam = spectra.lambda_n0 if cfg.scan.lambda_n is None else cfg.scan.lambda_n
    try:
        k_n0 = resonant_frequency(spectra.lambda_n0, params)[0]
    except NoResonanceError:
        k_n0 = math.nan
    centre = k_n0 if np.isfinite(k_n0) else params.k_p / 2.0
    k_min = cfg.scan.k_min if cfg.scan.k_min is not None else 0.5 * centre
    k_max = cfg.scan.k_max if cfg.scan.k_max is not None else 1.5 * centre
    if not k_min > 0:
        raise ConfigError(["scan.k_min: must be positive"])
    steps = 1 if k_max == k_min else cfg.scan.steps
    ks = np.linspace(k_min, k_max, steps)
    gaps = np.atleast_1d(resonance_gap(ks, params.zeta, lam, params))
    return ks, gaps, k_n0


def _mode_resonance(cfg, force, outputs, summary):
    import numpy as np

    ks, gaps, k_n0 = resonance_scan(cfg)
    outputs.add("resonance.csv", ["k", "gap"], zip(ks, gaps))
    i = int(np.argmin(gaps))
    summary.append(f"analytic k_n0 = {k_n0:.12g}")
    summary.append(f"grid argmin k = {ks[i]:.12g} (gap {gaps[i]:.6g}, step {ks[1] - ks[0] if len(ks) > 1 else 0:.3g})")
    outputs.add("report.csv", ["key", "value"], [("mode", "resonance"), ("k_n0", k_n0), ("k_argmin", ks[i]),
                                                 ("gap_min", gaps[i])])


def _discrete_em(cfg, force, summary):
    from .materials import contrast
    from .maxwell_foldy import check_foldy_invertibility, foldy_remainder_order, solve_cluster
    from .polarization import polarization_P_Di

    params = _params(cfg)
    spectra = _spectra(cfg)
    wv = _wave_numbers(cfg, params, spectra)
    cluster = _cluster(cfg, params, spectra)
    eta = complex(contrast(wv.k, params, wv.zeta))
    P_D = polarization_P_Di(spectra, eta, params.delta)
    ok, margin = check_foldy_invertibility(cluster, P_D, eta)
    summary.append(f"particles M = {cluster.M}, delta = {params.delta:g}, k = {wv.k:.12g}, zeta = {wv.zeta:.6g}")
    _gate(ok, margin, "Foldy-Lax", force, summary)
    dip = solve_cluster(cluster, P_D, eta, _incident(cfg, params, wv.k), force=True)
    summary.append(f"Foldy-Lax residual {dip.residual:.3e}; remainder O(M delta^(4-h)) ~ "
                   f"{foldy_remainder_order(cluster.M, params.delta, params.h):.3e}")
    return params, spectra, wv, cluster, eta, P_D, dip


def _mode_discrete(cfg, force, outputs, summary):
    from .heat_field import reconstruct_usc
    from .heat_volterra import (
        check_heat_invertibility,
        heat_source_amplitudes,
        march_volterra,
        sigma_h1_bound_check,
        volterra_remainder_order,
    )
    from .io import DIPOLE_HEADER, dipole_rows, sample_rows, trajectory_rows
    from .materials import heat_coefficients

    params, spectra, wv, cluster, eta, P_D, dip = _discrete_em(cfg, force, summary)
    _regime(summary, params, cluster, _omega(cfg).volume if cfg.cluster.lattice else 1.0, False)
    tg, mod = _time(cfg)
    P_heat = _heat_polarization(spectra, params, wv)
    b_i = heat_coefficients(params, spectra.vol_B)[2]
    ok, hmargin = check_heat_invertibility(cluster, b_i)
    _gate(ok, hmargin, "heat Volterra", force, summary)
    F = heat_source_amplitudes(dip, P_heat, params, mod, tg, k=wv.k, vol_B=spectra.vol_B, zeta=wv.zeta)
    sig = march_volterra(cluster, params, F, tg, b=b_i, force=True)
    if ok:
        h1 = sigma_h1_bound_check(sig, F, hmargin)
        summary.append(f"H1 bound: {h1.lhs:.4g} <= {h1.rhs:.4g} ({'holds' if h1.passed else 'VIOLATED'})")
    summary.append(f"Volterra remainder O(delta^(4+beta-h) sum d^-3) ~ {volterra_remainder_order(cluster, params):.3e}")
    probes = _probes(cfg)
    usc = reconstruct_usc(sig, cluster, params, probes, tg, b=b_i, rho_min=cfg.probes.rho_min)
    outputs.add("dipoles.csv", DIPOLE_HEADER, dipole_rows(cluster.centers, dip.Q))
    outputs.add("sigma.csv", ["i", "x", "y", "z", "t", "sigma", "F"],
                trajectory_rows(cluster.centers, tg.nodes, sig.sigma, F))
    outputs.add("usc.csv", ["x", "y", "z", "t", "value"], sample_rows(probes, usc.times, usc.values))
    outputs.add("report.csv", ["key", "value"], [
        ("mode", "discrete"), ("M", cluster.M), ("k", wv.k), ("zeta", wv.zeta), ("eta_re", eta.real),
        ("eta_im", eta.imag), ("b_i", b_i), ("foldy_residual", dip.residual), ("heat_margin", hmargin),
    ])


def _effective_em(cfg, force, summary):
    import numpy as np

    from .cluster import lattice_spacing
    from .effective_media import build_grid, solve_effective_maxwell
    from .materials import contrast, resonance_offset_slope
    from .polarization import effective_polarization_A_B, polarization_P_Di, resonant_em_polarization

    params = _params(cfg)
    spectra = _spectra(cfg)
    wv = _wave_numbers(cfg, params, spectra)
    grid = build_grid(_omega(cfg), lattice_spacing(params.delta, params.beta))
    if cfg.em_polarization == "leading_order":
        c_zeta = cfg.wave.c_zeta if cfg.wave.c_zeta is not None else 0.0
        eta0, slope = resonance_offset_slope(spectra.lambda_n0, params, cfg.wave.c, c_zeta)
        if cfg.wave.k != "resonant" or slope == 0:
            raise ConfigError(["em_polarization: 'leading_order' needs a resonant wave with non-zero offsets"])
        P_em = resonant_em_polarization(spectra, eta0, slope)
    else:
        eta = complex(contrast(wv.k, params, wv.zeta))
        P_em = eta * polarization_P_Di(spectra, eta, params.delta) / grid.cell_volume
    A_em = effective_polarization_A_B(P_em, spectra)
    emf = solve_effective_maxwell(grid, A_em, _incident(cfg, params, wv.k))
    summary.append(f"cells N = {grid.n_cells}, d = {grid.cell_size:.6g}, k = {wv.k:.12g}")
    summary.append(f"A_B diagonal = {np.diag(A_em)}; residual {emf.residual:.3e}")
    return params, spectra, wv, grid, P_em, A_em, emf


def _mode_effective_em(cfg, force, outputs, summary):
    from .io import FIELD_HEADER, field_rows

    params, spectra, wv, grid, P_em, A_em, emf = _effective_em(cfg, force, summary)
    outputs.add("ef.csv", FIELD_HEADER, field_rows(grid.cell_centers, emf.E_f, emf.E_hat))
    outputs.add("report.csv", ["key", "value"], [
        ("mode", "effective-em"), ("cells", grid.n_cells), ("d", grid.cell_size), ("k", wv.k),
        ("A_B_re_trace", float(A_em.trace().real)), ("A_B_im_trace", float(A_em.trace().imag)),
        ("residual", emf.residual),
    ])


def _mode_effective_heat(cfg, force, outputs, summary):
    from .effective_media import effective_heat_source, march_effective_heat
    from .heat_field import reconstruct_wsc
    from .io import FIELD_HEADER, field_rows, sample_rows, trajectory_rows
    from .materials import heat_coefficients

    params, spectra, wv, grid, P_em, A_em, emf = _effective_em(cfg, force, summary)
    tg, mod = _time(cfg)
    P_heat = _heat_polarization(spectra, params, wv)
    b_bar = heat_coefficients(params, spectra.vol_B)[1]
    if b_bar < 0:
        raise ConfigError(["material: gamma_p < gamma_m gives a negative b_bar"])
    F = effective_heat_source(emf, A_em, P_em, params, mod, tg, k=wv.k, weight=P_heat, vol_B=spectra.vol_B,
                              zeta=wv.zeta)
    hf = march_effective_heat(grid, b_bar, F, params, tg)
    wsc = reconstruct_wsc(hf.Y, grid, b_bar, params, _probes(cfg), tg)
    summary.append(f"b_bar = {b_bar:.6g}")
    outputs.add("ef.csv", FIELD_HEADER, field_rows(grid.cell_centers, emf.E_f, emf.E_hat))
    outputs.add("y.csv", ["cell", "x", "y", "z", "t", "Y", "W", "F"],
                trajectory_rows(grid.cell_centers, tg.nodes, hf.Y, hf.W_interior, hf.F_eff))
    outputs.add("wsc.csv", ["x", "y", "z", "t", "value"], sample_rows(wsc.points, wsc.times, wsc.values))
    outputs.add("report.csv", ["key", "value"], [
        ("mode", "effective-heat"), ("cells", grid.n_cells), ("d", grid.cell_size), ("k", wv.k),
        ("b_bar", b_bar), ("residual", emf.residual),
    ])


def _mode_compare(cfg, force, outputs, summary):
    import numpy as np

    from .harness import ComparisonConfig, run_sweep

    params = _params(cfg)
    t = cfg.time
    base = ComparisonConfig(
        params=params, omega=_omega(cfg), theta=tuple(cfg.wave.theta), E0=tuple(cfg.wave.E0),
        c_k=cfg.compare.c_k, c_zeta=cfg.compare.c_zeta, T=t.T, N_t=t.N_t, r=t.r,
        ell=t.ell if t.ell is not None else t.T, b_bar_target=cfg.compare.b_bar_target,
        probes=tuple(tuple(float(v) for v in p) for p in _probes(cfg)), spectra=_spectra(cfg))
    try:
        rep = run_sweep(base, tuple(cfg.compare.deltas))
    except ValueError as exc:
        raise ConfigError([f"probes: {exc}"]) from None
    rows = list(zip(rep.delta_values, rep.em_errors, rep.heat_errors))
    outputs.add("report.csv", ["delta", "em_error", "heat_error"], rows)
    outputs.add("rates.csv", ["quantity", "fitted_slope", "strictly_decreasing"], [
        ("em", rep.fitted_rates["em"], rep.strictly_decreasing("em")),
        ("heat", rep.fitted_rates["heat"], rep.strictly_decreasing("heat")),
    ])
    for d, e, h in rows:
        summary.append(f"delta {d:<8g} em error {e:.4e}   heat error {h:.4e}")
    summary.append(f"fitted slopes: em {rep.fitted_rates['em']:.3f}, heat {rep.fitted_rates['heat']:.3f} "
                   f"(theory {9 / 7:.3f} and {2 * (3 - params.beta) / 7:.3f}; not expected at desk scale)")
    if not np.all(np.isfinite(rep.em_errors + rep.heat_errors)):
        summary.append("warning: non-finite error in sweep")


_MODES = {
    "resonance": _mode_resonance,
    "discrete": _mode_discrete,
    "effective-em": _mode_effective_em,
    "effective-heat": _mode_effective_heat,
    "compare": _mode_compare,
}


def run(cfg: SimulationConfig, mode: str, out_dir: str | Path, force: bool = False) -> RunResult:
    """Run ``mode``; returns the exit code, the summary lines and the files written."""
    import numpy as np

    from .cluster import GeometryError
    from .heat_field import ProbeError
    from .io import OutputSet
    from .materials import NoResonanceError
    from .maxwell_foldy import InvertibilityError, SolverError
    from .polarization import PolarizationError

    summary = [f"mode: {mode}"]
    outputs = OutputSet()
    try:
        cfg.require(mode)
        _MODES[mode](cfg, force, outputs, summary)
    except ConfigError as exc:
        return RunResult(EXIT_CONFIG, summary + [f"error: {p}" for p in exc.problems], [])
    except (GateViolation, InvertibilityError) as exc:
        return RunResult(EXIT_GATE, summary + [f"error: {exc}", f"margin: {exc.margin:.6g}"], [])
    except (GeometryError, NoResonanceError, PolarizationError, ProbeError, OSError) as exc:
        return RunResult(EXIT_CONFIG, summary + [f"error: {exc}"], [])
    except (SolverError, np.linalg.LinAlgError) as exc:
        return RunResult(EXIT_SOLVER, summary + [f"solver failure: {exc}"], [])
    written = outputs.commit(out_dir)
    summary.append("wrote " + ", ".join(p.name for p in written))
    return RunResult(EXIT_OK, summary, written)


# ---------------------------------------------------------------------------
# click wiring
# ---------------------------------------------------------------------------

def _common(func):
    func = click.option("--force", is_flag=True, help="Override the invertibility gates (with a warning).")(func)
    func = click.option("--threads", type=int, default=None, help="Thread count for the linear-algebra backend.")(func)
    func = click.option("--out", "out_dir", type=click.Path(file_okay=False), default="out",
                        show_default=True, help="Output directory.")(func)
    func = click.option("--config", "config_path", type=click.Path(), default=None,
                        help="JSON configuration file.")(func)
    return func


def _execute(mode: str, config_path, out_dir, threads, force) -> int:
    if threads is not None:
        if threads < 1:
            click.echo("error: --threads must be positive", err=True)
            return EXIT_CONFIG
        for var in _THREAD_VARS:
            os.environ[var] = str(threads)
    if config_path is None:
        click.echo("error: --config is required", err=True)
        return EXIT_CONFIG
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            cfg = parse_config(config_path)
        for w in caught:
            click.echo(f"warning: {w.message}", err=True)
    except ConfigError as exc:
        for p in exc.problems:
            click.echo(f"error: {p}", err=True)
        return EXIT_CONFIG
    if cfg.mode is not None and cfg.mode != mode:
        click.echo(f"note: config mode {cfg.mode!r} overridden by subcommand {mode!r}", err=True)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = run(cfg, mode, out_dir, force)
    for w in caught:
        click.echo(f"warning: {w.message}", err=True)
    stream_err = result.code != EXIT_OK
    for line in result.summary:
        click.echo(line, err=stream_err)
    return result.code


@click.group(help="Plasmonic heating: discrete cluster models and their effective-medium limits.")
def cli() -> None:
    pass


def _make_command(mode: str):
    @cli.command(name=mode, help=f"Run the {mode} mode.")
    @_common
    def command(config_path, out_dir, threads, force):
        return _execute(mode, config_path, out_dir, threads, force)

    return command


for _mode in MODES:
    _make_command(_mode)


def main(argv=None) -> int:
    try:
        rv = cli.main(args=argv, prog_name="plasmoheat", standalone_mode=False)
    except click.exceptions.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return EXIT_CONFIG
    except click.exceptions.Abort:
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)
    return int(rv or 0)


if __name__ == "__main__":
    sys.exit(main())
