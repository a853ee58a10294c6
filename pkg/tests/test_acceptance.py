"""Acceptance criteria, each checked at its stated tolerance and runtime budget."""

import json
import time
from pathlib import Path

import numpy as np

from plasmoheat import kernels, oracles
from plasmoheat.cli import EXIT_GATE, EXIT_OK, main
from plasmoheat.cluster import DomainOmega, ParticleCluster
from plasmoheat.effective_media import assemble_effective_maxwell, build_grid, solve_effective_maxwell
from plasmoheat.harness import crank_nicolson_comparison, default_sweep_config, run_sweep
from plasmoheat.heat_volterra import (
    TimeGrid,
    check_heat_invertibility,
    march_volterra,
    sigma_h1_bound_check,
)
from plasmoheat.materials import MaterialParams, Modulation, modulation_f, resonance_gap, resonant_frequency
from plasmoheat.maxwell_foldy import (
    IncidentWave,
    assemble_foldy,
    check_foldy_invertibility,
    incident_field,
    solve_cluster,
    solve_foldy,
)
from plasmoheat.polarization import ball_spectral_data, polarization_P_Di

MINIMAL = Path(__file__).resolve().parents[1] / "configs" / "minimal.json"
GOLD = MaterialParams(eps_inf=1.0, eps0_drude=9.84, k_p=9.096, zeta=0.072, eps_m=1.0)
WAVE = IncidentWave(2.0, [0, 0, 1], [1, 0, 0])


def test_criterion_1_kernel_identities(acceptance_record):
    t0 = time.perf_counter()
    mass_err = max(abs(oracles.gaussian_mass(kernels.heat_kernel, kap, t) - 1.0)
                   for kap in (0.5, 1.0, 4 * np.pi) for t in (0.1, 1.0))
    rng = np.random.default_rng(11)
    hess_err = 0.0
    for _ in range(20):
        x, y = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
        k = rng.uniform(0.5, 3.0)
        g = lambda z: kernels.helmholtz_green(k, z, y)
        ref = oracles.fd_hessian(g, x, 2e-4) + k * k * g(x) * np.eye(3)
        hess_err = max(hess_err, np.linalg.norm(kernels.dyadic_green(k, x, y) - ref) / np.linalg.norm(ref))
    dt = time.perf_counter() - t0
    ok = mass_err <= 1e-8 and hess_err <= 1e-6 and dt < 5
    acceptance_record(1, "kernel identities", ok,
                      f"mass error {mass_err:.2e}, dyadic rel error {hess_err:.2e}, {dt:.2f}s")
    assert ok


def test_criterion_2_resonance(acceptance_record):
    t0 = time.perf_counter()
    k0, z0 = resonant_frequency(1 / 3, GOLD)
    step = 0.005
    ks = np.arange(2.0, 3.3, step)
    kmin = ks[np.argmin(resonance_gap(ks, GOLD.zeta, 1 / 3, GOLD))]
    h = 1.9
    deltas = np.array([0.1, 0.05, 0.025])
    gaps = [resonance_gap(k0 * (1 + d**h), z0 + d**h, 1 / 3, GOLD) for d in deltas]
    slope = np.polyfit(np.log(deltas), np.log(gaps), 1)[0]
    dt = time.perf_counter() - t0
    ok = abs(kmin - k0) <= step and abs(slope - h) <= 0.25 and dt < 10
    acceptance_record(2, "resonance", ok,
                      f"k_n0 {k0:.6f}, grid argmin {kmin:.4f}, gap slope {slope:.3f} (h={h}), {dt:.2f}s")
    assert ok


def test_criterion_3_foldy_vs_neumann(acceptance_record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    spectra = ball_spectral_data()
    eta = -2.5 + 0.3j
    worst, cases = 0.0, 0
    for M in (2, 3, 5, 8, 12, 16, 20):
        for _ in range(3):
            while True:
                cl = ParticleCluster(rng.uniform(-0.5, 0.5, (M, 3)), 0.01)
                if cl.spacing > 0.12:
                    break
            P_D = polarization_P_Di(spectra, eta, 0.03)
            _, margin = check_foldy_invertibility(cl, P_D, eta)
            if margin <= 0.5:
                P_D = P_D * (0.45 / (1.0 - margin))
            assert check_foldy_invertibility(cl, P_D, eta)[1] > 0.5
            sysm = assemble_foldy(cl, P_D, eta, WAVE)
            Q = solve_foldy(sysm).Q
            ref, _ = oracles.foldy_fixed_point(cl.centers, WAVE.k_background,
                                               np.broadcast_to(eta * P_D, (M, 3, 3)), sysm.rhs.reshape(M, 3))
            worst = max(worst, np.linalg.norm(Q - ref) / np.linalg.norm(ref))
            cases += 1
    one = ParticleCluster([[0.1, 0.2, 0.3]], 0.05)
    Q1 = solve_cluster(one, polarization_P_Di(spectra, eta, 0.05), eta, WAVE).Q
    exact_one = bool(np.array_equal(Q1, incident_field(WAVE, one.centers)))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and exact_one and dt < 10
    acceptance_record(3, "Foldy-Lax vs Neumann series", ok,
                      f"{cases} clusters, max rel error {worst:.2e}, M=1 exact {exact_one}, {dt:.2f}s")
    assert ok


def test_criterion_4_volterra(acceptance_record):
    t0 = time.perf_counter()
    params = MaterialParams(kappa_m=1.0, gamma_p=40.0, delta=0.05)
    three = ParticleCluster([[0, 0, 0], [0.6, 0.1, 0], [0.1, 0.5, 0.4]], 0.05)
    b = np.array([0.05, 0.08, 0.06])

    def F_for(M, tg, seed=0):
        amp = np.random.default_rng(seed).uniform(0.5, 1.5, M)
        return amp[:, None] * modulation_f(tg.nodes, Modulation(r=2, ell=tg.T, T=tg.T))[None, :]

    h1_ok = True

    def solve(cl, F, tg, bb):
        nonlocal h1_ok
        traj = march_volterra(cl, params, F, tg, b=bb)
        _, margin = check_heat_invertibility(cl, bb)
        h1_ok &= sigma_h1_bound_check(traj, F, margin).passed
        return traj.sigma

    tg = TimeGrid(1.0, 200)
    F = F_for(3, tg)
    sig = solve(three, F, tg, b)
    ref = oracles.volterra_dense_collocation(three.centers, b, 1.0, F, tg.T)
    rel = np.linalg.norm(sig - ref) / np.linalg.norm(ref)

    pair = ParticleCluster([[0, 0, 0], [0.5, 0, 0]], 0.05)
    sols = []
    for N in (50, 100, 200, 400):
        tgn = TimeGrid(1.0, N)
        sols.append(solve(pair, F_for(2, tgn, 3), tgn, 0.2))
    errs = [np.sqrt(np.sum((c - f[:, ::2]) ** 2) / c.shape[1]) for c, f in zip(sols[:-1], sols[1:])]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    dt = time.perf_counter() - t0
    ok = rel < 1e-6 and np.all((orders >= 1.7) & (orders <= 2.3)) and h1_ok and dt < 30
    acceptance_record(4, "Volterra marching", ok,
                      f"rel L2 vs dense {rel:.2e}, orders {np.round(orders, 3).tolist()}, "
                      f"H1 bound {'holds' if h1_ok else 'violated'}, {dt:.2f}s")
    assert ok


def test_criterion_5_crank_nicolson(acceptance_record):
    t0 = time.perf_counter()
    rel = crank_nicolson_comparison(b_bar=0.5, N_t=200)
    dt = time.perf_counter() - t0
    ok = rel < 0.05 and dt < 60
    acceptance_record(5, "effective heat vs Crank-Nicolson", ok, f"rel L2 {rel:.3e}, {dt:.2f}s")
    assert ok


def _restrict(E, n):
    m = n // 2
    return E.reshape(m, 2, m, 2, m, 2, 3).mean(axis=(1, 3, 5)).reshape(-1, 3)


def test_criterion_6_effective_maxwell(acceptance_record):
    t0 = time.perf_counter()
    box = DomainOmega("box", (0, 0, 0), 0.5)
    grid = build_grid(box, 0.25)
    free = solve_effective_maxwell(grid, np.zeros((3, 3)), WAVE)
    free_err = float(np.max(np.abs(free.E_f - incident_field(WAVE, grid.cell_centers))))

    A = (0.8 + 0.3j) * np.eye(3)
    sols = {n: solve_effective_maxwell(build_grid(box, 1.0 / n), A, WAVE).E_f for n in (2, 4, 8)}
    e1 = np.linalg.norm(_restrict(sols[4], 4) - sols[2])
    e2 = np.linalg.norm(_restrict(_restrict(sols[8], 8), 4) - _restrict(sols[4], 4))
    order = float(np.log2(e1 / e2))

    g2 = build_grid(box, 0.5)
    cl = ParticleCluster(g2.cell_centers, 0.05)
    eta = -2.9 + 0.05j
    P_D = polarization_P_Di(ball_spectral_data(), eta, 0.05)
    foldy = assemble_foldy(cl, P_D, eta, WAVE)
    mat, rhs = assemble_effective_maxwell(g2, np.zeros((3, 3)), WAVE, P_cell=eta * P_D)
    red = float(max(np.max(np.abs(mat - foldy.matrix)), np.max(np.abs(rhs - foldy.rhs))))
    dt = time.perf_counter() - t0
    ok = free_err <= 1e-12 and order >= 1.0 and red <= 1e-12 and dt < 30
    acceptance_record(6, "effective Maxwell", ok,
                      f"A_B=0 error {free_err:.1e}, self-convergence order {order:.2f}, "
                      f"Foldy reduction {red:.1e}, {dt:.2f}s")
    assert ok


def test_criterion_7_discrete_to_continuum(acceptance_record):
    t0 = time.perf_counter()
    rep = run_sweep(default_sweep_config(), (0.08, 0.05, 0.03))
    dt = time.perf_counter() - t0
    ok = (rep.strictly_decreasing("em") and rep.strictly_decreasing("heat")
          and rep.fitted_rates["em"] > 0 and rep.fitted_rates["heat"] > 0 and dt < 600)
    acceptance_record(7, "discrete to continuum", ok,
                      f"em errors {[f'{e:.3e}' for e in rep.em_errors]} (slope {rep.fitted_rates['em']:.2f}), "
                      f"heat errors {[f'{e:.3e}' for e in rep.heat_errors]} "
                      f"(slope {rep.fitted_rates['heat']:.2f}), {dt:.2f}s")
    assert ok


def test_criterion_8_gates(tmp_path, capsys, acceptance_record):
    t0 = time.perf_counter()
    data = json.loads(MINIMAL.read_text())
    heat = dict(data, material=dict(data["material"], gamma_p=2000.0))
    foldy = dict(data, wave=dict(data["wave"], c=0.3, c_zeta=0.3))
    results = []
    for name, cfg in (("heat", heat), ("foldy", foldy)):
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(cfg))
        code = main(["discrete", "--config", str(path), "--out", str(tmp_path / name)])
        err = capsys.readouterr().err
        nothing_written = not list((tmp_path / name).glob("*.csv"))
        forced = main(["discrete", "--config", str(path), "--out", str(tmp_path / name), "--force"])
        ferr = capsys.readouterr().err
        results.append(code == EXIT_GATE and "margin" in err and nothing_written
                       and forced == EXIT_OK and "--force" in ferr)
    dt = time.perf_counter() - t0
    ok = all(results) and dt < 5
    acceptance_record(8, "gate behaviour", ok, f"heat gate {results[0]}, Foldy gate {results[1]}, {dt:.2f}s")
    assert ok
