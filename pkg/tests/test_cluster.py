import itertools
import math

import numpy as np
import pytest

from plasmoheat.cluster import (
    DomainOmega,
    GeometryError,
    ParticleCluster,
    lattice_cluster,
    lattice_spacing,
    min_distance,
    pairwise_kernel_sums,
)

UNIT_BOX = DomainOmega("box", (0, 0, 0), 0.5)


def test_lattice_count_unit_box():
    delta, beta = 0.04, 1.9
    cl = lattice_cluster(UNIT_BOX, delta, beta)
    d = delta ** (1 - beta / 3)
    assert cl.M == math.floor(1 / d) ** 3
    # regular grid: all coordinates lie on a common progression of step d
    for ax in range(3):
        vals = np.unique(np.round(cl.centers[:, ax], 12))
        np.testing.assert_allclose(np.diff(vals), d, rtol=1e-10)


def test_lattice_disjointness_error():
    with pytest.raises(GeometryError):
        lattice_cluster(UNIT_BOX, 0.45, 1.9)


def test_lattice_deterministic():
    a = lattice_cluster(UNIT_BOX, 0.05, 1.9)
    b = lattice_cluster(UNIT_BOX, 0.05, 1.9)
    np.testing.assert_array_equal(a.centers, b.centers)


def test_lattice_strictly_inside_and_distinct():
    cl = lattice_cluster(UNIT_BOX, 0.03, 1.9)
    assert np.all(np.abs(cl.centers) < 0.5)
    assert len(np.unique(np.round(cl.centers, 12), axis=0)) == cl.M


def test_density_tends_to_volume():
    ratios = []
    for delta in (5e-4, 2.5e-4, 1.25e-4):
        cl = lattice_cluster(UNIT_BOX, delta, 1.9)
        ratios.append(cl.M * lattice_spacing(delta, 1.9) ** 3)
    assert all(abs(r - 1.0) < 0.2 for r in ratios)


def test_min_distance_examples():
    cl = ParticleCluster([[0, 0, 0], [1, 0, 0]], 0.1)
    assert min_distance(cl) == pytest.approx(0.8, abs=1e-15)
    lat = lattice_cluster(UNIT_BOX, 0.05, 1.9)
    assert min_distance(lat) == pytest.approx(lattice_spacing(0.05, 1.9) - 0.1, abs=1e-12)
    with pytest.raises(GeometryError):
        min_distance(ParticleCluster([[0, 0, 0]], 0.1))


def test_overlap_rejected():
    with pytest.raises(GeometryError):
        ParticleCluster([[0, 0, 0], [0.15, 0, 0]], 0.1)


def test_pairwise_sums_small():
    assert pairwise_kernel_sums(ParticleCluster([[0, 0, 0]], 0.1), 2) == 0.0
    assert pairwise_kernel_sums(ParticleCluster([[0, 0, 0], [2, 0, 0]], 0.1), 2) == pytest.approx(0.25)


def test_pairwise_sums_brute_force():
    pts = np.array(list(itertools.product(range(3), repeat=3)), dtype=float)
    best = 0.0
    for i in range(len(pts)):
        s = 0.0
        for j in range(len(pts)):
            if i != j:
                s += 1.0 / float(np.sum((pts[i] - pts[j]) ** 2))
        best = max(best, s)
    assert pairwise_kernel_sums(ParticleCluster(pts, 0.1), 2) == pytest.approx(best, rel=1e-13)


def test_pairwise_sums_scale_like_inverse_volume():
    deltas = np.array([0.01, 0.005, 0.0025, 0.00125])
    ds, sums = [], []
    for delta in deltas:
        cl = lattice_cluster(UNIT_BOX, delta, 1.9)
        ds.append(lattice_spacing(delta, 1.9))
        sums.append(pairwise_kernel_sums(cl, 2))
    slope = np.polyfit(np.log(ds), np.log(sums), 1)[0]
    assert abs(slope + 3) <= 0.3


def test_ball_domain_cells_match_brute_force():
    omega = DomainOmega("ball", (0, 0, 0), 0.5)
    from plasmoheat.cluster import cell_lattice
    d = 0.2
    got = cell_lattice(omega, d)
    count = 0
    n = 5  # floor(1.0 / 0.2)
    for i, j, k in itertools.product(range(n), repeat=3):
        c = (np.array([i, j, k]) - (n - 1) / 2) * d
        ok = True
        for corner in itertools.product((-d / 2, d / 2), repeat=3):
            if np.linalg.norm(c + np.array(corner)) > 0.5 + 1e-12:
                ok = False
        count += ok
    assert len(got) == count


def test_domain_contains_closed():
    assert UNIT_BOX.contains([0.5, 0.0, -0.5])
    assert not UNIT_BOX.contains([0.5000001, 0, 0])
    assert UNIT_BOX.distance_outside(np.array([[1.0, 0, 0]]))[0] == pytest.approx(0.5)
