"""Cluster geometry: the domain, the periodic lattice and pairwise sums."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

BALL_VOLUME = 4.0 * math.pi / 3.0


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class DomainOmega:
    """Axis-aligned box (``extent`` = half-width) or ball (``extent`` = radius)."""

    kind: str = "box"
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    extent: float = 0.5

    def __post_init__(self) -> None:
        if self.kind not in ("box", "ball"):
            raise GeometryError(f"unknown domain kind {self.kind!r}")
        if not self.extent > 0:
            raise GeometryError("domain extent must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if abs(self.volume - 1.0) > 0.5:
            warnings.warn(f"domain volume {self.volume:.3g} far from unit volume", stacklevel=2)

    @property
    def volume(self) -> float:
        if self.kind == "box":
            return (2.0 * self.extent) ** 3
        return BALL_VOLUME * self.extent**3

    @property
    def diameter(self) -> float:
        return 2.0 * self.extent * (math.sqrt(3.0) if self.kind == "box" else 1.0)

    def contains(self, x) -> np.ndarray | bool:
        """Closed-set membership; vectorised over ``(..., 3)`` arrays."""
        rel = np.asarray(x, dtype=float) - np.asarray(self.center)
        if self.kind == "box":
            inside = np.all(np.abs(rel) <= self.extent, axis=-1)
        else:
            inside = np.einsum("...i,...i->...", rel, rel) <= self.extent**2
        return inside if np.ndim(inside) else bool(inside)

    def distance_outside(self, x) -> np.ndarray:
        """Euclidean distance from points to the domain (0 inside)."""
        rel = np.asarray(x, dtype=float) - np.asarray(self.center)
        if self.kind == "box":
            excess = np.maximum(np.abs(rel) - self.extent, 0.0)
            return np.linalg.norm(excess, axis=-1)
        return np.maximum(np.linalg.norm(rel, axis=-1) - self.extent, 0.0)


@dataclass(frozen=True, eq=False)
class ParticleCluster:
    """Particle centers with radius ``delta`` and a reference shape.

    ``d`` is the surface-to-surface minimum distance and ``spacing`` the
    minimum center distance; coupling kernels always use center distances.
    """

    centers: np.ndarray
    delta: float
    shape_id: str = "ball"
    vol_B: float = BALL_VOLUME

    def __post_init__(self) -> None:
        c = np.array(self.centers, dtype=float).reshape(-1, 3)
        if c.shape[0] < 1:
            raise GeometryError("a cluster needs at least one particle")
        if not np.all(np.isfinite(c)):
            raise GeometryError("non-finite particle center")
        if not self.delta > 0:
            raise GeometryError("delta must be positive")
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)
        if c.shape[0] > 1 and self.spacing <= 2.0 * self.delta:
            raise GeometryError(
                f"particles overlap: min center distance {self.spacing:.4g} <= 2*delta={2 * self.delta:.4g}")

    @property
    def M(self) -> int:
        return self.centers.shape[0]

    @cached_property
    def spacing(self) -> float:
        if self.M < 2:
            return math.inf
        return float(np.sqrt(_min_sq_distance(self.centers)))

    @property
    def d(self) -> float:
        return self.spacing - 2.0 * self.delta

    @property
    def particle_volume(self) -> float:
        return self.vol_B * self.delta**3


def _min_sq_distance(c: np.ndarray) -> float:
    dist, _ = cKDTree(c).query(c, k=2)
    return float(np.min(dist[:, 1])) ** 2


def cell_lattice(omega: DomainOmega, d: float) -> np.ndarray:
    """Centroids of the cubic cells of side ``d`` lying wholly inside ``omega``.

    The lattice is symmetric about the domain center and ordered
    lexicographically in (x, y, z) with z varying fastest.
    """
    if not d > 0:
        raise GeometryError("cell size must be positive")
    n = int(math.floor(2.0 * omega.extent / d + 1e-9))
    if n < 1:
        raise GeometryError(f"no cell of side {d:.4g} fits in the domain")
    ax = (np.arange(n) - (n - 1) / 2.0) * d
    grid = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
    centers = grid + np.asarray(omega.center)
    if omega.kind == "ball":
        # A cube is inside a ball iff all eight corners are.
        corners = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]) * (d / 2.0)
        rel = grid[:, None, :] + corners[None, :, :]
        keep = np.all(np.sum(rel**2, axis=-1) <= omega.extent**2 * (1 + 1e-12), axis=1)
        centers = centers[keep]
    if len(centers) == 0:
        raise GeometryError(f"no cell of side {d:.4g} fits in the domain")
    return centers


def lattice_spacing(delta: float, beta: float) -> float:
    return delta ** (1.0 - beta / 3.0)


def lattice_cluster(omega: DomainOmega, delta: float, beta: float) -> ParticleCluster:
    """One particle at the centroid of each lattice cell of side ``delta**(1 - beta/3)``."""
    d = lattice_spacing(delta, beta)
    if d <= 2.0 * delta:
        raise GeometryError(f"cell side {d:.4g} does not exceed the particle diameter {2 * delta:.4g}")
    return ParticleCluster(cell_lattice(omega, d), delta)


def min_distance(cluster: ParticleCluster) -> float:
    """Minimum surface-to-surface distance ``min |z_i - z_j| - 2 delta``."""
    if cluster.M < 2:
        raise GeometryError("min_distance needs at least two particles")
    return cluster.d


def pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.sqrt(np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=-1))


def pairwise_kernel_sums(cluster: ParticleCluster | np.ndarray, p: float, chunk: int = 1024) -> float:
    """``max_i sum_{j != i} |z_i - z_j|**(-p)``; 0 for a single particle."""
    c = cluster.centers if isinstance(cluster, ParticleCluster) else np.asarray(cluster, dtype=float)
    if len(c) < 2:
        return 0.0
    best = 0.0
    for s in range(0, len(c), chunk):
        r = pairwise_distances(c[s:s + chunk], c)
        r[np.arange(r.shape[0]), np.arange(s, s + r.shape[0])] = np.inf
        best = max(best, float(np.max(np.sum(r ** (-p), axis=1))))
    return best
