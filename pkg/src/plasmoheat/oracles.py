"""Independent reference computations used to validate the solvers.

Each oracle is written from scratch against a different formulation than the
production code it checks (adaptive quadrature instead of closed forms,
global solves instead of time marching, finite differences instead of
integral operators).  They are deliberately simple and slow.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy import integrate, sparse
from scipy.sparse import linalg as spla
from scipy.special import erfc


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

def gaussian_mass(kernel: Callable[[np.ndarray, float, np.ndarray, float, float], float],
                  kappa_m: float, t: float) -> float:
    """Spatial integral of ``kernel(x, t; 0, 0)`` over R^3 by adaptive radial quadrature."""
    origin = np.zeros(3)

    def integrand(r: float) -> float:
        return 4.0 * np.pi * r * r * kernel(np.array([r, 0.0, 0.0]), t, origin, 0.0, kappa_m)

    # The Gaussian is negligible beyond ~40 standard deviations.
    width = np.sqrt(2.0 * t / kappa_m)
    val, _ = integrate.quad(integrand, 0.0, 40.0 * width, epsabs=0.0, epsrel=1e-13, limit=400)
    return float(val)


def fd_hessian(func: Callable[[np.ndarray], complex], x: np.ndarray, step: float) -> np.ndarray:
    """Central-difference Hessian of a scalar function of a 3-vector."""
    x = np.asarray(x, dtype=float)
    H = np.zeros((3, 3), dtype=complex)
    e = np.eye(3) * step
    for i in range(3):
        for j in range(i, 3):
            if i == j:
                val = (func(x + e[i]) - 2.0 * func(x) + func(x - e[i])) / step**2
            else:
                val = (func(x + e[i] + e[j]) - func(x + e[i] - e[j])
                       - func(x - e[i] + e[j]) + func(x - e[i] - e[j])) / (4.0 * step**2)
            H[i, j] = H[j, i] = val
    return H


def fd_laplacian(func: Callable[[np.ndarray], complex], x: np.ndarray, step: float) -> complex:
    """Seven-point finite-difference Laplacian."""
    x = np.asarray(x, dtype=float)
    acc = -6.0 * func(x)
    for i in range(3):
        e = np.zeros(3)
        e[i] = step
        acc += func(x + e) + func(x - e)
    return acc / step**2


# ---------------------------------------------------------------------------
# shape spectra
# ---------------------------------------------------------------------------

def _sphere_rule(n_theta: int, n_phi: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre in cos(theta) times trapezoid in phi on the unit sphere."""
    x, w = np.polynomial.legendre.leggauss(n_theta)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1.0 - x * x)
    pts = np.stack([
        np.outer(st, np.cos(phi)), np.outer(st, np.sin(phi)), np.outer(x, np.ones_like(phi))
    ], axis=-1).reshape(-1, 3)
    wts = np.outer(w, np.full(n_phi, 2.0 * np.pi / n_phi)).reshape(-1)
    return pts, wts


def _harmonic_basis():
    """Harmonic polynomials of degree 1 and 2 with their gradients."""
    lin = [
        (lambda p, i=i: p[..., i], lambda p, i=i: np.broadcast_to(np.eye(3)[i], p.shape))
        for i in range(3)
    ]

    def quad(Q):
        return (lambda p: np.einsum("...i,ij,...j->...", p, Q, p),
                lambda p: 2.0 * p @ Q)

    mats = []
    for i, j in ((0, 1), (0, 2), (1, 2)):
        Q = np.zeros((3, 3))
        Q[i, j] = Q[j, i] = 0.5
        mats.append(Q)
    mats.append(np.diag([1.0, -1.0, 0.0]))
    mats.append(np.diag([1.0, 1.0, -2.0]))
    return lin + [quad(Q) for Q in mats]


def ball_magnetization_spectrum(n_theta: int = 40, n_phi: int = 80) -> dict:
    """Galerkin eigen-oracle for the magnetization operator on the unit ball.

    On gradients of harmonic functions the operator ``grad int_B grad G . F``
    equals ``-grad S[d_nu u]`` with ``S`` the single layer on the sphere.
    ``S[d_nu u]`` is evaluated by quadrature at interior points and projected
    back onto the harmonic basis, giving the matrix of the (sign-flipped)
    operator.  Returns sorted eigenvalues and the Gram matrix of the moments
    of the unit-norm eigenmodes belonging to the smallest eigenvalue.
    """
    basis = _harmonic_basis()
    ys, wy = _sphere_rule(n_theta, n_phi)
    rng = np.random.default_rng(0)
    xs = rng.uniform(-1, 1, size=(400, 3))
    xs = xs[np.linalg.norm(xs, axis=1) < 0.6][:120]
    G = 1.0 / (4.0 * np.pi * np.linalg.norm(xs[:, None, :] - ys[None, :, :], axis=-1))
    # Values of S[d_nu u_b] at xs; d_nu u = grad u . y on the unit sphere.
    S_vals = np.stack([G @ (wy * np.sum(grad(ys) * ys, axis=1)) for _, grad in basis], axis=1)
    B = np.stack([u(xs) for u, _ in basis], axis=1)
    B1 = np.hstack([B, np.ones((len(xs), 1))])  # constants carry no gradient
    coef, *_ = np.linalg.lstsq(B1, S_vals, rcond=None)
    T = coef[:-1, :]  # S[d_nu u_b] = sum_a T[a, b] u_a (+ const)
    evals, evecs = np.linalg.eig(T)
    order = np.argsort(evals.real)
    evals, evecs = evals.real[order], evecs.real[:, order]

    # Moments of unit-L2 modes for the smallest eigenvalue cluster, by ball quadrature.
    rg, wr = np.polynomial.legendre.leggauss(20)
    r = 0.5 * (rg + 1.0)
    wr = 0.5 * wr * r * r
    vol_pts = (r[:, None, None] * ys[None, :, :]).reshape(-1, 3)
    vol_w = (wr[:, None] * wy[None, :]).reshape(-1)
    grads = np.stack([grad(vol_pts) for _, grad in basis], axis=0)  # (nb, N, 3)
    lam0 = evals[0]
    cluster = np.where(np.abs(evals - lam0) < 1e-6)[0]
    gram = np.zeros((3, 3))
    # Orthonormalise the resonant eigenvectors in L2(B) of their gradients.
    F = np.einsum("ab,anj->bnj", evecs[:, cluster], grads)
    Gm = np.einsum("bnj,cnj,n->bc", F, F, vol_w)
    L = np.linalg.cholesky(Gm)
    Fo = np.einsum("bc,cnj->bnj", np.linalg.inv(L), F)
    for f in Fo:
        v = np.einsum("nj,n->j", f, vol_w)
        gram += np.outer(v, v)
    return {"eigenvalues": evals, "multiplicity": len(cluster), "gram": gram,
            "volume": float(np.sum(vol_w))}


def ball_newtonian_hessian(step: float = 1e-2) -> np.ndarray:
    """Hessian at the center of the Newtonian potential of the unit ball.

    The potential at ``x`` is the radial integral over spherical shells,
    ``int_0^1 rho^2 min(1/|x|, 1/rho) d rho`` (shell theorem), evaluated by
    adaptive quadrature and differentiated by central differences.
    """
    def potential(x: np.ndarray) -> float:
        nx = float(np.linalg.norm(x))
        f = lambda rho: rho * rho * min(1.0 / max(nx, 1e-300), 1.0 / rho)
        pts = [nx] if 0.0 < nx < 1.0 else None
        val, _ = integrate.quad(f, 0.0, 1.0, points=pts, epsabs=1e-14, epsrel=1e-12)
        return val

    return fd_hessian(potential, np.zeros(3), step).real


def cube_newtonian_hessian(n: int = 24) -> np.ndarray:
    """Hessian at the center of the Newtonian potential of the unit cube.

    Uses ``Hess_ij = -int_{boundary} y_i nu_j / (4 pi |y|^3) dS``, whose
    integrand is smooth on each face, with tensor Gauss-Legendre per face.
    """
    g, w = np.polynomial.legendre.leggauss(n)
    g = 0.5 * g
    w = 0.5 * w
    U, V = np.meshgrid(g, g, indexing="ij")
    W = np.outer(w, w)
    H = np.zeros((3, 3))
    for ax in range(3):
        others = [a for a in range(3) if a != ax]
        for sign in (-1.0, 1.0):
            y = np.zeros(U.shape + (3,))
            y[..., ax] = 0.5 * sign
            y[..., others[0]] = U
            y[..., others[1]] = V
            r3 = np.linalg.norm(y, axis=-1) ** 3
            for i in range(3):
                H[i, ax] -= np.sum(W * y[..., i] * sign / (4.0 * np.pi * r3))
    return H


# ---------------------------------------------------------------------------
# Foldy-Lax
# ---------------------------------------------------------------------------

def foldy_fixed_point(centers: np.ndarray, k: float, couplings: np.ndarray, rhs: np.ndarray,
                      tol: float = 1e-14, maxiter: int = 10_000) -> tuple[np.ndarray, int]:
    """Neumann-series solution of ``Q_i - sum_{j != i} Upsilon(z_i, z_j) C_j Q_j = rhs_i``.

    Iterates ``Q <- rhs + sum_{j != i} Upsilon C_j Q_j``.  The dyadic kernel is
    rebuilt pair by pair from the radial derivatives ``G'`` and ``G''`` of
    the scalar Green's function, independently of the production kernel.
    """
    M = len(centers)
    T = np.zeros((M, M, 3, 3), dtype=complex)
    for i in range(M):
        for j in range(M):
            if i == j:
                continue
            d = centers[i] - centers[j]
            r = float(np.sqrt(d @ d))
            u = d / r
            g = np.exp(1j * k * r) / (4 * np.pi * r)
            dg = g * (1j * k - 1 / r)               # G'(r)
            d2g = g * ((1j * k - 1 / r) ** 2 + 1 / r**2)  # G''(r)
            hess = d2g * np.outer(u, u) + dg / r * (np.eye(3) - np.outer(u, u))
            T[i, j] = (hess + k * k * g * np.eye(3)) @ couplings[j]
    Q = rhs.copy()
    for it in range(1, maxiter + 1):
        Qn = rhs + np.einsum("ijab,jb->ia", T, Q)
        if np.max(np.abs(Qn - Q)) <= tol * max(1.0, np.max(np.abs(Qn))):
            return Qn, it
        Q = Qn
    return Q, maxiter


# ---------------------------------------------------------------------------
# Volterra system
# ---------------------------------------------------------------------------

def volterra_dense_collocation(centers: np.ndarray, b: np.ndarray, kappa_m: float,
                               F: np.ndarray, T: float) -> np.ndarray:
    """Global space-time solve of the piecewise-linear collocation equations.

    Builds the full ``(M N_t) x (M N_t)`` lower block-triangular matrix with
    lag weights from the closed-form time antiderivative
    ``kappa/(4 pi r) erfc(r sqrt(kappa) / (2 sqrt(s)))`` and solves it at once.
    """
    M, n_nodes = F.shape
    N = n_nodes - 1
    dt = T / N

    def antiderivative(r, s):
        return 0.0 if s <= 0 else kappa_m / (4 * np.pi * r) * erfc(r * np.sqrt(kappa_m) / (2 * np.sqrt(s)))

    wts = np.zeros((N, M, M))
    for i in range(M):
        for j in range(M):
            if i == j:
                continue
            r = float(np.linalg.norm(centers[i] - centers[j]))
            for lag in range(N):
                wts[lag, i, j] = (antiderivative(r, (lag + 1) * dt) - antiderivative(r, lag * dt)) / dt
    A = np.zeros((N * M, N * M))
    idx = lambda n, i: (n - 1) * M + i  # unknown sigma_i at node n >= 1
    for n in range(1, N + 1):
        for i in range(M):
            row = idx(n, i)
            A[row, row] += 1.0
            for m in range(1, n + 1):
                lag = n - m
                for j in range(M):
                    c = b[j] * wts[lag, i, j]
                    if c == 0.0:
                        continue
                    A[row, idx(m, j)] += c
                    if m > 1:
                        A[row, idx(m - 1, j)] -= c
    rhs = F[:, 1:].T.reshape(-1)
    sol = np.linalg.solve(A, rhs).reshape(N, M).T
    return np.hstack([np.zeros((M, 1)), sol])


# ---------------------------------------------------------------------------
# effective heat equation
# ---------------------------------------------------------------------------

def crank_nicolson_parabolic(omega_half_width: float, b_bar: float, kappa_m: float, source,
                             T: float, n_steps: int, box_half_width: float = 2.0, n_grid: int = 48,
                             tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Crank-Nicolson solve of ``(kappa + kappa b_bar chi) d_t W - Lap W = -kappa b_bar chi F``.

    Cell-centred grid of ``n_grid**3`` nodes on ``[-L, L]**3`` with zero
    Dirichlet data, ``chi`` the indicator of the centred cube of half-width
    ``omega_half_width`` and ``source(x, t)`` the value of ``F`` at nodes
    ``x`` (shape ``(n, 3)``) and time ``t``.  Each step is solved by
    conjugate gradients.  Returns the node coordinates and ``W`` at every
    step, shape ``(n_steps + 1, n_grid**3)``.
    """
    h = 2.0 * box_half_width / n_grid
    ax = -box_half_width + (np.arange(n_grid) + 0.5) * h
    X = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
    chi = np.all(np.abs(X) < omega_half_width, axis=1).astype(float)
    one_d = sparse.diags([np.ones(n_grid - 1), -2.0 * np.ones(n_grid), np.ones(n_grid - 1)], [-1, 0, 1]) / h**2
    eye = sparse.identity(n_grid)
    lap = (sparse.kron(sparse.kron(one_d, eye), eye) + sparse.kron(sparse.kron(eye, one_d), eye)
           + sparse.kron(sparse.kron(eye, eye), one_d)).tocsr()
    dt = T / n_steps
    cap = kappa_m * (1.0 + b_bar * chi) / dt
    lhs = (sparse.diags(cap) - 0.5 * lap).tocsr()
    rhs_op = (sparse.diags(cap) + 0.5 * lap).tocsr()
    precond = sparse.diags(1.0 / lhs.diagonal())
    inside = chi > 0
    W = np.zeros((n_steps + 1, len(X)))
    f_prev = np.zeros(len(X))
    f_prev[inside] = source(X[inside], 0.0)
    for n in range(n_steps):
        f_next = np.zeros(len(X))
        f_next[inside] = source(X[inside], (n + 1) * dt)
        rhs = rhs_op @ W[n] - kappa_m * b_bar * chi * 0.5 * (f_prev + f_next)
        sol, info = spla.cg(lhs, rhs, x0=W[n], rtol=tol, atol=0.0, M=precond, maxiter=2000)
        if info != 0:
            raise RuntimeError("conjugate gradients did not converge")
        W[n + 1] = sol
        f_prev = f_next
    return X, W
