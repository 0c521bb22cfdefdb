"""Pure NumPy implementations of the per-round numerical kernels.

Mirrors the API of the compiled extension module ``onseg._kernels``; the
active implementation is chosen in ``onseg.backend``.  All functions assume
float64 C-contiguous arrays and symmetric positive definite matrices where
one is expected.
"""

from __future__ import annotations

import math

import numpy as np

NAME = "python"

_EPS = float(np.finfo(np.float64).eps)


def smw_update(A, A_inv, g):
    """Rank-one update of a matrix and its inverse, in place.

    A gains the outer product g g^T; A_inv is corrected with the
    Sherman-Morrison identity.  Returns the denominator 1 + g^T A_inv g,
    which is positive for any positive definite A.
    """
    Ag = A_inv @ g
    denom = 1.0 + float(g @ Ag)
    if denom <= 0.0:
        raise ValueError(
            f"rank-one update denominator {denom:.6g} <= 0; inverse state is corrupted"
        )
    A += np.outer(g, g)
    A_inv -= np.outer(Ag, Ag) / denom
    return denom


def refresh_inverse(A, A_inv):
    """Recompute A_inv from A by a direct solve, in place, resymmetrized."""
    fresh = np.linalg.inv(A)
    A_inv[:] = 0.5 * (fresh + fresh.T)


def ball_project_anorm(A, z, radius):
    """Projection of z onto the origin-centered ball under the A-norm.

    Solves argmin ||z - x||_A over ||x|| <= radius.  Interior points are
    returned unchanged; otherwise the KKT multiplier of the norm constraint
    is located by a safeguarded Newton iteration in the eigenbasis of A.
    """
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    nz = float(np.linalg.norm(z))
    if nz <= radius:
        return z.copy()
    s, Q = np.linalg.eigh(A)
    if s[0] <= 0.0:
        raise ValueError("matrix is not positive definite")
    c = s * (Q.T @ z)  # eigen coordinates of A z
    lo = 0.0
    hi = float(np.linalg.norm(c)) / radius  # ||p(hi)|| <= radius by construction
    lam = 0.0
    for _ in range(200):
        p = c / (s + lam)
        p2 = p * p
        pn = math.sqrt(float(p2.sum()))
        if abs(pn - radius) <= 1e-13 * radius:
            break
        if pn > radius:
            lo = lam
        else:
            hi = lam
        if hi - lo <= _EPS * hi:
            break
        # Newton step on 1/||p(lam)|| - 1/radius, bisection when it leaves the bracket
        w = float((p2 / (s + lam)).sum())
        cand = lam + (pn * pn / w) * ((pn - radius) / radius)
        lam = cand if lo < cand < hi else 0.5 * (lo + hi)
    x = Q @ (c / (s + lam))
    nx = float(np.linalg.norm(x))
    if nx > radius:
        x *= radius / nx
    return x


def simplex_project_euclid(v, lower):
    """Euclidean projection onto {x : x_i >= lower, sum x_i = 1}.

    Sort-based threshold search; exact up to floating point in O(d log d).
    """
    d = v.shape[0]
    mass = 1.0 - d * lower
    if mass <= 0.0:
        raise ValueError("lower bound leaves no feasible mass on the simplex")
    u = v - lower
    us = np.sort(u)[::-1]
    cssv = np.cumsum(us) - mass
    ind = np.arange(1, d + 1)
    rho = int(np.nonzero(us * ind > cssv)[0][-1])
    theta = cssv[rho] / (rho + 1.0)
    return np.maximum(u - theta, 0.0) + lower


def simplex_project_anorm(A, z, lower, x0, tol, max_iter):
    """Projection of z onto {x : x_i >= lower, sum x_i = 1} under the A-norm.

    Accelerated projected gradient with function-value restarts, warm-started
    from x0 when given.  Stops when the linear-minimization (Frank-Wolfe) gap
    of the quadratic objective falls below tol or a floating-point floor.
    Returns (x, gap, iterations, converged).
    """
    d = z.shape[0]
    L = float(np.max(np.sum(np.abs(A), axis=1)))  # upper bound on the top eigenvalue
    if not L > 0.0:
        raise ValueError("matrix has no positive row sum; not positive definite")
    x = simplex_project_euclid(z if x0 is None else x0, lower)
    y = x
    t_k = 1.0
    q_prev = math.inf
    gap = math.inf
    for it in range(1, max_iter + 1):
        diff = x - z
        grad = A @ diff
        q_x = 0.5 * float(diff @ grad)
        j = int(np.argmin(grad))
        lin = lower * float(grad.sum()) + (1.0 - d * lower) * float(grad[j])
        gap = float(grad @ x) - lin
        floor = 64.0 * _EPS * (2.0 * float(np.max(np.abs(grad))) + abs(q_x))
        if gap <= max(tol, floor):
            return x, gap, it, True
        if q_x > q_prev:
            # objective went up: drop momentum, next step is plain projected gradient
            y = x
            t_k = 1.0
        q_prev = q_x
        gy = grad if y is x else A @ (y - z)
        x_new = simplex_project_euclid(y - gy / L, lower)
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_k * t_k))
        y = x_new + ((t_k - 1.0) / t_next) * (x_new - x)
        x = x_new
        t_k = t_next
    return x, gap, max_iter, False
