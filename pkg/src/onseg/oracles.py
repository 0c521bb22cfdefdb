"""Independent reference computations used to validate the numerical core.

Everything here is implemented from first principles, deliberately sharing
no code path with the kernels or learners it is used to check: matrix
inversion by explicit elimination, projections by exhaustive grid search,
and a one-round learner update chained together in scalar arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import BallSet, SimplexSet


def direct_inverse(A: np.ndarray) -> np.ndarray:
    """Matrix inverse by Gauss-Jordan elimination with partial pivoting.

    Raises if a pivot vanishes, if the 1-norm condition estimate reaches
    1e12, or if the self-residual ||A A^-1 - I||_max exceeds 1e-10.
    """
    A = np.array(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    n = A.shape[0]
    aug = np.hstack([A, np.eye(n)])
    for col in range(n):
        p = col + int(np.argmax(np.abs(aug[col:, col])))
        piv = aug[p, col]
        if abs(piv) < 1e-300:
            raise ValueError(f"matrix is singular to working precision at column {col}")
        if p != col:
            aug[[col, p]] = aug[[p, col]]
        aug[col] = aug[col] / piv
        factor = aug[:, col].copy()
        factor[col] = 0.0
        aug -= np.outer(factor, aug[col])
    inv = aug[:, n:]
    kappa = float(np.abs(A).sum(axis=0).max() * np.abs(inv).sum(axis=0).max())
    if kappa >= 1e12:
        raise ValueError(f"matrix too ill-conditioned to invert reliably: estimate {kappa:.3g}")
    residual = float(np.max(np.abs(A @ inv - np.eye(n))))
    if residual > 1e-10:
        raise ValueError(f"inverse failed its self-check: residual {residual:.3g}")
    return inv


@dataclass(frozen=True)
class QuadraticSpec:
    """f(x) = x^T Q x + b^T x + c with symmetric Q."""

    Q: np.ndarray
    b: np.ndarray
    c: float = 0.0


def quadratic_smoothed(spec: QuadraticSpec, x: np.ndarray, delta: float) -> tuple[float, np.ndarray]:
    """Closed-form ball-smoothed value and gradient of a quadratic.

    Averaging f over the delta-ball around x adds delta^2 tr(Q) / (d + 2)
    to the value and leaves the gradient unchanged.
    """
    Q = np.asarray(spec.Q, dtype=np.float64)
    b = np.asarray(spec.b, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[0]
    if Q.shape != (d, d):
        raise ValueError(f"expected Q of shape ({d}, {d}), got {Q.shape}")
    if float(np.max(np.abs(Q - Q.T))) > 1e-12 * max(1.0, float(np.max(np.abs(Q)))):
        raise ValueError("Q must be symmetric")
    if not (np.isfinite(delta) and delta > 0.0):
        raise ValueError(f"delta must be positive and finite, got {delta!r}")
    value = float(x @ Q @ x + b @ x + spec.c) + delta**2 * float(np.trace(Q)) / (d + 2.0)
    grad = 2.0 * (Q @ x) + b
    return value, grad


def grid_project_oracle(feasible_set, A: np.ndarray, y: np.ndarray, resolution: int):
    """Feasible-grid minimizer of the squared A-norm distance to y.

    Exhaustive search over ``resolution`` points per axis; supports
    dimensions up to 3.  Targets the gamma-shrunken set, matching the
    projection under test.  Returns (best_point, best_objective) where the
    objective is (y - x)^T A (y - x).
    """
    d = feasible_set.dim
    if d > 3:
        raise ValueError(f"grid oracle supports dimension <= 3, got {d}")
    if not isinstance(resolution, (int, np.integer)) or resolution < 2:
        raise ValueError(f"resolution must be an integer >= 2, got {resolution!r}")
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)

    def objective(points: np.ndarray) -> np.ndarray:
        diff = y[None, :] - points
        return np.einsum("ij,jk,ik->i", diff, A, diff)

    best_point = None
    best_obj = math.inf
    if isinstance(feasible_set, BallSet):
        R = feasible_set.effective_radius()
        axis = np.linspace(-R, R, resolution)
        grids = np.meshgrid(*([axis] * d), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        pts = pts[np.linalg.norm(pts, axis=1) <= R]
        obj = objective(pts)
        k = int(np.argmin(obj))
        best_point, best_obj = pts[k], float(obj[k])
    elif isinstance(feasible_set, SimplexSet):
        lower = feasible_set.lower_bound()
        hi = 1.0 - (d - 1) * lower
        axis = np.linspace(lower, hi, resolution)
        grids = np.meshgrid(*([axis] * (d - 1)), indexing="ij")
        head = np.stack([g.ravel() for g in grids], axis=1)
        tail = 1.0 - head.sum(axis=1)
        keep = tail >= lower - 1e-15
        pts = np.hstack([head[keep], tail[keep, None]])
        obj = objective(pts)
        k = int(np.argmin(obj))
        best_point, best_obj = pts[k], float(obj[k])
    else:
        raise TypeError(f"unsupported feasible set {type(feasible_set).__name__}")
    return best_point, best_obj


def _inv2(a11: float, a12: float, a22: float):
    det = a11 * a22 - a12 * a12
    if det <= 0.0:
        raise ValueError("2x2 matrix is not positive definite")
    return a22 / det, -a12 / det, a11 / det


def single_step_chain(schedule, y, v, fval: float):
    """One estimate/update/project round on a ball set in scalar arithmetic.

    Reference for the first learner round: forms the gradient estimate from
    (fval, v), performs the rank-one curvature update from epsilon * I,
    takes the Newton step, and projects onto the (1 - gamma)-scaled ball
    under the updated matrix via bisection on the constraint multiplier.
    Dimensions 1 and 2 only.
    """
    y = [float(c) for c in y]
    v = [float(c) for c in v]
    d = len(y)
    if d not in (1, 2) or len(v) != d:
        raise ValueError("chain oracle supports dimensions 1 and 2")
    delta, beta, eps, gamma = schedule.delta, schedule.beta, schedule.epsilon, schedule.gamma
    radius = (1.0 - gamma) * schedule.D / 2.0
    g = [(d / delta) * float(fval) * c for c in v]
    if d == 1:
        a11 = eps + g[0] * g[0]
        z = [y[0] - (1.0 / beta) * (g[0] / a11)]

        def x_of(lam: float):
            return [a11 * z[0] / (a11 + lam)]
    else:
        a11 = eps + g[0] * g[0]
        a12 = g[0] * g[1]
        a22 = eps + g[1] * g[1]
        i11, i12, i22 = _inv2(a11, a12, a22)
        z = [
            y[0] - (1.0 / beta) * (i11 * g[0] + i12 * g[1]),
            y[1] - (1.0 / beta) * (i12 * g[0] + i22 * g[1]),
        ]
        b1 = a11 * z[0] + a12 * z[1]
        b2 = a12 * z[0] + a22 * z[1]

        def x_of(lam: float):
            j11, j12, j22 = _inv2(a11 + lam, a12, a22 + lam)
            return [j11 * b1 + j12 * b2, j12 * b1 + j22 * b2]

    def norm(p):
        return math.sqrt(sum(c * c for c in p))

    if norm(z) <= radius:
        return z
    lo, hi = 0.0, 1.0
    while norm(x_of(hi)) > radius:
        hi *= 2.0
        if hi > 1e300:
            raise RuntimeError("bisection failed to bracket the multiplier")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if norm(x_of(mid)) > radius:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * hi:
            break
    return x_of(0.5 * (lo + hi))
