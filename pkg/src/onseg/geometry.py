"""Feasible sets, uniform sampling, and Euclidean / matrix-norm projections.

Two feasible geometries are supported: an origin-centered Euclidean ball and
the probability simplex.  Each carries a shrink factor ``gamma``; the
shrunken set is the original contracted by (1 - gamma) toward its center, so
that a margin of gamma times the inscribed radius is kept free for
exploration perturbations.

Membership tests allow a relative slack of 1e-12 on the ball norm and an
absolute slack of 1e-9 on the simplex mass so that projection outputs, exact
up to floating point, always pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .backend import kernels
from .errors import ProjectionError

_BALL_RTOL = 1e-12
_SIMPLEX_SUM_ATOL = 1e-9
_SIMPLEX_COORD_ATOL = 1e-12


def sample_unit_sphere(d: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform point on the unit sphere in R^d.

    Draws d standard normals and normalizes; the zero draw is resampled.
    """
    if not isinstance(d, (int, np.integer)) or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d!r}")
    while True:
        v = rng.standard_normal(d)
        n = float(np.linalg.norm(v))
        if n > 0.0:
            return v / n


def sample_unit_ball(d: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform point in the closed unit ball in R^d.

    A sphere sample scaled by U^(1/d); consumes d normals then one uniform.
    """
    v = sample_unit_sphere(d, rng)
    return v * rng.random() ** (1.0 / d)


@dataclass(frozen=True)
class BallSet:
    """Origin-centered Euclidean ball of radius ``radius`` (= half the diameter).

    ``inner_radius`` is the radius of the largest centered ball assumed to fit
    inside the feasible region for exploration purposes; it must not exceed
    ``radius``.
    """

    dim: int
    radius: float
    inner_radius: float
    gamma: float = 0.0

    def __post_init__(self):
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.dim!r}")
        if not (np.isfinite(self.radius) and self.radius > 0.0):
            raise ValueError(f"radius must be positive and finite, got {self.radius!r}")
        if not (0.0 < self.inner_radius <= self.radius):
            raise ValueError(
                f"inner radius must lie in (0, radius], got {self.inner_radius!r}"
            )
        if not (0.0 <= self.gamma < 1.0):
            raise ValueError(f"shrink factor must lie in [0, 1), got {self.gamma!r}")

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    @property
    def inradius(self) -> float:
        return self.inner_radius

    @property
    def perturbation_dim(self) -> int:
        return self.dim

    @property
    def center(self) -> np.ndarray:
        return np.zeros(self.dim)

    def effective_radius(self, full: bool = False) -> float:
        return self.radius if full else (1.0 - self.gamma) * self.radius

    def contains(self, x: np.ndarray, full: bool = False) -> bool:
        r = self.effective_radius(full)
        return float(np.linalg.norm(x)) <= r * (1.0 + _BALL_RTOL)

    def sample_direction(self, rng: np.random.Generator) -> np.ndarray:
        return sample_unit_sphere(self.dim, rng)

    def euclid_project(self, x: np.ndarray, full: bool = False) -> np.ndarray:
        r = self.effective_radius(full)
        n = float(np.linalg.norm(x))
        if n <= r:
            return np.array(x, dtype=np.float64)
        return np.asarray(x, dtype=np.float64) * (r / n)


@dataclass(frozen=True)
class SimplexSet:
    """Probability simplex {x : x_i >= 0, sum x_i = 1} in R^d, d >= 2.

    Shrinking contracts toward the barycenter: the gamma-shrunken set is
    {x : sum x_i = 1, x_i >= gamma / d}.  The set lives in the zero-sum
    affine hyperplane, so perturbation directions are sampled in that
    tangent subspace and the perturbation dimension is d - 1.
    """

    dim: int
    gamma: float = 0.0

    def __post_init__(self):
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 2:
            raise ValueError(
                f"simplex dimension must be an integer >= 2, got {self.dim!r}"
            )
        if not (0.0 <= self.gamma < 1.0):
            raise ValueError(f"shrink factor must lie in [0, 1), got {self.gamma!r}")

    @property
    def diameter(self) -> float:
        return sqrt(2.0)

    @property
    def inradius(self) -> float:
        # distance from the barycenter to the nearest face, within the hyperplane
        return 1.0 / sqrt(self.dim * (self.dim - 1.0))

    @property
    def perturbation_dim(self) -> int:
        return self.dim - 1

    @property
    def center(self) -> np.ndarray:
        return np.full(self.dim, 1.0 / self.dim)

    def lower_bound(self, full: bool = False) -> float:
        return 0.0 if full else self.gamma / self.dim

    def contains(self, x: np.ndarray, full: bool = False) -> bool:
        if abs(float(np.sum(x)) - 1.0) > _SIMPLEX_SUM_ATOL:
            return False
        return float(np.min(x)) >= self.lower_bound(full) - _SIMPLEX_COORD_ATOL

    def sample_direction(self, rng: np.random.Generator) -> np.ndarray:
        """Uniform unit direction in the zero-sum tangent subspace."""
        while True:
            g = rng.standard_normal(self.dim)
            g -= g.mean()
            n = float(np.linalg.norm(g))
            if n > 0.0:
                return g / n

    def euclid_project(self, x: np.ndarray, full: bool = False) -> np.ndarray:
        v = np.ascontiguousarray(x, dtype=np.float64)
        return kernels.simplex_project_euclid(v, self.lower_bound(full))


FeasibleSet = BallSet | SimplexSet


class CurvatureState:
    """Accumulated curvature matrix A and its maintained inverse.

    A starts at epsilon * I and only grows by rank-one terms, so it stays
    positive definite.  The inverse is kept current with rank-one corrections
    and recomputed from A by a direct solve every ``refresh_interval``
    updates to stop drift.
    """

    refresh_interval = 256

    def __init__(self, dim: int, epsilon: float):
        if not isinstance(dim, (int, np.integer)) or dim < 1:
            raise ValueError(f"dimension must be a positive integer, got {dim!r}")
        if not (np.isfinite(epsilon) and epsilon > 0.0):
            raise ValueError(f"epsilon must be positive and finite, got {epsilon!r}")
        self.dim = int(dim)
        self.epsilon = float(epsilon)
        self.A = np.eye(self.dim) * self.epsilon
        self.A_inv = np.eye(self.dim) / self.epsilon
        self.update_count = 0

    def rank_one_update(self, g: np.ndarray) -> float:
        """A += g g^T with the matching inverse correction; returns the
        update denominator 1 + g^T A_inv g."""
        g = np.ascontiguousarray(g, dtype=np.float64)
        if g.shape != (self.dim,):
            raise ValueError(f"expected shape ({self.dim},), got {g.shape}")
        denom = kernels.smw_update(self.A, self.A_inv, g)
        self.update_count += 1
        if self.update_count % self.refresh_interval == 0:
            kernels.refresh_inverse(self.A, self.A_inv)
        return denom


def _as_spd_matrix(curvature, dim: int) -> np.ndarray:
    """Accept a CurvatureState (trusted) or a raw matrix (validated SPD)."""
    if isinstance(curvature, CurvatureState):
        return curvature.A
    A = np.ascontiguousarray(curvature, dtype=np.float64)
    if A.shape != (dim, dim):
        raise ValueError(f"expected a ({dim}, {dim}) matrix, got shape {A.shape}")
    scale = float(np.max(np.abs(A)))
    if not np.isfinite(scale):
        raise ValueError("matrix has non-finite entries")
    if float(np.max(np.abs(A - A.T))) > 1e-8 * max(scale, 1.0):
        raise ValueError("matrix is not symmetric")
    try:
        np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        raise ValueError("matrix is not positive definite") from None
    return A


def euclidean_project(
    feasible_set: FeasibleSet, x: np.ndarray, use_shrunken: bool = True
) -> np.ndarray:
    """Euclidean projection onto the set (or its gamma-shrunken version)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (feasible_set.dim,):
        raise ValueError(f"expected shape ({feasible_set.dim},), got {x.shape}")
    return feasible_set.euclid_project(x, full=not use_shrunken)


def generalized_project(
    feasible_set: FeasibleSet,
    curvature,
    y: np.ndarray,
    tol: float = 1e-8,
    max_iter: int = 10_000,
) -> np.ndarray:
    """Projection of y onto the gamma-shrunken set under the A-weighted norm.

    ``curvature`` is a CurvatureState or a symmetric positive definite
    matrix.  Already-feasible points are returned unchanged.  The simplex
    solver targets an objective tolerance of ``tol`` (subject to a
    floating-point floor proportional to the problem scale) and raises
    ProjectionError with the best iterate if it fails within ``max_iter``
    iterations; the ball solver locates the constraint multiplier to
    near machine precision.
    """
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.shape != (feasible_set.dim,):
        raise ValueError(f"expected shape ({feasible_set.dim},), got {y.shape}")
    A = _as_spd_matrix(curvature, feasible_set.dim)
    if feasible_set.contains(y):
        return y.copy()
    if isinstance(feasible_set, BallSet):
        return kernels.ball_project_anorm(A, y, feasible_set.effective_radius())
    x, gap, iters, converged = kernels.simplex_project_anorm(
        A, y, feasible_set.lower_bound(), None, tol, max_iter
    )
    if not converged:
        raise ProjectionError(
            f"simplex projection stalled after {iters} iterations "
            f"(optimality gap {gap:.3g})",
            best=x,
            residual=gap,
        )
    return x
