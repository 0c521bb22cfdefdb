"""Single-evaluation gradient estimation for bandit feedback.

The learner only observes the loss value at the point it queried.  Querying
at y + delta * v for a uniform unit direction v and scaling the observed
value by dim / delta yields an unbiased estimate of the gradient of the
delta-smoothed loss at y.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import sample_unit_ball

_UNIT_NORM_ATOL = 1e-9


@dataclass(frozen=True)
class GradientEstimate:
    """One gradient estimate and the context it was formed from.

    ``g`` equals (dim / delta) * observed_value * direction, so the estimate
    is reconstructible from the stored fields.  ``dim`` is the dimension of
    the perturbation subspace, which for sets living in a proper affine
    subspace is smaller than the ambient dimension.
    """

    g: np.ndarray
    query: np.ndarray | None
    direction: np.ndarray
    observed_value: float
    delta: float
    dim: int


def _check_unit(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"direction must be a vector, got shape {v.shape}")
    n = float(np.linalg.norm(v))
    if abs(n - 1.0) > _UNIT_NORM_ATOL:
        raise ValueError(f"direction must have unit norm, got {n!r}")
    return v


def perturb(y: np.ndarray, delta: float, v: np.ndarray, within=None) -> np.ndarray:
    """Query point y + delta * v.

    When a feasible set is supplied, membership of the result in the full
    set is asserted; the caller is expected to keep delta at or below the
    exploration margin gamma * inradius so this cannot fail.
    """
    if not (np.isfinite(delta) and delta > 0.0):
        raise ValueError(f"delta must be positive and finite, got {delta!r}")
    v = _check_unit(v)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != v.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {v.shape}")
    x = y + delta * v
    if within is not None and not within.contains(x, full=True):
        raise ValueError(
            f"perturbed point left the feasible set (delta={delta!r}); "
            "delta must not exceed gamma times the inscribed radius"
        )
    return x


def one_point_gradient(
    fval: float,
    v: np.ndarray,
    dim: int,
    delta: float,
    query: np.ndarray | None = None,
) -> GradientEstimate:
    """Gradient estimate (dim / delta) * fval * v from one loss observation."""
    if not (np.isfinite(delta) and delta > 0.0):
        raise ValueError(f"delta must be positive and finite, got {delta!r}")
    if not isinstance(dim, (int, np.integer)) or dim < 1:
        raise ValueError(f"dimension must be a positive integer, got {dim!r}")
    fval = float(fval)
    if not np.isfinite(fval):
        raise ValueError(f"observed value must be finite, got {fval!r}")
    v = _check_unit(v)
    g = (dim / delta) * fval * v
    return GradientEstimate(
        g=g,
        query=None if query is None else np.asarray(query, dtype=np.float64),
        direction=v,
        observed_value=fval,
        delta=float(delta),
        dim=int(dim),
    )


def smoothed_value_mc(
    f, x: np.ndarray, delta: float, n: int, rng: np.random.Generator
) -> tuple[float, float]:
    """Monte Carlo estimate of the delta-smoothed value of f at x.

    Averages f over n points drawn uniformly from the delta-ball around x.
    Returns (mean, standard error); n must be at least 2.
    """
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise ValueError(f"sample count must be an integer >= 2, got {n!r}")
    if not (np.isfinite(delta) and delta > 0.0):
        raise ValueError(f"delta must be positive and finite, got {delta!r}")
    x = np.asarray(x, dtype=np.float64)
    vals = np.empty(n)
    for i in range(n):
        u = sample_unit_ball(x.shape[0], rng)
        vals[i] = f(x + delta * u)
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / np.sqrt(n))
    return mean, stderr
