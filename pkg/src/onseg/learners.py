"""Online learners and their parameter schedules.

Two bandit learners observe only the loss value at the queried point and
share the exploration schedule (delta, gamma):

* OnsegLearner: Newton-style steps preconditioned by the accumulated outer
  products of the estimated gradients.
* OgdegLearner: gradient descent on the estimated gradients with step
  D / (F * sqrt(t)).

Two full-information baselines receive the true gradient at the iterate:

* OnsLearner: the classical online Newton step with exact gradients.
* OgdLearner: online gradient descent with step D / (G * sqrt(t)).

Both bandit learners play y_t + delta * v_t for a uniform unit direction
v_t and keep their iterates in the gamma-shrunken feasible set so the query
point stays feasible; the full-information learners operate on the original
set (gamma = 0).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, ProtocolError
from .estimator import one_point_gradient, perturb
from .geometry import (
    CurvatureState,
    FeasibleSet,
    euclidean_project,
    generalized_project,
)

GAMMA_CLAMP = 0.5


@dataclass(frozen=True)
class Schedule:
    """Exploration radius delta, shrink factor gamma, and derived step
    quantities for a horizon-T run.

    ``clamped`` records that the closed-form rates violated the feasibility
    requirement delta / r <= gamma < 1 and were clamped to satisfy it.
    """

    dim: int
    F: float
    D: float
    r: float
    sigma: float
    T: int
    delta: float
    gamma: float
    alpha: float
    beta: float
    epsilon: float
    clamped: bool = False

    def override(self, delta=None, gamma=None, beta=None, sigma=None) -> "Schedule":
        """Pin selected values, recomputing everything derived from them.

        Overridden values are validated rather than clamped: an explicit
        gamma outside (0, 1) or delta above gamma * r is a configuration
        error.  A beta override bypasses the closed-form step rule (alpha is
        kept for reference) and epsilon is recomputed from it.
        """
        new_gamma = self.gamma if gamma is None else float(gamma)
        if not (0.0 < new_gamma < 1.0):
            raise ConfigError(f"gamma override must lie in (0, 1), got {gamma!r}")
        new_delta = self.delta if delta is None else float(delta)
        if not (0.0 < new_delta <= new_gamma * self.r * (1.0 + 1e-12)):
            raise ConfigError(
                f"delta override must lie in (0, gamma * r] = (0, {new_gamma * self.r:.6g}], "
                f"got {delta!r}"
            )
        new_sigma = self.sigma if sigma is None else float(sigma)
        if not (np.isfinite(new_sigma) and new_sigma > 0.0):
            raise ConfigError(f"sigma override must be positive and finite, got {sigma!r}")
        alpha = new_sigma * new_delta**2 / (self.dim**2 * self.F**2)
        if beta is None:
            new_beta = 0.5 * min(new_delta / (4.0 * self.dim * self.F * self.D), alpha)
        else:
            new_beta = float(beta)
        if not (np.isfinite(new_beta) and new_beta > 0.0):
            raise ConfigError(f"step parameter beta must be positive, got {new_beta!r}")
        epsilon = 1.0 / (new_beta**2 * self.D**2)
        if not np.isfinite(epsilon):
            raise ConfigError(f"epsilon overflowed for beta={new_beta!r}, D={self.D!r}")
        return replace(
            self,
            delta=new_delta,
            gamma=new_gamma,
            sigma=new_sigma,
            alpha=alpha,
            beta=new_beta,
            epsilon=epsilon,
        )


def _validate_inputs(dim, F, D, sigma, r, T, L=None):
    if not isinstance(dim, (int, np.integer)) or dim < 1:
        raise ConfigError(f"dimension must be a positive integer, got {dim!r}")
    for name, val in (("F", F), ("D", D), ("sigma", sigma), ("r", r)):
        if not (np.isfinite(val) and val > 0.0):
            raise ConfigError(f"{name} must be positive and finite, got {val!r}")
    if not isinstance(T, (int, np.integer)) or T < 2:
        raise ConfigError(f"horizon T must be an integer >= 2, got {T!r}")
    if L is not None and not (np.isfinite(L) and L > 0.0):
        raise ConfigError(f"L must be positive and finite, got {L!r}")


def bounded_loss_rates(dim: int, D: float, r: float, T: int) -> tuple[float, float]:
    """Unclamped (delta, gamma) optimizing the regret bound when only the
    loss magnitude bound F is assumed.  Natural logarithm throughout."""
    lt = math.log(T)
    delta = (25.0 * dim**4 * D**2 * lt**2 * r / (3.0 * T**2)) ** (1.0 / 3.0)
    gamma = (15.0 * dim**2 * D * lt / (r * T)) ** (1.0 / 3.0)
    return delta, gamma


def lipschitz_rates(dim: int, F: float, D: float, r: float, L: float, T: int) -> tuple[float, float]:
    """Unclamped (delta, gamma) under an additional L-Lipschitz assumption;
    gamma = delta / r sits exactly on the feasibility boundary."""
    lt = math.log(T)
    delta = math.sqrt(10.0 * dim**2 * F * D * r * lt / (3.0 * (L * r + F))) / math.sqrt(T)
    return delta, delta / r


def _finalize(dim, F, D, sigma, r, T, delta, gamma) -> Schedule:
    clamped = False
    if gamma >= 1.0:
        gamma = GAMMA_CLAMP
        clamped = True
    if delta > gamma * r:
        delta = gamma * r
        clamped = True
    alpha = sigma * delta**2 / (dim**2 * F**2)
    beta = 0.5 * min(delta / (4.0 * dim * F * D), alpha)
    if not (np.isfinite(beta) and beta > 0.0):
        raise ConfigError(
            f"step parameter beta={beta!r} is not a positive float; "
            "the problem constants are too extreme for this horizon"
        )
    epsilon = 1.0 / (beta**2 * D**2)
    if not np.isfinite(epsilon):
        raise ConfigError(f"epsilon overflowed for beta={beta!r}, D={D!r}")
    return Schedule(
        dim=int(dim), F=float(F), D=float(D), r=float(r), sigma=float(sigma),
        T=int(T), delta=float(delta), gamma=float(gamma), alpha=float(alpha),
        beta=float(beta), epsilon=float(epsilon), clamped=clamped,
    )


def bounded_loss_schedule(dim: int, F: float, D: float, sigma: float, r: float, T: int) -> Schedule:
    """Schedule assuming only |f| <= F over the feasible set."""
    _validate_inputs(dim, F, D, sigma, r, T)
    delta, gamma = bounded_loss_rates(dim, D, r, T)
    return _finalize(dim, F, D, sigma, r, T, delta, gamma)


def lipschitz_schedule(
    dim: int, F: float, D: float, sigma: float, r: float, L: float, T: int
) -> Schedule:
    """Schedule additionally assuming f is L-Lipschitz."""
    _validate_inputs(dim, F, D, sigma, r, T, L=L)
    delta, gamma = lipschitz_rates(dim, F, D, r, L, T)
    return _finalize(dim, F, D, sigma, r, T, delta, gamma)


def _check_set_matches(feasible_set: FeasibleSet, schedule: Schedule, bandit: bool):
    if feasible_set.dim != schedule.dim:
        raise ValueError(
            f"set dimension {feasible_set.dim} does not match schedule dimension {schedule.dim}"
        )
    if bandit and abs(feasible_set.gamma - schedule.gamma) > 1e-12:
        raise ValueError(
            f"set shrink factor {feasible_set.gamma!r} does not match "
            f"schedule gamma {schedule.gamma!r}"
        )


class _BanditBase:
    """Shared predict/update protocol of the estimated-gradient learners."""

    feedback = "value"

    def __init__(self, feasible_set: FeasibleSet, schedule: Schedule):
        _check_set_matches(feasible_set, schedule, bandit=True)
        if schedule.delta > schedule.gamma * feasible_set.inradius * (1.0 + 1e-12):
            raise ValueError(
                f"delta={schedule.delta!r} exceeds the exploration margin "
                f"gamma * r = {schedule.gamma * feasible_set.inradius!r}"
            )
        self.feasible_set = feasible_set
        self.schedule = schedule
        self.y = feasible_set.center
        self.t = 1
        self.bound_violations = 0
        self._pending = None

    def predict(self, rng: np.random.Generator) -> np.ndarray:
        """Query point for the current round: y_t + delta * v_t."""
        if self._pending is not None:
            raise ProtocolError("predict called twice without an update in between")
        v = self.feasible_set.sample_direction(rng)
        x = perturb(self.y, self.schedule.delta, v, within=self.feasible_set)
        self._pending = (v, x)
        return x

    def _consume(self, fval: float):
        if self._pending is None:
            raise ProtocolError("update called before predict")
        v, x = self._pending
        self._pending = None
        fval = float(fval)
        if not np.isfinite(fval):
            raise ValueError(f"loss value must be finite, got {fval!r}")
        if abs(fval) > self.schedule.F * (1.0 + 1e-12):
            self.bound_violations += 1
            if self.bound_violations == 1:
                warnings.warn(
                    f"observed loss {fval!r} exceeds the assumed bound F={self.schedule.F!r}",
                    RuntimeWarning,
                    stacklevel=3,
                )
        return one_point_gradient(
            fval, v, self.feasible_set.perturbation_dim, self.schedule.delta, query=x
        )


class OnsegLearner(_BanditBase):
    """Online Newton step driven by single-evaluation gradient estimates."""

    def __init__(self, feasible_set: FeasibleSet, schedule: Schedule):
        super().__init__(feasible_set, schedule)
        self.curvature = CurvatureState(feasible_set.dim, schedule.epsilon)
        self._inv_beta = 1.0 / schedule.beta

    def update(self, fval: float) -> None:
        est = self._consume(fval)
        self.curvature.rank_one_update(est.g)
        z = self.y - self._inv_beta * (self.curvature.A_inv @ est.g)
        self.y = generalized_project(self.feasible_set, self.curvature, z)
        self.t += 1


class OgdegLearner(_BanditBase):
    """Gradient descent on estimated gradients with step D / (F * sqrt(t))."""

    def update(self, fval: float) -> None:
        est = self._consume(fval)
        nu = self.schedule.D / (self.schedule.F * math.sqrt(self.t))
        self.y = euclidean_project(self.feasible_set, self.y - nu * est.g)
        self.t += 1


class _FullInfoBase:
    """Shared protocol of the true-gradient baselines (gamma = 0 sets)."""

    feedback = "gradient"

    def __init__(self, feasible_set: FeasibleSet):
        if feasible_set.gamma != 0.0:
            raise ValueError("full-information learners operate on the unshrunken set")
        self.feasible_set = feasible_set
        self.y = feasible_set.center
        self.t = 1
        self._pending = False

    def predict(self, rng: np.random.Generator | None = None) -> np.ndarray:
        """Full-information learners play the iterate itself."""
        if self._pending:
            raise ProtocolError("predict called twice without an update in between")
        self._pending = True
        return self.y

    def _consume(self, grad: np.ndarray) -> np.ndarray:
        if not self._pending:
            raise ProtocolError("update called before predict")
        self._pending = False
        grad = np.ascontiguousarray(grad, dtype=np.float64)
        if grad.shape != (self.feasible_set.dim,):
            raise ValueError(
                f"expected gradient of shape ({self.feasible_set.dim},), got {grad.shape}"
            )
        if not np.all(np.isfinite(grad)):
            raise ValueError("gradient must be finite")
        return grad


class OnsLearner(_FullInfoBase):
    """Online Newton step with exact gradients."""

    def __init__(self, feasible_set: FeasibleSet, beta: float):
        super().__init__(feasible_set)
        if not (np.isfinite(beta) and beta > 0.0):
            raise ConfigError(f"step parameter beta must be positive, got {beta!r}")
        self.beta = float(beta)
        epsilon = 1.0 / (self.beta**2 * feasible_set.diameter**2)
        self.curvature = CurvatureState(feasible_set.dim, epsilon)
        self._inv_beta = 1.0 / self.beta

    def update(self, grad: np.ndarray) -> None:
        grad = self._consume(grad)
        self.curvature.rank_one_update(grad)
        z = self.y - self._inv_beta * (self.curvature.A_inv @ grad)
        self.y = generalized_project(self.feasible_set, self.curvature, z)
        self.t += 1


class OgdLearner(_FullInfoBase):
    """Online gradient descent with step D / (G * sqrt(t))."""

    def __init__(self, feasible_set: FeasibleSet, G: float):
        super().__init__(feasible_set)
        if not (np.isfinite(G) and G > 0.0):
            raise ConfigError(f"gradient bound G must be positive, got {G!r}")
        self.G = float(G)

    def update(self, grad: np.ndarray) -> None:
        grad = self._consume(grad)
        eta = self.feasible_set.diameter / (self.G * math.sqrt(self.t))
        self.y = euclidean_project(self.feasible_set, self.y - eta * grad)
        self.t += 1
