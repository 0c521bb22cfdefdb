"""Loss families for the benchmark tasks and closed-form bound estimation.

Families are defined per sample: squared loss for online regression,
logistic loss for online classification, and the negated linear return for
portfolio selection (learners minimize, the reported metric is the positive
return).  Logistic computations are saturation-safe far beyond |margin| of
700, where a naive exp would overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import BallSet, SimplexSet


@dataclass(frozen=True)
class LossSample:
    """One observation: feature/return vector z and real label y."""

    z: np.ndarray
    y: float = 0.0


@dataclass(frozen=True)
class LossBounds:
    """Suprema over the feasible set and dataset: |f| <= F, ||grad f|| <= G,
    and f is L-Lipschitz."""

    F: float
    G: float
    L: float

    def __post_init__(self):
        for name, val in (("F", self.F), ("G", self.G), ("L", self.L)):
            if not (np.isfinite(val) and val > 0.0):
                raise ValueError(f"bound {name} must be positive and finite, got {val!r}")


def _inner(x: np.ndarray, sample: LossSample) -> float:
    z = sample.z
    if x.shape != z.shape:
        raise ValueError(f"shape mismatch: point {x.shape} vs sample {z.shape}")
    return float(x @ z)


def _softplus(u: float) -> float:
    if u > 0.0:
        return u + math.log1p(math.exp(-u))
    return math.log1p(math.exp(u))


def squared_loss(x: np.ndarray, sample: LossSample) -> float:
    m = _inner(x, sample) - sample.y
    return 0.5 * m * m


def squared_grad(x: np.ndarray, sample: LossSample) -> np.ndarray:
    return (_inner(x, sample) - sample.y) * sample.z


def _check_label(y: float) -> float:
    if y != 1.0 and y != -1.0:
        raise ValueError(f"classification label must be -1 or +1, got {y!r}")
    return y


def logistic_loss(x: np.ndarray, sample: LossSample) -> float:
    return _softplus(-_check_label(sample.y) * _inner(x, sample))


def logistic_grad(x: np.ndarray, sample: LossSample) -> np.ndarray:
    u = _check_label(sample.y) * _inner(x, sample)
    if u >= 0.0:
        e = math.exp(-u)
        s = e / (1.0 + e)
    else:
        s = 1.0 / (1.0 + math.exp(u))
    return (-sample.y * s) * sample.z


def logistic_predict(x: np.ndarray, z: np.ndarray) -> float:
    """Probability of the +1 class, numerically stable for large margins."""
    m = float(np.asarray(x) @ np.asarray(z))
    if m >= 0.0:
        return 1.0 / (1.0 + math.exp(-m))
    e = math.exp(m)
    return e / (1.0 + e)


def return_loss(x: np.ndarray, sample: LossSample) -> float:
    """Loss fed to the learners: the negated per-round return."""
    return -_inner(x, sample)


def return_grad(x: np.ndarray, sample: LossSample) -> np.ndarray:
    if x.shape != sample.z.shape:
        raise ValueError(f"shape mismatch: point {x.shape} vs sample {sample.z.shape}")
    return -sample.z


def return_rate(x: np.ndarray, sample: LossSample) -> float:
    """Reported per-round return; negation of return_loss by construction."""
    return _inner(x, sample)


def classification_error(x: np.ndarray, sample: LossSample) -> float:
    """0/1 error of the sign prediction; a zero margin predicts +1."""
    predicted = 1.0 if _inner(x, sample) >= 0.0 else -1.0
    return 0.0 if predicted == sample.y else 1.0


@dataclass(frozen=True)
class LossFamily:
    name: str
    value: Callable[[np.ndarray, LossSample], float]
    grad: Callable[[np.ndarray, LossSample], np.ndarray]
    instant_metric: Callable[[np.ndarray, LossSample], float]
    metric_percent: bool = False


FAMILIES: dict[str, LossFamily] = {
    "squared": LossFamily("squared", squared_loss, squared_grad, squared_loss),
    "logistic": LossFamily("logistic", logistic_loss, logistic_grad, classification_error),
    "return": LossFamily("return", return_loss, return_grad, return_rate, metric_percent=True),
}


def _sup_abs_inner(feasible_set, Z: np.ndarray) -> np.ndarray:
    """Per-sample supremum of |<x, z>| over the full feasible set."""
    if isinstance(feasible_set, BallSet):
        return feasible_set.radius * np.linalg.norm(Z, axis=1)
    if isinstance(feasible_set, SimplexSet):
        return np.max(np.abs(Z), axis=1)
    raise TypeError(f"unsupported feasible set {type(feasible_set).__name__}")


def estimate_bounds(family, dataset, feasible_set) -> LossBounds:
    """Closed-form loss bounds F, G, L over a dataset and feasible set.

    ``family`` is a LossFamily or its name; ``dataset`` needs ``Z`` (n x d)
    and ``y`` (n) arrays.  The bounds are suprema of the exact per-sample
    expressions, so every observed loss and gradient during a replay of the
    dataset respects them.
    """
    if isinstance(family, str):
        family = FAMILIES[family]
    Z = np.asarray(dataset.Z, dtype=np.float64)
    ylab = np.asarray(dataset.y, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] != ylab.shape[0]:
        raise ValueError(f"inconsistent dataset arrays: {Z.shape} vs {ylab.shape}")
    if Z.shape[0] < 1:
        raise ValueError("cannot estimate bounds over an empty dataset")
    if Z.shape[1] != feasible_set.dim:
        raise ValueError(
            f"dataset dimension {Z.shape[1]} does not match set dimension {feasible_set.dim}"
        )
    sup_inner = _sup_abs_inner(feasible_set, Z)
    znorm = np.linalg.norm(Z, axis=1)
    if family.name == "squared":
        reach = sup_inner + np.abs(ylab)
        F = 0.5 * float(np.max(reach**2))
        G = float(np.max(reach * znorm))
    elif family.name == "logistic":
        F = float(np.max([_softplus(a) for a in np.abs(ylab) * sup_inner]))
        G = float(np.max(np.abs(ylab) * znorm))
    elif family.name == "return":
        F = float(np.max(sup_inner))
        G = float(np.max(znorm))
    else:
        raise ValueError(f"unknown loss family {family.name!r}")
    return LossBounds(F=F, G=G, L=G)
