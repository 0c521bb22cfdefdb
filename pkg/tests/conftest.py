"""Shared fixtures: the memoized synthetic-quadratic benchmark runs.

The quadratic head-to-head comparisons are the slowest things in the suite
and several tests need slices of the same grid (regret growth, the
full-information sanity check, the bandit head-to-head), so the runs are
cached once per session.
"""

from __future__ import annotations

import numpy as np
import pytest

from onseg.harness import ExperimentConfig, run_trials


class QuadraticBenchmark:
    """Memoized multi-seed runs on the fixed strongly convex quadratic.

    Instance: d=2 ball of diameter 2 (radius 1, inner radius 1), the default
    quadratic stream, sigma set to the stream's curvature-over-gradient
    ratio so the step schedule reflects the true exp-concavity.
    """

    SIGMA = 1.975
    TRIALS = 10

    def __init__(self):
        self._cache: dict[tuple[str, int], list] = {}

    def results(self, algo: str, T: int) -> list:
        key = (algo, T)
        if key not in self._cache:
            config = ExperimentConfig(
                task="synthetic-quadratic", algo=algo, T=T, seed=0,
                trials=self.TRIALS, dim=2, diameter=2.0, inner_radius=1.0,
                sigma=self.SIGMA, regret=True,
            )
            self._cache[key] = run_trials(config)
        return self._cache[key]

    def final_regrets(self, algo: str, T: int) -> np.ndarray:
        return np.array([float(r.regret[-1]) for r in self.results(algo, T)])


@pytest.fixture(scope="session")
def quad_bench() -> QuadraticBenchmark:
    return QuadraticBenchmark()
