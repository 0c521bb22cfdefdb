"""Schedules, the predict/update protocol, and all four learners."""

from __future__ import annotations

import math
import warnings

import mpmath as mp
import numpy as np
import pytest

from onseg.errors import ConfigError, ProtocolError
from onseg.geometry import BallSet, SimplexSet
from onseg.learners import (
    GAMMA_CLAMP,
    OgdLearner,
    OgdegLearner,
    OnsLearner,
    OnsegLearner,
    bounded_loss_rates,
    bounded_loss_schedule,
    lipschitz_rates,
    lipschitz_schedule,
)
from onseg.oracles import single_step_chain


def _mp_bounded(dim, D, r, T):
    with mp.workdps(60):
        lt = mp.log(T)
        delta = (25 * mp.mpf(dim) ** 4 * mp.mpf(D) ** 2 * lt**2 * mp.mpf(r)
                 / (3 * mp.mpf(T) ** 2)) ** (mp.mpf(1) / 3)
        gamma = (15 * mp.mpf(dim) ** 2 * mp.mpf(D) * lt
                 / (mp.mpf(r) * mp.mpf(T))) ** (mp.mpf(1) / 3)
        return float(delta), float(gamma)


def _mp_lipschitz(dim, F, D, r, L, T):
    with mp.workdps(60):
        lt = mp.log(T)
        delta = mp.sqrt(10 * mp.mpf(dim) ** 2 * mp.mpf(F) * mp.mpf(D) * mp.mpf(r) * lt
                        / (3 * (mp.mpf(L) * mp.mpf(r) + mp.mpf(F)))) / mp.sqrt(T)
        return float(delta), float(delta / mp.mpf(r))


class TestScheduleFormulas:
    def test_bounded_loss_reference_point(self):
        delta, gamma = bounded_loss_rates(2, 2.0, 1.0, 10**6)
        assert abs(delta / 0.0046692185478743667298 - 1.0) <= 1e-12
        assert abs(gamma / 0.11835394223946703918 - 1.0) <= 1e-12

    def test_lipschitz_reference_point(self):
        delta, gamma = lipschitz_rates(1, 1.0, 1.0, 1.0, 1.0, 100)
        assert abs(delta / 0.27704302271151832084 - 1.0) <= 1e-12
        assert gamma == delta  # r = 1 puts gamma exactly at delta / r

    def test_against_arbitrary_precision(self):
        rng = np.random.default_rng(89)
        for _ in range(50):
            dim = int(rng.integers(1, 11))
            F = float(10.0 ** rng.uniform(-2, 2))
            D = float(10.0 ** rng.uniform(-2, 2))
            r = float(10.0 ** rng.uniform(-2, 1)) * D / 2.0
            L = float(10.0 ** rng.uniform(-2, 2))
            T = int(rng.integers(10, 10**8))
            d1, g1 = bounded_loss_rates(dim, D, r, T)
            w1, wg1 = _mp_bounded(dim, D, r, T)
            assert abs(d1 / w1 - 1.0) <= 1e-12
            assert abs(g1 / wg1 - 1.0) <= 1e-12
            d2, g2 = lipschitz_rates(dim, F, D, r, L, T)
            w2, wg2 = _mp_lipschitz(dim, F, D, r, L, T)
            assert abs(d2 / w2 - 1.0) <= 1e-12
            assert abs(g2 / wg2 - 1.0) <= 1e-12

    def test_lipschitz_quarter_horizon_ratio(self):
        # delta scales as sqrt(log T / T): quadrupling T multiplies it by
        # 0.5 * sqrt(log(4T) / log(T))
        for T in (100, 10_000):
            d1, _ = lipschitz_rates(3, 1.0, 2.0, 0.5, 1.0, T)
            d4, _ = lipschitz_rates(3, 1.0, 2.0, 0.5, 1.0, 4 * T)
            want = 0.5 * math.sqrt(math.log(4 * T) / math.log(T))
            assert abs(d4 / d1 - want) <= 1e-12


class TestScheduleFinalization:
    def test_derived_identities_hold_exactly(self):
        s = bounded_loss_schedule(2, 1.0, 2.0, 1.0, 1.0, 10**6)
        assert s.alpha == s.sigma * s.delta**2 / (s.dim**2 * s.F**2)
        assert s.beta == 0.5 * min(s.delta / (4.0 * s.dim * s.F * s.D), s.alpha)
        assert s.epsilon == 1.0 / (s.beta**2 * s.D**2)
        assert not s.clamped
        assert 0.0 < s.delta <= s.gamma * s.r

    def test_short_horizon_clamps(self):
        # at T = 2 the closed-form gamma exceeds 1; the schedule falls back
        # to gamma = 0.5 and caps delta at gamma * r
        s = bounded_loss_schedule(2, 1.0, 2.0, 1.0, 1.0, 2)
        assert s.clamped
        assert s.gamma == GAMMA_CLAMP
        assert s.delta == GAMMA_CLAMP * s.r

    def test_long_horizon_not_clamped(self):
        s = lipschitz_schedule(1, 1.0, 1.0, 1.0, 1.0, 1.0, 100)
        assert not s.clamped
        assert abs(s.gamma - s.delta / s.r) <= 1e-15

    def test_input_validation(self):
        with pytest.raises(ConfigError):
            bounded_loss_schedule(2, 1.0, 2.0, 1.0, 1.0, 1)
        with pytest.raises(ConfigError):
            bounded_loss_schedule(0, 1.0, 2.0, 1.0, 1.0, 100)
        with pytest.raises(ConfigError):
            bounded_loss_schedule(2, -1.0, 2.0, 1.0, 1.0, 100)
        with pytest.raises(ConfigError):
            lipschitz_schedule(2, 1.0, 2.0, 1.0, 1.0, 0.0, 100)

    def test_override(self):
        s = bounded_loss_schedule(2, 1.0, 2.0, 1.0, 1.0, 10**4)
        o = s.override(beta=1e-3)
        assert o.beta == 1e-3
        assert o.epsilon == 1.0 / (1e-6 * s.D**2)
        assert o.delta == s.delta and o.gamma == s.gamma
        o2 = s.override(delta=s.gamma * s.r / 2.0)
        assert o2.alpha == o2.sigma * o2.delta**2 / (o2.dim**2 * o2.F**2)
        assert o2.beta == 0.5 * min(o2.delta / (4.0 * o2.dim * o2.F * o2.D), o2.alpha)
        with pytest.raises(ConfigError):
            s.override(gamma=1.0)
        with pytest.raises(ConfigError):
            s.override(gamma=0.0)
        with pytest.raises(ConfigError):
            s.override(delta=s.gamma * s.r * 2.0)
        with pytest.raises(ConfigError):
            s.override(beta=0.0)
        with pytest.raises(ConfigError):
            s.override(sigma=-1.0)


def _ball_learner(cls, dim=2, T=1000, **kw):
    sched = bounded_loss_schedule(dim, 1.0, 2.0, 1.0, 1.0, T)
    fs = BallSet(dim=dim, radius=1.0, inner_radius=1.0, gamma=sched.gamma)
    return cls(fs, sched, **kw), sched, fs


class TestBanditProtocol:
    def test_predict_twice_rejected(self):
        learner, _, _ = _ball_learner(OnsegLearner)
        rng = np.random.default_rng(0)
        learner.predict(rng)
        with pytest.raises(ProtocolError):
            learner.predict(rng)

    def test_update_before_predict_rejected(self):
        learner, _, _ = _ball_learner(OnsegLearner)
        with pytest.raises(ProtocolError):
            learner.update(0.1)

    def test_set_schedule_mismatch_rejected(self):
        sched = bounded_loss_schedule(2, 1.0, 2.0, 1.0, 1.0, 1000)
        with pytest.raises(ValueError):
            OnsegLearner(BallSet(dim=2, radius=1.0, inner_radius=1.0), sched)
        with pytest.raises(ValueError):
            OnsegLearner(
                BallSet(dim=3, radius=1.0, inner_radius=1.0, gamma=sched.gamma),
                bounded_loss_schedule(2, 1.0, 2.0, 1.0, 1.0, 1000),
            )

    def test_bound_violation_warns_once(self):
        learner, sched, _ = _ball_learner(OgdegLearner)
        rng = np.random.default_rng(1)
        with pytest.warns(RuntimeWarning, match="bound"):
            learner.predict(rng)
            learner.update(sched.F * 10.0)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            learner.predict(rng)
            learner.update(sched.F * 10.0)
        assert learner.bound_violations == 2

    def test_non_finite_loss_rejected(self):
        learner, _, _ = _ball_learner(OnsegLearner)
        learner.predict(np.random.default_rng(2))
        with pytest.raises(ValueError):
            learner.update(float("nan"))


class TestOnsegLearner:
    @pytest.mark.parametrize("dim", [1, 2])
    def test_first_round_matches_scalar_chain(self, dim):
        for seed, fval in ((3, 0.3), (4, -0.7), (5, 0.05)):
            learner, sched, fs = _ball_learner(OnsegLearner, dim=dim)
            rng = np.random.default_rng(seed)
            y0 = learner.y.copy()
            x = learner.predict(rng)
            v = (x - y0) / sched.delta
            learner.update(fval)
            want = single_step_chain(sched, y0, v, fval)
            np.testing.assert_allclose(learner.y, want, rtol=0, atol=1e-12)

    def test_iterates_stay_feasible(self):
        sched = bounded_loss_schedule(2, 1.0, 2.0, 1.0, 1.0, 10_000)
        fs = BallSet(dim=2, radius=1.0, inner_radius=1.0, gamma=sched.gamma)
        learner = OnsegLearner(fs, sched)
        rng = np.random.default_rng(7)
        target = np.array([0.3, 0.0])
        for _ in range(10_000):
            x = learner.predict(rng)
            assert fs.contains(x, full=True)
            learner.update(0.5 * float(np.sum((x - target) ** 2)))
            assert fs.contains(learner.y)

    def test_simplex_iterates_stay_feasible(self):
        sched = bounded_loss_schedule(3, 1.0, math.sqrt(2.0),
                                      1.0, 1.0 / math.sqrt(6.0), 2000)
        ss = SimplexSet(dim=3, gamma=sched.gamma)
        learner = OnsegLearner(ss, sched)
        rng = np.random.default_rng(11)
        z = np.array([0.02, -0.01, 0.005])
        for _ in range(2000):
            x = learner.predict(rng)
            assert ss.contains(x, full=True)
            learner.update(-float(x @ z))
            assert ss.contains(learner.y)

    def test_deterministic_given_seed(self):
        runs = []
        for _ in range(2):
            learner, _, _ = _ball_learner(OnsegLearner)
            rng = np.random.default_rng(13)
            ys = []
            for _ in range(200):
                x = learner.predict(rng)
                learner.update(0.5 * float(x @ x))
                ys.append(learner.y.copy())
            runs.append(np.array(ys))
        assert np.array_equal(runs[0], runs[1])

    def test_curvature_never_shrinks(self):
        # A_t grows by rank-one terms, so u' A_t u is nondecreasing in t
        # for every probe direction u
        learner, _, _ = _ball_learner(OnsegLearner, dim=3)
        rng = np.random.default_rng(17)
        probes = rng.standard_normal((100, 3))
        prev = np.einsum("ij,jk,ik->i", probes, learner.curvature.A, probes)
        for _ in range(150):
            x = learner.predict(rng)
            learner.update(0.5 * float(x @ x))
            cur = np.einsum("ij,jk,ik->i", probes, learner.curvature.A, probes)
            assert np.all(cur >= prev - 1e-9 * np.abs(prev))
            prev = cur


class TestOgdegLearner:
    def test_step_size_at_round_one(self):
        _, sched, _ = _ball_learner(OgdegLearner)
        assert sched.D / (sched.F * math.sqrt(1)) == 2.0

    def test_hand_replay(self):
        from onseg.geometry import euclidean_project

        learner, sched, fs = _ball_learner(OgdegLearner)
        rng = np.random.default_rng(19)
        y = learner.y.copy()
        for t in range(1, 4):
            x = learner.predict(rng)
            v = (x - y) / sched.delta
            fval = 0.5 * float(x @ x)
            learner.update(fval)
            g = (fs.perturbation_dim / sched.delta) * fval * v
            nu = sched.D / (sched.F * math.sqrt(t))
            y = euclidean_project(fs, y - nu * g)
            np.testing.assert_allclose(learner.y, y, rtol=0, atol=1e-12)

    def test_iterates_stay_feasible(self):
        learner, sched, fs = _ball_learner(OgdegLearner, T=5000)
        rng = np.random.default_rng(23)
        for _ in range(5000):
            x = learner.predict(rng)
            assert fs.contains(x, full=True)
            learner.update(0.5 * float(x @ x))
            assert fs.contains(learner.y)


class TestOnsLearner:
    def test_requires_unshrunken_set(self):
        with pytest.raises(ValueError):
            OnsLearner(BallSet(dim=2, radius=1.0, inner_radius=1.0, gamma=0.1), 0.1)

    def test_first_update_matches_rank_one_closed_form(self):
        fs = BallSet(dim=2, radius=1.0, inner_radius=1.0)
        learner = OnsLearner(fs, beta=0.1)
        eps = 1.0 / (0.1**2 * fs.diameter**2)
        assert learner.curvature.A[0, 0] == eps
        learner.predict()
        g = np.array([0.6, -0.3])
        learner.update(g)
        A = eps * np.eye(2) + np.outer(g, g)
        np.testing.assert_allclose(learner.curvature.A, A, rtol=1e-15)
        inv = np.eye(2) / eps - np.outer(g, g) / (eps**2 * (1.0 + g @ g / eps))
        np.testing.assert_allclose(learner.curvature.A_inv, inv, rtol=1e-12)

    def test_running_mean_monotone_on_quadratic(self):
        # with exact gradients the running mean of the strongly convex loss
        # settles fast and never ticks upward after a short burn-in
        from onseg.harness import ExperimentConfig, run_trials

        config = ExperimentConfig(
            task="synthetic-quadratic", algo="ons", T=300, seed=0, trials=5,
            dim=2, diameter=2.0, inner_radius=1.0, beta=0.1,
        )
        for res in run_trials(config):
            m = res.metric
            assert np.all(np.diff(m[9:]) <= 1e-12)

    def test_protocol_errors(self):
        fs = BallSet(dim=2, radius=1.0, inner_radius=1.0)
        learner = OnsLearner(fs, beta=0.1)
        with pytest.raises(ProtocolError):
            learner.update(np.zeros(2))
        learner.predict()
        with pytest.raises(ProtocolError):
            learner.predict()
        with pytest.raises(ValueError):
            learner.update(np.zeros(3))
        with pytest.raises(ConfigError):
            OnsLearner(fs, beta=0.0)


class TestOgdLearner:
    def test_step_size(self):
        fs = BallSet(dim=2, radius=1.0, inner_radius=1.0)
        learner = OgdLearner(fs, G=8.0)
        assert fs.diameter / (learner.G * math.sqrt(1)) == 0.25

    def test_hand_replay(self):
        from onseg.geometry import euclidean_project

        fs = BallSet(dim=2, radius=1.0, inner_radius=1.0)
        learner = OgdLearner(fs, G=8.0)
        target = np.array([0.5, -0.5])
        y = fs.center
        for t in range(1, 5):
            got = learner.predict()
            np.testing.assert_array_equal(got, y)
            g = y - target
            learner.update(g)
            y = euclidean_project(fs, y - fs.diameter / (8.0 * math.sqrt(t)) * g)
            np.testing.assert_allclose(learner.y, y, rtol=0, atol=1e-15)

    def test_converges_on_fixed_quadratic(self):
        fs = BallSet(dim=2, radius=1.0, inner_radius=1.0)
        learner = OgdLearner(fs, G=4.0)
        target = np.array([0.5, -0.25])
        for _ in range(4000):
            y = learner.predict()
            learner.update(y - target)
        assert np.linalg.norm(learner.y - target) <= 0.05

    def test_validation(self):
        fs = BallSet(dim=2, radius=1.0, inner_radius=1.0)
        with pytest.raises(ConfigError):
            OgdLearner(fs, G=-1.0)
        with pytest.raises(ValueError):
            OgdLearner(BallSet(dim=2, radius=1.0, inner_radius=1.0, gamma=0.2), G=1.0)
