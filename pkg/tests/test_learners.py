"""Learner correctness: parameter schedules, estimator bias, regret decay."""

import numpy as np
import pytest

from polygames.core import ExplicitOracle, player_rng
from polygames.msets import MSetOracle, MSetSpec, mset_enumerate
from polygames.dagpaths import DAGOracle, DAGSpec
from polygames.learners import (FullInfoLearner, GeometricHedgeLearner,
                                IXLearner, default_params)


def test_default_params_bandit_worked_example():
    p = default_params("bandit", d=4, m=2, T=256)
    assert p["gamma"] == pytest.approx(0.5, rel=1e-12)
    assert p["eta"] == pytest.approx(1.0 / 256.0, rel=1e-12)


def test_default_params_semi_bandit():
    p = default_params("semi-bandit", d=16, m=4, T=400)
    assert p["eta"] == pytest.approx(1.0 / 80.0)
    assert p["gamma"] == pytest.approx(4.0 / 80.0)


def test_default_params_bandit_short_horizon_warns():
    with pytest.warns(RuntimeWarning):
        default_params("bandit", d=10, m=3, T=100)


def test_full_info_tracks_mwu_exactly():
    spec = MSetSpec(5, 2)
    oracle = MSetOracle(spec)
    learner = FullInfoLearner(oracle, eta=0.3)
    rng = np.random.default_rng(0)
    cum = np.zeros(spec.d)
    for _ in range(25):
        loss = rng.random(spec.d)
        learner.act(rng)
        learner.observe(loss)
        cum += loss
    expect = np.exp(-0.3 * cum)
    got = learner.weights() * np.exp(learner.ew.log_scale)
    np.testing.assert_allclose(got, expect, rtol=1e-12)


def test_optimistic_weights_use_last_loss():
    spec = MSetSpec(4, 2)
    oracle = MSetOracle(spec)
    learner = FullInfoLearner(oracle, eta=0.5, optimistic=True)
    loss = np.array([1.0, 0.0, 0.0, 0.0])
    learner.observe(loss)
    w = learner.weights()
    # cumulative is one observation, prediction doubles it on coordinate 0
    assert w[0] / w[1] == pytest.approx(np.exp(-0.5 * 2.0))


def test_ix_estimator_expectation():
    """E[ell_tilde(j)] over the action draw equals ell(j) x(j)/(x(j)+gamma):
    check by exact enumeration of the sampling distribution."""
    spec = MSetSpec(5, 2)
    oracle = MSetOracle(spec)
    ref = ExplicitOracle(mset_enumerate(spec), m=2)
    gamma = 0.05
    learner = IXLearner(oracle, eta=0.1, gamma=gamma)
    rng = np.random.default_rng(1)
    for _ in range(3):
        loss = rng.random(spec.d)
        learner.act(rng)
        learner.observe(loss)  # drift the weights somewhere nontrivial
    w = learner.ew.weights
    x = oracle.first_moment(w)
    p = ref.distribution(w)
    loss = rng.random(spec.d)
    expect = np.zeros(spec.d)
    for prob, v in zip(p, ref.actions):
        expect += prob * learner.estimate_for(x, v, loss)
    np.testing.assert_allclose(expect, loss * x / (x + gamma), rtol=1e-9)


def test_ix_only_reads_played_coordinates():
    spec = MSetSpec(5, 2)
    oracle = MSetOracle(spec)
    learner = IXLearner(oracle, eta=0.1, gamma=0.1)
    rng = np.random.default_rng(2)
    v = learner.act(rng)
    loss = np.full(spec.d, np.nan)
    loss[list(v.active)] = 0.5
    learner.observe(loss)  # NaNs outside the played coordinates are ignored
    assert np.all(np.isfinite(learner.ew.cumulative))


def test_geometric_hedge_estimator_unbiased_by_enumeration():
    """Sum over all actions and both exploration branches of
    p(v) * L(v) * Sigma^{-1} v_S equals the true chart loss exactly."""
    spec = MSetSpec(5, 2)
    oracle = MSetOracle(spec)
    ref = ExplicitOracle(mset_enumerate(spec), m=2)
    rng = np.random.default_rng(3)
    learner = GeometricHedgeLearner(oracle, eta=0.01, gamma=0.25, rng=rng)
    # drift the state with a few random rounds
    for _ in range(4):
        v = learner.act(rng)
        learner.observe(rng.random())
    loss = rng.random(spec.d)
    w = learner._ambient_weights()
    cov = learner.round_covariance(w)
    q = dict(zip(ref.actions, ref.distribution(w)))
    gamma = learner.gamma
    mu = 1.0 / learner.r
    expect = np.zeros(learner.r)
    support = set(ref.actions) | set(learner.spanner_actions)
    for v in support:
        p = (1.0 - gamma) * q.get(v, 0.0)
        p += gamma * mu * learner.spanner_actions.count(v)
        if p == 0.0:
            continue
        expect += p * learner.estimate_for(cov, v, v.dot(loss))
    np.testing.assert_allclose(expect, learner.chart.chart_loss(loss),
                               rtol=1e-8, atol=1e-10)
    assert learner.pinv_fallbacks == 0


def test_geometric_hedge_on_variable_cardinality_family():
    spec = DAGSpec(4, [(0, 1), (0, 2), (1, 3), (2, 3), (0, 3)])
    oracle = DAGOracle(spec)
    rng = np.random.default_rng(4)
    learner = GeometricHedgeLearner(oracle, eta=0.05, gamma=0.3, rng=rng)
    assert learner.ew.allow_rescale is False
    loss = np.array([0.9, 0.1, 0.9, 0.1, 0.9])
    for _ in range(300):
        v = learner.act(rng)
        learner.observe(v.dot(loss))
    # the cheap path 0->2->3 should dominate the sampling distribution
    w = learner._ambient_weights()
    x = oracle.first_moment(w)
    assert x[1] > 0.5 and x[3] > 0.5


def test_ix_learner_regret_decays():
    spec = MSetSpec(6, 2)
    oracle = MSetOracle(spec)
    fixed_loss = np.array([0.9, 0.1, 0.8, 0.1, 0.9, 0.85])
    best = oracle.best_response(fixed_loss)

    def run(T):
        params = default_params("semi-bandit", spec.d, spec.m, T)
        learner = IXLearner(oracle, **params)
        rng = player_rng(7, 0)
        total = 0.0
        for _ in range(T):
            v = learner.act(rng)
            noisy = np.clip(fixed_loss + 0.1 * rng.standard_normal(spec.d),
                            0.0, 1.0)
            total += v.dot(noisy)
            learner.observe(noisy)
        return total / T

    short = run(500) - best.dot(fixed_loss)
    long = run(8000) - best.dot(fixed_loss)
    assert long < 0.12
    assert long < 0.6 * short  # average regret decays with the horizon


def test_observe_before_act_raises():
    oracle = MSetOracle(MSetSpec(4, 2))
    learner = IXLearner(oracle, eta=0.1, gamma=0.1)
    with pytest.raises(RuntimeError):
        learner.observe(np.zeros(4))
