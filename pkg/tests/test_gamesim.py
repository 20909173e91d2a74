"""Repeated-game simulation: loss models, dynamics, gap accounting."""

import numpy as np
import pytest

from polygames.blotto import BlottoOracle, BlottoSpec
from polygames.core import ActionVector
from polygames.gamesim import (GameSpec, blotto_majority_losses,
                               blotto_proportional_losses, congestion_losses,
                               evaluate, run_dynamics)
from polygames.matroid import GraphSpec, MatroidOracle
from polygames.msets import MSetOracle, MSetSpec


def test_majority_losses_winner_take_all():
    spec = BlottoSpec(2, 3)
    a = ActionVector(spec.d, (spec.index(0, 3), spec.index(1, 0)))
    b = ActionVector(spec.d, (spec.index(0, 1), spec.index(1, 2)))
    la, lb = blotto_majority_losses(spec, [a, b])
    # a wins field 0 (3 > 1), loses field 1 (0 < 2); one field each
    assert a.dot(la) == pytest.approx(1.0)
    assert b.dot(lb) == pytest.approx(1.0)
    # tie-free two-player profile: realized losses sum to k (zero-sum regime)
    assert a.dot(la) + b.dot(lb) == pytest.approx(spec.k)
    # counterfactual: had a played level 2 on field 1, it would tie and lose
    assert la[spec.index(1, 2)] == pytest.approx(1.0)
    assert la[spec.index(1, 3)] == pytest.approx(0.0)
    assert np.all((la >= 0) & (la <= 1)) and np.all((lb >= 0) & (lb <= 1))


def test_majority_losses_ties_lose():
    spec = BlottoSpec(2, 2)
    a = ActionVector(spec.d, (spec.index(0, 1), spec.index(1, 1)))
    la, lb = blotto_majority_losses(spec, [a, a])
    assert a.dot(la) == pytest.approx(2.0)
    assert a.dot(lb) == pytest.approx(2.0)


def test_majority_losses_three_players():
    spec = BlottoSpec(1, 2)
    a = ActionVector(spec.d, (spec.index(0, 2),))
    b = ActionVector(spec.d, (spec.index(0, 1),))
    c = ActionVector(spec.d, (spec.index(0, 0),))
    la, lb, lc = blotto_majority_losses(spec, [a, b, c])
    assert a.dot(la) == 0.0  # 2 beats max(1, 0)
    assert b.dot(lb) == 1.0
    assert c.dot(lc) == 1.0


def test_proportional_losses():
    spec = BlottoSpec(2, 2)
    a = ActionVector(spec.d, (spec.index(0, 2), spec.index(1, 0)))
    b = ActionVector(spec.d, (spec.index(0, 1), spec.index(1, 1)))
    la, lb = blotto_proportional_losses(spec, [a, b])
    # field 0: a holds 2 of 3; field 1: a holds 0 of 1
    assert a.dot(la) == pytest.approx((1 - 2 / 3) + 1.0)
    assert b.dot(lb) == pytest.approx((1 - 1 / 3) + 0.0)
    # the 0/0 battlefield is a full loss for everyone
    z = ActionVector(spec.d, (spec.index(0, 2), spec.index(1, 0)))
    la, lb = blotto_proportional_losses(spec, [z, z])
    assert la[spec.index(1, 0)] == pytest.approx(1.0)


def test_congestion_losses_counterfactual():
    d = 4
    v1 = ActionVector(d, (0, 1))
    v2 = ActionVector(d, (1, 2))
    l1, l2 = congestion_losses(d, [v1, v2])
    # player 1 sees the opponent's load on every coordinate, plus itself
    np.testing.assert_allclose(l1, [0.5, 1.0, 1.0, 0.5])
    np.testing.assert_allclose(l2, [1.0, 1.0, 0.5, 0.5])
    assert v1.dot(l1) == pytest.approx(1.5)


@pytest.mark.parametrize("mode", ["full", "optimistic", "semi-bandit",
                                  "bandit"])
def test_dynamics_run_and_record(mode):
    spec = BlottoSpec(2, 2)
    oracle = BlottoOracle(spec)
    game = GameSpec(oracle=oracle, num_players=2,
                    loss_fn=lambda joint: blotto_majority_losses(spec, joint),
                    mode=mode, T=50, seed=5)
    traj = run_dynamics(game)
    assert traj.T == 50
    summary = evaluate(traj, oracle)
    assert len(summary["cce_gap"]) == 2
    for t in range(traj.T):
        for i in range(2):
            assert len(traj.actions[t][i].active) == spec.k


def test_dynamics_reproducible():
    spec = MSetSpec(5, 2)
    oracle = MSetOracle(spec)
    game = GameSpec(oracle=oracle, num_players=3,
                    loss_fn=lambda joint: congestion_losses(spec.d, joint),
                    mode="semi-bandit", T=40, seed=11)
    t1 = run_dynamics(game)
    t2 = run_dynamics(game)
    assert t1.actions == t2.actions
    t3 = run_dynamics(GameSpec(oracle=oracle, num_players=3,
                               loss_fn=game.loss_fn, mode="semi-bandit",
                               T=40, seed=12))
    assert t1.actions != t3.actions


def test_congestion_game_spreads_load():
    """Three players on a congestion m-set game should avoid piling up."""
    spec = MSetSpec(6, 2)
    oracle = MSetOracle(spec)
    game = GameSpec(oracle=oracle, num_players=3,
                    loss_fn=lambda joint: congestion_losses(spec.d, joint),
                    mode="full", T=800, seed=2)
    traj = run_dynamics(game)
    summary = evaluate(traj, oracle)
    assert summary["max_gap"] < 0.05


def test_zero_sum_blotto_full_info_gap_decays():
    spec = BlottoSpec(2, 3)
    oracle = BlottoOracle(spec)

    def loss_fn(joint):
        return blotto_majority_losses(spec, joint)

    short = run_dynamics(GameSpec(oracle=oracle, num_players=2,
                                  loss_fn=loss_fn, mode="full", T=200,
                                  seed=3))
    long = run_dynamics(GameSpec(oracle=oracle, num_players=2,
                                 loss_fn=loss_fn, mode="full", T=3200,
                                 seed=3))
    g_short = max(evaluate(short, oracle)["cce_gap"])
    g_long = max(evaluate(long, oracle)["cce_gap"])
    assert g_long < g_short
    assert g_long < 0.05


def test_matroid_congestion_runs():
    spec = GraphSpec(4, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)])
    oracle = MatroidOracle(spec)
    game = GameSpec(oracle=oracle, num_players=2,
                    loss_fn=lambda joint: congestion_losses(spec.d, joint),
                    mode="semi-bandit", T=60, seed=9)
    traj = run_dynamics(game)
    assert traj.T == 60
    for t in range(60):
        assert len(traj.actions[t][0].active) == spec.m
