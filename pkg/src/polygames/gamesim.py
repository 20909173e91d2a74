"""Multi-player repeated games over a shared action family.

Every player runs a no-regret learner on the same action set; each round the
joint play determines one counterfactual coordinate-loss vector per player
(the loss the player would incur on each coordinate given the opponents'
actions), so realized losses, regrets and empirical coarse-correlated
equilibrium gaps all follow from the recorded trajectory.

Loss models:

* ``blotto-majority``: winner-take-all battlefields; only a strictly larger
  allocation wins (ties lose).  For two players on tie-free profiles the
  realized losses sum to exactly k (the zero-sum regime).
* ``blotto-proportional``: each battlefield's unit of value is split
  proportionally to the allocations (an unclaimed battlefield is lost).
* ``congestion``: per-coordinate load cost, (players on the coordinate) /
  (number of players), evaluated counterfactually per player.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Trajectory, player_rng
from .learners import (FullInfoLearner, GeometricHedgeLearner, IXLearner,
                       default_params)

MODES = ("full", "optimistic", "semi-bandit", "bandit")


def blotto_majority_losses(spec, joint_actions):
    """Winner-take-all battlefields: the counterfactual loss of playing level
    s on battlefield h is 0 when s strictly exceeds every opponent's
    allocation there and 1 otherwise (ties lose).  A player's realized loss
    is her number of non-won battlefields."""
    num_players = len(joint_actions)
    if num_players < 2:
        raise ValueError("the Blotto game needs at least two players")
    alloc = _blotto_levels(spec, joint_actions)
    out = []
    levels = np.arange(spec.n + 1)
    for i in range(num_players):
        opp_max = np.max([alloc[ip] for ip in range(num_players) if ip != i],
                         axis=0)
        entry = np.empty((spec.k, spec.n + 1))
        for h in range(spec.k):
            entry[h] = np.where(levels > opp_max[h], 0.0, 1.0)
        out.append(entry.reshape(spec.d))
    return out


def blotto_proportional_losses(spec, joint_actions):
    """Each battlefield's unit of value splits proportionally to the
    allocations: loss = 1 - s / (total troops on the battlefield), with the
    0/0 battlefield counting as a full loss."""
    num_players = len(joint_actions)
    alloc = _blotto_levels(spec, joint_actions)
    out = []
    levels = np.arange(spec.n + 1, dtype=float)
    for i in range(num_players):
        opp_sum = np.zeros(spec.k)
        for ip in range(num_players):
            if ip != i:
                opp_sum += alloc[ip]
        entry = np.empty((spec.k, spec.n + 1))
        for h in range(spec.k):
            denom = levels + opp_sum[h]
            share = np.where(denom > 0, levels / np.maximum(denom, 1e-300),
                             0.0)
            entry[h] = 1.0 - share
        out.append(entry.reshape(spec.d))
    return out


def _blotto_levels(spec, joint_actions):
    alloc = []
    for v in joint_actions:
        levels = np.empty(spec.k, dtype=int)
        for j in v.active:
            h, s = spec.unindex(j)
            levels[h] = s
        alloc.append(levels)
    return alloc


def congestion_losses(d, joint_actions):
    """Per-coordinate load cost: (opponents on the coordinate + 1) divided by
    the number of players, evaluated counterfactually per player."""
    num_players = len(joint_actions)
    load = np.zeros(d)
    for v in joint_actions:
        load += v.bits
    out = []
    for v in joint_actions:
        opponents = load - v.bits
        out.append((opponents + 1.0) / num_players)
    return out


@dataclass
class GameSpec:
    """A repeated game: one oracle shared by all players, one loss model."""

    oracle: object
    num_players: int
    loss_fn: object  # joint actions -> list of per-player loss vectors
    mode: str = "full"
    T: int = 1000
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.num_players < 1:
            raise ValueError("need at least one player")


def make_learner(oracle, mode, params, rng):
    if mode == "full":
        return FullInfoLearner(oracle, eta=params["eta"])
    if mode == "optimistic":
        return FullInfoLearner(oracle, eta=params["eta"], optimistic=True)
    if mode == "semi-bandit":
        return IXLearner(oracle, eta=params["eta"], gamma=params["gamma"])
    if mode == "bandit":
        return GeometricHedgeLearner(oracle, eta=params["eta"],
                                     gamma=params["gamma"], rng=rng)
    raise ValueError(f"unknown mode {mode!r}")


def run_dynamics(game, checkpoint=None, interval=0):
    """Run the repeated game and return the full trajectory.

    Feedback honesty: full-information learners see the whole loss vector,
    semi-bandit learners only read their played coordinates, and bandit
    learners receive just their realized scalar loss.

    ``checkpoint`` (if given) is called with the partial trajectory every
    ``interval`` rounds so long runs stay inspectable on disk.
    """
    oracle = game.oracle
    params = dict(default_params(game.mode, oracle.d, oracle.m, game.T))
    params.update(game.params)
    rngs = [player_rng(game.seed, i) for i in range(game.num_players)]
    learners = [make_learner(oracle, game.mode, params, rngs[i])
                for i in range(game.num_players)]
    traj = Trajectory(num_players=game.num_players, d=oracle.d,
                      seed=game.seed)
    for t in range(game.T):
        joint = [learners[i].act(rngs[i]) for i in range(game.num_players)]
        losses = game.loss_fn(joint)
        for i in range(game.num_players):
            if game.mode == "bandit":
                learners[i].observe(joint[i].dot(losses[i]))
            else:
                learners[i].observe(losses[i])
        traj.record(joint, losses)
        if checkpoint is not None and interval and (t + 1) % interval == 0:
            checkpoint(traj)
    return traj


def evaluate(trajectory, oracle):
    """Per-player realized regret and empirical CCE gap."""
    from .core import cce_gap, realized_regret

    brs = [oracle.best_response] * trajectory.num_players
    regrets = [realized_regret(trajectory, i, oracle.best_response)
               for i in range(trajectory.num_players)]
    gaps = cce_gap(trajectory, brs)
    return {"T": trajectory.T,
            "realized_regret": [float(r) for r in regrets],
            "cce_gap": [float(g) for g in gaps],
            "max_gap": float(max(gaps))}
