"""Shared domain types, the kernel-oracle abstraction and regret accounting.

Actions are binary d-dimensional incidence vectors with at most m active
coordinates.  Every specialized action family (Blotto allocations, spanning
trees, DAG paths, m-sets) implements the ``KernelOracle`` interface; the
brute-force oracle in this module enumerates the action set explicitly and
serves as the reference for all of them.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np


class DimensionMismatch(ValueError):
    pass


class DegenerateActionSet(ValueError):
    pass


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class ActionVector:
    """Binary incidence vector, stored both densely and as active indices."""

    d: int
    active: tuple

    def __post_init__(self):
        act = tuple(sorted(set(int(j) for j in self.active)))
        if act and (act[0] < 0 or act[-1] >= self.d):
            raise ValueError(f"active index out of range for d={self.d}: {act}")
        object.__setattr__(self, "active", act)

    @property
    def bits(self):
        v = np.zeros(self.d)
        if self.active:
            v[list(self.active)] = 1.0
        return v

    @classmethod
    def from_bits(cls, bits):
        bits = np.asarray(bits)
        if not np.all((bits == 0) | (bits == 1)):
            raise ValueError("action bits must be 0/1")
        return cls(len(bits), tuple(np.flatnonzero(bits).tolist()))

    def dot(self, vec):
        vec = np.asarray(vec, dtype=float)
        if len(vec) != self.d:
            raise DimensionMismatch(f"expected length {self.d}, got {len(vec)}")
        return float(sum(vec[j] for j in self.active))


def check_loss_vector(entries, d=None):
    """Validate a per-coordinate loss vector: real, in [0, 1]."""
    vec = np.asarray(entries, dtype=float)
    if d is not None and len(vec) != d:
        raise DimensionMismatch(f"loss vector length {len(vec)} != {d}")
    if np.any(vec < -1e-12) or np.any(vec > 1 + 1e-12):
        raise ValueError("loss entries must lie in [0, 1]")
    return np.clip(vec, 0.0, 1.0)


def check_mask(zeroed):
    """A mask zeroes at most two coordinates."""
    zs = tuple(sorted(set(int(j) for j in zeroed)))
    if len(zs) > 2:
        raise ValueError(f"mask may zero at most 2 coordinates, got {zs}")
    return zs


class ExpWeights:
    """Per-coordinate exponential cumulative-loss weights C(j) = exp(-eta c(j)).

    ``log_scale`` holds a global renormalization offset so that the stored
    weights stay inside double range:  weights(j) * exp(log_scale) equals
    exp(-eta * cumulative(j)) exactly (weights are recomputed from the
    cumulative vector, never incrementally drifted).

    Rescaling multiplies all weights by a common constant, which leaves every
    policy ratio unchanged for fixed-cardinality families.  Families with
    variable action cardinality (DAG paths) must construct with
    ``allow_rescale=False``.
    """

    _LO, _HI = 1e-100, 1e100

    def __init__(self, d, eta, allow_rescale=True):
        if eta <= 0:
            raise ValueError("eta must be positive")
        self.d = int(d)
        self.eta = float(eta)
        self.allow_rescale = bool(allow_rescale)
        self.cumulative = np.zeros(self.d)
        self.log_scale = 0.0
        self.weights = np.ones(self.d)

    def _refresh(self):
        exponent = -self.eta * self.cumulative
        if self.allow_rescale:
            hi = float(np.max(exponent))
            if not (np.log(self._LO) < hi - self.log_scale < np.log(self._HI)):
                self.log_scale = hi
        # clip to the representable band; a coordinate pinned at the floor has
        # negligible relative weight anyway, and positivity is preserved
        shifted = np.clip(exponent - self.log_scale,
                          np.log(self._LO), np.log(self._HI))
        self.weights = np.exp(shifted)

    def accumulate(self, estimator_losses):
        delta = np.asarray(estimator_losses, dtype=float)
        if len(delta) != self.d:
            raise DimensionMismatch("estimator loss length mismatch")
        self.cumulative = self.cumulative + delta
        self._refresh()

    def set_cumulative(self, cumulative):
        self.cumulative = np.asarray(cumulative, dtype=float).copy()
        self._refresh()


def validate_autocorrelation(sigma, first_moment, atol=1e-8):
    """Check symmetry, entry range, diagonal = first moment, PSD floor."""
    sigma = np.asarray(sigma)
    if not np.allclose(sigma, sigma.T, atol=atol):
        raise ValueError("autocorrelation matrix not symmetric")
    if np.any(sigma < -atol) or np.any(sigma > 1 + atol):
        raise ValueError("autocorrelation entries must lie in [0, 1]")
    if not np.allclose(np.diag(sigma), first_moment, atol=atol):
        raise ValueError("autocorrelation diagonal must equal the first moment")
    lam = np.linalg.eigvalsh((sigma + sigma.T) / 2.0)
    if lam.min() < -1e-8:
        raise ValueError(f"autocorrelation not PSD: min eigenvalue {lam.min()}")


# ---------------------------------------------------------------------------
# kernel oracle interface


class KernelOracle:
    """One action-set family: kernels, moments, sampling, best response.

    ``d`` is the coordinate count and ``m`` the maximum action cardinality.
    Weight vectors are strictly positive; masks zero at most two coordinates.
    """

    d: int
    m: int
    # families whose actions all share one cardinality tolerate global weight
    # rescaling (it multiplies every action weight by the same constant)
    fixed_cardinality = True

    def kernel(self, weights, zeroed=()):
        """K(weights, mask) = sum over actions of the product of masked
        weights over active coordinates."""
        raise NotImplementedError

    def first_moment_kernels(self, weights):
        """Return (K(C, 1), array of K(C, e_bar_j) for every j)."""
        raise NotImplementedError

    def second_moment_kernels(self, weights):
        """Return (K(C, 1), d x d array of K(C, e_bar_{j,j'}))."""
        raise NotImplementedError

    def sample(self, weights, rng):
        """Exact sample from the MWU distribution p(v) proportional to the
        product of weights over v's active coordinates."""
        raise NotImplementedError

    def best_response(self, losses):
        """Action minimizing losses . v, ties broken deterministically."""
        raise NotImplementedError

    def enumerate_actions(self):
        """Explicit action list; only feasible on small instances."""
        raise NotImplementedError

    def condition(self, weights, fixed):
        """Weight vector realizing the conditional action set with the
        coordinates in ``fixed`` (a dict j -> 0/1) pinned, or None when the
        family cannot express conditioning as a weight surgery."""
        return None

    # derived quantities -----------------------------------------------------

    def first_moment(self, weights):
        """Coordinate marginals x(j) = Pr[v(j) = 1] under MWU(weights)."""
        k_one, k_bar = self.first_moment_kernels(weights)
        return 1.0 - k_bar / k_one

    def second_moment(self, weights):
        """Autocorrelation matrix Sigma[j,j'] = Pr[v(j) = v(j') = 1]."""
        k_one, k_pair = self.second_moment_kernels(weights)
        _, k_bar = self.first_moment_kernels(weights)
        return 1.0 - (k_bar[:, None] + k_bar[None, :] - k_pair) / k_one


def assemble_second_moment(k_one, k_bar, k_pair):
    """Autocorrelation from raw kernels (the indicator-decomposition identity)."""
    k_bar = np.asarray(k_bar, dtype=float)
    return 1.0 - (k_bar[:, None] + k_bar[None, :] - np.asarray(k_pair)) / k_one


# ---------------------------------------------------------------------------
# brute-force reference oracle


def brute_force_kernel(actions, x, y):
    """Exact sum over actions of prod_{j in v} x(j) y(j)."""
    if not actions:
        raise ValueError("action list is empty")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = actions[0].d
    if len(x) != d or len(y) != d:
        raise DimensionMismatch("x/y length must equal action dimension")
    total = 0.0
    for v in actions:
        prod = 1.0
        for j in v.active:
            prod *= x[j] * y[j]
        total += prod
    return total


def brute_force_mwu_distribution(actions, weights):
    """MWU probabilities p(v) proportional to prod_{j in v} weights(j)."""
    if not actions:
        raise ValueError("action list is empty")
    weights = np.asarray(weights, dtype=float)
    if np.any(weights <= 0):
        raise ValueError("weights must be positive")
    logw = np.log(weights)
    scores = np.array([sum(logw[j] for j in v.active) for v in actions])
    scores -= scores.max()
    p = np.exp(scores)
    return p / p.sum()


class ExplicitOracle(KernelOracle):
    """Kernel oracle over an explicitly enumerated action list."""

    def __init__(self, actions, m=None):
        if not actions:
            raise ValueError("action list is empty")
        self.actions = list(actions)
        self.d = actions[0].d
        self.m = m if m is not None else max(len(v.active) for v in actions)
        self.fixed_cardinality = (
            len({len(v.active) for v in actions}) == 1)

    def _mask_vec(self, zeroed):
        y = np.ones(self.d)
        for j in check_mask(zeroed):
            y[j] = 0.0
        return y

    def kernel(self, weights, zeroed=()):
        return brute_force_kernel(self.actions, np.asarray(weights, float),
                                  self._mask_vec(zeroed))

    def first_moment_kernels(self, weights):
        k_one = self.kernel(weights)
        k_bar = np.array([self.kernel(weights, (j,)) for j in range(self.d)])
        return k_one, k_bar

    def second_moment_kernels(self, weights):
        k_one = self.kernel(weights)
        k_pair = np.empty((self.d, self.d))
        for j in range(self.d):
            for jp in range(j, self.d):
                val = self.kernel(weights, (j, jp))
                k_pair[j, jp] = k_pair[jp, j] = val
        return k_one, k_pair

    def distribution(self, weights):
        return brute_force_mwu_distribution(self.actions, weights)

    def moments_by_enumeration(self, weights):
        """(first moment, autocorrelation) straight from the distribution."""
        p = self.distribution(weights)
        x = np.zeros(self.d)
        sigma = np.zeros((self.d, self.d))
        for prob, v in zip(p, self.actions):
            idx = list(v.active)
            x[idx] += prob
            for a in idx:
                sigma[a, idx] += prob
        return x, sigma

    def sample(self, weights, rng):
        p = self.distribution(weights)
        return self.actions[int(rng.choice(len(self.actions), p=p))]

    def best_response(self, losses):
        losses = np.asarray(losses, dtype=float)
        best, best_val = None, None
        for v in self.actions:
            val = v.dot(losses)
            if best is None or val < best_val - 1e-15:
                best, best_val = v, val
        return best

    def enumerate_actions(self):
        return list(self.actions)

    def condition(self, weights, fixed):
        sub = [v for v in self.actions
               if all(int(j in v.active) == b for j, b in fixed.items())]
        return sub  # explicit conditional set, not a weight vector


# ---------------------------------------------------------------------------
# rng streams


def player_rng(base_seed, player_id):
    """Deterministic per-player random stream derived from the base seed."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=int(base_seed),
                               spawn_key=(int(player_id),)))


# ---------------------------------------------------------------------------
# trajectory and accounting


@dataclass
class Trajectory:
    """Per-round record of a repeated game: joint actions and realized losses.

    ``loss_vectors[t][i]`` is player i's full counterfactual coordinate-loss
    vector at round t (what the player would have lost on each coordinate
    given the opponents' play), so regret and CCE gaps can be evaluated
    offline against any fixed deviation.
    """

    num_players: int
    d: int
    seed: int = 0
    actions: list = field(default_factory=list)       # [t][i] -> ActionVector
    realized: list = field(default_factory=list)      # [t][i] -> float
    loss_vectors: list = field(default_factory=list)  # [t][i] -> np.ndarray

    @property
    def T(self):
        return len(self.actions)

    def record(self, joint_actions, loss_vecs):
        realized = [v.dot(l) for v, l in zip(joint_actions, loss_vecs)]
        self.actions.append(list(joint_actions))
        self.loss_vectors.append([np.asarray(l, float) for l in loss_vecs])
        self.realized.append(realized)

    def cumulative_losses(self, player, upto=None):
        upto = self.T if upto is None else upto
        total = np.zeros(self.d)
        for t in range(upto):
            total += self.loss_vectors[t][player]
        return total

    def cumulative_realized(self, player, upto=None):
        upto = self.T if upto is None else upto
        return float(sum(self.realized[t][player] for t in range(upto)))


def realized_regret(trajectory, player, best_response_oracle, upto=None):
    """Realized loss minus the best fixed action in hindsight."""
    cum = trajectory.cumulative_losses(player, upto)
    best = best_response_oracle(cum)
    return trajectory.cumulative_realized(player, upto) - best.dot(cum)


def cce_gap(trajectory, best_response_oracles):
    """Per-player empirical coarse-correlated-equilibrium gap.

    The gap of player i is the time-averaged realized loss minus the loss of
    the best fixed deviation against the recorded opponent play; with exact
    counterfactual loss vectors this is the time-averaged realized regret.
    """
    T = trajectory.T
    if T == 0:
        raise ValueError("empty trajectory")
    gaps = []
    for i in range(trajectory.num_players):
        gaps.append(realized_regret(trajectory, i, best_response_oracles[i]) / T)
    return gaps


# ---------------------------------------------------------------------------
# persistence


def write_trajectory_csv(path, trajectory, best_response_oracles):
    """CSV rows (round, player, active indices, realized loss, cumulative regret)."""
    num_players = trajectory.num_players
    cum_loss = [np.zeros(trajectory.d) for _ in range(num_players)]
    cum_real = [0.0] * num_players
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "player", "action_active_indices",
                         "realized_loss", "cumulative_regret"])
        for t in range(trajectory.T):
            for i in range(num_players):
                cum_loss[i] += trajectory.loss_vectors[t][i]
                cum_real[i] += trajectory.realized[t][i]
                best = best_response_oracles[i](cum_loss[i])
                regret = cum_real[i] - best.dot(cum_loss[i])
                joined = ";".join(str(j) for j in trajectory.actions[t][i].active)
                writer.writerow([t, i, joined,
                                 f"{trajectory.realized[t][i]:.12g}",
                                 f"{regret:.12g}"])


def read_trajectory_csv(path, num_players, d):
    """Rebuild joint actions from a trajectory CSV (losses are recomputed by
    the caller from the game rules)."""
    rounds = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            t, i = int(row["round"]), int(row["player"])
            active = tuple(int(x) for x in row["action_active_indices"].split(";")
                           if x != "")
            rounds.setdefault(t, {})[i] = ActionVector(d, active)
    joint = []
    for t in sorted(rounds):
        joint.append([rounds[t][i] for i in range(num_players)])
    return joint


def write_summary_json(path, summary):
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_summary_json(path):
    with open(path) as fh:
        return json.load(fh)
