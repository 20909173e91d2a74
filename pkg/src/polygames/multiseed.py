"""Lockstep multi-seed runners for m-set regret experiments.

Long regret-scaling experiments repeat the same single-player dynamics over
many seeds.  Running the per-seed learners one at a time spends most of the
wall clock on per-call array overhead (every step works on tiny d-sized
arrays).  The runners here advance all seeds in lockstep so each numpy
operation covers the whole seed batch, while consuming each seed's random
stream in exactly the same order as the corresponding per-seed learner
(``IXLearner`` / ``GeometricHedgeLearner`` driving an ``MSetOracle``).  The
equivalence is checked step-for-step in the test suite; these classes change
how the arithmetic is batched, not what is computed.
"""

from __future__ import annotations

import numpy as np

from .core import ActionVector, ExpWeights
from .msets import MSetOracle
from .spanner import barycentric_spanner, build_chart

_LOG_LO = np.log(ExpWeights._LO)
_LOG_HI = np.log(ExpWeights._HI)


def _prefix(w, m):
    """prefix[s, h, y] = weight of choosing y of items 1..h for seed s."""
    s, d = w.shape
    prefix = np.zeros((s, d + 1, m + 1))
    prefix[:, 0, 0] = 1.0
    for h in range(1, d + 1):
        prefix[:, h] = prefix[:, h - 1]
        prefix[:, h, 1:] += w[:, h - 1, None] * prefix[:, h - 1, :-1]
    return prefix


def _suffix(w, m):
    s, d = w.shape
    suffix = np.zeros((s, d + 2, m + 1))
    suffix[:, d + 1, 0] = 1.0
    for h in range(d, 0, -1):
        suffix[:, h] = suffix[:, h + 1]
        suffix[:, h, 1:] += w[:, h - 1, None] * suffix[:, h + 1, :-1]
    return suffix


def batched_mset_moments(spec, w, need_sigma=False):
    """(prefix tables, first moments, autocorrelations or None) for a batch
    of weight vectors; mirrors ``mset_moments`` with a leading seed axis."""
    d, m = spec.d, spec.m
    w = np.asarray(w, dtype=float)
    s = w.shape[0]
    prefix = _prefix(w, m)
    suffix = _suffix(w, m)
    z = prefix[:, d, m]
    first = w * (prefix[:, :d, :m] * suffix[:, 2:d + 2, m - 1::-1]).sum(-1) \
        / z[:, None]
    if not need_sigma:
        return prefix, first, None
    sigma = np.zeros((s, d, d))
    sigma[:, np.arange(d), np.arange(d)] = first
    if m >= 2 and d >= 2:
        # inter[s, a, b] = partition vector of items strictly between a and b
        inter = np.zeros((s, d, d, m + 1))
        col = np.zeros((s, d, m + 1))
        e0 = np.zeros(m + 1)
        e0[0] = 1.0
        for b in range(1, d):
            nxt = col.copy()
            nxt[:, :, 1:] += w[:, b - 1, None, None] * col[:, :, :-1]
            nxt[:, b - 1] = e0
            inter[:, :, b] = nxt
            col = nxt
        pair = np.zeros((s, d, d))
        suf = suffix[:, 2:d + 2]
        for x in range(m - 1):
            for y in range(m - 1 - x):
                pair += (prefix[:, :d, x, None] * inter[:, :, :, y]
                         * suf[:, None, :, m - 2 - x - y])
        iu = np.triu_indices(d, k=1)
        vals = pair[:, iu[0], iu[1]] * w[:, iu[0]] * w[:, iu[1]] / z[:, None]
        sigma[:, iu[0], iu[1]] = vals
        sigma[:, iu[1], iu[0]] = vals
    return prefix, first, sigma


def _sample_from_prefix(spec, w_row, prefix_row, rng):
    """Exact MWU sample for one seed, consuming the seed's random stream in
    the same order as ``mset_sample`` (one uniform per undecided item)."""
    d, m = spec.d, spec.m
    active = []
    remaining = m
    for h in range(d, 0, -1):
        if remaining == 0:
            break
        if remaining == h:
            active.extend(range(h))
            break
        p0 = prefix_row[h - 1, remaining]
        p1 = w_row[h - 1] * prefix_row[h - 1, remaining - 1]
        total = p0 + p1
        if total <= 0:
            raise RuntimeError("infeasible sampling state (kernel inconsistency)")
        if rng.random() < p1 / total:
            active.append(h - 1)
            remaining -= 1
    return ActionVector(d, tuple(active))


class _BatchedWeights:
    """Batched replica of ``ExpWeights`` (one row per seed)."""

    def __init__(self, num_seeds, d, eta, allow_rescale):
        self.eta = float(eta)
        self.allow_rescale = bool(allow_rescale)
        self.cumulative = np.zeros((num_seeds, d))
        self.log_scale = np.zeros(num_seeds)
        self.weights = np.ones((num_seeds, d))

    def _refresh(self):
        exponent = -self.eta * self.cumulative
        if self.allow_rescale:
            hi = exponent.max(axis=1)
            off = hi - self.log_scale
            stale = (off <= _LOG_LO) | (off >= _LOG_HI)
            self.log_scale = np.where(stale, hi, self.log_scale)
        shifted = np.clip(exponent - self.log_scale[:, None],
                          _LOG_LO, _LOG_HI)
        self.weights = np.exp(shifted)

    def accumulate(self, delta):
        self.cumulative = self.cumulative + delta
        self._refresh()

    def set_cumulative(self, cumulative):
        self.cumulative = np.array(cumulative, dtype=float)
        self._refresh()


class BatchedMSetIX:
    """All-seeds-in-lockstep version of ``IXLearner`` on an m-set family."""

    def __init__(self, spec, eta, gamma, rngs):
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        self.spec = spec
        self.gamma = float(gamma)
        self.rngs = list(rngs)
        self.num_seeds = len(self.rngs)
        self.ew = _BatchedWeights(self.num_seeds, spec.d, eta,
                                  allow_rescale=True)
        self._pending = None

    def act(self):
        w = self.ew.weights
        prefix, x, _ = batched_mset_moments(self.spec, w)
        actions = [_sample_from_prefix(self.spec, w[s], prefix[s],
                                       self.rngs[s])
                   for s in range(self.num_seeds)]
        self._pending = (x, actions)
        return actions

    def observe(self, loss_vectors):
        if self._pending is None:
            raise RuntimeError("observe() called before act()")
        x, actions = self._pending
        self._pending = None
        loss_vectors = np.asarray(loss_vectors, dtype=float)
        est = np.zeros_like(loss_vectors)
        for s, v in enumerate(actions):
            idx = list(v.active)
            est[s, idx] = loss_vectors[s, idx] / (x[s, idx] + self.gamma)
        self.ew.accumulate(est)


class BatchedMSetBandit:
    """All-seeds-in-lockstep version of ``GeometricHedgeLearner`` on an m-set
    family; the chart and spanner are shared across seeds (they are data of
    the action set, not of the random stream)."""

    def __init__(self, spec, eta, gamma, rngs, chart=None, spanner=None,
                 build_rng=None):
        if not (0.0 < gamma <= 1.0):
            raise ValueError("gamma must lie in (0, 1]")
        self.spec = spec
        self.gamma = float(gamma)
        self.rngs = list(rngs)
        self.num_seeds = len(self.rngs)
        oracle = MSetOracle(spec)
        if chart is None:
            chart = build_chart(
                oracle, build_rng or np.random.default_rng(0))
        self.chart = chart
        if spanner is None:
            spanner = barycentric_spanner(oracle, chart)
        self.spanner_actions, self.basis = spanner
        self.r = chart.r
        self.explore_cov = self.basis @ self.basis.T / self.r
        self.ew = _BatchedWeights(self.num_seeds, spec.d, eta,
                                  allow_rescale=False)
        self.cumulative = np.zeros((self.num_seeds, self.r))
        self.pinv_fallbacks = 0
        self._pending = None

    def _ambient_weights(self):
        amb = np.zeros((self.num_seeds, self.spec.d))
        amb[:, self.chart.kept] = self.cumulative
        if len(self.chart.dropped):
            amb[:, self.chart.dropped] = 0.0
        self.ew.set_cumulative(amb)
        return self.ew.weights

    def act(self):
        w = self._ambient_weights()
        prefix, _, sigma = batched_mset_moments(self.spec, w,
                                                need_sigma=True)
        kept = self.chart.kept
        cov = ((1.0 - self.gamma) * sigma[:, kept[:, None], kept[None, :]]
               + self.gamma * self.explore_cov)
        actions = []
        for s in range(self.num_seeds):
            rng = self.rngs[s]
            if rng.random() < self.gamma:
                actions.append(self.spanner_actions[int(rng.integers(self.r))])
            else:
                actions.append(_sample_from_prefix(self.spec, w[s],
                                                   prefix[s], rng))
        self._pending = (cov, actions)
        return actions

    def _solve(self, cov, rhs):
        try:
            sol = np.linalg.solve(cov, rhs[:, :, None])[:, :, 0]
            if np.all(np.isfinite(sol)):
                return sol
        except np.linalg.LinAlgError:
            pass
        self.pinv_fallbacks += 1
        sol = np.empty_like(rhs)
        for s in range(cov.shape[0]):
            try:
                row = np.linalg.solve(cov[s], rhs[s])
            except np.linalg.LinAlgError:
                row = np.linalg.pinv(cov[s], rcond=1e-10) @ rhs[s]
            if not np.all(np.isfinite(row)):
                row = np.linalg.pinv(cov[s], rcond=1e-10) @ rhs[s]
            sol[s] = row
        return sol

    def observe(self, realized_losses):
        if self._pending is None:
            raise RuntimeError("observe() called before act()")
        cov, actions = self._pending
        self._pending = None
        rhs = np.stack([self.chart.reduce(v) for v in actions])
        est = np.asarray(realized_losses, float)[:, None] * self._solve(cov,
                                                                        rhs)
        self.cumulative = self.cumulative + est
        return est
