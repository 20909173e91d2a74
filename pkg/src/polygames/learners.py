"""No-regret learners over kernelized action families.

Three feedback models share the same pattern — keep per-coordinate
exponential weights, sample an action exactly through the family's kernel
oracle, and feed an unbiased (or negatively biased) loss estimate back:

* ``FullInfoLearner``: the true coordinate loss vector is observed; plain
  multiplicative weights, optionally optimistic (the previous loss vector is
  used as a prediction for the current round).
* ``IXLearner`` (semi-bandit): losses are observed only on the played
  coordinates; the implicit-exploration estimator divides by the coordinate
  marginal plus a bias parameter gamma.
* ``GeometricHedgeLearner`` (bandit): only the realized total loss is
  observed.  The learner works in a linear chart (see ``spanner``), mixes in
  uniform exploration over a barycentric spanner, and inverts the played
  round's action autocorrelation to build the loss estimate
  ell_hat = L_t Sigma_t^{-1} v_t.
"""

from __future__ import annotations

import logging
import warnings

import numpy as np
from scipy import linalg as sla

from .core import ExpWeights
from .spanner import barycentric_spanner, build_chart

logger = logging.getLogger(__name__)


def default_params(mode, d, m, T):
    """Horizon-tuned step sizes and exploration rates per feedback model."""
    d, m, T = int(d), int(m), int(T)
    if T < 1:
        raise ValueError("horizon T must be positive")
    if mode == "full":
        return {"eta": 1.0 / np.sqrt(m * T)}
    if mode == "optimistic":
        return {"eta": 1.0 / (4.0 * m)}
    if mode == "semi-bandit":
        return {"eta": 1.0 / np.sqrt(d * T),
                "gamma": m / np.sqrt(d * T)}
    if mode == "bandit":
        if T < 8 * d * d * m:
            warnings.warn(
                f"bandit horizon T={T} below 8*d^2*m={8 * d * d * m}; the "
                f"tuned rates assume a longer horizon", RuntimeWarning)
        gamma = d ** (2.0 / 3.0) * m ** (1.0 / 3.0) / T ** (1.0 / 3.0)
        eta = 1.0 / (4.0 * d ** (4.0 / 3.0) * m ** (2.0 / 3.0)
                     * T ** (1.0 / 3.0))
        return {"eta": eta, "gamma": min(gamma, 1.0)}
    raise ValueError(f"unknown mode {mode!r}")


class FullInfoLearner:
    """Multiplicative weights with exact kernel sampling; set
    ``optimistic=True`` to re-use the last loss vector as a prediction."""

    def __init__(self, oracle, eta, optimistic=False):
        self.oracle = oracle
        self.optimistic = bool(optimistic)
        allow = getattr(oracle, "fixed_cardinality", True)
        self.ew = ExpWeights(oracle.d, eta, allow_rescale=allow)
        self.last_loss = np.zeros(oracle.d)

    def weights(self):
        if not self.optimistic:
            return self.ew.weights
        predicted = ExpWeights(self.oracle.d, self.ew.eta,
                               allow_rescale=self.ew.allow_rescale)
        predicted.set_cumulative(self.ew.cumulative + self.last_loss)
        return predicted.weights

    def act(self, rng):
        return self.oracle.sample(self.weights(), rng)

    def observe(self, loss_vector):
        loss_vector = np.asarray(loss_vector, dtype=float)
        self.ew.accumulate(loss_vector)
        self.last_loss = loss_vector


class IXLearner:
    """Semi-bandit implicit-exploration learner:

        ell_tilde(j) = loss(j) * 1{v(j) = 1} / (x(j) + gamma)

    with x the coordinate marginals of the current sampling distribution.
    """

    def __init__(self, oracle, eta, gamma):
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        self.oracle = oracle
        self.gamma = float(gamma)
        allow = getattr(oracle, "fixed_cardinality", True)
        self.ew = ExpWeights(oracle.d, eta, allow_rescale=allow)
        self._pending = None  # (marginals, action) of the round in flight

    def act(self, rng):
        w = self.ew.weights
        x = self.oracle.first_moment(w)
        v = self.oracle.sample(w, rng)
        self._pending = (x, v)
        return v

    def observe(self, loss_vector):
        """Only the played coordinates of ``loss_vector`` are read."""
        if self._pending is None:
            raise RuntimeError("observe() called before act()")
        x, v = self._pending
        self._pending = None
        loss_vector = np.asarray(loss_vector, dtype=float)
        est = np.zeros(self.oracle.d)
        idx = list(v.active)
        est[idx] = loss_vector[idx] / (x[idx] + self.gamma)
        self.ew.accumulate(est)

    def estimate_for(self, x, v, loss_vector):
        """The IX estimate for a given (marginals, action, losses) triple."""
        est = np.zeros(self.oracle.d)
        idx = list(v.active)
        est[idx] = np.asarray(loss_vector, float)[idx] / (x[idx] + self.gamma)
        return est


class GeometricHedgeLearner:
    """Bandit learner: spanner-mixed exploration and inverse-autocorrelation
    loss estimation, all in chart coordinates.

    The sampling distribution is MWU over estimated chart losses, realized by
    the family's exact sampler through ambient weights that carry the chart
    cumulative on kept coordinates and zero on dropped ones.
    """

    def __init__(self, oracle, eta, gamma, rng, chart=None, spanner=None,
                 ratio=2.0):
        if not (0.0 < gamma <= 1.0):
            raise ValueError("gamma must lie in (0, 1]")
        self.oracle = oracle
        self.gamma = float(gamma)
        self.chart = chart if chart is not None else build_chart(oracle, rng)
        if spanner is None:
            self.spanner_actions, self.basis = barycentric_spanner(
                oracle, self.chart, ratio=ratio)
        else:
            self.spanner_actions, self.basis = spanner
        self.r = self.chart.r
        # BB^T / r is the autocorrelation of uniform spanner exploration
        self.explore_cov = self.basis @ self.basis.T / self.r
        self.ew = ExpWeights(oracle.d, eta, allow_rescale=False)
        self.cumulative = np.zeros(self.r)
        self.pinv_fallbacks = 0
        self._pending = None

    def _ambient_weights(self):
        self.ew.set_cumulative(self.chart.ambient_cumulative(self.cumulative))
        return self.ew.weights

    def exploit_second_moment(self, weights):
        sigma_amb = self.oracle.second_moment(weights)
        return sigma_amb[np.ix_(self.chart.kept, self.chart.kept)]

    def round_covariance(self, weights):
        """Sigma_t = (1 - gamma) Sigma(q_t) + gamma BB^T / r."""
        return ((1.0 - self.gamma) * self.exploit_second_moment(weights)
                + self.gamma * self.explore_cov)

    def act(self, rng):
        w = self._ambient_weights()
        cov = self.round_covariance(w)
        if rng.random() < self.gamma:
            v = self.spanner_actions[int(rng.integers(self.r))]
        else:
            v = self.oracle.sample(w, rng)
        self._pending = (cov, v)
        return v

    def _solve(self, cov, rhs):
        try:
            lu, piv = sla.lu_factor(cov)
            sol = sla.lu_solve((lu, piv), rhs)
            if np.all(np.isfinite(sol)):
                return sol
        except (sla.LinAlgError, ValueError):
            pass
        self.pinv_fallbacks += 1
        logger.warning("round covariance numerically singular; using "
                       "pseudo-inverse (%d fallbacks so far)",
                       self.pinv_fallbacks)
        return np.linalg.pinv(cov, rcond=1e-10) @ rhs

    def observe(self, realized_loss):
        """``realized_loss`` is the scalar loss of the played action."""
        if self._pending is None:
            raise RuntimeError("observe() called before act()")
        cov, v = self._pending
        self._pending = None
        est = float(realized_loss) * self._solve(cov, self.chart.reduce(v))
        self.cumulative = self.cumulative + est
        return est

    def estimate_for(self, cov, v, realized_loss):
        """The estimator value for a given (covariance, action, loss)."""
        return float(realized_loss) * self._solve(cov, self.chart.reduce(v))

    def chart_cumulative(self):
        return self.cumulative.copy()
