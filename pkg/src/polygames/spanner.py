"""Linear coordinate charts and barycentric spanners for action families.

Combinatorial action sets usually do not span their ambient coordinate space
(battlefield levels sum to one, flow is conserved at internal vertices,
bridges are always present), which makes ambient autocorrelation matrices
singular.  A *chart* picks a coordinate subset S such that the kept
coordinates span the family's linear span and every dropped coordinate is an
exact linear function of the kept ones: v[drop] = W^T v[S] for all actions.
Losses then project exactly (l . v = (l[S] + W l[drop]) . v[S]) and the
reduced autocorrelation is nonsingular, so inverse-covariance loss estimation
is unbiased in chart coordinates with no affine intercept term.

The chart is built numerically: probe the family's best-response oracle with
signed unit and gaussian objectives, run a column-pivoted QR on the probed
action matrix, keep the pivot columns up to the numeric rank, and verify the
linear reconstruction on the probes.

On top of a chart, ``barycentric_spanner`` runs the two-phase
determinant-maximization construction (build a basis greedily via cofactor
objectives, then swap while some action grows |det| by more than the ratio
C), yielding a C-approximate barycentric spanner: every action's coordinates
in the spanner basis are bounded by C.  ``spanner_certificate`` checks that
bound empirically on oracle-extreme actions.
"""

from __future__ import annotations

import numpy as np
from scipy import linalg as sla

from .core import DegenerateActionSet


class Chart:
    """Coordinate-subset chart: kept indices, dropped indices and the exact
    linear reconstruction v[dropped] = lift.T @ v[kept]."""

    def __init__(self, d, kept, dropped, lift):
        self.d = int(d)
        self.kept = np.asarray(kept, dtype=int)
        self.dropped = np.asarray(dropped, dtype=int)
        self.lift = np.asarray(lift, dtype=float)  # (r, n_dropped)
        self.r = len(self.kept)

    def reduce(self, action):
        """Chart coordinates of an action (a 0/1 vector of length r)."""
        bits = action.bits
        return bits[self.kept]

    def reduce_bits(self, bits):
        return np.asarray(bits, dtype=float)[self.kept]

    def chart_loss(self, ambient_loss):
        """Reduced loss l_r with l_r . v[S] = l . v for every action."""
        ambient_loss = np.asarray(ambient_loss, dtype=float)
        out = ambient_loss[self.kept].copy()
        if len(self.dropped):
            out += self.lift @ ambient_loss[self.dropped]
        return out

    def ambient_cumulative(self, chart_cumulative):
        """Ambient cumulative-loss vector whose exponential weights realize
        the chart MWU distribution (dropped coordinates carry zero)."""
        out = np.zeros(self.d)
        out[self.kept] = np.asarray(chart_cumulative, dtype=float)
        return out

    def embed(self, chart_vector):
        """Ambient vector with the chart entries on S and zeros elsewhere."""
        out = np.zeros(self.d)
        out[self.kept] = np.asarray(chart_vector, dtype=float)
        return out


def probe_actions(oracle, rng, num_gaussian=None):
    """Oracle-extreme actions exposing the family's span: best responses to
    all signed unit objectives plus random gaussian objectives."""
    d = oracle.d
    if num_gaussian is None:
        num_gaussian = 3 * d
    probes = []
    for j in range(d):
        e = np.zeros(d)
        e[j] = 1.0
        probes.append(oracle.best_response(e))
        probes.append(oracle.best_response(-e))
    for _ in range(num_gaussian):
        probes.append(oracle.best_response(rng.standard_normal(d)))
    return probes


def build_chart(oracle, rng, num_gaussian=None, tol=1e-9):
    """Numeric chart from probed actions via column-pivoted QR."""
    actions = probe_actions(oracle, rng, num_gaussian)
    a = np.array([v.bits for v in actions])  # (N, d)
    _, rdiag, perm = sla.qr(a, mode="economic", pivoting=True)
    diag = np.abs(np.diag(rdiag))
    scale = diag[0] if diag.size and diag[0] > 0 else 1.0
    rank = int(np.sum(diag > tol * scale))
    if rank == 0:
        raise DegenerateActionSet("probed actions are all zero")
    kept = np.sort(perm[:rank])
    dropped = np.array([j for j in range(oracle.d) if j not in set(kept)],
                       dtype=int)
    if len(dropped):
        sol, residual, _, _ = np.linalg.lstsq(a[:, kept], a[:, dropped],
                                              rcond=None)
        recon = a[:, kept] @ sol
        err = np.max(np.abs(recon - a[:, dropped]))
        if err > 1e-6:
            raise DegenerateActionSet(
                f"dropped coordinates are not linear in kept ones "
                f"(reconstruction error {err:.2e})")
        lift = sol
    else:
        lift = np.zeros((rank, 0))
    return Chart(oracle.d, kept, dropped, lift)


def _argmax_linear(oracle, chart, c):
    """Action maximizing |c . reduce(v)| via two signed oracle calls."""
    a = chart.embed(c)
    v_plus = oracle.best_response(-a)   # maximizes  a . v
    v_minus = oracle.best_response(a)   # minimizes  a . v
    val_plus = abs(float(np.dot(c, chart.reduce(v_plus))))
    val_minus = abs(float(np.dot(c, chart.reduce(v_minus))))
    if val_plus >= val_minus:
        return v_plus, val_plus
    return v_minus, val_minus


def barycentric_spanner(oracle, chart, ratio=2.0, max_sweeps=200):
    """C-approximate barycentric spanner in chart coordinates.

    Phase 1 fills an r x r basis column by column, each time maximizing the
    absolute determinant with the column as a free variable (a linear
    objective given by the cofactor vector).  Phase 2 swaps any action that
    multiplies |det| by more than ``ratio`` until none does.
    """
    r = chart.r
    basis_mat = np.eye(r)
    basis_actions = [None] * r
    for i in range(r):
        c = _cofactor_objective(basis_mat, i)
        v, val = _argmax_linear(oracle, chart, c)
        if val <= 0.0:
            raise DegenerateActionSet(
                "action set does not span the chart (phase 1 stalled); "
                "the chart rank is inconsistent with the oracle")
        basis_actions[i] = v
        basis_mat[:, i] = chart.reduce(v)
    for _ in range(max_sweeps):
        swapped = False
        for i in range(r):
            c = _cofactor_objective(basis_mat, i)
            current = abs(float(np.dot(c, basis_mat[:, i])))
            v, val = _argmax_linear(oracle, chart, c)
            if val > ratio * current * (1.0 + 1e-12):
                basis_actions[i] = v
                basis_mat[:, i] = chart.reduce(v)
                swapped = True
        if not swapped:
            return basis_actions, basis_mat
    raise RuntimeError("spanner swap phase did not converge")


def _cofactor_objective(basis_mat, i):
    """Vector c with c . v = det(basis with column i replaced by v)."""
    r = basis_mat.shape[0]
    cof = np.empty(r)
    sub = np.delete(basis_mat, i, axis=1)
    for j in range(r):
        minor = np.delete(sub, j, axis=0)
        sign = (-1.0) ** (j + i)
        cof[j] = sign * np.linalg.det(minor)
    return cof


def spanner_coefficients(chart, basis_mat, action):
    """Coordinates alpha with basis_mat @ alpha = reduce(action)."""
    return np.linalg.solve(basis_mat, chart.reduce(action))


def spanner_certificate(oracle, chart, basis_mat, rng, num_actions=10000,
                        ratio=2.0, tol=1e-6):
    """Max |alpha| over oracle-extreme test actions; a valid C-approximate
    spanner keeps it at most ratio + tol.  Returns the observed maximum."""
    lu, piv = sla.lu_factor(basis_mat)
    worst = 0.0
    d = oracle.d
    for _ in range(num_actions):
        v = oracle.best_response(rng.standard_normal(d))
        alpha = sla.lu_solve((lu, piv), chart.reduce(v))
        worst = max(worst, float(np.max(np.abs(alpha))))
        if worst > ratio + tol:
            break
    return worst
