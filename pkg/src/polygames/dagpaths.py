"""Kernel oracle for s-t paths in a directed acyclic graph.

Coordinates are edges; actions are edge sets of source-to-sink paths, which
may have different cardinalities, so no global weight rescaling is valid for
this family.  All dynamic programs therefore run in log space: the kernel is
the backward path-weight sum F(u) = sum_e C(e) F(head(e)), moments combine
forward weights G, backward weights F and an all-pairs vertex-to-vertex
path-weight table M, and sampling walks forward with transition probabilities
C(e) F(head) / F(tail).
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .core import ActionVector, DegenerateActionSet, KernelOracle, check_mask

_NEG_INF = -np.inf


class DAGSpec:
    """Directed acyclic multigraph with a source and a sink; edge id = index."""

    def __init__(self, num_vertices, edges, source=None, sink=None):
        self.num_vertices = int(num_vertices)
        self.edges = [(int(u), int(v)) for u, v in edges]
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop ({u},{v}) not allowed")
            if not (0 <= u < self.num_vertices and 0 <= v < self.num_vertices):
                raise ValueError(f"edge ({u},{v}) out of range")
        self.source = 0 if source is None else int(source)
        self.sink = self.num_vertices - 1 if sink is None else int(sink)
        self.d = len(self.edges)
        self.topo = self._topological_order()
        self.out_edges = [[] for _ in range(self.num_vertices)]
        self.in_edges = [[] for _ in range(self.num_vertices)]
        for j, (u, v) in enumerate(self.edges):
            self.out_edges[u].append(j)
            self.in_edges[v].append(j)
        self.m = self._longest_path()
        if self.m == 0:
            raise DegenerateActionSet("no path from source to sink")

    def _topological_order(self):
        indeg = [0] * self.num_vertices
        for _, v in self.edges:
            indeg[v] += 1
        stack = [u for u in range(self.num_vertices) if indeg[u] == 0]
        order = []
        succs = [[] for _ in range(self.num_vertices)]
        for u, v in self.edges:
            succs[u].append(v)
        while stack:
            u = stack.pop()
            order.append(u)
            for v in succs[u]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    stack.append(v)
        if len(order) != self.num_vertices:
            raise ValueError("graph contains a directed cycle")
        return order

    def _longest_path(self):
        """Edge count of the longest source-to-sink path (0 if none)."""
        dist = [-1] * self.num_vertices
        dist[self.source] = 0
        for u in self.topo:
            if dist[u] < 0:
                continue
            for j in self.out_edges[u]:
                v = self.edges[j][1]
                dist[v] = max(dist[v], dist[u] + 1)
        return max(dist[self.sink], 0)

    def __repr__(self):
        return (f"DAGSpec(V={self.num_vertices}, E={self.d}, "
                f"s={self.source}, t={self.sink})")


def _check_weights(spec, weights):
    w = np.asarray(weights, dtype=float)
    if len(w) != spec.d:
        raise ValueError(f"weights length {len(w)} != d={spec.d}")
    if np.any(w <= 0):
        raise ValueError("weights must be strictly positive")
    return w


def _log_backward(spec, logw):
    """log F(u) = log sum over u-to-sink paths of the product of weights."""
    logf = np.full(spec.num_vertices, _NEG_INF)
    logf[spec.sink] = 0.0
    for u in reversed(spec.topo):
        if u == spec.sink:
            continue
        terms = [logw[j] + logf[spec.edges[j][1]] for j in spec.out_edges[u]]
        if terms:
            logf[u] = logsumexp(terms)
    return logf


def _log_forward(spec, logw):
    logg = np.full(spec.num_vertices, _NEG_INF)
    logg[spec.source] = 0.0
    for u in spec.topo:
        if u == spec.source:
            continue
        terms = [logw[j] + logg[spec.edges[j][0]] for j in spec.in_edges[u]]
        if terms:
            logg[u] = logsumexp(terms)
    return logg


def _log_pair_table(spec, logw):
    """logm[a, b] = log path-weight sum from vertex a to vertex b."""
    nv = spec.num_vertices
    logm = np.full((nv, nv), _NEG_INF)
    for b in range(nv):
        logm[b, b] = 0.0
    for a in reversed(spec.topo):
        for j in spec.out_edges[a]:
            w = spec.edges[j][1]
            contrib = logw[j] + logm[w, :]
            logm[a, :] = np.logaddexp(logm[a, :], contrib)
    # the self-entries accumulated nothing extra (DAG: no a-to-a path)
    return logm


def dag_kernel(spec, weights, zeroed=()):
    """K(C, mask): path-weight sum avoiding masked edges."""
    w = _check_weights(spec, weights).copy()
    for j in check_mask(zeroed):
        w[j] = 0.0
    with np.errstate(divide="ignore"):
        logw = np.log(w)
    return float(np.exp(_log_backward(spec, logw)[spec.source]))


def dag_first_moment(spec, weights):
    """Pr[e = (u,v) on the path] = G(u) C(e) F(v) / F(s)."""
    w = _check_weights(spec, weights)
    logw = np.log(w)
    logf = _log_backward(spec, logw)
    logg = _log_forward(spec, logw)
    log_total = logf[spec.source]
    if log_total == _NEG_INF:
        raise DegenerateActionSet("no source-to-sink path has weight")
    us = np.array([u for u, _ in spec.edges])
    vs = np.array([v for _, v in spec.edges])
    return np.exp(logg[us] + logw + logf[vs] - log_total)


def dag_second_moment(spec, weights):
    """Pr[e and e' both on the path]: for e = (u,v) preceding e' = (u',v'),

        G(u) C(e) M(v, u') C(e') F(v') / F(s)

    with M the vertex-to-vertex path-weight table; a DAG admits at most one
    ordering, so the off-diagonal is the sum of the two oriented reads."""
    w = _check_weights(spec, weights)
    logw = np.log(w)
    logf = _log_backward(spec, logw)
    logg = _log_forward(spec, logw)
    logm = _log_pair_table(spec, logw)
    log_total = logf[spec.source]
    if log_total == _NEG_INF:
        raise DegenerateActionSet("no source-to-sink path has weight")
    us = np.array([u for u, _ in spec.edges])
    vs = np.array([v for _, v in spec.edges])
    # oriented[e, e'] = log G(u_e) + log C_e + log M(v_e, u_e') + log C_e'
    #                   + log F(v_e') - log F(s)
    oriented = (logg[us][:, None] + logw[:, None] + logm[np.ix_(vs, us)]
                + logw[None, :] + logf[vs][None, :] - log_total)
    sigma = np.exp(oriented)
    sigma = sigma + sigma.T
    x = np.exp(logg[us] + logw + logf[vs] - log_total)
    np.fill_diagonal(sigma, x)
    return np.clip(sigma, 0.0, 1.0)


def dag_transition_probs(spec, weights):
    """Per-vertex (edge ids, cumulative probabilities) for the forward walk
    with next-edge probability C(e) F(head) / F(tail); reusable across draws."""
    w = _check_weights(spec, weights)
    logw = np.log(w)
    logf = _log_backward(spec, logw)
    if logf[spec.source] == _NEG_INF:
        raise DegenerateActionSet("no source-to-sink path has weight")
    table = {}
    for u in range(spec.num_vertices):
        if u == spec.sink or logf[u] == _NEG_INF:
            continue
        outs = [j for j in spec.out_edges[u]
                if logf[spec.edges[j][1]] > _NEG_INF]
        logits = np.array([logw[j] + logf[spec.edges[j][1]] for j in outs])
        probs = np.exp(logits - logsumexp(logits))
        table[u] = (outs, np.cumsum(probs / probs.sum()))
    return table


def dag_sample(spec, weights, rng, transitions=None):
    """Exact MWU sample: walk from the source, picking the next edge with
    probability C(e) F(head) / F(tail)."""
    if transitions is None:
        transitions = dag_transition_probs(spec, weights)
    active = []
    u = spec.source
    while u != spec.sink:
        outs, cum = transitions[u]
        idx = (min(int(np.searchsorted(cum, rng.random(), side="right")),
                   len(outs) - 1) if len(outs) > 1 else 0)
        j = outs[idx]
        active.append(j)
        u = spec.edges[j][1]
    return ActionVector(spec.d, tuple(active))


def dag_sample_uniform(spec, rng):
    """Uniform sample over all source-to-sink paths (path-count weights)."""
    return dag_sample(spec, np.ones(spec.d), rng)


def dag_best_response(spec, losses):
    """Minimum-loss path by DP; ties break to the lexicographically smallest
    edge-id sequence."""
    losses = np.asarray(losses, dtype=float)
    if len(losses) != spec.d:
        raise ValueError("loss length mismatch")
    cost = np.full(spec.num_vertices, np.inf)
    choice = [-1] * spec.num_vertices
    cost[spec.sink] = 0.0
    for u in reversed(spec.topo):
        if u == spec.sink:
            continue
        for j in sorted(spec.out_edges[u]):
            v = spec.edges[j][1]
            val = losses[j] + cost[v]
            if val < cost[u]:  # first (lowest-id) minimizer wins ties
                cost[u] = val
                choice[u] = j
    if not np.isfinite(cost[spec.source]):
        raise DegenerateActionSet("no path from source to sink")
    active = []
    u = spec.source
    while u != spec.sink:
        j = choice[u]
        active.append(j)
        u = spec.edges[j][1]
    return ActionVector(spec.d, tuple(active))


def dag_enumerate(spec):
    """All source-to-sink paths by DFS; only for small graphs."""
    paths = []

    def rec(u, acc):
        if u == spec.sink:
            paths.append(ActionVector(spec.d, tuple(acc)))
            return
        for j in spec.out_edges[u]:
            rec(spec.edges[j][1], acc + [j])

    rec(spec.source, [])
    return paths


def dag_path_count(spec):
    """Number of source-to-sink paths (integer DP)."""
    count = np.zeros(spec.num_vertices, dtype=object)
    count[spec.sink] = 1
    for u in reversed(spec.topo):
        if u == spec.sink:
            continue
        count[u] = sum(count[spec.edges[j][1]] for j in spec.out_edges[u])
    return int(count[spec.source])


class DAGOracle(KernelOracle):
    fixed_cardinality = False  # path lengths vary: no global rescaling

    def __init__(self, spec):
        self.spec = spec
        self.d = spec.d
        self.m = spec.m

    def kernel(self, weights, zeroed=()):
        return dag_kernel(self.spec, weights, zeroed)

    def first_moment(self, weights):
        return dag_first_moment(self.spec, weights)

    def second_moment(self, weights):
        return dag_second_moment(self.spec, weights)

    def first_moment_kernels(self, weights):
        k_one = dag_kernel(self.spec, weights)
        return k_one, k_one * (1.0 - self.first_moment(weights))

    def second_moment_kernels(self, weights):
        k_one = dag_kernel(self.spec, weights)
        x = self.first_moment(weights)
        sigma = self.second_moment(weights)
        return k_one, k_one * (sigma + 1.0 - x[:, None] - x[None, :])

    def sample(self, weights, rng):
        return dag_sample(self.spec, weights, rng)

    def best_response(self, losses):
        return dag_best_response(self.spec, losses)

    def enumerate_actions(self):
        return dag_enumerate(self.spec)
