"""Kernel oracle for spanning trees of a connected multigraph.

Coordinates are edges; actions are spanning trees, so every action has
exactly |V| - 1 active coordinates.  The kernel is the weighted tree count,
i.e. any cofactor determinant of the weighted Laplacian (matrix-tree
theorem).  Masking an edge zeroes its weight, which is a rank-one Laplacian
update, so all first moments come from a single grounded-Laplacian inverse
(c_e times the effective resistance) and all pairwise masked kernels from
rank-two determinant-lemma updates, batched into one E x E table.

Sampling walks the edges in id order, drawing each inclusion from its
conditional marginal; inclusions contract the edge (union-find meta-nodes,
parallel meta-edges merged by weight sums) and exclusions subtract the edge's
weight from its meta-edge.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .core import ActionVector, DegenerateActionSet, KernelOracle, check_mask


class GraphSpec:
    """Undirected multigraph given as an edge list; edge id = list position."""

    def __init__(self, num_vertices, edges):
        self.num_vertices = int(num_vertices)
        self.edges = [(int(u), int(v)) for u, v in edges]
        if self.num_vertices < 2:
            raise ValueError("need at least 2 vertices")
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop ({u},{v}) not allowed")
            if not (0 <= u < self.num_vertices and 0 <= v < self.num_vertices):
                raise ValueError(f"edge ({u},{v}) out of range")
        self.d = len(self.edges)
        self.m = self.num_vertices - 1
        if not self._connected():
            raise DegenerateActionSet("graph is not connected: no spanning tree")

    def _connected(self):
        parent = list(range(self.num_vertices))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for u, v in self.edges:
            parent[find(u)] = find(v)
        return len({find(a) for a in range(self.num_vertices)}) == 1

    def __repr__(self):
        return f"GraphSpec(V={self.num_vertices}, E={self.d})"


def _check_weights(spec, weights):
    w = np.asarray(weights, dtype=float)
    if len(w) != spec.d:
        raise ValueError(f"weights length {len(w)} != d={spec.d}")
    if np.any(w <= 0):
        raise ValueError("weights must be strictly positive")
    return w


def _grounded_laplacian(num_vertices, edges, weights, ground=0):
    """Weighted Laplacian with the ground vertex's row and column removed."""
    lap = np.zeros((num_vertices, num_vertices))
    for (u, v), c in zip(edges, weights):
        lap[u, u] += c
        lap[v, v] += c
        lap[u, v] -= c
        lap[v, u] -= c
    keep = [i for i in range(num_vertices) if i != ground]
    return lap[np.ix_(keep, keep)]


def tree_count_logdet(num_vertices, edges, weights):
    """(sign, log) of the weighted spanning-tree count; sign 0 means none."""
    lt = _grounded_laplacian(num_vertices, edges, weights)
    sign, logdet = np.linalg.slogdet(lt)
    if sign < 0.5:  # a weighted tree count cannot be negative
        return 0.0, -np.inf
    return float(sign), float(logdet)


def matroid_kernel(spec, weights, zeroed=()):
    """K(C, mask) = weighted count of spanning trees avoiding masked edges."""
    w = _check_weights(spec, weights).copy()
    for j in check_mask(zeroed):
        w[j] = 0.0
    sign, logdet = tree_count_logdet(spec.num_vertices, spec.edges, w)
    return float(sign * np.exp(logdet))


def _padded_inverse(spec, w):
    """Inverse of the grounded Laplacian, padded back to V x V with zeros in
    the ground vertex's row and column."""
    lt = _grounded_laplacian(spec.num_vertices, spec.edges, w)
    try:
        minv = np.linalg.inv(lt)
    except np.linalg.LinAlgError:
        raise DegenerateActionSet("graph effectively disconnected under "
                                  "the given weights")
    full = np.zeros((spec.num_vertices, spec.num_vertices))
    full[1:, 1:] = minv
    return full


def _resistance_table(spec, w):
    """S[j, j'] = b_j^T Ltilde^{-1} b_j' for all edge pairs (b = incidence)."""
    mp = _padded_inverse(spec, w)
    us = np.array([u for u, _ in spec.edges])
    vs = np.array([v for _, v in spec.edges])
    return (mp[np.ix_(us, us)] - mp[np.ix_(us, vs)]
            - mp[np.ix_(vs, us)] + mp[np.ix_(vs, vs)])


def matroid_first_moment(spec, weights):
    """x_e = c_e * (effective resistance across e): one matrix inverse for
    the whole batch instead of one determinant per edge."""
    w = _check_weights(spec, weights)
    mp = _padded_inverse(spec, w)
    us = np.array([u for u, _ in spec.edges])
    vs = np.array([v for _, v in spec.edges])
    reff = mp[us, us] + mp[vs, vs] - 2.0 * mp[us, vs]
    return np.clip(w * reff, 0.0, 1.0)


def matroid_first_moment_naive(spec, weights):
    """Reference batch: one masked determinant per edge (the identity
    x_e = 1 - K(C, ebar_e) / K(C, 1) evaluated directly)."""
    w = _check_weights(spec, weights)
    _, log_k1 = tree_count_logdet(spec.num_vertices, spec.edges, w)
    x = np.empty(spec.d)
    for j in range(spec.d):
        wj = w.copy()
        wj[j] = 0.0
        sign, logdet = tree_count_logdet(spec.num_vertices, spec.edges, wj)
        x[j] = 1.0 - sign * np.exp(logdet - log_k1)
    return x


def matroid_second_moment(spec, weights):
    """Pairwise moments from rank-two determinant-lemma updates:

        K(C, ebar_{j,j'}) / K(C, 1)
            = (1 - c_j S_jj)(1 - c_j' S_j'j') - c_j c_j' S_jj'^2

    with S the incidence-projected inverse table, then the indicator
    decomposition; the diagonal is the first moment."""
    w = _check_weights(spec, weights)
    s = _resistance_table(spec, w)
    x = np.clip(w * np.diag(s), 0.0, 1.0)
    kpair_ratio = ((1.0 - w * np.diag(s))[:, None]
                   * (1.0 - w * np.diag(s))[None, :]
                   - (w[:, None] * w[None, :]) * s * s)
    sigma = 1.0 - (1.0 - x)[:, None] - (1.0 - x)[None, :] + kpair_ratio
    np.fill_diagonal(sigma, x)
    return np.clip(sigma, 0.0, 1.0)


def matroid_sample(spec, weights, rng):
    """Exact MWU sample over spanning trees by sequential conditioning.

    Edges are decided in id order.  The inclusion probability of edge j is
    the ratio of the weighted tree counts of the two conditioned minors
    (contract j vs delete j), each evaluated by a meta-graph cofactor
    determinant.  Contractions merge meta-nodes and sum parallel meta-edge
    weights; deletions subtract the edge's own weight from its meta-edge.
    """
    w = _check_weights(spec, weights)
    parent = list(range(spec.num_vertices))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    meta = {}  # frozenset of two meta-roots -> summed weight of alive edges
    for (u, v), c in zip(spec.edges, w):
        key = frozenset((u, v))
        meta[key] = meta.get(key, 0.0) + c

    def meta_logcount():
        roots = sorted({find(a) for a in range(spec.num_vertices)})
        if len(roots) == 1:
            return 1.0, 0.0  # fully contracted: exactly one (empty) tree
        relabel = {r: i for i, r in enumerate(roots)}
        edges, ws = [], []
        for key, c in meta.items():
            if c <= 0.0:
                continue
            a, b = tuple(key)
            edges.append((relabel[a], relabel[b]))
            ws.append(c)
        return tree_count_logdet(len(roots), edges, np.array(ws))

    active = []
    for j, ((u, v), c) in enumerate(zip(spec.edges, w)):
        ru, rv = find(u), find(v)
        if ru == rv:
            continue  # j would close a cycle given prior inclusions
        key = frozenset((ru, rv))
        # delete branch: remove j's weight from its meta-edge
        saved = meta[key]
        meta[key] = saved - c
        sign_del, log_del = meta_logcount()
        meta[key] = saved
        # contract branch: merge the meta-nodes
        saved_parent = parent[:]
        saved_meta = dict(meta)
        _contract(parent, find, meta, ru, rv)
        sign_con, log_con = meta_logcount()
        log_con += np.log(c)  # the included edge contributes its own weight
        if sign_con < 0.5:
            include = False
        elif sign_del < 0.5:
            include = True
        else:
            p = 1.0 / (1.0 + np.exp(log_del - log_con))
            include = rng.random() < p
        if include:
            active.append(j)
        else:
            parent[:] = saved_parent
            meta.clear()
            meta.update(saved_meta)
            meta[key] = saved - c
    if len(active) != spec.m:
        raise RuntimeError("sampler failed to build a spanning tree")
    return ActionVector(spec.d, tuple(active))


def _contract(parent, find, meta, ru, rv):
    """Union rv into ru and remap rv's meta-edges (merging parallels)."""
    parent[rv] = ru
    stale = [key for key in meta if rv in key]
    for key in stale:
        c = meta.pop(key)
        others = [a for a in key if a != rv]
        if not others:  # the contracted pair itself: now a self-loop
            continue
        other = find(others[0])
        if other == ru:
            continue  # became a self-loop, drop
        new_key = frozenset((ru, other))
        meta[new_key] = meta.get(new_key, 0.0) + c


def matroid_best_response(spec, losses):
    """Minimum-loss spanning tree: Kruskal with ties by lowest edge id."""
    losses = np.asarray(losses, dtype=float)
    if len(losses) != spec.d:
        raise ValueError("loss length mismatch")
    order = np.lexsort((np.arange(spec.d), losses))
    parent = list(range(spec.num_vertices))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    active = []
    for j in order:
        u, v = spec.edges[j]
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[rv] = ru
            active.append(int(j))
            if len(active) == spec.m:
                break
    return ActionVector(spec.d, tuple(active))


def matroid_enumerate(spec):
    """All spanning trees by brute force; only for small graphs."""
    trees = []
    for combo in combinations(range(spec.d), spec.m):
        parent = list(range(spec.num_vertices))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        ok = True
        for j in combo:
            u, v = spec.edges[j]
            ru, rv = find(u), find(v)
            if ru == rv:
                ok = False
                break
            parent[rv] = ru
        if ok:
            trees.append(ActionVector(spec.d, combo))
    return trees


class MatroidOracle(KernelOracle):
    def __init__(self, spec):
        self.spec = spec
        self.d = spec.d
        self.m = spec.m

    def kernel(self, weights, zeroed=()):
        return matroid_kernel(self.spec, weights, zeroed)

    def first_moment(self, weights):
        return matroid_first_moment(self.spec, weights)

    def second_moment(self, weights):
        return matroid_second_moment(self.spec, weights)

    def first_moment_kernels(self, weights):
        k_one = matroid_kernel(self.spec, weights)
        return k_one, k_one * (1.0 - self.first_moment(weights))

    def second_moment_kernels(self, weights):
        k_one = matroid_kernel(self.spec, weights)
        x = self.first_moment(weights)
        sigma = self.second_moment(weights)
        return k_one, k_one * (sigma + 1.0 - x[:, None] - x[None, :])

    def sample(self, weights, rng):
        return matroid_sample(self.spec, weights, rng)

    def best_response(self, losses):
        return matroid_best_response(self.spec, losses)

    def enumerate_actions(self):
        return matroid_enumerate(self.spec)
