"""Kernel oracle for m-of-d item subsets via partition functions.

The partition function f_{h,h'}(y) aggregates the weight of all ways to pick
y items among items h..h'.  Prefix/suffix tables give the kernel and first
moments in O(d m); the full interval table gives every pairwise co-occurrence
probability in one vectorized pass.
"""

from __future__ import annotations

import numpy as np

from .core import ActionVector, KernelOracle, check_mask


class MSetSpec:
    def __init__(self, d, m):
        d, m = int(d), int(m)
        if not (1 <= m <= d):
            raise ValueError(f"need 1 <= m <= d, got m={m}, d={d}")
        self.d = d
        self.m = m

    def __repr__(self):
        return f"MSetSpec(d={self.d}, m={self.m})"


def _check_weights(spec, weights):
    w = np.asarray(weights, dtype=float)
    if len(w) != spec.d:
        raise ValueError(f"weights length {len(w)} != d={spec.d}")
    if np.any(w <= 0):
        raise ValueError("weights must be strictly positive")
    return w


def _prefix_table(spec, w):
    """prefix[h] = f_{1,h}; prefix[h][y] = weight of choosing y of items 1..h."""
    m = spec.m
    prefix = np.zeros((spec.d + 1, m + 1))
    prefix[0, 0] = 1.0
    for h in range(1, spec.d + 1):
        prefix[h] = prefix[h - 1]
        prefix[h, 1:] = prefix[h, 1:] + w[h - 1] * prefix[h - 1, :-1]
    return prefix


def _suffix_table(spec, w):
    """suffix[h] = f_{h,d}; suffix[d+1] is the empty product."""
    m = spec.m
    suffix = np.zeros((spec.d + 2, m + 1))
    suffix[spec.d + 1, 0] = 1.0
    for h in range(spec.d, 0, -1):
        suffix[h] = suffix[h + 1]
        suffix[h, 1:] = suffix[h, 1:] + w[h - 1] * suffix[h + 1, :-1]
    return suffix


def mset_kernel(spec, weights, zeroed=()):
    """K(C, mask): DP f_h(y) = C'(h) f_{h-1}(y-1) + f_{h-1}(y), masked
    weights C' zeroed on the masked coordinates; returns f_d(m)."""
    w = _check_weights(spec, weights).copy()
    for j in check_mask(zeroed):
        w[j] = 0.0
    f = np.zeros(spec.m + 1)
    f[0] = 1.0
    for h in range(spec.d):
        f[1:] = f[1:] + w[h] * f[:-1]
    return float(f[spec.m])


def mset_moments(spec, weights):
    """(first-moment vector, full d x d autocorrelation matrix).

    Pr[v_h = 1]       = C(h) (f_{1,h-1} * f_{h+1,d})(m-1) / Z
    Pr[v_h = v_h' =1] = C(h) C(h') (f_{1,h-1} * f_{h+1,h'-1} * f_{h'+1,d})(m-2) / Z
    with Z = f_{1,d}(m).
    """
    w = _check_weights(spec, weights)
    d, m = spec.d, spec.m
    prefix = _prefix_table(spec, w)
    suffix = _suffix_table(spec, w)
    z = prefix[d, m]

    # first[h-1] = w[h-1] * sum_x prefix[h-1, x] * suffix[h+1, m-1-x] / z
    first = w * (prefix[:d, :m] * suffix[2:d + 2, m - 1::-1]).sum(axis=1) / z

    sigma = np.zeros((d, d))
    np.fill_diagonal(sigma, first)
    if m >= 2 and d >= 2:
        # inter[a, b] = f_{a+1, b-1} laid out over ordered pairs a < b (0-based
        # item indices); built by extending each row one item at a time.
        inter = np.zeros((d, d, m + 1))
        for a in range(d):
            inter[a, :, 0] = 1.0
            for b in range(a + 2, d):
                inter[a, b, :] = inter[a, b - 1, :]
                inter[a, b, 1:] += w[b - 1] * inter[a, b - 1, :-1]
        # pair weight: sum over x+y+zz = m-2 of
        #   prefix[a, x] * inter[a, b, y] * suffix[b+2, zz]
        pair = np.zeros((d, d))
        suf = suffix[2:d + 2]
        for x in range(m - 1):
            for y in range(m - 1 - x):
                pair += (prefix[:d, x, None] * inter[:, :, y]
                         * suf[None, :, m - 2 - x - y])
        iu = np.triu_indices(d, k=1)
        sigma[iu] = pair[iu] * w[iu[0]] * w[iu[1]] / z
        sigma.T[iu] = sigma[iu]
    return first, sigma


def mset_sample(spec, weights, rng):
    """Exact MWU sample: item d from its two-point marginal, then items
    d-1..1 from the conditional two-point laws, with the feasibility clamp."""
    w = _check_weights(spec, weights)
    prefix = _prefix_table(spec, w)
    active = []
    remaining = spec.m
    for h in range(spec.d, 0, -1):
        if remaining == 0:
            break
        if remaining == h:  # must take everything left
            active.extend(range(h))
            remaining = 0
            break
        p0 = prefix[h - 1, remaining]
        p1 = w[h - 1] * prefix[h - 1, remaining - 1]
        total = p0 + p1
        if total <= 0:
            raise RuntimeError("infeasible sampling state (kernel inconsistency)")
        if rng.random() < p1 / total:
            active.append(h - 1)
            remaining -= 1
    return ActionVector(spec.d, tuple(active))


def mset_best_response(spec, losses):
    """The m smallest-loss items, ties broken by lowest index."""
    losses = np.asarray(losses, dtype=float)
    if len(losses) != spec.d:
        raise ValueError("loss length mismatch")
    order = np.lexsort((np.arange(spec.d), losses))
    return ActionVector(spec.d, tuple(order[: spec.m].tolist()))


def mset_enumerate(spec):
    from itertools import combinations
    return [ActionVector(spec.d, combo)
            for combo in combinations(range(spec.d), spec.m)]


class MSetOracle(KernelOracle):
    def __init__(self, spec):
        self.spec = spec
        self.d = spec.d
        self.m = spec.m

    def kernel(self, weights, zeroed=()):
        return mset_kernel(self.spec, weights, zeroed)

    def first_moment_kernels(self, weights):
        first, _ = mset_moments(self.spec, weights)
        k_one = mset_kernel(self.spec, weights)
        return k_one, k_one * (1.0 - first)

    def second_moment_kernels(self, weights):
        first, sigma = mset_moments(self.spec, weights)
        k_one = mset_kernel(self.spec, weights)
        k_pair = k_one * (sigma + 1.0 - first[:, None] - first[None, :])
        return k_one, k_pair

    def first_moment(self, weights):
        return mset_moments(self.spec, weights)[0]

    def second_moment(self, weights):
        return mset_moments(self.spec, weights)[1]

    def sample(self, weights, rng):
        return mset_sample(self.spec, weights, rng)

    def best_response(self, losses):
        return mset_best_response(self.spec, losses)

    def enumerate_actions(self):
        return mset_enumerate(self.spec)

    def conditional_kernels(self, weights, fixed, j):
        return mset_conditional_kernels(self.spec, weights, fixed, j)


def mset_conditional_kernels(spec, weights, fixed, j):
    """K_{V(j)}(C, e_bar_j) and K_{V(j)}(C, 1) for the generic coordinate
    sampler: coordinates in ``fixed`` are pinned (dict index -> 0/1).

    Pinning item i=1 multiplies every surviving action weight by C(i) and
    reduces to an (m-1)-of-(rest) problem; pinning 0 just deletes the item.
    """
    w = np.asarray(weights, dtype=float)
    taken = sum(b for b in fixed.values())
    free = [i for i in range(spec.d) if i not in fixed]
    need = spec.m - taken
    if need < 0 or need > len(free):
        return 0.0, 0.0
    f = np.zeros(need + 1)
    f[0] = 1.0
    for i in free:
        f[1:] = f[1:] + w[i] * f[:-1]
    k_one = float(f[need])
    if j in fixed:
        k_bar = 0.0 if fixed[j] else k_one
    else:
        # redo excluding j's contribution: weight of picking `need` among free\{j}
        g = np.zeros(need + 1)
        g[0] = 1.0
        for i in free:
            if i == j:
                continue
            g[1:] = g[1:] + w[i] * g[:-1]
        k_bar = float(g[need])
    return k_one, k_bar
