"""Kernel oracle for Colonel Blotto troop allocations.

An action splits n troops over k battlefields; coordinate (h, s) means
"battlefield h receives exactly s troops", flat index j = h*(n+1) + s, so
d = k*(n+1) and every action activates exactly k coordinates (one per
battlefield, levels summing to n).

The kernel is a generating-function coefficient: with per-battlefield
polynomials q_h(z) = sum_s C[h,s] z^s,

    K(C, 1) = [z^n]  prod_h q_h(z),

and masking a coordinate zeroes one polynomial coefficient.  Prefix/suffix
and interval products of the q_h (all truncated at degree n, renormalized via
``ScaledPoly``) give every first and second moment.  Two independent routes
compute the pairwise moments: a masked-kernel subtraction route and a direct
product-of-the-others probability read; their agreement is a standing
cross-check.
"""

from __future__ import annotations

import numpy as np

from .convolve import ScaledPoly
from .core import ActionVector, KernelOracle, check_mask


class BlottoSpec:
    def __init__(self, k, n):
        k, n = int(k), int(n)
        if k < 1 or n < 1:
            raise ValueError(f"need k >= 1 battlefields and n >= 1 troops, "
                             f"got k={k}, n={n}")
        self.k = k
        self.n = n
        self.d = k * (n + 1)
        self.m = k

    def index(self, h, s):
        if not (0 <= h < self.k and 0 <= s <= self.n):
            raise ValueError(f"(h={h}, s={s}) out of range")
        return h * (self.n + 1) + s

    def unindex(self, j):
        return divmod(int(j), self.n + 1)

    def __repr__(self):
        return f"BlottoSpec(k={self.k}, n={self.n})"


def _check_weights(spec, weights):
    w = np.asarray(weights, dtype=float)
    if len(w) != spec.d:
        raise ValueError(f"weights length {len(w)} != d={spec.d}")
    if np.any(w <= 0):
        raise ValueError("weights must be strictly positive")
    return w.reshape(spec.k, spec.n + 1)


def _battlefield_polys(spec, c, zeroed=()):
    """One ScaledPoly per battlefield; masked coefficients zeroed."""
    c = c.copy()
    for j in check_mask(zeroed):
        h, s = spec.unindex(j)
        c[h, s] = 0.0
    return [ScaledPoly(c[h]).normalized() for h in range(spec.k)]


def _chain_product(polys, degree):
    acc = ScaledPoly.one()
    for p in polys:
        acc = acc.mul_truncated(p, degree)
    return acc


def _prefix_suffix(polys, degree):
    k = len(polys)
    prefix = [ScaledPoly.one()]
    for p in polys:
        prefix.append(prefix[-1].mul_truncated(p, degree))
    suffix = [None] * (k + 1)
    suffix[k] = ScaledPoly.one()
    for h in range(k - 1, -1, -1):
        suffix[h] = polys[h].mul_truncated(suffix[h + 1], degree)
    return prefix, suffix


def blotto_kernel(spec, weights, zeroed=()):
    """K(C, mask) = [z^n] of the product of masked battlefield polynomials."""
    c = _check_weights(spec, weights)
    full = _chain_product(_battlefield_polys(spec, c, zeroed), spec.n)
    return full.coeff_value(spec.n)


def blotto_first_moment(spec, weights):
    """Coordinate marginals x[h,s] = C[h,s] * [z^{n-s}](prod_{g != h} q_g) / K.

    One prefix and one suffix sweep; O(k n log n) total.
    """
    c = _check_weights(spec, weights)
    polys = _battlefield_polys(spec, c)
    prefix, suffix = _prefix_suffix(polys, spec.n)
    z_mant = float(prefix[spec.k].coeffs[spec.n])
    z_log = prefix[spec.k].log_scale
    if z_mant <= 0.0:
        raise ValueError("kernel vanished: no feasible allocation has weight")
    x = np.zeros((spec.k, spec.n + 1))
    for h in range(spec.k):
        others = prefix[h].mul_truncated(suffix[h + 1], spec.n)
        rel = np.exp(others.log_scale - z_log) / z_mant
        alpha = np.zeros(spec.n + 1)
        alpha[: len(others.coeffs)] = others.coeffs
        # x[h, s] reads alpha at n - s
        x[h] = c[h] * alpha[::-1] * rel
    return x.reshape(spec.d)


def _interval_table(spec, polys):
    """inter[a][b] = product of polys a..b inclusive (empty interval = 1)."""
    k, n = spec.k, spec.n
    inter = [[None] * (k + 1) for _ in range(k + 1)]
    for a in range(k):
        acc = ScaledPoly.one()
        row = inter[a]
        for b in range(a, k):
            acc = acc.mul_truncated(polys[b], n)
            row[b] = acc
    return inter


def _interval(inter, a, b):
    """Product of polys a..b, identity when the interval is empty."""
    if a > b:
        return ScaledPoly.one()
    return inter[a][b]


def blotto_second_moment(spec, weights):
    """Autocorrelation via the masked-kernel subtraction route.

    Same battlefield: levels are mutually exclusive, so off-diagonal pairs
    within a block are zero and the diagonal is the first moment.  Across
    battlefields h < h', with R = prod_{g not in {h,h'}} q_g and Q = R * q_h:

        K(C, ebar_{(h,s),(h',s')}) = K(C, ebar_{(h,s)})
            - C[h',s'] * (Q[n-s'] - C[h,s] * R[n-s-s'])

    (actions using (h',s') but not (h,s) are subtracted from the actions not
    using (h,s)), and the pairwise moment follows from the indicator
    decomposition 1{j,j' in v} = phi(1) + phi(ebar_{j,j'}) - phi(ebar_j)
    - phi(ebar_{j'}).
    """
    c = _check_weights(spec, weights)
    polys = _battlefield_polys(spec, c)
    n, k = spec.n, spec.k
    inter = _interval_table(spec, polys)
    full = _interval(inter, 0, k - 1)
    z_mant = float(full.coeffs[n])
    z_log = full.log_scale
    if z_mant <= 0.0:
        raise ValueError("kernel vanished: no feasible allocation has weight")
    x = blotto_first_moment(spec, weights).reshape(k, n + 1)

    sigma = np.zeros((spec.d, spec.d))
    levels = np.arange(n + 1)
    for h in range(k):
        diag = h * (n + 1) + levels
        sigma[diag, diag] = x[h]
    # index grid for the Hankel-style read R[n - s - s'], shared by all pairs
    idx = levels[:, None] + levels[None, :]
    idx_clipped = idx.clip(max=n)
    feasible = idx <= n
    for h in range(k):
        for hp in range(h + 1, k):
            r_poly = _interval(inter, 0, h - 1)
            r_poly = r_poly.mul_truncated(_interval(inter, h + 1, hp - 1), n)
            r_poly = r_poly.mul_truncated(_interval(inter, hp + 1, k - 1), n)
            q_poly = r_poly.mul_truncated(polys[h], n)
            q_rel = np.zeros(n + 1)
            q_rel[: len(q_poly.coeffs)] = q_poly.coeffs
            q_rel *= np.exp(q_poly.log_scale - z_log) / z_mant
            r_rel = np.zeros(n + 1)
            r_rel[: len(r_poly.coeffs)] = r_poly.coeffs
            r_rel *= np.exp(r_poly.log_scale - z_log) / z_mant
            # r_read[s, s'] = R[n - s - s'] / K  (zero when n - s - s' < 0)
            rev = r_rel[::-1]  # rev[t] = R[n - t] / K
            # indicator decomposition, algebraically reduced: the block is
            #   x[hp,s'] - C[hp,s'] (Q[n-s']/K - C[h,s] R[n-s-s']/K),
            # assembled in place as the rank-one product plus the per-column
            # residual of the masked-kernel subtraction (zero in exact
            # arithmetic)
            residual = x[hp] - c[hp] * q_rel[::-1]
            rows = slice(h * (n + 1), (h + 1) * (n + 1))
            cols = slice(hp * (n + 1), (hp + 1) * (n + 1))
            view = sigma[rows, cols]
            np.multiply(rev[idx_clipped], feasible, out=view)
            view *= c[h][:, None]
            view *= c[hp][None, :]
            view += residual[None, :]
            sigma[cols, rows] = view.T
    return sigma


def blotto_second_moment_direct(spec, weights):
    """Autocorrelation via the direct probability read: for h < h',

        Pr[s_h = s, s_h' = s'] = C[h,s] C[h',s'] * R[n-s-s'] / K

    with R the product of the other battlefields' polynomials.  Independent
    cross-check of the subtraction route.
    """
    c = _check_weights(spec, weights)
    polys = _battlefield_polys(spec, c)
    n, k = spec.n, spec.k
    inter = _interval_table(spec, polys)
    full = _interval(inter, 0, k - 1)
    z_mant = float(full.coeffs[n])
    z_log = full.log_scale
    if z_mant <= 0.0:
        raise ValueError("kernel vanished: no feasible allocation has weight")
    x = blotto_first_moment(spec, weights).reshape(k, n + 1)
    sigma = np.zeros((spec.d, spec.d))
    levels = np.arange(n + 1)
    for h in range(k):
        diag = h * (n + 1) + levels
        sigma[diag, diag] = x[h]
    idx = levels[:, None] + levels[None, :]
    idx_clipped = idx.clip(max=n)
    feasible = idx <= n
    for h in range(k):
        for hp in range(h + 1, k):
            r_poly = _interval(inter, 0, h - 1)
            r_poly = r_poly.mul_truncated(_interval(inter, h + 1, hp - 1), n)
            r_poly = r_poly.mul_truncated(_interval(inter, hp + 1, k - 1), n)
            r_rel = np.zeros(n + 1)
            r_rel[: len(r_poly.coeffs)] = r_poly.coeffs
            r_rel *= np.exp(r_poly.log_scale - z_log) / z_mant
            rev = r_rel[::-1]  # rev[t] = R[n - t] / K
            rows = slice(h * (n + 1), (h + 1) * (n + 1))
            cols = slice(hp * (n + 1), (hp + 1) * (n + 1))
            view = sigma[rows, cols]
            np.multiply(rev[idx_clipped], feasible, out=view)
            view *= c[h][:, None]
            view *= c[hp][None, :]
            sigma[cols, rows] = view.T
    return sigma


def blotto_sample(spec, weights, rng):
    """Exact MWU sample: battlefields in order, level s_h drawn proportional
    to C[h,s] times the suffix partition coefficient at the remaining budget."""
    c = _check_weights(spec, weights)
    polys = _battlefield_polys(spec, c)
    _, suffix = _prefix_suffix(polys, spec.n)
    remaining = spec.n
    active = []
    for h in range(spec.k - 1):
        tail = suffix[h + 1]
        # Pr[s_h = s] prop. to C[h,s] * tail[remaining - s]; the common
        # log scale of `tail` cancels in the normalization
        probs = np.zeros(remaining + 1)
        for s in range(remaining + 1):
            t = remaining - s
            if t < len(tail.coeffs):
                probs[s] = c[h, s] * float(tail.coeffs[t])
        total = probs.sum()
        if total <= 0:
            raise RuntimeError("infeasible sampling state (kernel inconsistency)")
        s = int(rng.choice(remaining + 1, p=probs / total))
        active.append(spec.index(h, s))
        remaining -= s
    active.append(spec.index(spec.k - 1, remaining))
    return ActionVector(spec.d, tuple(active))


def blotto_best_response(spec, losses):
    """Allocation minimizing total per-battlefield losses, by a suffix DP
    over the remaining budget; ties break to the lexicographically smallest
    level sequence (equivalently the lowest coordinate indices)."""
    losses = np.asarray(losses, dtype=float).reshape(spec.k, spec.n + 1)
    n, k = spec.n, spec.k
    best = np.full((k + 1, n + 1), np.inf)
    best[k, 0] = 0.0
    for h in range(k - 1, -1, -1):
        for r in range(n + 1):
            vals = losses[h, : r + 1] + best[h + 1, r::-1]
            best[h, r] = vals.min()
    active = []
    r = n
    for h in range(k):
        vals = losses[h, : r + 1] + best[h + 1, r::-1]
        s = int(np.argmin(vals))  # argmin returns the first (smallest s)
        active.append(spec.index(h, s))
        r -= s
    return ActionVector(spec.d, tuple(active))


def blotto_enumerate(spec):
    """All compositions of n into k nonnegative parts."""
    actions = []

    def rec(h, remaining, acc):
        if h == spec.k - 1:
            actions.append(ActionVector(spec.d,
                                        acc + [spec.index(h, remaining)]))
            return
        for s in range(remaining + 1):
            rec(h + 1, remaining - s, acc + [spec.index(h, s)])

    rec(0, spec.n, [])
    return actions


class BlottoOracle(KernelOracle):
    def __init__(self, spec):
        self.spec = spec
        self.d = spec.d
        self.m = spec.m

    def kernel(self, weights, zeroed=()):
        return blotto_kernel(self.spec, weights, zeroed)

    def first_moment(self, weights):
        return blotto_first_moment(self.spec, weights)

    def second_moment(self, weights):
        return blotto_second_moment(self.spec, weights)

    def first_moment_kernels(self, weights):
        k_one = blotto_kernel(self.spec, weights)
        return k_one, k_one * (1.0 - self.first_moment(weights))

    def second_moment_kernels(self, weights):
        k_one = blotto_kernel(self.spec, weights)
        x = self.first_moment(weights)
        sigma = self.second_moment(weights)
        return k_one, k_one * (sigma + 1.0 - x[:, None] - x[None, :])

    def sample(self, weights, rng):
        return blotto_sample(self.spec, weights, rng)

    def best_response(self, losses):
        return blotto_best_response(self.spec, losses)

    def enumerate_actions(self):
        return blotto_enumerate(self.spec)
