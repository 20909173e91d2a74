"""Spanning-tree oracle against brute-force tree enumeration."""

import numpy as np
import pytest

from polygames.core import (DegenerateActionSet, ExplicitOracle,
                            brute_force_kernel, validate_autocorrelation)
from polygames.matroid import (GraphSpec, MatroidOracle, matroid_best_response,
                               matroid_enumerate, matroid_first_moment,
                               matroid_first_moment_naive, matroid_kernel,
                               matroid_sample, matroid_second_moment)


def triangle():
    return GraphSpec(3, [(0, 1), (1, 2), (2, 0)])


def square_with_diagonal():
    return GraphSpec(4, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)])


def graph_with_bridge():
    # two triangles joined by the bridge edge 3
    return GraphSpec(6, [(0, 1), (1, 2), (2, 0), (2, 3),
                         (3, 4), (4, 5), (5, 3)])


def parallel_multigraph():
    return GraphSpec(3, [(0, 1), (0, 1), (1, 2), (2, 0)])


def random_connected(rng, num_v, extra):
    """Random spanning tree plus `extra` random chords."""
    edges = []
    order = rng.permutation(num_v)
    for i in range(1, num_v):
        edges.append((int(order[i]), int(order[rng.integers(0, i)])))
    for _ in range(extra):
        u, v = rng.choice(num_v, size=2, replace=False)
        edges.append((int(u), int(v)))
    return GraphSpec(num_v, edges)


GRAPHS = [triangle, square_with_diagonal, graph_with_bridge,
          parallel_multigraph]


@pytest.mark.parametrize("make", GRAPHS)
def test_kernel_matches_enumeration(make):
    spec = make()
    actions = matroid_enumerate(spec)
    rng = np.random.default_rng(hash(make.__name__) % 2**31)
    for _ in range(5):
        w = np.exp(rng.standard_normal(spec.d))
        expect = brute_force_kernel(actions, w, np.ones(spec.d))
        assert matroid_kernel(spec, w) == pytest.approx(expect, rel=1e-10)
        for mask in [(0,), (spec.d - 1,), (0, spec.d - 1)]:
            y = np.ones(spec.d)
            for j in mask:
                y[j] = 0.0
            expect = brute_force_kernel(actions, w, y)
            got = matroid_kernel(spec, w, mask)
            assert got == pytest.approx(expect, rel=1e-9,
                                        abs=1e-10 * max(1.0, expect))


@pytest.mark.parametrize("make", GRAPHS)
def test_moments_match_enumeration(make):
    spec = make()
    oracle = ExplicitOracle(matroid_enumerate(spec), m=spec.m)
    rng = np.random.default_rng(1 + hash(make.__name__) % 2**31)
    for _ in range(4):
        w = np.exp(rng.standard_normal(spec.d))
        x_ref, sigma_ref = oracle.moments_by_enumeration(w)
        x = matroid_first_moment(spec, w)
        np.testing.assert_allclose(x, x_ref, rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(matroid_first_moment_naive(spec, w), x_ref,
                                   rtol=1e-9, atol=1e-12)
        sigma = matroid_second_moment(spec, w)
        np.testing.assert_allclose(sigma, sigma_ref, rtol=1e-8, atol=1e-10)
        validate_autocorrelation(sigma, x, atol=1e-7)


def test_random_graphs_against_enumeration():
    rng = np.random.default_rng(42)
    for trial in range(8):
        spec = random_connected(rng, int(rng.integers(3, 7)),
                                int(rng.integers(0, 4)))
        oracle = ExplicitOracle(matroid_enumerate(spec), m=spec.m)
        w = np.exp(rng.standard_normal(spec.d))
        x_ref, sigma_ref = oracle.moments_by_enumeration(w)
        np.testing.assert_allclose(matroid_first_moment(spec, w), x_ref,
                                   rtol=1e-8, atol=1e-11)
        np.testing.assert_allclose(matroid_second_moment(spec, w), sigma_ref,
                                   rtol=1e-7, atol=1e-9)


def test_bridge_is_certain():
    spec = graph_with_bridge()
    rng = np.random.default_rng(3)
    w = np.exp(rng.standard_normal(spec.d))
    x = matroid_first_moment(spec, w)
    assert x[3] == pytest.approx(1.0, abs=1e-12)
    sigma = matroid_second_moment(spec, w)
    np.testing.assert_allclose(sigma[3], x, atol=1e-9)


@pytest.mark.parametrize("make", [triangle, square_with_diagonal,
                                  parallel_multigraph])
def test_sampler_distribution(make):
    spec = make()
    oracle = ExplicitOracle(matroid_enumerate(spec), m=spec.m)
    rng = np.random.default_rng(17)
    w = np.exp(rng.standard_normal(spec.d))
    p_ref = dict(zip(oracle.actions, oracle.distribution(w)))
    n_draw = 20000
    counts = {}
    for _ in range(n_draw):
        v = matroid_sample(spec, w, rng)
        counts[v] = counts.get(v, 0) + 1
    tv = 0.5 * sum(abs(counts.get(a, 0) / n_draw - p) for a, p in p_ref.items())
    assert tv < 0.025


def test_best_response_kruskal_ties():
    spec = square_with_diagonal()
    losses = np.array([0.5, 0.5, 0.5, 0.5, 0.5])
    # all equal: lowest ids win
    assert matroid_best_response(spec, losses).active == (0, 1, 2)
    oracle = ExplicitOracle(matroid_enumerate(spec), m=spec.m)
    rng = np.random.default_rng(8)
    for _ in range(20):
        losses = rng.random(spec.d)
        got = matroid_best_response(spec, losses)
        ref = oracle.best_response(losses)
        assert got.dot(losses) == pytest.approx(ref.dot(losses), abs=1e-12)


def test_invalid_graphs():
    with pytest.raises(ValueError):
        GraphSpec(3, [(0, 0)])
    with pytest.raises(DegenerateActionSet):
        GraphSpec(4, [(0, 1), (2, 3)])
    with pytest.raises(ValueError):
        GraphSpec(2, [(0, 5)])
    spec = triangle()
    with pytest.raises(ValueError):
        matroid_kernel(spec, np.ones(2))
