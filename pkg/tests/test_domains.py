"""Parameter-domain projections, containment, and seeding."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from berknash.domains import (
    BoxBlock,
    FiniteDomain,
    ProductDomain,
    SimplexBlock,
    box_domain,
    project_to_simplex,
    simplex_domain,
)

finite_floats = st.floats(-50.0, 50.0, allow_nan=False, allow_infinity=False)


def test_simplex_projection_known_points():
    np.testing.assert_allclose(project_to_simplex(np.array([0.2, 0.8])), [0.2, 0.8])
    np.testing.assert_allclose(project_to_simplex(np.array([1.0, 1.0])), [0.5, 0.5])
    np.testing.assert_allclose(project_to_simplex(np.array([2.0, 0.0])), [1.0, 0.0])
    # Oracle for a strictly interior case: p = v - tau with tau = (sum(v)-1)/n.
    v = np.array([0.3, 0.5, 0.6])
    np.testing.assert_allclose(project_to_simplex(v), v - (v.sum() - 1.0) / 3.0)


@settings(deadline=None, max_examples=200)
@given(st.lists(finite_floats, min_size=1, max_size=6))
def test_simplex_projection_is_feasible_and_closest(vals):
    v = np.array(vals)
    p = project_to_simplex(v)
    assert np.all(p >= 0)
    assert abs(p.sum() - 1.0) < 1e-9
    # Closest point: no random feasible q may be nearer than p.
    rng = np.random.default_rng(0)
    for _ in range(16):
        q = rng.dirichlet(np.ones(v.size))
        assert np.linalg.norm(p - v) <= np.linalg.norm(q - v) + 1e-9


@settings(deadline=None, max_examples=100)
@given(st.lists(finite_floats, min_size=2, max_size=5))
def test_simplex_projection_idempotent(vals):
    v = np.array(vals)
    p = project_to_simplex(v)
    np.testing.assert_allclose(project_to_simplex(p), p, atol=1e-12)


def test_box_block_projection_and_containment():
    b = BoxBlock(lower=(0.0, -1.0), upper=(2.0, 1.0))
    np.testing.assert_allclose(b.project(np.array([3.0, -4.0])), [2.0, -1.0])
    np.testing.assert_allclose(b.project(np.array([1.0, 0.0])), [1.0, 0.0])
    assert b.contains(np.array([0.0, 1.0]))
    assert not b.contains(np.array([2.1, 0.0]))
    assert b.dim == 2


def test_box_block_rejects_bad_bounds():
    with pytest.raises(ValueError):
        BoxBlock(lower=(0.0,), upper=(-1.0,))
    with pytest.raises(ValueError):
        BoxBlock(lower=(0.0,), upper=(float("inf"),))
    with pytest.raises(ValueError):
        BoxBlock(lower=(0.0, 0.0), upper=(1.0,))


def test_simplex_block_rejects_empty():
    with pytest.raises(ValueError):
        SimplexBlock(size=0)


def test_simplex_block_seed_points_interior():
    blk = SimplexBlock(size=3)
    for p in blk.seed_points():
        assert np.all(p > 0)
        assert abs(p.sum() - 1.0) < 1e-12


def test_product_domain_projects_blockwise():
    dom = ProductDomain(blocks=(BoxBlock((0.0,), (1.0,)), SimplexBlock(2)))
    v = np.array([5.0, 3.0, -1.0])
    out = dom.project(v)
    np.testing.assert_allclose(out[:1], [1.0])
    np.testing.assert_allclose(out[1:], project_to_simplex(v[1:]))
    assert dom.dim == 3
    assert dom.contains(out)
    assert not dom.contains(np.array([0.5, 0.5]))  # wrong dimension


def test_product_domain_seed_points_respect_cap_and_membership():
    dom = box_domain([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])
    seeds = dom.seed_points(points_per_axis=21, max_seeds=100, n_random=0)
    assert len(seeds) <= 100
    for s in seeds:
        assert dom.contains(s)


def test_product_domain_seed_points_deterministic_given_seed():
    dom = simplex_domain(3)
    a = dom.seed_points(n_random=4, rng=np.random.default_rng(7))
    b = dom.seed_points(n_random=4, rng=np.random.default_rng(7))
    np.testing.assert_array_equal(a, b)


def test_finite_domain_roundtrip_and_validation():
    dom = FiniteDomain(points=((0.0, 1.0), (2.0, 3.0)), labels=("a", "b"))
    np.testing.assert_allclose(dom.as_array(), [[0.0, 1.0], [2.0, 3.0]])
    assert dom.is_finite
    assert dom.dim == 2
    assert dom.contains(np.array([2.0, 3.0]))
    assert not dom.contains(np.array([2.0, 3.1]))
    with pytest.raises(ValueError):
        FiniteDomain(points=())
    with pytest.raises(ValueError):
        FiniteDomain(points=((0.0,), (1.0, 2.0)))
    with pytest.raises(ValueError):
        FiniteDomain(points=((0.0,),), labels=("a", "b"))
