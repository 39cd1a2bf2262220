import numpy as np
from hypothesis import given, settings, strategies as st

from ocland.feasible import Box, Polytope, ProductSet, SpectralFloor

BOX = Box([-2.0, -1.0, 0.0], [2.0, 3.0, 0.5])
POLY = Polytope([[2, -1], [-2, 1], [2, 1], [-2, -1]], [3, -1, 3, -1])
FLOOR = SpectralFloor(4, 3, 100.0)


@given(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=3))
@settings(max_examples=200, deadline=None)
def test_box_projection_idempotent_exact(coords):
    z = np.array(coords)[None, :]
    p = BOX.project(z)
    assert np.array_equal(BOX.project(p), p)
    assert bool(BOX.contains(p).all())


@given(st.lists(st.floats(-1e4, 1e4), min_size=2, max_size=2))
@settings(max_examples=200, deadline=None)
def test_polytope_projection_idempotent(coords):
    z = np.array(coords)[None, :]
    p = POLY.project(z)
    q = POLY.project(p)
    assert np.allclose(p, q, atol=1e-9)
    assert bool(POLY.contains(p, tol=1e-8).all())


@given(st.integers(0, 10_000))
@settings(max_examples=100, deadline=None)
def test_spectral_floor_projection_idempotent_exact(seed):
    rng = np.random.default_rng(seed)
    z = rng.uniform(-200, 200, size=(1, 12))
    p = FLOOR.project(z)
    assert np.array_equal(FLOOR.project(p), p)
    sv = np.linalg.svd(p.reshape(4, 3), compute_uv=False)
    assert sv.min() >= 100.0 - 1e-9


def test_product_set_projection_is_componentwise():
    ps = ProductSet([Box([-1], [1]), POLY])
    z = np.array([[5.0, 10.0, 10.0]])
    p = ps.project(z)
    assert np.array_equal(p[:, :1], Box([-1], [1]).project(z[:, :1]))
    assert np.allclose(p[:, 1:], POLY.project(z[:, 1:]))
    assert np.array_equal(ps.project(p), p)


def test_projection_fixes_interior_points():
    rng = np.random.default_rng(7)
    z = BOX.sample(rng, 32)
    assert np.array_equal(BOX.project(z), z)


def test_pg_residual_zero_only_at_constrained_optimum():
    # f(z) = ||z - c||^2 with c outside the box: residual vanishes at the
    # projection of c and not at other feasible points
    box = Box([-1.0], [1.0])
    c = 3.0
    z = np.array([[1.0], [0.0], [-1.0]])
    g = 2.0 * (z - c)
    r = np.asarray(box.pg_residual(z, g))
    assert r[0] <= 1e-12
    assert r[1] > 1e-3 and r[2] > 1e-3


def test_boundary_detection():
    assert bool(np.asarray(BOX.on_boundary(np.array([[2.0, 0.0, 0.25]]))))
    assert not bool(np.asarray(BOX.on_boundary(np.array([[0.0, 0.0, 0.25]]))))


def test_lattice_covers_bounding_box():
    pts = BOX.lattice(5)
    lo, hi = BOX.bounding_box()
    assert pts.shape == (125, 3)
    assert np.allclose(pts.min(axis=0), lo) and np.allclose(pts.max(axis=0), hi)
