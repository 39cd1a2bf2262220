import numpy as np

from ocland.feasible import Box
from ocland.solvers import newton_polish, projected_descent


def quadratic(A, b):
    def objective(z):
        z = np.atleast_2d(z)
        return 0.5 * np.einsum("bi,ij,bj->b", z, A, z) + z @ b

    def gradient(z):
        return np.atleast_2d(z) @ A.T + b

    return objective, gradient


def test_descent_reaches_unconstrained_quadratic_minimum():
    rng = np.random.default_rng(0)
    A = np.diag([1.0, 2.0, 3.0, 4.0])
    b = rng.normal(size=4)
    objective, gradient = quadratic(A, b)
    zstar = np.linalg.solve(A, -b)
    box = Box([-50.0] * 4, [50.0] * 4)
    starts = rng.uniform(-5, 5, size=(16, 4))
    sol = projected_descent(objective, gradient, starts, box, tol_stat=1e-8,
                            max_iter=2000)
    assert np.all(sol.converged)
    assert np.allclose(sol.point, zstar, atol=1e-7)
    assert np.allclose(sol.value, objective(zstar[None])[0], atol=1e-12)


def test_descent_respects_active_box_constraint():
    # minimize (z - 3)^2 over [-1, 1]: the solution is the boundary point 1
    A = 2.0 * np.eye(1)
    b = np.array([-6.0])
    objective, gradient = quadratic(A, b)
    box = Box([-1.0], [1.0])
    sol = projected_descent(objective, gradient, np.array([[-0.7]]), box,
                            tol_stat=1e-9)
    assert sol.converged[0]
    assert abs(sol.point[0, 0] - 1.0) <= 1e-9


def test_descent_single_start_returns_scalars():
    objective, gradient = quadratic(np.eye(2), np.zeros(2))
    sol = projected_descent(objective, gradient, np.array([3.0, -4.0]),
                            Box([-10, -10], [10, 10]), tol_stat=1e-8)
    assert np.isscalar(sol.value) and np.isscalar(sol.pg_norm)
    assert sol.converged
    assert np.allclose(sol.point, 0.0, atol=1e-7)


def test_newton_polish_tightens_flat_quartic_candidate():
    # descent stalls ~1e-2 from the minimum of z^4; polish closes the gap
    objective = lambda z: np.sum(np.atleast_2d(z) ** 4, axis=-1)
    gradient = lambda z: 4.0 * np.atleast_2d(z) ** 3
    box = Box([-2.0], [2.0])
    rough = projected_descent(objective, gradient, np.array([[0.9]]), box,
                              tol_stat=1e-7, max_iter=300).point[0]
    polished = newton_polish(objective, gradient, rough, box)
    assert abs(polished[0]) < abs(rough[0])
    assert float(np.linalg.norm(gradient(polished))) <= 1e-10


def test_newton_polish_leaves_boundary_points_alone():
    objective = lambda z: np.sum(np.atleast_2d(z) ** 2, axis=-1)
    gradient = lambda z: 2.0 * np.atleast_2d(z)
    box = Box([-1.0], [1.0])
    z = np.array([1.0])
    assert np.array_equal(newton_polish(objective, gradient, z, box), z)


def test_stall_tol_retires_slow_crawls_early():
    objective = lambda z: np.sum(np.atleast_2d(z) ** 4, axis=-1)
    gradient = lambda z: 4.0 * np.atleast_2d(z) ** 3
    box = Box([-2.0], [2.0])
    slow = projected_descent(objective, gradient, np.array([[0.9]]), box,
                             tol_stat=1e-12, max_iter=3000)
    fast = projected_descent(objective, gradient, np.array([[0.9]]), box,
                             tol_stat=1e-12, max_iter=3000, stall_tol=1e-9)
    assert fast.iterations[0] < slow.iterations[0]
    assert abs(fast.point[0, 0]) < 0.1  # still lands near the basin floor
