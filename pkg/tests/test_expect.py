import numpy as np
import pytest

from ocland.diff import make_objective
from ocland.expect import (Gaussian, MonteCarloEngine, QuadratureEngine,
                           Uniform, crn_sample_bank, make_engine)
from ocland.registry import registry_lookup


HALF = np.sqrt(5.0 / 3.0)


def test_uniform_quadrature_exact_for_polynomials_degree_0_to_9():
    # order-5 Gauss rules integrate polynomials up to degree 9 exactly
    law = Uniform(-HALF, HALF)
    nodes, weights = law.quad_1d(5, 0)
    for deg in range(10):
        got = float(np.sum(weights * nodes ** deg))
        want = 0.0 if deg % 2 else HALF ** deg / (deg + 1)
        assert got == pytest.approx(want, abs=1e-12), f"degree {deg}"


def test_gaussian_quadrature_exact_for_polynomials_degree_0_to_9():
    law = Gaussian(0.7, 2.0)  # mean 0.7, standard deviation 2.0
    nodes, weights = law.quad_1d(5, 0)
    # raw moments via the recursion m_k = mu m_{k-1} + (k-1) var m_{k-2}
    var = 4.0
    m = [1.0, 0.7]
    for k in range(2, 10):
        m.append(0.7 * m[-1] + (k - 1) * var * m[-2])
    for deg in range(10):
        got = float(np.sum(weights * nodes ** deg))
        assert got == pytest.approx(m[deg], rel=1e-12), f"degree {deg}"


def test_uniform_noise_second_and_fourth_moments_coincide():
    # the registered noise half-width makes E[w^2] = E[w^4] = 5/9
    law = Uniform(-HALF, HALF)
    nodes, weights = law.quad_1d(8, 0)
    assert float(np.sum(weights * nodes ** 2)) == pytest.approx(5.0 / 9.0)
    assert float(np.sum(weights * nodes ** 4)) == pytest.approx(5.0 / 9.0)


def test_zero_noise_stochastic_evaluator_bitwise_equals_deterministic():
    prob, _ = registry_lookup("stochastic-counterexample")
    zero = prob.with_zero_noise()
    engine = QuadratureEngine(order=1)  # single node at the uniform mean 0
    obj_s, _ = make_objective(prob, engine=engine)
    obj_d, _ = make_objective(zero)
    rng = np.random.default_rng(0)
    zs = rng.uniform(-2, 2, size=(32, 3))
    a = np.asarray(obj_s(zs), dtype=float)
    b = np.asarray(obj_d(zs), dtype=float)
    assert np.array_equal(a, b)


def test_quadrature_expected_objective_matches_monte_carlo():
    prob, _ = registry_lookup("stochastic-counterexample")
    obj_q, _ = make_objective(prob, engine=QuadratureEngine(order=8))
    obj_m, _ = make_objective(prob, engine=MonteCarloEngine(count=2_000_000, seed=0))
    z = np.array([[0.0, 0.0, 1.0], [0.3, -0.5, 0.2]])
    eq = np.asarray(obj_q(z), dtype=float)
    em = np.asarray(obj_m(z), dtype=float)
    assert np.allclose(eq, em, rtol=5e-3)


def test_exact_expected_objective_value_at_known_point():
    prob, truth = registry_lookup("stochastic-counterexample")
    obj, _ = make_objective(prob, engine=QuadratureEngine(order=8))
    z = np.array([[0.0, 0.0, 1.0]])
    got = float(np.asarray(obj(z))[0])
    assert got == pytest.approx(truth["objective_at_001"], rel=1e-12)


def test_common_random_numbers_reproducible():
    prob, _ = registry_lookup("stochastic-counterexample")
    w1 = crn_sample_bank(prob.noise, prob.n, 64, seed=5)
    w2 = crn_sample_bank(prob.noise, prob.n, 64, seed=5)
    w3 = crn_sample_bank(prob.noise, prob.n, 64, seed=6)
    assert np.array_equal(w1, w2)
    assert not np.array_equal(w1, w3)


def test_make_engine_dispatch():
    prob, _ = registry_lookup("stochastic-counterexample")
    assert isinstance(make_engine(prob, kind="quadrature", order=4),
                      QuadratureEngine)
    assert isinstance(make_engine(prob, kind="mc", mc_samples=100),
                      MonteCarloEngine)
    with pytest.raises(ValueError):
        make_engine(prob, kind="bogus")
