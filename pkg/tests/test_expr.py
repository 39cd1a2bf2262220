import numpy as np
import pytest

from ocland.expr import ExprError, parse, pretty
from ocland.smooth import ExprMap, fd_gradient


def random_expr(rng, depth=0):
    """Random expression over x0, x1, u0, u1 in the supported grammar."""
    if depth > 3 or rng.random() < 0.3:
        leaf = rng.integers(0, 6)
        if leaf < 4:
            return ["x0", "x1", "u0", "u1"][leaf]
        return f"{rng.uniform(-5, 5):.3f}"
    op = rng.integers(0, 6)
    a = random_expr(rng, depth + 1)
    b = random_expr(rng, depth + 1)
    if op == 0:
        return f"({a} + {b})"
    if op == 1:
        return f"({a} - {b})"
    if op == 2:
        return f"({a}) * ({b})"
    if op == 3:
        return f"({a}) / ({b} + 10.0)"
    if op == 4:
        return f"({a})^{int(rng.integers(1, 4))}"
    return f"exp(-(({a})^2) / 50.0)"


def test_pretty_parse_round_trip_is_fixed_point():
    # pretty(parse(s)) must be a fixed point: parsing it again and
    # pretty-printing again gives the same string, and the same values
    rng = np.random.default_rng(0)
    env_rng = np.random.default_rng(1)
    for _ in range(100):
        text = random_expr(rng)
        node = parse(text)
        printed = pretty(node)
        node2 = parse(printed)
        assert pretty(node2) == printed
        env = {v: env_rng.uniform(-2, 2) for v in ("x0", "x1", "u0", "u1")}
        v1, v2 = node.eval(env), node2.eval(env)
        assert v1 == v2 or (np.isnan(v1) and np.isnan(v2))


def test_symbolic_derivative_matches_finite_differences():
    rng = np.random.default_rng(2)
    checked = 0
    for _ in range(60):
        text = random_expr(rng)
        node = parse(text)
        for var in sorted(node.variables()):
            deriv = node.diff(var)
            point = {v: rng.uniform(-1.5, 1.5)
                     for v in ("x0", "x1", "u0", "u1")}

            def f(t):
                env = dict(point)
                env[var] = float(t[..., 0]) if np.ndim(t) else float(t)
                return node.eval(env)

            got = deriv.eval(point)
            ref = fd_gradient(lambda z: np.asarray(
                [f(zz) for zz in np.atleast_2d(z)[:, 0]]),
                np.array([[point[var]]]))[0, 0]
            if np.isfinite(got) and np.isfinite(ref) and abs(ref) < 1e3:
                assert got == pytest.approx(ref, rel=1e-4, abs=1e-4)
                checked += 1
    assert checked > 50


def test_parse_error_reports_offset():
    with pytest.raises(ExprError) as err:
        parse("x0 + * u0")
    assert "5" in str(err.value)
    with pytest.raises(ExprError):
        parse("x0 + sin(u0)")  # unsupported function
    with pytest.raises(ExprError):
        parse("x0 + (u0")


def test_expr_map_matches_hand_coded_quartic():
    # the registered first-stage cost, written out by hand; the two
    # implementations must agree everywhere, including at (x, u) = (0, 3)
    text = ("0.25*u0^4 - ((3*x0+4)/3)*u0^3 + ((3*x0^2+8*x0+3)/2)*u0^2"
            " - x0*(x0+1)*(x0+3)*u0 + exp(x0^4)")
    m = ExprMap(text, [("x", 1), ("u", 1)], scalar=True)

    def by_hand(x, u):
        return (0.25 * u ** 4 - (3 * x + 4) / 3 * u ** 3
                + (3 * x ** 2 + 8 * x + 3) / 2 * u ** 2
                - x * (x + 1) * (x + 3) * u + np.exp(x ** 4))

    rng = np.random.default_rng(3)
    xs = rng.uniform(-2, 2, size=(64, 1))
    us = rng.uniform(-4, 4, size=(64, 1))
    got = np.asarray(m(xs, us), dtype=float)
    want = by_hand(xs[:, 0], us[:, 0])
    assert np.allclose(got, want, rtol=1e-12, atol=1e-12)
    assert np.asarray(m(np.zeros((1, 1)), 3.0 * np.ones((1, 1)))).item() \
        == pytest.approx(-1.25)


def test_split_action_terms_preserves_sum():
    m = ExprMap("0.25*u0^4 - x0^2*u0^2 + exp(x0^4) + x0^2",
                [("x", 1), ("u", 1)], scalar=True)
    dep, free = m.split_action_terms()
    x = np.array([[0.5], [-1.2]])
    u = np.array([[0.3], [2.0]])
    total = np.asarray(m(x, u), dtype=float)
    parts = np.asarray(dep(x, u), dtype=float) \
        + np.asarray(free(x, np.zeros_like(u)), dtype=float)
    assert np.allclose(total, parts, rtol=1e-12)
