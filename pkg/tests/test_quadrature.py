import math

import numpy as np
import pytest

from platevi.quadrature import quadrature


def _tri_monomial(a, b):
    # integral of x^a y^b over the reference triangle
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


@pytest.mark.parametrize("degree", range(0, 7))
def test_triangle_rule_exact(degree):
    r = quadrature("triangle", degree)
    assert np.all(r.weights > 0)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            got = np.sum(r.weights * r.points[:, 0] ** a * r.points[:, 1] ** b)
            assert got == pytest.approx(_tri_monomial(a, b), abs=1e-15)


@pytest.mark.parametrize("degree", range(0, 10))
def test_interval_rule_exact(degree):
    r = quadrature("interval", degree)
    for a in range(degree + 1):
        assert np.sum(r.weights * r.points**a) == pytest.approx(1 / (a + 1), abs=1e-15)


def test_low_order_rules():
    assert len(quadrature("triangle", 1)) == 1
    r = quadrature("triangle", 2)
    assert len(r) == 3 and np.allclose(r.weights, 1 / 6)


@pytest.mark.parametrize("domain,degree", [("triangle", 7), ("interval", 10), ("triangle", -1), ("square", 2)])
def test_bad_requests(domain, degree):
    with pytest.raises(ValueError):
        quadrature(domain, degree)
