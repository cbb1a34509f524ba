import math

import numpy as np
import pytest

from lseig.quadrature import edge_rule, triangle_rule


@pytest.mark.parametrize("degree", range(1, 9))
def test_triangle_rule_exact_on_monomials(degree):
    bary, w = triangle_rule(degree)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(bary.sum(axis=1), 1.0)
    x, y = bary[:, 1], bary[:, 2]
    for i in range(degree + 1):
        for j in range(degree + 1 - i):
            # int over the reference triangle of x^i y^j = i! j! / (i + j + 2)!
            exact = math.factorial(i) * math.factorial(j) / math.factorial(i + j + 2)
            assert 0.5 * np.sum(w * x**i * y**j) == pytest.approx(exact, rel=1e-12)


def test_edge_rule_two_points_exact_for_cubics():
    s, w = edge_rule(2)
    for p in range(4):
        assert np.sum(w * s**p) == pytest.approx(1.0 / (p + 1), rel=1e-14)
