import math

import numpy as np
import pytest

from adflux.quadrature import (
    integrate_segment,
    integrate_triangle,
    segment_rule,
    triangle_rule,
)

REF = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def monomial_integral(a, b):
    # int over the reference triangle of x^a y^b = a! b! / (a + b + 2)!
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


@pytest.mark.parametrize("degree", [1, 2, 5])
def test_triangle_weights_sum_to_one(degree):
    rule = triangle_rule(degree)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.all(rule.weights > 0)


@pytest.mark.parametrize("degree", [1, 2, 5])
def test_triangle_monomial_exactness(degree):
    rule = triangle_rule(degree)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            got = integrate_triangle(rule, REF, lambda x, y: x ** a * y ** b)
            assert got == pytest.approx(monomial_integral(a, b), abs=1e-13)


def test_triangle_examples():
    r5 = triangle_rule(5)
    assert integrate_triangle(r5, REF, lambda x, y: 1.0 + 0 * x) == pytest.approx(0.5)
    assert integrate_triangle(r5, REF, lambda x, y: x) == pytest.approx(1.0 / 6.0)
    assert integrate_triangle(r5, REF, lambda x, y: x ** 2 * y) == pytest.approx(
        1.0 / 60.0, abs=1e-15
    )


def test_rules_agree_on_quadratics():
    tri = np.array([[0.2, 0.1], [0.9, 0.3], [0.4, 0.8]])
    g = lambda x, y: 1.0 + x - 2.0 * y + x * y
    a = integrate_triangle(triangle_rule(2), tri, g)
    b = integrate_triangle(triangle_rule(5), tri, g)
    assert a == pytest.approx(b, abs=1e-12)


def test_degenerate_triangle_rejected():
    bad = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    with pytest.raises(ValueError):
        integrate_triangle(triangle_rule(2), bad, lambda x, y: x)


@pytest.mark.parametrize("n_points", [1, 2, 3])
def test_segment_exactness(n_points):
    rule = segment_rule(n_points)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)
    for p in range(rule.degree + 1):
        got = integrate_segment(rule, (0.0, 0.0), (1.0, 0.0), lambda x, y: x ** p)
        assert got == pytest.approx(1.0 / (p + 1), abs=1e-14)


def test_segment_examples():
    two = segment_rule(2)
    assert integrate_segment(two, (0, 0), (0, 1), lambda x, y: 1.0 + 0 * y) == pytest.approx(1.0)
    assert integrate_segment(two, (0, 0), (1, 0), lambda x, y: x) == pytest.approx(0.5)
    assert integrate_segment(two, (0, 0), (1, 0), lambda x, y: x ** 3) == pytest.approx(
        0.25, abs=1e-15
    )


def test_segment_zero_length_rejected():
    with pytest.raises(ValueError):
        integrate_segment(segment_rule(2), (0.3, 0.3), (0.3, 0.3), lambda x, y: x)
