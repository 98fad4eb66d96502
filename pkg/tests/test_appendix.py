import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simplexot.appendix import (
    StepFunction,
    appendix_report,
    build_example,
    cell_sum_length,
    phi,
    phi_prime,
    phi_second,
    random_interval_margins,
    riemannian_length,
    verify_derivative_bounds,
    verify_interval_bounds,
)
from simplexot.errors import DomainError, ValidationError


def brute_violations(M, N):
    """Breakpoint intervals breaking (1/2)|I|^2 <= int_I f <= 3 |I|^(1/2), in exact arithmetic."""
    cells = M * N
    low = Fraction(1, N)
    pre = [Fraction(0)]
    for j in range(cells):
        pre.append(pre[-1] + (Fraction(M) if j % M == 0 else low) / cells)
    lower = upper = 0
    for i in range(cells):
        for j in range(i + 1, cells + 1):
            L = Fraction(j - i, cells)
            integral = pre[j] - pre[i]
            lower += integral < L**2 / 2
            upper += integral * integral > 9 * L
    return lower, upper


def test_small_example_exact():
    f = build_example(4, 9, Fraction(1, 2), 2)
    assert f.low == Fraction(1, 9)
    assert riemannian_length(f) == Fraction(3, 4)
    assert cell_sum_length(f.values()) == pytest.approx(0.75, abs=1e-15)
    assert phi_prime(f, 1) == Fraction(13, 12)
    rep = verify_interval_bounds(f)
    assert rep["mode"] == "exhaustive" and rep["passed"]
    assert rep["intervals_covered"] == 36 * 37 // 2
    assert rep["arithmetic"] == "exact"


@pytest.mark.parametrize("M,N", [(4, 9), (5, 9), (2, 3), (7, 9), (29, 3), (100, 3)])
def test_interval_check_agrees_with_brute_force(M, N):
    f = StepFunction(M, N, Fraction(1, 2), Fraction(2))
    rep = verify_interval_bounds(f)
    lower, upper = brute_violations(M, N)
    assert (rep["lower_violations"], rep["upper_violations"]) == (lower, upper)
    assert rep["passed"] == (lower == upper == 0)


def test_negative_control_fails_for_tall_cells():
    # one high cell of width 1/(MN) carries 1/N, above 3 (MN)^(-1/2) once M > 9N
    rep = verify_interval_bounds(StepFunction(100, 3, Fraction(1, 2), Fraction(2)))
    assert not rep["passed"] and rep["upper_violations"] > 0
    assert rep["witness"] is not None


def test_periodic_mode_matches_exhaustive():
    f = StepFunction(7, 9, Fraction(1, 2), Fraction(2))
    full = verify_interval_bounds(f)
    per = verify_interval_bounds(f, exhaustive_limit=10)
    assert per["mode"] != full["mode"]
    assert per["passed"] == full["passed"]
    assert per["worst_lower_margin"] == pytest.approx(full["worst_lower_margin"], rel=1e-12)
    assert per["worst_upper_margin"] == pytest.approx(full["worst_upper_margin"], rel=1e-12)


def test_large_example():
    rep = appendix_report(100, 10007, 0.5, 2)
    closed = 1 / math.sqrt(100) + (1 - 1 / 100) / math.sqrt(10007)
    assert rep["length"] == pytest.approx(closed, abs=1e-12)
    assert abs(rep["length"] - 0.10990) <= 1e-5
    assert rep["interval_bounds"]["passed"] and rep["derivative_bounds"]["passed"]
    assert rep["interval_bounds"]["intervals_covered"] == 1000700 * 1000701 // 2


def test_rejections():
    with pytest.raises(ValidationError):
        build_example(4, 8, 0.5, 2)
    with pytest.raises(ValidationError):
        build_example(9, 4, 0.5, 2)
    with pytest.raises(ValidationError):
        build_example(4, 9, 1.5, 2)
    with pytest.raises(ValidationError):
        build_example(4, 9, 0.5, 1)


def test_domain_guard():
    f = build_example(4, 9, 0.5, 2)
    with pytest.raises(DomainError):
        phi(f, Fraction(3, 2))
    with pytest.raises(DomainError):
        phi_second(f, -0.1)


@settings(max_examples=40)
@given(st.integers(0, 36), st.integers(1, 35))
def test_phi_is_twice_integrated_step_function(k, j):
    f = build_example(4, 9, 0.5, 2)
    x = Fraction(k, 36)
    # phi' at x is the integral of f over [0, x]; phi at x is the integral of phi'
    want_prime = sum((f.value(i) for i in range(k)), Fraction(0)) / 36
    assert phi_prime(f, x) - phi_prime(f, 0) == want_prime
    y = Fraction(j, 36) + Fraction(1, 72)
    assert phi_second(f, y) == f.value(j)
    h = Fraction(1, 10**6)
    if Fraction(0) < x < 1:
        assert abs(float((phi(f, x + h) - phi(f, x - h)) / (2 * h)) - float(phi_prime(f, x))) < 1e-5


def test_derivative_bounds_and_random_margins():
    f = build_example(4, 9, 0.5, 2)
    assert verify_derivative_bounds(f)["passed"]
    lo, hi = random_interval_margins(f, n=500)
    assert lo >= 0 and hi >= 0
