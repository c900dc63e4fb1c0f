import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cubicatlas.curve import (
    branch_continue, curve_degree, euler_characteristic, fiber_polynomial, fiber_solve,
    on_curve_residual,
)
from cubicatlas.errors import StepUnderflow, ValidationError

unit_disk = st.builds(
    lambda r, t: math.sqrt(r) * complex(math.cos(t), math.sin(t)),
    st.floats(0, 1), st.floats(0, 2 * math.pi),
)


def test_curve_degree():
    assert [curve_degree(p) for p in (1, 2, 3, 4)] == [1, 2, 8, 24]


@pytest.mark.parametrize("p", range(1, 13))
def test_degree_recursion(p):
    assert sum(curve_degree(n) for n in range(1, p + 1) if p % n == 0) == 3 ** (p - 1)


def test_euler_characteristic():
    assert euler_characteristic(1) == 1
    assert euler_characteristic(2) == 0
    assert euler_characteristic(3) == -8
    assert euler_characteristic(4) == -48


def test_euler_characteristic_topology():
    # genus g with n punctures has chi = 2 - 2g - n
    assert euler_characteristic(3) == 2 - 2 * 1 - 8
    assert euler_characteristic(4) == 2 - 2 * 15 - 20


def test_fiber_p1():
    sol = fiber_solve(1, 1)
    assert len(sol.roots) == 1
    assert abs(sol.roots[0].a - 3) < 1e-12 and sol.roots[0].exact_period == 1


def test_fiber_c0_p2():
    sol = fiber_solve(0, 2)
    got = {(round(r.a.real, 9) + 0.0, round(r.a.imag, 9) + 0.0, r.exact_period) for r in sol.roots}
    assert got == {(0.0, 0.0, 1), (0.0, 1.0, 2), (0.0, -1.0, 2)}


def test_fiber_matches_coefficients():
    # cross-check against the dense polynomial through numpy's companion solver
    c = 0.3 - 0.4j
    coeffs = fiber_polynomial(c, 3)
    assert abs(coeffs[-1] - 1) < 1e-14 and len(coeffs) == 10
    ref = np.roots(coeffs[::-1])
    got = fiber_solve(c, 3).values()
    for r in ref:
        assert np.min(np.abs(got - r)) < 1e-8


def test_fiber_polynomial_multiprecision_agrees():
    c = 0.2 + 0.1j
    hi = fiber_polynomial(c, 6)
    assert len(hi) == 3 ** 5 + 1
    a = 0.37 - 0.21j
    val = sum(complex(x) * a ** k for k, x in enumerate(hi))
    z = c
    for _ in range(6):
        z = z ** 3 - 3 * c * c * z + a
    assert abs(val - (z - c)) < 1e-9


def test_fiber_guard():
    with pytest.raises(ValidationError):
        fiber_solve(0.1, 9)


def _expected_histogram(p):
    return {n: curve_degree(n) for n in range(1, p + 1) if p % n == 0}


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_fiber_cardinality_random(p):
    rng = np.random.default_rng(p)
    for _ in range(100):
        c = 2 * math.sqrt(rng.random()) * np.exp(2j * np.pi * rng.random())
        sol = fiber_solve(c, p, perturb=True, rng=rng)
        assert len(sol.roots) == 3 ** (p - 1)
        assert sol.histogram() == _expected_histogram(p)
        assert max(r.residual for r in sol.roots) < 1e-10


def _set_close(x, y, tol=1e-9):
    return all(np.min(np.abs(np.asarray(y) - u)) < tol for u in x) and len(x) == len(y)


@settings(max_examples=30, deadline=None)
@given(unit_disk, st.integers(2, 3))
def test_fiber_conjugation(c, p):
    a = fiber_solve(c, p, perturb=True)
    b = fiber_solve(a.c.conjugate(), p)
    assert _set_close(np.conj(a.values()), b.values())


@settings(max_examples=30, deadline=None)
@given(unit_disk, st.integers(2, 3))
def test_fiber_sign_symmetry(c, p):
    a = fiber_solve(c, p, perturb=True)
    b = fiber_solve(-a.c, p)
    assert _set_close(-a.values(), b.values())


def test_on_curve_residual():
    res, margin = on_curve_residual(1, 3, 1)
    assert res == 0 and margin == math.inf
    res, margin = on_curve_residual(0, 1j, 2)
    assert res == 0 and margin == 1
    res, margin = on_curve_residual(0, 0, 2)
    assert res == 0 and margin == 0


def test_branch_p1():
    sample = branch_continue((1, 3), 1, [1, 2])
    c, a = sample.end
    assert abs(c - 2) < 1e-15 and abs(a - 18) < 1e-10


def test_branch_trivial_loop():
    loop = [0, 0.1] + [0.1 * np.exp(2j * np.pi * k / 16) for k in range(1, 17)] + [0]
    sample = branch_continue((0, 1j), 2, loop)
    c, a = sample.end
    assert abs(c) < 1e-15 and abs(a - 1j) < 1e-10


def test_branch_to_c1():
    sample = branch_continue((0, 1j), 2, [0, 0.5 + 0.5j, 1])
    c, a = sample.end
    assert abs(c - 1) < 1e-15
    assert np.min(np.abs(fiber_solve(1, 2).values() - a)) < 1e-9
    for cc, aa in sample.path:
        assert abs(on_curve_residual(cc, aa, 2)[0]) < 1e-10


def test_branch_discriminant_underflow():
    # the period-2 pair over the real axis collides near c = 2/3
    with pytest.raises(StepUnderflow):
        branch_continue((0, 1j), 2, [0, 1])


def test_branch_bad_seed():
    with pytest.raises(ValidationError):
        branch_continue((0, 0.5), 2, [0, 1])
