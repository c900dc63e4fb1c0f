import cmath
import math

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from cubicatlas.dynamics import (
    DELTA_SEP, TOL_CYCLE, ConvergedToCycle, CubicParam, Escaped, bottcher_basin,
    bottcher_infinity, critical_cycle, derivative, escape_bound, evaluate, exact_period,
    find_cycle, forward, green_basin, green_infinity, iterate,
)
from cubicatlas.errors import AmbiguousPeriod, NotInBasin, ValidationError, WrongPeriod

from conftest import on_curve

coord = st.floats(-2, 2, allow_nan=False)
complexes = st.builds(complex, coord, coord)


def test_param_rejects_nonfinite():
    with pytest.raises(ValidationError):
        CubicParam(float("nan"), 0)


@given(complexes, complexes)
def test_critical_values(c, a):
    param = CubicParam(c, a)
    assert derivative(param, c) == 0 and derivative(param, -c) == 0
    v_plus, v_minus = param.critical_values
    assert abs(v_plus - (-2 * c ** 3 + a)) < 1e-12
    assert abs(v_minus - (2 * c ** 3 + a)) < 1e-12


def test_evaluate():
    assert evaluate(CubicParam(0, 0), 2) == 8
    assert evaluate(CubicParam(1, 2), 1) == 0
    assert evaluate(CubicParam(1, 0), 2) == 2


def test_derivative():
    assert derivative(CubicParam(1, 5), 1) == 0
    assert derivative(CubicParam(0, 5), 2) == 12


@given(complexes, complexes, complexes)
def test_derivative_central_difference(c, a, z):
    param = CubicParam(c, a)
    h = 1e-6
    fd = (evaluate(param, z + h) - evaluate(param, z - h)) / (2 * h)
    assert abs(derivative(param, z) - fd) < 1e-6


def test_escape_bound_values():
    assert math.isclose(escape_bound(CubicParam(0, 0)).radius, math.sqrt(2))
    assert math.isclose(escape_bound(CubicParam(1, 0)).radius, math.sqrt(5))


@settings(max_examples=1000)
@given(complexes, st.builds(complex, st.floats(-20, 20), st.floats(-20, 20)), st.floats(0, 2 * math.pi))
def test_escape_bound_doubles(c, a, angle):
    param = CubicParam(c, a)
    z = escape_bound(param).radius * (1 + 1e-6) * cmath.exp(1j * angle)
    assert abs(evaluate(param, z)) >= 2 * abs(z)


def test_iterate_escape_at_zero():
    orbit = iterate(CubicParam(0, 0), 2, 10)
    assert orbit.status == Escaped(0, 2.0)


def test_iterate_fixed_point():
    orbit = iterate(CubicParam(0, 0), 0.5, 100)
    assert isinstance(orbit.status, ConvergedToCycle) and orbit.status.period == 1
    assert abs(orbit.status.points[0]) < 1e-10


def test_iterate_period_two():
    orbit = iterate(CubicParam(0, 1j), 0, 100)
    st_ = orbit.status
    assert isinstance(st_, ConvergedToCycle) and st_.period == 2
    assert sorted(st_.points, key=abs) == [0, 1j]


@given(complexes, complexes, complexes)
def test_orbit_samples_follow_map(c, a, z):
    param = CubicParam(c, a)
    orbit = iterate(param, z, 30)
    for u, v in zip(orbit.samples, orbit.samples[1:]):
        assert v == evaluate(param, u)
    if isinstance(orbit.status, Escaped):
        assert orbit.status.modulus >= escape_bound(param).radius


def test_exact_period():
    assert exact_period(CubicParam(0, 0), 0, 1)
    assert exact_period(CubicParam(0, 1j), 0, 2)
    assert not exact_period(CubicParam(0, 1j), 0, 1)
    assert exact_period(CubicParam(1, 3), 1, 1)


def test_exact_period_ambiguous():
    # c just off S_1: |f(c) - c| = 1e-8 sits between the two thresholds
    with pytest.raises(AmbiguousPeriod):
        exact_period(CubicParam(1, 3 + 1e-8), 1, 1)


def test_find_cycle():
    cyc = find_cycle(CubicParam(0, 0), 0.1, 1)
    assert abs(cyc.points[0]) < 1e-12 and abs(cyc.multiplier) < 1e-12
    cyc = find_cycle(CubicParam(0, 1j), 0.01, 2)
    assert min(abs(cyc.points[0]), abs(cyc.points[1])) < 1e-12
    assert abs(cyc.multiplier) < 1e-12
    cyc = find_cycle(CubicParam(0, 0), 1.05, 1)
    assert abs(cyc.points[0] - 1) < 1e-12 and abs(cyc.multiplier - 3) < 1e-10


def test_find_cycle_wrong_period():
    with pytest.raises(WrongPeriod):
        find_cycle(CubicParam(0, 0), 0.01, 2)


@given(complexes)
def test_marked_cycle_invariants(c):
    param = on_curve(c, 2)
    cyc = critical_cycle(param, 2)
    assert cyc.points[0] == param.c and abs(cyc.multiplier) < 1e-12
    for i, z in enumerate(cyc.points):
        assert abs(evaluate(param, z) - cyc.points[(i + 1) % 2]) < TOL_CYCLE
    assert abs(cyc.points[1] - cyc.points[0]) > DELTA_SEP


def test_green_infinity_values():
    assert abs(green_infinity(CubicParam(0, 0), 2).value - math.log(2)) < 1e-9
    g = green_infinity(CubicParam(0, 0), 0.5)
    assert g.bounded and g.value == 0


@settings(max_examples=100)
@given(complexes, complexes, st.floats(0.2, 3), st.floats(0, 2 * math.pi))
def test_green_functional_equation(c, a, s, angle):
    param = CubicParam(c, a)
    z = escape_bound(param).radius * s * cmath.exp(1j * angle)
    g = green_infinity(param, z)
    if g.bounded:
        return
    assert abs(green_infinity(param, evaluate(param, z)).value - 3 * g.value) < 1e-8


def test_bottcher_infinity_identity():
    assert abs(bottcher_infinity(CubicParam(0, 0), 2) - 2) < 1e-12
    assert abs(bottcher_infinity(CubicParam(0, 0), 2j) - 2j) < 1e-12


@settings(max_examples=60, deadline=None)
@given(complexes, complexes, st.floats(1.0, 4), st.floats(0, 2 * math.pi))
def test_bottcher_infinity_relations(c, a, s, angle):
    param = CubicParam(c, a)
    z = escape_bound(param).radius * s * cmath.exp(1j * angle)
    b = bottcher_infinity(param, z)
    assert abs(abs(b) - math.exp(green_infinity(param, z).value)) < 1e-8 * abs(b)
    bf = bottcher_infinity(param, evaluate(param, z))
    assert abs(bf - b ** 3) < 1e-8 * abs(b) ** 3


def test_bottcher_infinity_inside_escape_radius():
    # an escaping point below R_esc, reached through the gradient-line extension
    param = on_curve(0.5, 1)
    z = 1.6
    assert abs(z) < escape_bound(param).radius
    b = bottcher_infinity(param, z)
    bf = bottcher_infinity(param, evaluate(param, z))
    assert abs(bf - b ** 3) < 1e-8 * abs(bf)


def test_green_basin_unicritical():
    cyc = critical_cycle(CubicParam(0, 0), 1)
    assert abs(green_basin(CubicParam(0, 0), cyc, 0.5) - math.log(0.5)) < 1e-12


def _reference_green(z0, digits=200):
    # f^2 = -3 z^3 + ... at 0 for z^3 + i, so the normalised coordinate is sqrt(3) z
    with mpmath.workdps(digits):
        a, z, n = mpmath.mpc(0, 1), mpmath.mpc(z0), 0
        while abs(z) > mpmath.mpf(10) ** -60:
            z = (z ** 3 + a) ** 3 + a
            n += 1
        return float(mpmath.log(abs(z) * mpmath.sqrt(3)) / 3 ** n)


def test_green_basin_reference():
    param = CubicParam(0, 1j)
    g = green_basin(param, critical_cycle(param, 2), 0.1)
    assert g < 0
    assert abs(g - _reference_green("0.1")) < 1e-10
    # frozen value of the reference iteration
    assert abs(g - (-1.753278893095426019)) < 1e-10


def test_green_basin_escaping_point():
    param = CubicParam(0, 1j)
    with pytest.raises(NotInBasin):
        green_basin(param, critical_cycle(param, 2), 3.0)


def _basin_samples(param, cyc, j, rng, k=12, scale=0.3):
    # points near the cycle point w_j that stay in its component
    w = cyc.points[j]
    out = []
    while len(out) < k:
        z = w + scale * (rng.random() ** 0.5) * cmath.exp(2j * math.pi * rng.random()) * 0.2
        try:
            green_basin(param, cyc, z)
        except NotInBasin:
            continue
        out.append(z)
    return out


def test_green_basin_relations(period_two, rng):
    param, cyc = period_two
    for z in _basin_samples(param, cyc, 0, rng):
        g = green_basin(param, cyc, z)
        assert abs(green_basin(param, cyc, forward(param, z, 2)) - 2 * g) < 1e-8
        # one step from U(c) into the other component doubles the potential
        assert abs(green_basin(param, cyc, evaluate(param, z)) - 2 * g) < 1e-8
    for z in _basin_samples(param, cyc, 1, rng):
        g = green_basin(param, cyc, z)
        assert abs(green_basin(param, cyc, forward(param, z, 2)) - 2 * g) < 1e-8
        assert abs(green_basin(param, cyc, evaluate(param, z)) - g) < 1e-8


def test_bottcher_basin_unicritical():
    assert abs(bottcher_basin(CubicParam(0, 0), 0, 0.3) - 0.3) < 1e-14


def test_bottcher_basin_relations(period_two, rng):
    param, cyc = period_two
    for j in (0, 1):
        w = cyc.points[j]
        for z in _basin_samples(param, cyc, j, rng, k=6):
            b = bottcher_basin(param, w, z, cyc)
            assert abs(abs(b) - math.exp(green_basin(param, cyc, z))) < 1e-8
            b2 = bottcher_basin(param, w, forward(param, z, 2), cyc)
            assert abs(b2 - b * b) < 1e-8


def test_bottcher_basin_normalisation(period_two):
    param, cyc = period_two
    w = cyc.points[0]
    h = 1e-5
    # second derivative of f^2 at w by central differences
    f2 = lambda z: forward(param, z, 2)
    A = (f2(w + h) - 2 * f2(w) + f2(w - h)) / h ** 2 / 2
    b = bottcher_basin(param, w, w + h, cyc)
    assert abs(b / (A * h) - 1) < 1e-3


@settings(max_examples=100)
@given(complexes, complexes)
def test_conjugation_symmetry(c, a):
    p1, p2 = CubicParam(c, a), CubicParam(c, -a)
    z1, z2 = c, -c
    for _ in range(8):
        assert abs(z2 + z1) <= 1e-12 * max(1.0, abs(z1))
        if abs(z1) > 1e20:
            break
        z1, z2 = evaluate(p1, z1), evaluate(p2, z2)
