import cmath
import math

import numpy as np
import pytest

from cubicatlas.classifier import TypeA, TypeC, TypeD, classify
from cubicatlas.dynamics import CubicParam, forward
from cubicatlas.errors import NotHyperbolicABC, NotTypeD
from cubicatlas.paramspace import (
    boundary_trace_D, center_search, component_chart, count_phi_preimages,
    landing_separation_experiment, param_ray_trace, phi_eval, phi_modulus_check, rho_eval,
)


@pytest.fixture(scope="module")
def d_chart():
    cen = [s for s in center_search(1, "D", q_max=1) if s.c.imag > 0][0]
    return component_chart(cen)


@pytest.fixture(scope="module")
def c_chart():
    cen = [s for s in center_search(1, "C") if s.c.imag > 0][0]
    return component_chart(cen)


# centers

def test_unicritical_center_p1():
    cs = center_search(1, "A")
    assert len(cs) == 1 and abs(cs[0].c) < 1e-12 and abs(cs[0].a) < 1e-12


def test_type_a_centers_p2():
    cs = center_search(2, "A")
    # fiber over c = 0: a^3 + a = 0 with exact period 2 gives a = +-i
    assert sorted(round(s.a.imag, 10) for s in cs) == [-1.0, 1.0]
    assert all(abs(s.c) < 1e-12 for s in cs)


def test_type_b_centers_p2():
    cs = center_search(2, "B")
    # c -> -c -> c: a = 2c^3 - c = c - 2c^3, so c^2 = 1/2 and a = 0
    assert sorted(round(s.c.real, 12) for s in cs) == [round(-1 / math.sqrt(2), 12), round(1 / math.sqrt(2), 12)]
    assert all(abs(s.a) < 1e-12 and s.k == 1 for s in cs)


def test_type_d_centers_p1():
    cs = center_search(1, "D", q_max=3)
    q1 = sorted((s.c.imag for s in cs if s.q == 1))
    # f(-c) = -c with a = c + 2c^3 gives c^2 = -1/2
    assert np.allclose(q1, [-1 / math.sqrt(2), 1 / math.sqrt(2)], atol=1e-12)
    for s in cs:
        P = CubicParam(s.c, s.a)
        assert abs(forward(P, s.c, 1) - s.c) < 1e-10
        assert abs(forward(P, -s.c, s.q) + s.c) < 1e-10
        v = classify(s.c, s.a, 1)
        assert isinstance(v, TypeD) and v.q == s.q
    assert {s.q for s in cs} == {1, 2, 3}


def test_type_d_perturbation_keeps_type(d_chart):
    c = d_chart.center.c + 1e-3
    assert isinstance(classify(c, c + 2 * c ** 3, 1), TypeD)


# Φ and ρ

def test_phi_vanishes_at_centers():
    for p, kind in [(1, "A"), (2, "B"), (1, "C")]:
        cen = center_search(p, kind)[-1]
        assert abs(phi_eval(cen.c, cen.a, p)) < 1e-8


def test_phi_modulus_matches_green():
    for c in [0.1 + 0.05j, 0.2, -0.15j]:
        a = c + 2 * c ** 3
        mod, green = phi_modulus_check(c, a, 1, TypeA())
        assert mod < 1 and abs(mod - green) < 1e-8


def test_phi_modulus_below_one_on_c_component(c_chart):
    c0 = c_chart.center.c
    for r in np.linspace(0.0, 0.01, 6):
        for th in np.linspace(0, 2 * np.pi, 5, endpoint=False):
            c = c0 + r * cmath.exp(1j * th)
            v = classify(c, c + 2 * c ** 3, 1)
            if isinstance(v, TypeC):
                assert abs(phi_eval(c, c + 2 * c ** 3, 1, v)) < 1


def test_phi_rejects_type_d(d_chart):
    with pytest.raises(NotHyperbolicABC):
        phi_eval(d_chart.center.c, d_chart.center.a, 1)


def test_rho_at_center_and_interior(d_chart):
    assert abs(rho_eval(d_chart.center.c, d_chart.center.a, 1)) < 1e-8
    vals = []
    for k in range(10):
        c = d_chart.center.c + k * 1e-4
        vals.append(rho_eval(c, c + 2 * c ** 3, 1))
    assert all(abs(r) < 1 for r in vals)
    # no branch jumps along the segment: second differences stay small
    d1 = np.diff(vals)
    assert np.max(np.abs(np.diff(d1))) < 0.05 * np.max(np.abs(d1))


def test_rho_rejects_other_types():
    with pytest.raises(NotTypeD):
        rho_eval(0.1, 0.1 + 2 * 0.001, 1)


# rays and boundaries

def test_type_c_ray_stays_on_curve(c_chart):
    ray = param_ray_trace(c_chart, 0.0, s_from=0.1, s_to=0.99)
    for s, c, a in ray.samples:
        assert abs(forward(CubicParam(c, a), c, 1) - c) < 1e-10
        assert abs(phi_eval(c, a, 1, c_chart.verdict, ref=s) - s) < 1e-8


def test_branches_of_type_b_chart_are_distinct():
    cen = [s for s in center_search(2, "B") if s.c.real > 0][0]
    chart = component_chart(cen)
    ends = [param_ray_trace(chart, t, s_to=0.5, steps=15).samples[-1] for t in (0.1, 0.1 + 1 / 3, 0.1 + 2 / 3)]
    for i in range(3):
        for j in range(i + 1, 3):
            assert abs(ends[i][1] - ends[j][1]) > 1e-3


def test_d_rays_separate(d_chart):
    ok, rows = landing_separation_experiment(d_chart, [k / 8 for k in range(8)])
    assert ok and len(rows) == 28


def test_d_boundary_closes(d_chart):
    b = boundary_trace_D(d_chart, m=64)
    assert b.closure_defect < 1e-3 * b.diameter
    assert b.winding == 1 and b.simple
    for c, a in b.points[:: 8]:
        assert abs(abs(rho_eval(c, a, 1, d_chart.verdict)) - 0.999) < 1e-6


def test_parabolic_note_for_period_two_angles(d_chart):
    ok, rows = landing_separation_experiment(d_chart, [1 / 3, 2 / 3, 0.1])
    assert any("parabolic-suspect" in r["note"] for r in rows)


# cover degrees

@pytest.mark.parametrize("p,kind,expected", [(1, "C", 1), (1, "A", 2), (2, "B", 3)])
def test_cover_degrees(p, kind, expected):
    cen = center_search(p, kind)[-1]
    res = count_phi_preimages(component_chart(cen))
    assert res.count == expected
    assert res.winding == expected


def test_unicritical_chart_rays_are_odd_symmetric():
    # (c, a) -> (-c, -a) conjugates f by z -> -z and moves angle t to t + 1/2
    chart = component_chart(center_search(1, "A")[0])
    r1 = param_ray_trace(chart, 0.1, s_to=0.9, steps=15).samples[-1]
    r2 = param_ray_trace(chart, 0.6, s_to=0.9, steps=15).samples[-1]
    assert abs(r1[1] + r2[1]) < 1e-8 and abs(r1[2] + r2[2]) < 1e-8
    assert abs(r1[1]) > 1e-2


@pytest.mark.parametrize("kind", ["C", "A"])
def test_eight_rays_separate_on_hyperbolic_charts(kind):
    cen = [s for s in center_search(1, kind) if s.c.imag >= 0][0]
    ok, rows = landing_separation_experiment(component_chart(cen), [k / 8 for k in range(8)])
    assert ok, [r for r in rows if r["status"] != "PASS"]


def test_inverse_chart_has_trivial_monodromy(c_chart):
    from cubicatlas.paramspace import _Solver
    solver = _Solver(c_chart)
    start = param_ray_trace(c_chart, 0.0, s_from=0.1, s_to=0.5, steps=10).samples[-1]
    x = np.array(start[1:])
    for th in np.linspace(0, 2 * np.pi, 65)[1:]:
        x = solver.solve(x, 0.5 * cmath.exp(1j * th))
        assert abs(forward(CubicParam(*x), x[0], 1) - x[0]) < 1e-10
    assert np.linalg.norm(x - np.array(start[1:])) < 1e-8
