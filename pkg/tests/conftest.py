import numpy as np
import pytest

from cubicatlas.curve import fiber_solve
from cubicatlas.dynamics import CubicParam, critical_cycle


def on_curve(c, p, pick=0):
    """A parameter of S_p over c (the pick-th root of exact period p)."""
    roots = [r.a for r in fiber_solve(c, p, perturb=True).roots if r.exact_period == p]
    return CubicParam(c, roots[pick % len(roots)])


@pytest.fixture
def rng():
    return np.random.default_rng(20261017)


@pytest.fixture
def period_two():
    param = on_curve(0.4 + 0.2j, 2)
    return param, critical_cycle(param, 2)
