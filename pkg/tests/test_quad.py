import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracstab.core import Params, sphere_area
from fracstab.errors import DomainError
from fracstab.quad import (
    ang_hyp2f1,
    ang_reduced,
    exterior_kernel_mass,
    pv_frac_lap,
    split_toward,
)


@pytest.mark.parametrize("n", [2, 3, 5, 10])
@pytest.mark.parametrize("c", [0.7, 1.9, 4.1])
@pytest.mark.parametrize("dmin,B", [(1.0, 0.1), (0.3, 2.0), (1e-4, 1.0), (1e-8, 0.5)])
def test_ang_panels_match_hypergeometric_oracle(n, c, dmin, B):
    got = float(ang_reduced(n, c, np.array([dmin]), np.array([B]))[0])
    want = float(ang_hyp2f1(n, c, dmin, B))
    assert got == pytest.approx(want, rel=5e-10)


def test_ang_zero_b_reduces_to_beta_mass():
    from fracstab.core import log_beta

    n, c = 4, 1.3
    got = float(ang_reduced(n, c, np.array([2.0]), np.array([0.0]))[0])
    assert got == pytest.approx(math.exp(log_beta((n - 1) / 2, 0.5)) * 2.0 ** (-c), rel=1e-12)


def test_ang_rejects_negative_arguments():
    with pytest.raises(DomainError):
        ang_reduced(2, 1.0, np.array([-1.0]), np.array([1.0]))


@given(
    st.floats(min_value=0.0, max_value=10.0),
    st.floats(min_value=1e-6, max_value=5.0),
    st.floats(min_value=-20.0, max_value=20.0),
)
@settings(max_examples=200, deadline=None)
def test_split_toward_partitions_interval(lo, width, target):
    hi = lo + width
    pieces = split_toward(lo, hi, target)
    assert pieces[0][0] == lo and pieces[-1][1] == hi
    for (a1, b1), (a2, _) in zip(pieces[:-1], pieces[1:]):
        assert b1 == a2
        assert b1 > a1


@pytest.mark.parametrize("n,s,rho", [(2, 0.5, 0.3), (3, 0.25, 0.0), (3, 0.75, 0.9)])
def test_exterior_mass_against_scipy(n, s, rho):
    from scipy import integrate

    p = Params(n, s)
    c = (n + 2 * s) / 2.0
    om = sphere_area(n - 1)

    def f(tau):
        return tau ** (2 * s - 1) * float(
            ang_reduced(n, c, np.array([(1 - rho * tau) ** 2]), np.array([2 * rho * tau]))[0]
        )

    brute, _ = integrate.quad(f, 0.0, 1.0, limit=500)
    assert exterior_kernel_mass(p, rho) == pytest.approx(om * brute, rel=1e-9)


def test_exterior_mass_boundary_asymptote():
    # for (n, s) = (2, 1/2) the half-space limit gives E(rho) -> 2 / (1 - rho)
    p = Params(2, 0.5)
    gap = 1e-7
    val = exterior_kernel_mass(p, 1.0 - gap)
    assert val == pytest.approx(2.0 / gap, rel=1e-3)


def test_pv_frac_lap_linearity_and_sign():
    p = Params(2, 0.5)
    bump = lambda t: np.exp(-np.asarray(t, float) ** 2)
    v1 = pv_frac_lap(p, bump, 0.4, support=10.0)
    v2 = pv_frac_lap(p, lambda t: 2.0 * bump(t), 0.4, support=10.0)
    assert v2 == pytest.approx(2.0 * v1, rel=1e-12)
    assert v1 > 0.0  # the operator is positive at the max-adjacent region


def test_pv_frac_lap_exterior_branch_continuity():
    # crossing the support edge the two evaluation branches must agree
    from fracstab.extension import smooth_bump

    p = Params(3, 0.6)
    inner = pv_frac_lap(p, smooth_bump, 0.999999)
    outer = pv_frac_lap(p, smooth_bump, 1.000001)
    assert inner == pytest.approx(outer, rel=1e-3)


def test_pv_frac_lap_far_field_power_law():
    from fracstab.extension import smooth_bump

    p = Params(2, 0.5)
    c20 = -pv_frac_lap(p, smooth_bump, 20.0) * 20.0 ** (p.n + 2 * p.s)
    c40 = -pv_frac_lap(p, smooth_bump, 40.0) * 40.0 ** (p.n + 2 * p.s)
    assert c20 == pytest.approx(c40, rel=2e-3)
