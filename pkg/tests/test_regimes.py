import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracstab.core import Params
from fracstab.errors import DomainError
from fracstab.regimes import (
    classify,
    critical_s_gelfand,
    critical_s_radial,
    decay_exponent_floor,
    gelfand_log_gap,
    radial_condition_lower,
    radial_condition_rhs,
)


def test_critical_s_radial_pinned():
    assert critical_s_radial(7).value == pytest.approx(0.050510, abs=1e-5)
    assert critical_s_radial(8).value == pytest.approx(0.354248, abs=1e-5)
    assert critical_s_radial(9).value == pytest.approx(0.671572, abs=1e-5)
    for n in range(2, 7):
        assert critical_s_radial(n).kind == "all"
    for n in (10, 11, 15):
        assert critical_s_radial(n).kind == "none"


@given(st.integers(min_value=7, max_value=9))
@settings(max_examples=10, deadline=None)
def test_critical_s_radial_algebraic_oracle(n):
    # independent route: numpy root of s^2 - (n-2) s + (n^2/4 - 2n + 2)
    roots = np.roots([1.0, -(n - 2.0), n * n / 4.0 - 2.0 * n + 2.0])
    root = float(np.min(roots.real))
    assert critical_s_radial(n).value == pytest.approx(root, abs=1e-10)


def test_critical_s_radial_is_the_equality_point():
    for n in (7, 8, 9):
        s_star = critical_s_radial(n).value
        assert radial_condition_rhs(s_star) == pytest.approx(float(n), abs=1e-9)


def test_critical_s_gelfand_pinned():
    res = critical_s_gelfand(9)
    assert res.kind == "crossing"
    assert res.value == pytest.approx(0.63237, abs=1e-4)


def test_critical_s_gelfand_edge_kinds():
    # the sharp condition holds for every order up to dimension 7 and for
    # none once the dimension reaches 10
    for n in (2, 3, 4, 5, 6, 7):
        assert critical_s_gelfand(n).kind == "all"
    for n in (10, 11):
        assert critical_s_gelfand(n).kind == "none"
    res8 = critical_s_gelfand(8)
    assert res8.kind == "crossing" and 0.0 < res8.value < 0.63237


def test_gelfand_condition_direct_evaluation():
    # at (n, s) = (4, 1/2) the left side is exactly 1 and dominates
    lhs_log = (
        gelfand_log_gap(4, 0.5)
        + 2 * (math.lgamma((4 + 1) / 4.0) - math.lgamma((4 - 1) / 4.0))
    )
    assert lhs_log == pytest.approx(0.0, abs=1e-12)  # log LHS = 0
    assert gelfand_log_gap(4, 0.5) > 0.0


def test_classify_flags_and_floor():
    rep = classify(Params(6, 0.1))
    assert rep.radial_condition_holds
    rep10 = classify(Params(10, 0.5))
    assert rep10.mu_floor == pytest.approx(0.5, abs=1e-14)
    rep9 = classify(Params(9, 0.7))
    assert rep9.gelfand_condition_holds
    assert decay_exponent_floor(Params(2, 0.5)) == pytest.approx(-1.5, abs=1e-14)


def test_classify_domain_errors():
    with pytest.raises(DomainError):
        classify(Params(1, 0.5))


def test_classify_monotone_in_s():
    for n in (7, 8, 9):
        flags = [classify(Params(n, k / 40.0)).radial_condition_holds for k in range(1, 40)]
        exp_flags = [classify(Params(n, k / 40.0)).exp_10s_holds for k in range(1, 40)]
        assert flags == sorted(flags)  # non-decreasing
        assert exp_flags == sorted(exp_flags)


@given(st.floats(min_value=1e-6, max_value=1.0 - 1e-9))
@settings(max_examples=300, deadline=None)
def test_radial_lower_bound_below_two(s):
    assert radial_condition_lower(s) < 2.0


def test_borderline_consistency_radial_vs_floor():
    # at s = s*(9) the window closes: the floor meets the admissible corner
    s_star = critical_s_radial(9).value
    assert 9.0 == pytest.approx(radial_condition_rhs(s_star), abs=1e-9)
    # the quadratic form of the same relation
    assert s_star**2 - 7.0 * s_star + (81.0 / 4.0 - 18.0 + 2.0) == pytest.approx(
        0.0, abs=1e-9
    )
