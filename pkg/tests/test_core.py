import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gammaln

from fracstab.core import (
    Params,
    conjugate_mass_quadrature,
    gaussian_fourier_value,
    getoor_constant,
    log_gamma,
    normalizations,
    poisson_mass_quadrature,
)
from fracstab.errors import DomainError
from fracstab.quad import getoor_pv_at_origin, pv_frac_lap


def test_log_gamma_pinned_values():
    assert log_gamma(1.0) == pytest.approx(0.0, abs=1e-14)
    assert log_gamma(0.5) == pytest.approx(math.log(math.sqrt(math.pi)), rel=1e-13)
    assert log_gamma(5.0) == pytest.approx(math.log(24.0), rel=1e-13)


def test_log_gamma_rejects_nonpositive():
    with pytest.raises(DomainError):
        log_gamma(0.0)
    with pytest.raises(DomainError):
        log_gamma(-2.5)


@given(st.floats(min_value=1e-3, max_value=1e3))
@settings(max_examples=300, deadline=None)
def test_log_gamma_recurrence(x):
    assert log_gamma(x + 1.0) == pytest.approx(log_gamma(x) + math.log(x), rel=1e-12, abs=1e-12)


@given(st.floats(min_value=1e-3, max_value=1e3))
@settings(max_examples=200, deadline=None)
def test_log_gamma_matches_scipy(x):
    assert log_gamma(x) == pytest.approx(float(gammaln(x)), rel=1e-12, abs=1e-12)


def test_params_validation():
    with pytest.raises(DomainError):
        Params(0, 0.5)
    with pytest.raises(DomainError):
        Params(2, 0.0)
    with pytest.raises(DomainError):
        Params(2, 1.0)
    p = Params(3, 0.25)
    assert p.a == pytest.approx(0.5)


@pytest.mark.parametrize("n", range(1, 11))
@pytest.mark.parametrize("s", [0.1, 0.3, 0.5, 0.7, 0.9])
def test_normalizations_positive(n, s):
    nc = normalizations(Params(n, s))
    assert nc.c_ns > 0 and nc.d_s > 0 and nc.p_ns > 0 and nc.gamma_ns > 0
    if n > 2 * s:
        assert nc.riesz_c > 0
    else:
        assert nc.riesz_c is None


def test_d_half_is_one():
    # at s = 1/2 the extension is the plain harmonic one
    assert normalizations(Params(3, 0.5)).d_s == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("n,s", [(1, 0.5), (2, 0.25), (3, 0.75), (10, 0.9)])
def test_poisson_mass_is_one_and_y_independent(n, s):
    p = Params(n, s)
    masses = [poisson_mass_quadrature(p, y) for y in (0.1, 1.0, 10.0)]
    for m in masses:
        assert m == pytest.approx(1.0, abs=1e-8)
    assert max(masses) - min(masses) < 1e-10


def test_poisson_mass_full_grid():
    # mass-1 defining property over the whole utility grid
    for n in range(1, 11):
        for k in range(1, 10):
            p = Params(n, k / 10.0)
            assert poisson_mass_quadrature(p, 1.0) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("n,s,y", [(2, 0.5, 0.5), (3, 0.25, 2.0), (4, 0.75, 0.1)])
def test_conjugate_kernel_mass(n, s, y):
    # the conjugate kernel integrates to y^(2s-1): it is y^(-a) times the
    # unit-mass kernel of the order-(1-s) problem
    p = Params(n, s)
    assert conjugate_mass_quadrature(p, y) == pytest.approx(y ** (2 * s - 1.0), rel=1e-8)


@pytest.mark.parametrize("n,s", [(2, 0.5), (3, 0.25), (3, 0.75), (5, 0.2)])
def test_operator_constant_gaussian_calibration(n, s):
    # (-Delta)^s of the unit Gaussian at the origin has an exact Fourier
    # value; the direct singular quadrature must reproduce it, which pins
    # c_ns against an independent route
    p = Params(n, s)
    gauss = lambda t: np.exp(-np.asarray(t, float) ** 2 / 2.0)
    val = pv_frac_lap(p, gauss, 0.0, support=12.0)
    assert val == pytest.approx(gaussian_fourier_value(p), rel=1e-7)


@pytest.mark.parametrize("n,s", [(2, 0.5), (3, 0.25), (3, 0.75), (10, 0.1)])
def test_getoor_origin_quadrature_matches_closed_form(n, s):
    p = Params(n, s)
    assert getoor_pv_at_origin(p) == pytest.approx(getoor_constant(p), rel=1e-10)
