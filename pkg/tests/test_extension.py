import math

import numpy as np
import pytest
from scipy import integrate

from fracstab.core import Params, getoor_constant, normalizations
from fracstab.errors import AccuracyError, DomainError
from fracstab.extension import (
    ExtensionField,
    RadialFunction,
    TailedRadialFunction,
    decay_report,
    extend,
    flux_limit,
    getoor_trace,
    riesz_bound,
    smooth_bump,
    sup_halfball_bound,
    vy_from_flux,
)
from fracstab.quad import pv_frac_lap
from fracstab.solver import graded_grid

P25 = Params(2, 0.5)
NODES = graded_grid(96).nodes


def make_field(fn, p=P25, nodes=NODES):
    return ExtensionField(RadialFunction.from_callable(fn, nodes), p)


def test_radial_function_validation():
    with pytest.raises(DomainError):
        RadialFunction(np.array([0.0, 0.5, 0.9]), np.zeros(3))  # must end at 1
    with pytest.raises(DomainError):
        RadialFunction(np.array([0.1, 0.5, 1.0]), np.zeros(3))  # must start at 0


def test_extend_zero_trace_is_zero():
    fld = make_field(lambda t: np.zeros_like(np.asarray(t, float)))
    assert extend(fld, 0.3, 0.7) == 0.0


def test_extend_linearity_exact():
    f1 = make_field(smooth_bump)
    f2 = make_field(lambda t: np.clip(1 - np.asarray(t, float) ** 2, 0, None))
    tr3 = RadialFunction(NODES, 2.0 * f1.trace.values + 3.0 * f2.trace.values)
    f3 = ExtensionField(tr3, P25)
    for rho, y in ((0.0, 1.0), (0.4, 0.3), (1.5, 0.2)):
        lhs = f3.value(rho, y)
        rhs = 2.0 * f1.value(rho, y) + 3.0 * f2.value(rho, y)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-14)


def test_extend_maximum_principle():
    fld = make_field(smooth_bump)
    sup_u = fld.trace.sup_norm
    for rho in (0.0, 0.3, 0.8, 1.2, 2.5):
        for y in (0.05, 0.4, 1.5, 6.0):
            v = fld.value(rho, y)
            assert -1e-9 <= v <= sup_u + 1e-9


def test_extend_rejects_nonpositive_y():
    fld = make_field(smooth_bump)
    with pytest.raises(DomainError):
        fld.value(0.2, 0.0)


def test_extend_getoor_against_direct_quadrature():
    # independent route: scipy adaptive quadrature of the same piecewise
    # linear trace, interval by interval (no shared panel machinery)
    p = P25
    fld = ExtensionField(getoor_trace(p, NODES), p)
    norms = normalizations(p)
    y = 1.0
    tr = fld.trace

    total = 0.0
    for lo, hi in zip(tr.nodes[:-1], tr.nodes[1:]):
        val, _ = integrate.quad(
            lambda t: t * float(tr(np.array([t]))[0]) * (t * t + y * y) ** (-1.5),
            lo, hi, epsabs=1e-13, epsrel=1e-13,
        )
        total += val
    oracle = norms.p_ns * y ** (2 * p.s) * 2.0 * math.pi * total
    assert fld.value(0.0, y) == pytest.approx(oracle, abs=1e-6)


def test_extend_derivatives_match_finite_differences():
    fld = make_field(smooth_bump)
    d = 1e-5
    for rho, y in ((0.3, 0.5), (0.7, 1.2)):
        fd_rho = (fld.value(rho + d, y) - fld.value(rho - d, y)) / (2 * d)
        fd_y = (fld.value(rho, y + d) - fld.value(rho, y - d)) / (2 * d)
        assert fld.v_rho(rho, y) == pytest.approx(fd_rho, rel=1e-4)
        assert fld.v_y(rho, y) == pytest.approx(fd_y, rel=1e-4)
        vr, vy = fld.derivatives(rho, y)
        assert vr == pytest.approx(fld.v_rho(rho, y), rel=1e-9)
        assert vy == pytest.approx(fld.v_y(rho, y), rel=1e-9)


def test_harmonicity_residual():
    # div(y^a grad v) = 0: second differences at interior points
    p = Params(3, 0.3)
    fld = make_field(smooth_bump, p=p)
    a = p.a
    d = 1e-3
    for rho, y in ((0.4, 0.5), (0.2, 0.8)):
        v_rr = (fld.value(rho + d, y) - 2 * fld.value(rho, y) + fld.value(rho - d, y)) / d**2
        v_yy = (fld.value(rho, y + d) - 2 * fld.value(rho, y) + fld.value(rho, y - d)) / d**2
        v_r = fld.v_rho(rho, y)
        v_y = fld.v_y(rho, y)
        terms = [v_rr, (p.n - 1) / rho * v_r, v_yy, a / y * v_y]
        residual = abs(sum(terms))
        assert residual <= 1e-3 * max(abs(t) for t in terms)


def test_vy_from_flux_zero_data():
    h = TailedRadialFunction(np.array([0.0, 1.0, 2.0]), np.zeros(3), tail_exponent=3.0)
    assert vy_from_flux(h, P25, 0.3, 0.5) == 0.0


def test_vy_from_flux_missing_tail_raises_when_mass_matters():
    h = TailedRadialFunction(np.array([0.0, 1.0, 2.0]), np.array([1.0, 1.0, 1.0]))
    with pytest.raises(AccuracyError):
        vy_from_flux(h, P25, 0.3, 0.5)


def test_vy_from_flux_cross_check_finite_difference(getoor_neumann_2_05):
    # conjugate-kernel route vs the y-derivative of the Poisson route
    fld = ExtensionField(getoor_trace(P25, graded_grid(160).nodes), P25)
    got = vy_from_flux(getoor_neumann_2_05, P25, 0.3, 0.5)
    d = 1e-4
    fd = -(fld.value(0.3, 0.5 + d) - fld.value(0.3, 0.5 - d)) / (2 * d)
    assert got == pytest.approx(fd, rel=1e-4)


def test_vy_from_flux_boundary_limit(getoor_neumann_2_05):
    # -y^a v_y -> h / d_s as y -> 0, extrapolated over three heights
    norms = normalizations(P25)
    target = getoor_constant(P25) / norms.d_s
    ys = np.array([0.1, 0.05, 0.025])
    f = np.array(
        [(y**P25.a) * vy_from_flux(getoor_neumann_2_05, P25, 0.2, y) for y in ys]
    )
    coeffs, *_ = np.linalg.lstsq(
        np.column_stack([np.ones(3), ys, ys**2]), f, rcond=None
    )
    assert coeffs[0] == pytest.approx(target, rel=1e-3)


def test_flux_limit_matches_operator():
    p = Params(3, 0.25)
    fld = make_field(smooth_bump, p=p, nodes=np.linspace(0, 1, 801))
    norms = normalizations(p)
    target = pv_frac_lap(p, smooth_bump, 0.3) / norms.d_s
    assert flux_limit(fld, 0.3) == pytest.approx(target, rel=1e-3)


def test_riesz_bound_linearity_and_zero():
    h0 = RadialFunction(NODES, np.zeros_like(NODES))
    assert riesz_bound(h0, P25, 0.0) == 0.0
    h1 = RadialFunction.from_callable(smooth_bump, NODES)
    h2 = RadialFunction(NODES, 2.0 * h1.values)
    assert riesz_bound(h2, P25, 0.3) == pytest.approx(2.0 * riesz_bound(h1, P25, 0.3), rel=1e-12)


def test_riesz_bound_rejects_negative_data():
    h = RadialFunction(NODES, -np.ones_like(NODES) * (NODES <= 1))
    with pytest.raises(DomainError):
        riesz_bound(h, P25, 0.0)


def test_decay_report_zero_and_linearity():
    zero = make_field(lambda t: np.zeros_like(np.asarray(t, float)))
    rep = decay_report(zero, [(2.5, 0.5), (3.0, 1.0)])
    assert rep["horizontal"] == rep["vertical"] == rep["gradient"] == 0.0
    f1 = make_field(smooth_bump)
    f2 = ExtensionField(RadialFunction(NODES, 2.0 * f1.trace.values), P25)
    samples = [(2.5, 0.5), (3.0, 1.0), (4.0, 2.0)]
    r1 = decay_report(f1, samples)
    r2 = decay_report(f2, samples)
    assert r2["horizontal"] == pytest.approx(2.0 * r1["horizontal"], rel=1e-10)
    assert r2["vertical"] == pytest.approx(2.0 * r1["vertical"], rel=1e-10)


def test_decay_report_rejects_inner_samples():
    fld = make_field(smooth_bump)
    with pytest.raises(DomainError):
        decay_report(fld, [(1.5, 0.5)])


def test_decay_report_getoor_ratios_finite_and_stable():
    p = P25
    fld = ExtensionField(getoor_trace(p, NODES), p)
    samples = [(r, y) for r in (2.5, 3.0, 4.0) for y in (0.5, 1.0, 2.0)]
    rep = decay_report(fld, samples)
    assert all(math.isfinite(v) and v > 0 for v in rep.values())
    # stability under quadrature refinement of the evaluations
    fine = ExtensionField(getoor_trace(p, graded_grid(192).nodes), p)
    rep2 = decay_report(fine, samples)
    for key in rep:
        assert rep2[key] == pytest.approx(rep[key], rel=0.05)


def test_sup_halfball_zero_trace():
    fld = make_field(lambda t: np.zeros_like(np.asarray(t, float)))
    sup_v, bound = sup_halfball_bound(fld, 0.125)
    assert sup_v == 0.0 and bound == 0.0


def test_sup_halfball_bound_holds():
    fld = ExtensionField(getoor_trace(P25, NODES), P25)
    sup_v, bound = sup_halfball_bound(fld, 0.125)
    assert sup_v <= fld.trace.sup_norm + 1e-9  # kernel mass one
    assert sup_v <= bound + 1e-12
