"""Shared singular-quadrature core.

Everything downstream (extension evaluation, operator assembly, flux
integrals) reduces radially symmetric n-dimensional integrals to the
angular kernel

    ang(n, c, d, B) = int_0^pi sin^(n-2)(t) (d + 2 B sin^2(t/2))^(-c) dt

written in the cancellation-free variables d = min over the sphere of the
squared distance and B = 2 rho rho'. The primary evaluator uses fixed
Gauss-Legendre panels graded geometrically away from t = 0 at the scale
sqrt(d/B) of the near-singularity. A Gauss hypergeometric closed form of
the same integral serves as an independent oracle in the tests (and only
there: scipy's hyp2f1 loses accuracy, and can return NaN, in the extreme
near-singular regime that the panels handle without trouble).
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .core import Params, log_beta, sphere_area
from .errors import DomainError

__all__ = [
    "gauss_rule",
    "jacobi_rule",
    "ang_reduced",
    "ang_hyp2f1",
    "geometric_edges",
    "split_toward",
    "radial_kernel",
    "exterior_kernel_mass",
    "pv_frac_lap",
    "THETA_SIN_MASS",
]


@lru_cache(maxsize=64)
def gauss_rule(k: int):
    x, w = np.polynomial.legendre.leggauss(k)
    return x, w


@lru_cache(maxsize=64)
def jacobi_rule(k: int, beta_exp: float):
    """Nodes/weights for int_{-1}^{1} (1+x)^beta_exp f(x) dx."""
    x, w = roots_jacobi(k, 0.0, beta_exp)
    return x, w


def theta_sin_mass(n: int) -> float:
    """int_0^pi sin^(n-2) theta d theta."""
    return math.exp(log_beta((n - 1) / 2.0, 0.5))


THETA_SIN_MASS = theta_sin_mass


def ang_reduced(n, c, dmin, B, panels: int = 16, gauss: int = 12):
    """Angular kernel integral, vectorized over (dmin, B) arrays.

    dmin must be the exact minimum of the squared distance over the
    sphere, computed upstream without cancellation, e.g. (rho - t)^2 + y^2.
    """
    dmin = np.atleast_1d(np.asarray(dmin, dtype=float))
    B = np.atleast_1d(np.asarray(B, dtype=float))
    dmin, B = np.broadcast_arrays(dmin, B)
    shape = dmin.shape
    d = dmin.ravel()
    b = B.ravel()
    if np.any(d < 0) or np.any(b < 0):
        raise DomainError("ang_reduced needs dmin >= 0 and B >= 0")
    # panel edges 0, t*, 4 t*, ... clipped at pi, with t* the singular scale
    tstar = np.sqrt(np.clip(d / np.maximum(b, 1e-300), 1e-16, math.pi**2))
    tstar = np.minimum(tstar, math.pi)
    ratios = 4.0 ** np.arange(panels - 1)
    edges = np.empty((d.size, panels + 1))
    edges[:, 0] = 0.0
    edges[:, 1:panels] = np.minimum(tstar[:, None] * ratios[None, :], math.pi)
    edges[:, panels] = math.pi
    xs, ws = gauss_rule(gauss)
    lo = edges[:, :-1]
    hi = edges[:, 1:]
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    theta = mid[:, :, None] + half[:, :, None] * xs[None, None, :]
    sh = np.sin(0.5 * theta)
    den = d[:, None, None] + 2.0 * b[:, None, None] * sh * sh
    vals = np.sin(theta) ** (n - 2) * den ** (-c)
    out = np.einsum("pqg,g,pq->p", vals, ws, half)
    return out.reshape(shape)


def ang_hyp2f1(n, c, dmin, B):
    """Oracle evaluation of the same angular integral via 2F1.

    int_0^pi sin^(n-2) (1 - 2x cos + x^2)^(-c) = B((n-1)/2, 1/2)
        * 2F1(c, c - n/2 + 1; n/2; x^2), pulled back from (dmin, B) by
    d + 2 B sin^2(t/2) = kappa (1 - 2 x cos t + x^2). Not reliable in the
    extreme near-singular regime; use for cross-checks only.
    """
    from scipy.special import hyp2f1

    dmin = np.asarray(dmin, dtype=float)
    B = np.asarray(B, dtype=float)
    A = dmin + B
    bmass = math.exp(log_beta((n - 1) / 2.0, 0.5))
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(B > 0, (A - np.sqrt(dmin * (A + B))) / np.where(B > 0, B, 1.0), 0.0)
        kappa = np.where(x > 0, B / (2.0 * x), A)
        out = kappa ** (-c) * bmass * hyp2f1(c, c - n / 2.0 + 1.0, n / 2.0, x * x)
    return out


def geometric_edges(start: float, stop: float, ratio: float = 2.0, max_panels: int = 80):
    """Panel edges from start to stop growing geometrically."""
    if stop <= start:
        return np.array([start, stop])
    edges = [start]
    step = start if start > 0 else (stop - start) * 2.0 ** (1 - max_panels)
    while edges[-1] < stop and len(edges) < max_panels:
        step_eff = max(step, (stop - start) * 1e-14)
        edges.append(min(edges[-1] + step_eff * (ratio - 1.0), stop))
        step *= ratio
    edges[-1] = stop
    return np.unique(np.array(edges))


def split_toward(lo: float, hi: float, target: float, max_splits: int = 24):
    """Subdivide [lo, hi] geometrically toward the endpoint nearest target.

    Guarantees each sub-panel has length comparable to its distance from
    target, which is what the |rho - t|^(-1-2s) kernel decay requires.
    """
    dist = min(abs(target - lo), abs(target - hi))
    length = hi - lo
    if length <= max(dist, 1e-14):
        return [(lo, hi)]
    k = min(int(math.ceil(math.log2(length / max(dist, 1e-14)))) + 1, max_splits)
    frac = 0.5 ** np.arange(k, 0, -1)
    if abs(target - hi) <= abs(target - lo):
        cuts = hi - length * frac
        edges = np.concatenate([[lo], np.sort(cuts), [hi]])
    else:
        cuts = lo + length * frac
        edges = np.concatenate([[lo], cuts, [hi]])
    edges = np.unique(edges)
    return list(zip(edges[:-1], edges[1:]))


def radial_kernel(p: Params, rho, t, shift: float = 0.0):
    """J(rho, t) = omega_{n-2} t^(n-1) ang(n, (n+2s)/2 + shift, (rho-t)^2, 2 rho t).

    The radially reduced kernel of |x - z|^(-n-2s-2*shift) for |x| = rho,
    |z| = t; shift = 0 is the fractional-Laplacian kernel.
    """
    n, s = p.n, p.s
    c = (n + 2 * s) / 2.0 + shift
    t = np.asarray(t, dtype=float)
    om = sphere_area(n - 1) if n >= 2 else 2.0
    if n == 1:
        # no angular variable: J = |rho-t|^(-1-2s) + (rho+t)^(-1-2s)
        return np.abs(rho - t) ** (-2.0 * c) + (rho + t) ** (-2.0 * c)
    return om * t ** (n - 1) * ang_reduced(n, c, (rho - t) ** 2, 2.0 * rho * t)


def exterior_kernel_mass(p: Params, rho: float) -> float:
    """E(rho) = int_{|z| > 1} |x - z|^(-n-2s) dz for |x| = rho < 1.

    After t -> 1/tau this is om int_0^1 tau^(2s-1) ang(n, c, (1-rho tau)^2,
    2 rho tau) d tau. The tau^(2s-1) endpoint gets a Jacobi rule; the
    boundary layer of width (1 - rho) near tau = 1 gets geometric panels,
    which is essential for collocation rows close to the boundary.
    """
    n, s = p.n, p.s
    if not (0.0 <= rho < 1.0):
        raise DomainError("exterior mass needs 0 <= rho < 1")
    c = (n + 2 * s) / 2.0
    om = sphere_area(n - 1) if n >= 2 else 2.0

    def ang_at(tau):
        if n == 1:
            return (1.0 - rho * tau) ** (-2.0 * c) + (1.0 + rho * tau) ** (-2.0 * c)
        return ang_reduced(n, c, (1.0 - rho * tau) ** 2, 2.0 * rho * tau)

    xj, wj = jacobi_rule(16, 2.0 * s - 1.0)
    tau = (xj + 1.0) / 4.0
    wq = wj * 0.25 ** (2.0 * s)
    total = float(np.sum(wq * ang_at(tau)))
    xs, ws = gauss_rule(12)
    gap = max(1.0 - rho, 1e-14)
    pts = [0.5]
    width = 0.25
    while width > gap / 4.0 and len(pts) < 90:
        pts.append(pts[-1] + width)
        width *= 0.5
    pts.append(1.0)
    pts = np.unique(np.clip(np.array(pts), 0.5, 1.0))
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi <= lo:
            continue
        tv = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xs
        total += float(np.sum(ws * 0.5 * (hi - lo) * tv ** (2.0 * s - 1.0) * ang_at(tv)))
    return om * total


def pv_frac_lap(p: Params, u, rho: float, *, support: float = 1.0,
                gauss: int = 14, gauss_theta: int = 32, tau0: float = 0.05) -> float:
    """(-Delta)^s u at radius rho by direct symmetrized singular quadrature.

    u is a radial callable, smooth where it matters and supported in
    {t <= support}. The symmetrized form

        (c_ns / 2) om int_0^inf tau^(-1-2s)
            int_0^pi sin^(n-2) [2u(rho) - u(g+) - u(g-)] dtheta dtau,

    with g+- = sqrt(rho^2 +- 2 rho tau cos theta + tau^2), has an
    integrable integrand for smooth u; the tau -> 0 end is handled by a
    Gauss-Jacobi rule with weight tau^(1-2s) and the far range by
    geometric panels plus the exact tail (where u(g+-) vanishes).

    This is the package's reference oracle for the operator; the grid
    discretization in the solver is validated against it.
    """
    from .core import operator_constant

    n, s = p.n, p.s
    if n < 2:
        raise DomainError("pv_frac_lap implements the angular reduction for n >= 2")
    om = sphere_area(n - 1)
    cns = operator_constant(p)
    if rho > support * (1.0 + 1e-9):
        # outside the support there is no principal value:
        # (-Delta)^s u = -c int_{B} u(z) |x-z|^(-n-2s) dz, a regular integral
        c = (n + 2.0 * s) / 2.0
        xs, ws = gauss_rule(24)
        total = 0.0
        for lo, hi in split_toward(0.0, support, rho):
            t = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xs
            wq = ws * 0.5 * (hi - lo)
            vals = u(t) * t ** (n - 1) * ang_reduced(n, c, (rho - t) ** 2, 2.0 * rho * t)
            total += float(np.sum(wq * vals))
        return -cns * om * total
    xt, wt = gauss_rule(gauss_theta)
    theta = (xt + 1.0) * (math.pi / 2.0)
    wth = wt * (math.pi / 2.0)
    sin_pow = np.sin(theta) ** (n - 2)
    cos_t = np.cos(theta)
    u0 = float(u(rho))

    def pair(tauv):
        tauv = np.atleast_1d(tauv)
        gp = np.sqrt(rho * rho + 2.0 * rho * np.outer(tauv, cos_t) + tauv[:, None] ** 2)
        gm = np.sqrt(rho * rho - 2.0 * rho * np.outer(tauv, cos_t) + tauv[:, None] ** 2)
        vals = 2.0 * u0 - u(gp) - u(gm)
        return vals @ (wth * sin_pow)

    xj, wj = jacobi_rule(20, 1.0 - 2.0 * s)
    tau = tau0 * (xj + 1.0) / 2.0
    wq = wj * (tau0 / 2.0) ** (2.0 - 2.0 * s)
    total = float(np.sum(wq * pair(tau) * tau ** (-2.0)))  # tau^(-1-2s) / tau^(1-2s)
    xs, ws = gauss_rule(gauss)
    T = rho + support + 0.5
    edges = [tau0]
    while edges[-1] < T:
        edges.append(min(edges[-1] * 1.6, T))
    for lo, hi in zip(edges[:-1], edges[1:]):
        tv = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xs
        total += float(np.sum(ws * 0.5 * (hi - lo) * pair(tv) * tv ** (-1.0 - 2.0 * s)))
    # beyond T both u(g+-) vanish
    total += 2.0 * u0 * theta_sin_mass(n) * T ** (-2.0 * s) / (2.0 * s)
    return 0.5 * cns * om * total


def getoor_pv_at_origin(p: Params, gauss: int = 16) -> float:
    """(-Delta)^s (1 - |x|^2)_+^s at the origin by direct quadrature.

    At x = 0 the angular variable is trivial and the integral collapses to
    c_ns sigma [int_0^1 (1 - (1-t^2)^s) t^(-1-2s) dt + 1/(2s)]; panels are
    graded toward t = 1 where the profile has its (1-t)^s kink. This is
    the quadrature oracle for the operator benchmark and must agree with
    the closed-form benchmark constant.
    """
    from .core import operator_constant

    n, s = p.n, p.s
    xs, ws = gauss_rule(gauss)
    # (0, 1/2): Jacobi rule with the exact t^(1-2s) factor of the integrand
    xj, wj = jacobi_rule(24, 1.0 - 2.0 * s)
    t = (xj + 1.0) / 4.0
    wq = wj * 0.25 ** (2.0 - 2.0 * s)
    total = float(np.sum(wq * (1.0 - (1.0 - t * t) ** s) / (t * t)))
    # (1/2, 1): panels graded toward the (1-t)^s kink at t = 1
    frac = 0.5 ** np.arange(1, 45)
    edges = np.unique(np.concatenate([[0.5, 1.0], 1.0 - 0.5 * frac]))
    for lo, hi in zip(edges[:-1], edges[1:]):
        t = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xs
        vals = (1.0 - (1.0 - t * t) ** s) * t ** (-1.0 - 2.0 * s)
        total += 0.5 * (hi - lo) * float(np.sum(ws * vals))
    total += 1.0 / (2.0 * s)
    return operator_constant(p) * sphere_area(n) * total
