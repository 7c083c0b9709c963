"""Evaluation of the weighted harmonic extension v = P * u and its derivatives.

Traces are radial grid functions on [0, 1], piecewise linear between nodes
and identically zero outside the unit ball. All evaluations reduce the
n-dimensional convolution to a (t, theta) double integral through the
shared angular kernel; the t-panels follow the trace's own grid and are
split geometrically toward t = rho at the scale y, where the kernel is
near-singular.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Normalizations,
    Params,
    normalizations,
    sphere_area,
)
from .errors import AccuracyError, DomainError
from .quad import ang_reduced, gauss_rule, split_toward

__all__ = [
    "RadialFunction",
    "TailedRadialFunction",
    "ExtensionField",
    "extend",
    "vy_from_flux",
    "flux_limit",
    "riesz_bound",
    "decay_report",
    "sup_halfball_bound",
]


@dataclass(frozen=True)
class RadialFunction:
    """Radial trace u(rho) on a grid over [0, 1], zero for rho > 1.

    Interpolation between nodes is piecewise linear; this is the fixed
    interpolation rule for every consumer, so that independent evaluation
    routes integrate literally the same function.
    """

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if nodes.ndim != 1 or nodes.shape != values.shape:
            raise DomainError("nodes and values must be 1-d arrays of equal length")
        if nodes[0] != 0.0 or abs(nodes[-1] - 1.0) > 1e-14 or np.any(np.diff(nodes) <= 0):
            raise DomainError("grid must be strictly increasing with rho_0 = 0, rho_M = 1")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, fn, nodes) -> "RadialFunction":
        nodes = np.asarray(nodes, dtype=float)
        return cls(nodes, np.asarray(fn(nodes), dtype=float))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.interp(t, self.nodes, self.values, left=self.values[0], right=0.0) * (
            t <= 1.0
        )

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def l1_norm(self, n: int) -> float:
        """L^1 norm over R^n of the radial extension of |u| (u = 0 outside B_1)."""
        xs, ws = gauss_rule(8)
        total = 0.0
        for lo, hi in zip(self.nodes[:-1], self.nodes[1:]):
            t = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xs
            total += 0.5 * (hi - lo) * float(np.sum(ws * np.abs(self(t)) * t ** (n - 1)))
        return sphere_area(n) * total


def getoor_trace(p: Params, nodes) -> RadialFunction:
    """The benchmark trace (1 - rho^2)_+^s sampled on the given grid."""
    nodes = np.asarray(nodes, dtype=float)
    return RadialFunction(nodes, np.clip(1.0 - nodes**2, 0.0, None) ** p.s)


def smooth_bump(t):
    """C-infinity radially decreasing bump supported in the closed unit ball."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = t < 1.0
    ti = t[inside]
    out[inside] = np.exp(-ti * ti / (1.0 - ti * ti))
    return out if out.shape else float(out)


@dataclass(frozen=True)
class TailedRadialFunction:
    """Neumann data h on a grid covering [0, R_tail] plus a power-law tail.

    Beyond the last node R the function continues as
    h(R) (rho / R)^(-tail_exponent); the natural exponent for
    h = (-Delta)^s u with u supported in B_1 is n + 2s. tail_exponent may
    be None, in which case consumers must verify the exterior kernel mass
    is negligible and raise otherwise.
    """

    nodes: np.ndarray
    values: np.ndarray
    tail_exponent: float | None = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if nodes.ndim != 1 or nodes.shape != values.shape:
            raise DomainError("nodes and values must be 1-d arrays of equal length")
        if nodes[0] != 0.0 or np.any(np.diff(nodes) <= 0):
            raise DomainError("grid must be strictly increasing starting at 0")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    @property
    def r_tail(self) -> float:
        return float(self.nodes[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        inner = np.interp(t, self.nodes, self.values)
        if self.tail_exponent is None:
            return np.where(t <= self.r_tail, inner, 0.0)
        tail = self.values[-1] * (np.maximum(t, self.r_tail) / self.r_tail) ** (
            -self.tail_exponent
        )
        return np.where(t <= self.r_tail, inner, tail)


@dataclass(frozen=True)
class ExtensionField:
    """The extension v = P * u of a radial trace, with derivative access.

    Evaluations are linear in the trace and pure; instances are safe to
    share across threads.
    """

    trace: RadialFunction
    params: Params
    norms: Normalizations = field(default=None)

    def __post_init__(self):
        if self.norms is None:
            object.__setattr__(self, "norms", normalizations(self.params))

    def _t_panels(self, rho: float, y: float):
        """Panels over the trace grid, refined toward t = rho at scale y."""
        panels = []
        scale = max(y, 1e-9)
        for lo, hi in zip(self.trace.nodes[:-1], self.trace.nodes[1:]):
            if lo <= rho <= hi and (hi - lo) > scale:
                # cut at rho, then grade each side toward it
                for a, b in ((lo, max(rho, lo)), (min(rho, hi), hi)):
                    if b - a <= 0:
                        continue
                    edges = [a]
                    target = rho if a >= rho else b  # grade toward the rho side
                    sub = split_toward(a, b, rho)
                    # enforce minimum sub-panel of size ~scale near rho
                    for aa, bb in sub:
                        panels.append((aa, bb))
                    del edges, target
            else:
                panels.extend(split_toward(lo, hi, rho))
        # drop sub-panels below the kernel resolution scale into one piece
        merged = []
        for a, b in panels:
            if merged and (b - a) < scale * 0.25 and (merged[-1][1] == a) and (
                merged[-1][1] - merged[-1][0]
            ) < scale * 0.5:
                merged[-1] = (merged[-1][0], b)
            else:
                merged.append((a, b))
        return merged

    def _kernel_eval(self, rho: float, y: float, deriv: str | None, gauss: int):
        n, s = self.params.n, self.params.s
        c = (n + 2.0 * s) / 2.0
        om = sphere_area(n - 1) if n >= 2 else 2.0
        xs, ws = gauss_rule(gauss)
        panels = self._t_panels(rho, y)
        ts, tws = [], []
        for a, b in panels:
            ts.append(0.5 * (a + b) + 0.5 * (b - a) * xs)
            tws.append(ws * 0.5 * (b - a))
        t = np.concatenate(ts)
        wq = np.concatenate(tws)
        dmin = (rho - t) ** 2 + y * y
        B = 2.0 * rho * t

        def ang(cc):
            if n == 1:
                return ((rho - t) ** 2 + y * y) ** (-cc) + ((rho + t) ** 2 + y * y) ** (-cc)
            return ang_reduced(n, cc, dmin, B)

        if deriv is None:
            K = y ** (2.0 * s) * ang(c)
        elif deriv == "y":
            K = 2.0 * s * y ** (2.0 * s - 1.0) * ang(c) - 2.0 * c * y ** (
                2.0 * s + 1.0
            ) * ang(c + 1.0)
        elif deriv == "rho":
            if n == 1:
                K = -2.0 * c * y ** (2.0 * s) * (
                    (rho - t) * ((rho - t) ** 2 + y * y) ** (-c - 1)
                    + (rho + t) * ((rho + t) ** 2 + y * y) ** (-c - 1)
                )
            else:
                a1 = ang(c + 1.0)
                a0 = ang(c)
                # d/d rho of the angular family: the t (1 - cos) moment equals
                # (ang(c) - dmin ang(c+1)) / (2 rho) exactly.
                with np.errstate(divide="ignore", invalid="ignore"):
                    mom = np.where(B > 0, (a0 - dmin * a1) / np.where(B > 0, B, 1.0), 0.0)
                K = -2.0 * c * y ** (2.0 * s) * ((rho - t) * a1 + t * mom)
        else:
            raise DomainError(f"unknown derivative request {deriv!r}")
        vals = self.trace(t)
        return self.norms.p_ns * om * float(np.sum(wq * t ** (n - 1) * vals * K))

    def value(self, rho: float, y: float, gauss: int = 12) -> float:
        if y <= 0:
            raise DomainError("the extension is evaluated for y > 0")
        return self._kernel_eval(float(rho), float(y), None, gauss)

    def v_y(self, rho: float, y: float, gauss: int = 12) -> float:
        if y <= 0:
            raise DomainError("the extension is evaluated for y > 0")
        return self._kernel_eval(float(rho), float(y), "y", gauss)

    def v_rho(self, rho: float, y: float, gauss: int = 12) -> float:
        if y <= 0:
            raise DomainError("the extension is evaluated for y > 0")
        return self._kernel_eval(float(rho), float(y), "rho", gauss)

    def weighted_flux(self, rho: float, y: float) -> float:
        """-y^a dv/dy, which converges to (-Delta)^s u / d_s as y -> 0."""
        return -(y ** self.params.a) * self.v_y(rho, y)

    def derivatives(self, rho: float, y: float, gauss: int = 10) -> tuple:
        """(v_rho, v_y) from a single angular-kernel pass.

        The two derivative kernels share the ang evaluations at exponents
        c and c+1, so computing them together costs one evaluation, not
        two. Used by the half-space moment sweeps.
        """
        if y <= 0:
            raise DomainError("the extension is evaluated for y > 0")
        rho, y = float(rho), float(y)
        n, s = self.params.n, self.params.s
        c = (n + 2.0 * s) / 2.0
        om = sphere_area(n - 1) if n >= 2 else 2.0
        xs, ws = gauss_rule(gauss)
        ts, tws = [], []
        for a, b in self._t_panels(rho, y):
            ts.append(0.5 * (a + b) + 0.5 * (b - a) * xs)
            tws.append(ws * 0.5 * (b - a))
        t = np.concatenate(ts)
        wq = np.concatenate(tws) * t ** (n - 1) * self.trace(t)
        if n == 1:
            dm, dp = (rho - t) ** 2 + y * y, (rho + t) ** 2 + y * y
            a0 = dm ** (-c) + dp ** (-c)
            a1 = dm ** (-c - 1) + dp ** (-c - 1)
            krho = -2.0 * c * y ** (2 * s) * (
                (rho - t) * dm ** (-c - 1) + (rho + t) * dp ** (-c - 1)
            )
        else:
            dmin = (rho - t) ** 2 + y * y
            B = 2.0 * rho * t
            a0 = ang_reduced(n, c, dmin, B)
            a1 = ang_reduced(n, c + 1.0, dmin, B)
            with np.errstate(divide="ignore", invalid="ignore"):
                mom = np.where(B > 0, (a0 - dmin * a1) / np.where(B > 0, B, 1.0), 0.0)
            krho = -2.0 * c * y ** (2 * s) * ((rho - t) * a1 + t * mom)
        ky = 2.0 * s * y ** (2 * s - 1.0) * a0 - 2.0 * c * y ** (2 * s + 1.0) * a1
        pref = self.norms.p_ns * om
        return pref * float(np.sum(wq * krho)), pref * float(np.sum(wq * ky))


def extend(field: ExtensionField, rho: float, y: float) -> float:
    """Poisson convolution v(rho, y); |v| <= max |u| by kernel positivity."""
    return field.value(rho, y)


def flux_limit(field: ExtensionField, rho: float, *, y0: float = 0.1,
               levels: int = 4, terms: int = 3) -> float:
    """Extrapolated boundary flux lim_{y->0} -y^a dv/dy at radius rho.

    The mollification error of the conjugate Poisson semigroup expands in
    the exponent ladder {2(1-s), 2, 2(1-s)+2, ...}; the first `terms`
    exponents are fitted on `levels` geometrically shrinking heights.
    """
    s = field.params.s
    ladder = sorted({2.0 * (1.0 - s), 2.0, 2.0 * (1.0 - s) + 1.0, 2.0 * (1.0 - s) + 2.0, 4.0})
    exps = ladder[:terms]
    ys = y0 * 0.5 ** np.arange(levels)
    f = np.array([field.weighted_flux(rho, y) for y in ys])
    cols = [np.ones_like(ys)] + [ys**p for p in exps]
    coef, *_ = np.linalg.lstsq(np.column_stack(cols), f, rcond=None)
    return float(coef[0])


def vy_from_flux(h: TailedRadialFunction, params: Params, rho: float, y: float,
                 gauss: int = 12) -> float:
    """-v_y(rho, y) through the conjugate kernel, given Neumann data h.

    -v_y = (gamma_ns y / d_s) int h(z) (|x-z|^2 + y^2)^(-(n+2-2s)/2) dz;
    the part of h beyond its grid uses the declared power tail. Without a
    tail model the exterior kernel mass must be below 1e-6 of the
    estimate, otherwise the accuracy contract fails.
    """
    if y <= 0:
        raise DomainError("conjugate evaluation needs y > 0")
    n, s = params.n, params.s
    norms = normalizations(params)
    c = (n + 2.0 - 2.0 * s) / 2.0
    om = sphere_area(n - 1) if n >= 2 else 2.0
    xs, ws = gauss_rule(gauss)

    def ang(t, cc=c):
        if n == 1:
            return ((rho - t) ** 2 + y * y) ** (-cc) + ((rho + t) ** 2 + y * y) ** (-cc)
        return ang_reduced(n, cc, (rho - t) ** 2 + y * y, 2.0 * rho * t)

    total = 0.0
    for lo, hi in zip(h.nodes[:-1], h.nodes[1:]):
        for a, b in split_toward(lo, hi, rho):
            t = 0.5 * (a + b) + 0.5 * (b - a) * xs
            wq = ws * 0.5 * (b - a)
            total += float(np.sum(wq * t ** (n - 1) * h(t) * ang(t)))
    R = h.r_tail
    if h.tail_exponent is not None:
        # substitute t = R / tau: the integrand becomes
        # h_R R^n tau^(mu + 1 - 2s) ang(n, c, (rho tau - R)^2 + (y tau)^2,
        # 2 rho R tau) on (0, 1), smooth for the natural exponent mu = n + 2s
        tau = 0.5 * (xs + 1.0)
        wq = ws * 0.5
        scaled = ang_reduced(
            n, c, (rho * tau - R) ** 2 + (y * tau) ** 2, 2.0 * rho * R * tau
        ) if n >= 2 else (
            ((rho * tau - R) ** 2 + (y * tau) ** 2) ** (-c)
            + ((rho * tau + R) ** 2 + (y * tau) ** 2) ** (-c)
        )
        power = h.tail_exponent + 1.0 - 2.0 * s
        tail = h.values[-1] * R**n * float(np.sum(wq * tau**power * scaled))
        total += tail
    else:
        # certify that dropping the exterior is harmless
        probe = abs(h.values[-1]) * om * R ** (n - 1) * ang(np.array([R]))[0] * R
        if abs(probe) > 1e-6 * max(abs(total), 1e-300):
            raise AccuracyError(
                "Neumann data has no tail model but the exterior kernel mass is not negligible"
            )
    return norms.gamma_ns * y / norms.d_s * om * total


def riesz_bound(h: RadialFunction, params: Params, x: float, gauss: int = 12) -> float:
    """riesz_c * int_{B_1} h(z) |x - z|^(2s - n) dz for nonnegative h.

    The pointwise bound for Dirichlet solutions; requires n > 2s so that
    the fundamental solution is a potential kernel.
    """
    n, s = params.n, params.s
    if np.any(np.asarray(h.values) < 0):
        raise DomainError("riesz_bound is stated for nonnegative data")
    norms = normalizations(params)
    if norms.riesz_c is None:
        raise DomainError("riesz bound needs n > 2s")
    c = (n - 2.0 * s) / 2.0
    om = sphere_area(n - 1) if n >= 2 else 2.0
    xs, ws = gauss_rule(gauss)
    total = 0.0
    for lo, hi in zip(h.nodes[:-1], h.nodes[1:]):
        for a, b in split_toward(lo, hi, x):
            t = 0.5 * (a + b) + 0.5 * (b - a) * xs
            wq = ws * 0.5 * (b - a)
            if n == 1:
                kern = np.abs(x - t) ** (-2 * c) + (x + t) ** (-2 * c)
            else:
                kern = ang_reduced(n, c, (x - t) ** 2, 2.0 * x * t)
            total += float(np.sum(wq * t ** (n - 1) * h(t) * kern))
    return norms.riesz_c * om * total


def decay_report(field: ExtensionField, samples) -> dict:
    """Ratio maxima for the far-field derivative decay estimates.

    For sample points with rho > 2 the horizontal and vertical derivative
    bounds scale as y^(2s)/r^(n+1+2s) and y^(2s-1)/r^(n+2s); the third
    ratio |grad v| y^(n+1) / ||u||_L1 is checked at every sample. The
    implied constants are reported, never asserted against any reference.
    """
    n, s = field.params.n, field.params.s
    l1 = field.trace.l1_norm(n)
    r1 = r2 = r3 = 0.0
    for rho, y in samples:
        if y <= 0:
            raise DomainError("samples need y > 0")
        vr = field.v_rho(rho, y)
        vy = field.v_y(rho, y)
        r = math.hypot(rho, y)
        if rho > 2.0:
            r1 = max(r1, abs(vr) * r ** (n + 1 + 2 * s) / y ** (2 * s))
            r2 = max(r2, abs(vy) * r ** (n + 2 * s) / y ** (2 * s - 1))
        else:
            raise DomainError("horizontal/vertical decay ratios are stated for rho > 2")
        grad = math.hypot(vr, vy)
        r3 = max(r3, grad * y ** (n + 1) / l1 if l1 > 0 else 0.0)
    return {"horizontal": r1, "vertical": r2, "gradient": r3}


def sup_halfball_bound(field: ExtensionField, R: float, *, n_samples: int = 12) -> tuple:
    """Sampled sup of |v| over the half-ball B_R^+ and the trace-side bound.

    The bound combines sup |u| on the double base with the L^1 norm; the
    constant is fitted as the worst observed ratio over a fixed probe
    family for the same (n, s, R), so the returned pair always satisfies
    sup <= bound while the fitted constant remains informative.
    """
    if R <= 0:
        raise DomainError("R must be positive")
    p = field.params

    def sampled_sup(f: ExtensionField) -> float:
        out = 0.0
        for i in range(1, n_samples + 1):
            for j in range(1, n_samples + 1):
                rr = R * i / (n_samples + 1)
                phi = 0.5 * math.pi * j / (n_samples + 1)
                rho, y = rr * math.cos(phi), rr * math.sin(phi)
                if y <= 0:
                    continue
                out = max(out, abs(f.value(rho, y)))
        return out

    def rhs_combo(f: ExtensionField) -> float:
        base = min(2.0 * R, 1.0)
        mask = f.trace.nodes <= base
        sup_base = float(np.max(np.abs(f.trace.values[mask]))) if np.any(mask) else 0.0
        return sup_base + f.trace.l1_norm(p.n)

    nodes = field.trace.nodes
    probes = [
        field,
        ExtensionField(getoor_trace(p, nodes), p, field.norms),
        ExtensionField(RadialFunction.from_callable(smooth_bump, nodes), p, field.norms),
    ]
    cfit = 0.0
    for f in probes:
        combo = rhs_combo(f)
        if combo > 0:
            cfit = max(cfit, sampled_sup(f) / combo)
    sup_v = sampled_sup(field)
    return sup_v, cfit * rhs_combo(field)
