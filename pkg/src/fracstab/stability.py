"""Stability-based estimates evaluated on computed branch states.

Every quantity here is the falsifiable integral the theory bounds, not
the inequality chain that proves the bound: the stability quadratic form
on grid functions, the weighted Dirichlet integral of the extension's
horizontal derivative, the L^p norms of e^u along an exponential branch,
and pointwise power-decay envelopes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Params, sphere_area
from .errors import AccuracyError, DomainError
from .extension import ExtensionField, RadialFunction
from .quad import gauss_rule, jacobi_rule
from .regimes import decay_exponent_floor, radial_condition_rhs
from .solver import Branch, DiscreteOperator, Nonlinearity

__all__ = [
    "stability_form",
    "WeightedDirichletQuery",
    "weighted_dirichlet",
    "lp_sweep",
    "decay_profile_check",
]


def stability_form(op: DiscreteOperator, f: Nonlinearity, lam: float,
                   state: RadialFunction | np.ndarray, xi: np.ndarray) -> float:
    """Discrete stability quadratic form: ||xi||_Hs^2 - lam int f'(u) xi^2.

    xi is a grid vector (vanishing outside the ball by construction of the
    grid space); nonnegativity over all xi is the stability of the state.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (op.m,):
        raise DomainError("test vector does not match the operator grid")
    u = state.values[:-1] if isinstance(state, RadialFunction) else np.asarray(state)
    if u.shape != (op.m,):
        raise DomainError("state does not match the operator grid")
    quad = float(xi @ (op.form @ xi))
    return quad - lam * float(np.sum(op.weights * f.deriv(u) * xi * xi))


@dataclass(frozen=True)
class WeightedDirichletQuery:
    state: RadialFunction
    params: Params
    alpha: float
    rho_min: float = 1e-3
    y_max: float = 50.0

    def __post_init__(self):
        n = self.params.n
        if not (1.0 <= self.alpha < 1.0 + math.sqrt(n - 1.0)):
            raise DomainError(
                f"alpha must lie in [1, 1 + sqrt(n-1)) = [1, {1 + math.sqrt(n - 1):.4f})"
            )


def _dirichlet_integral(q: WeightedDirichletQuery, field: ExtensionField,
                        rho_min: float, y_max: float, gauss: int = 8) -> float:
    """Truncated int y^a v_rho^2 rho^(n-1-2 alpha) over (rho_min, 1/2) x (0, y_max)."""
    n, s = q.params.n, q.params.s
    a = 1.0 - 2.0 * s
    sig = sphere_area(n)
    xs, ws = gauss_rule(gauss)
    xj, wj = jacobi_rule(10, a)
    # rho panels: geometric from rho_min (the rho^{-2 alpha} weight), then uniform
    redges = [rho_min]
    while redges[-1] * 2.0 < 0.25:
        redges.append(redges[-1] * 2.0)
    redges += list(np.linspace(max(redges[-1], 0.25), 0.5, 4)[1:])
    redges = np.unique(np.clip(redges, rho_min, 0.5))
    y0 = 0.05
    yedges = [y0]
    while yedges[-1] < y_max:
        yedges.append(min(yedges[-1] * 1.6, y_max))
    total = 0.0
    rho_nodes = []
    for lo, hi in zip(redges[:-1], redges[1:]):
        rv = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xs
        rw = ws * 0.5 * (hi - lo)
        rho_nodes.extend(zip(rv, rw))
    y_nodes = list(zip(y0 * (xj + 1.0) / 2.0, wj * (y0 / 2.0) ** (1.0 + a)))
    for lo, hi in zip(yedges[:-1], yedges[1:]):
        yv = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xs
        yw = ws * 0.5 * (hi - lo) * yv**a
        y_nodes.extend(zip(yv, yw))
    for y, wy in y_nodes:
        for r, wr in rho_nodes:
            vr = field.v_rho(float(r), float(y))
            total += wy * wr * vr * vr * r ** (n - 1.0 - 2.0 * q.alpha)
    return sig * total


def weighted_dirichlet(q: WeightedDirichletQuery, field: ExtensionField | None = None,
                       *, budget: int = 3) -> dict:
    """The weighted Dirichlet integral with a truncation-convergence flag.

    The truncation (rho_min, y_max) is extended (rho_min halved, y_max
    doubled) until the value moves by no more than 1% or the budget is
    exhausted; the returned dict reports the value, the final truncation
    and the flag. The integrand is nonnegative, so the value is monotone
    under both extensions.
    """
    if field is None:
        field = ExtensionField(q.state, q.params)
    rho_min, y_max = q.rho_min, q.y_max
    value = _dirichlet_integral(q, field, rho_min, y_max)
    converged = False
    for _ in range(budget):
        refined = _dirichlet_integral(q, field, rho_min / 2.0, y_max * 2.0)
        if abs(refined - value) <= 0.01 * max(abs(refined), 1e-300):
            value = refined
            converged = True
            break
        rho_min /= 2.0
        y_max *= 2.0
        value = refined
    return {
        "value": value,
        "rho_min": rho_min,
        "y_max": y_max,
        "converged": converged,
        "alpha": q.alpha,
    }


def _lp_norm_exp(state: RadialFunction, n: int, p_exp: float, gauss: int = 12) -> float:
    """|| e^u ||_{L^p(B_1)} for a piecewise-linear radial state."""
    xs, ws = gauss_rule(gauss)
    total = 0.0
    for lo, hi in zip(state.nodes[:-1], state.nodes[1:]):
        t = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xs
        total += 0.5 * (hi - lo) * float(
            np.sum(ws * np.exp(p_exp * state(t)) * t ** (n - 1))
        )
    return (sphere_area(n) * total) ** (1.0 / p_exp)


def lp_sweep(branch: Branch, alpha: float) -> list:
    """|| e^{u_lambda} ||_{L^{2 alpha + 1}(B_1)} along an exponential branch.

    Admissible only for alpha < 2 (the range the stability argument
    certifies) and for branches computed with f = exp.
    """
    if not (0.0 < alpha < 2.0):
        raise DomainError("the exponential sweep is stated for 0 < alpha < 2")
    if branch.nonlinearity != "exp":
        raise DomainError("lp_sweep applies to exponential branches")
    p_exp = 2.0 * alpha + 1.0
    n = branch.params.n
    return [
        {"lambda": pt.lam, "norm": _lp_norm_exp(pt.state, n, p_exp)}
        for pt in branch.points
    ]


def decay_profile_check(state: RadialFunction, p: Params, mu: float) -> dict:
    """Fit C on the mid-range and verify u(rho) <= C rho^(-mu) at all nodes.

    Only meaningful in the power-decay regime (n at or above the radial
    window) and for exponents above the decay floor.
    """
    if p.n < radial_condition_rhs(p.s):
        raise DomainError("decay profile applies in the power-decay regime")
    if mu <= decay_exponent_floor(p):
        raise DomainError("mu must exceed the decay exponent floor")
    nodes = state.nodes[:-1]
    vals = state.values[:-1]
    if not np.any(vals):
        return {"constant": 0.0, "holds": True, "worst_slack": 0.0, "mu": mu}
    mid = (nodes >= 0.25) & (nodes <= 0.6)
    if not np.any(mid):
        raise AccuracyError("no mid-range nodes to fit the envelope constant")
    c_fit = float(np.max(vals[mid] * nodes[mid] ** mu))
    pos = nodes > 0.0
    ratios = vals[pos] * nodes[pos] ** mu / c_fit
    worst = float(np.max(ratios))
    return {
        "constant": c_fit,
        "holds": bool(worst <= 1.0 + 1e-12),
        "worst_slack": worst - 1.0,
        "mu": mu,
    }
