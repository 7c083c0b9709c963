"""Dimension/order regime thresholds and critical fractional orders.

Three families of conditions are evaluated:

* the radial boundedness window n < 2(s + 2 + sqrt(2(s+1))), with the
  decay exponent floor n/2 - s - 1 - sqrt(n-1) in the complementary range;
* the sharp exponential-nonlinearity condition, a Gamma-function
  inequality evaluated in log space;
* the classical n < 10s (exponential) and n < 4s (convex) conditions.

Critical orders are returned with an explicit three-way encoding, since
depending on n a condition can hold for every s in (0,1), fail for every
s, or cross exactly once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import Params, log_gamma
from .errors import DomainError

__all__ = [
    "RegimeReport",
    "CriticalOrder",
    "classify",
    "critical_s_radial",
    "critical_s_gelfand",
    "decay_exponent_floor",
    "radial_condition_rhs",
    "gelfand_log_gap",
]


def radial_condition_rhs(s: float) -> float:
    """2 (s + 2 + sqrt(2(s+1))): the dimension bound of the radial regime."""
    return 2.0 * (s + 2.0 + math.sqrt(2.0 * (s + 1.0)))


def radial_condition_lower(s: float) -> float:
    """2 (s + 2 - sqrt(2(s+1))); below 2 for every s in (0,1)."""
    return 2.0 * (s + 2.0 - math.sqrt(2.0 * (s + 1.0)))


def decay_exponent_floor(p: Params) -> float:
    """n/2 - s - 1 - sqrt(n-1): admissible decay exponents lie above this."""
    if p.n < 2:
        raise DomainError("decay exponent floor is stated for n >= 2")
    return p.n / 2.0 - p.s - 1.0 - math.sqrt(p.n - 1.0)


def gelfand_log_gap(n: int, s: float) -> float:
    """log LHS - log RHS of the sharp exponential condition.

    Positive gap means G(n/2) G(1+s) / G((n-2s)/2) exceeds
    G^2((n+2s)/4) / G^2((n-2s)/4); everything is evaluated through
    log_gamma to avoid overflow for large n.
    """
    if n <= 2 * s:
        raise DomainError("the Gamma condition needs n > 2s")
    lhs = log_gamma(n / 2.0) + log_gamma(1.0 + s) - log_gamma((n - 2.0 * s) / 2.0)
    rhs = 2.0 * log_gamma((n + 2.0 * s) / 4.0) - 2.0 * log_gamma((n - 2.0 * s) / 4.0)
    return lhs - rhs


@dataclass(frozen=True)
class RegimeReport:
    params: Params
    radial_condition_holds: bool
    mu_floor: float
    gelfand_condition_holds: bool
    exp_10s_holds: bool
    convex_4s_holds: bool


def classify(p: Params) -> RegimeReport:
    if p.n < 2:
        raise DomainError("regime classification is stated for n >= 2")
    if p.n <= 2 * p.s:
        raise DomainError("classification needs n > 2s (Gamma argument at a pole)")
    return RegimeReport(
        params=p,
        radial_condition_holds=p.n < radial_condition_rhs(p.s),
        mu_floor=decay_exponent_floor(p),
        gelfand_condition_holds=gelfand_log_gap(p.n, p.s) > 0.0,
        exp_10s_holds=p.n < 10.0 * p.s,
        convex_4s_holds=p.n < 4.0 * p.s,
    )


@dataclass(frozen=True)
class CriticalOrder:
    """Crossing of a condition in s: 'all', 'none', or 'crossing' at value."""

    kind: str
    value: float | None = None

    def __post_init__(self):
        if self.kind not in ("all", "none", "crossing"):
            raise DomainError(f"unknown CriticalOrder kind {self.kind!r}")
        if (self.kind == "crossing") != (self.value is not None):
            raise DomainError("value must accompany exactly the 'crossing' kind")


def critical_s_radial(n: int) -> CriticalOrder:
    """Smallest admissible order for the radial boundedness window.

    The equality n = 2(s + 2 + sqrt(2(s+1))) reduces to the quadratic
    s^2 - (n-2) s + (n^2/4 - 2n + 2) = 0 with relevant root
    s* = (n-2)/2 - sqrt(n-1); the condition holds for s > s*. For n <= 6
    the root is negative (every s works) and for n >= 10 it is >= 1
    (no admissible s).
    """
    if n < 2:
        raise DomainError("critical order is stated for n >= 2")
    s_star = (n - 2.0) / 2.0 - math.sqrt(n - 1.0)
    if s_star <= 0.0:
        return CriticalOrder("all")
    if s_star >= 1.0:
        return CriticalOrder("none")
    return CriticalOrder("crossing", s_star)


def critical_s_gelfand(n: int, tol: float = 1e-8) -> CriticalOrder:
    """Crossing of the sharp Gamma condition in s, by bisection.

    The gap vanishes as s -> 0 for every n, so the bracket endpoints are
    taken slightly inside (0, 1) and the no-sign-change cases are decided
    by the gap sign on the interior of the interval.
    """
    if n < 2:
        raise DomainError("critical order is stated for n >= 2")
    lo, hi = 1e-6, 1.0 - 1e-6
    glo, ghi = gelfand_log_gap(n, lo), gelfand_log_gap(n, hi)
    if glo > 0.0 and ghi > 0.0:
        return CriticalOrder("all")
    if glo < 0.0 and ghi < 0.0:
        return CriticalOrder("none")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = gelfand_log_gap(n, mid)
        if (gm > 0.0) == (ghi > 0.0):
            hi, ghi = mid, gm
        else:
            lo, glo = mid, gm
        if hi - lo < tol:
            break
    return CriticalOrder("crossing", 0.5 * (lo + hi))
