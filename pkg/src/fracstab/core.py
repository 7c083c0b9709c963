"""Parameters and the (n, s)-dependent normalization constants.

All constants are implemented with closed forms from classical potential
theory, but the package treats the defining properties as the source of
truth: the Poisson constant must give unit kernel mass, the
Dirichlet-to-Neumann constant must close the flux loop against direct
singular quadrature, and the fractional-Laplacian constant must reproduce
the Gaussian Fourier value. Those checks live in the test suite and in the
`verify` command; nothing here trusts a transcription silently.

Conventions, for a fractional order s in (0, 1) and weight a = 1 - 2s:

* Poisson kernel        P(x, y) = p_ns * y^(2s) / (|x|^2 + y^2)^((n+2s)/2)
* conjugate kernel      G(x, y) = gamma_ns * y / (|x|^2 + y^2)^((n+2-2s)/2)
* operator constant     (-Delta)^s u = c_ns PV int (u(x)-u(z)) |x-z|^(-n-2s)
* flux constant         (-Delta)^s u = -d_s lim_{y->0} y^a dv/dy
* fundamental solution  u(x) = riesz_c int h(z) |x-z|^(2s-n) dz  (n > 2s)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

_SQRT_2PI = 2.5066282746310005024157652848110

# Lanczos approximation, g = 607/128, 15 terms (Godfrey's coefficient set).
_LANCZOS_G = 607.0 / 128.0
_LANCZOS_C = (
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
)


def log_gamma(x: float) -> float:
    """Natural log of the Gamma function for x > 0.

    Lanczos rational approximation; relative error is far below 1e-12 on
    [1e-3, 1e3]. Arguments below 0.5 go through the recurrence
    ln G(x) = ln G(x + 1) - ln x to keep the approximation in its sweet
    spot.
    """
    x = float(x)
    if not x > 0.0 or math.isnan(x):
        raise DomainError(f"log_gamma requires x > 0, got {x}")
    ser = _LANCZOS_C[0]
    for k in range(1, len(_LANCZOS_C)):
        ser += _LANCZOS_C[k] / (x - 1.0 + k)
    t = x + _LANCZOS_G - 0.5
    return math.log(_SQRT_2PI * ser) + (x - 0.5) * math.log(t) - t


def gamma_fn(x: float) -> float:
    """Gamma function via log_gamma (positive arguments only)."""
    return math.exp(log_gamma(x))


def log_beta(a: float, b: float) -> float:
    return log_gamma(a) + log_gamma(b) - log_gamma(a + b)


def sphere_area(k: int) -> float:
    """Surface measure of the unit sphere S^(k-1) in R^k."""
    if k < 1:
        raise DomainError(f"sphere_area needs dimension >= 1, got {k}")
    return 2.0 * math.pi ** (k / 2.0) / gamma_fn(k / 2.0)


@dataclass(frozen=True)
class Params:
    """Problem parameters: dimension n and fractional order s; a = 1 - 2s.

    n = 1 is accepted for kernel utilities; the solver and the regime
    classifier additionally require n >= 2 and check it themselves.
    """

    n: int
    s: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be an integer >= 1, got {self.n}")
        if not (0.0 < self.s < 1.0):
            raise DomainError(f"s must lie in (0, 1), got {self.s}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "s", float(self.s))

    @property
    def a(self) -> float:
        return 1.0 - 2.0 * self.s


@dataclass(frozen=True)
class Normalizations:
    """The five normalization constants for a given Params.

    riesz_c is None when n <= 2s (the fundamental solution |x|^(2s-n) is
    not a potential kernel there; only n = 1 with s >= 1/2 is affected).
    """

    c_ns: float
    d_s: float
    p_ns: float
    gamma_ns: float
    riesz_c: float | None


def poisson_constant(p: Params) -> float:
    """p_ns = Gamma((n+2s)/2) / (pi^(n/2) Gamma(s)); unit-mass normalization."""
    n, s = p.n, p.s
    return math.exp(log_gamma((n + 2 * s) / 2.0) - log_gamma(s)) / math.pi ** (n / 2.0)


def conjugate_constant(p: Params) -> float:
    """gamma_ns = p_{n,1-s}: the conjugate problem has order 1-s."""
    n, s = p.n, p.s
    return math.exp(log_gamma((n + 2 - 2 * s) / 2.0) - log_gamma(1 - s)) / math.pi ** (n / 2.0)


def operator_constant(p: Params) -> float:
    """c_ns = 4^s s Gamma((n+2s)/2) / (pi^(n/2) Gamma(1-s))."""
    n, s = p.n, p.s
    return (
        4.0**s * s * math.exp(log_gamma((n + 2 * s) / 2.0) - log_gamma(1.0 - s))
        / math.pi ** (n / 2.0)
    )


def neumann_constant(s: float) -> float:
    """d_s = 2^(2s-1) Gamma(s) / Gamma(1-s); equals 1 at s = 1/2."""
    if not (0.0 < s < 1.0):
        raise DomainError(f"s must lie in (0, 1), got {s}")
    return 2.0 ** (2.0 * s - 1.0) * math.exp(log_gamma(s) - log_gamma(1.0 - s))


def riesz_constant(p: Params) -> float | None:
    """riesz_c = Gamma((n-2s)/2) / (4^s pi^(n/2) Gamma(s)), defined for n > 2s."""
    n, s = p.n, p.s
    if n <= 2 * s:
        return None
    return math.exp(log_gamma((n - 2 * s) / 2.0) - log_gamma(s)) / (
        4.0**s * math.pi ** (n / 2.0)
    )


def normalizations(p: Params) -> Normalizations:
    return Normalizations(
        c_ns=operator_constant(p),
        d_s=neumann_constant(p.s),
        p_ns=poisson_constant(p),
        gamma_ns=conjugate_constant(p),
        riesz_c=riesz_constant(p),
    )


def getoor_constant(p: Params) -> float:
    """(-Delta)^s applied to (1-|x|^2)_+^s is this constant inside B_1.

    Used purely as an independent benchmark value for operator tests.
    """
    n, s = p.n, p.s
    return 4.0**s * math.exp(
        log_gamma(1.0 + s) + log_gamma((n + 2 * s) / 2.0) - log_gamma(n / 2.0)
    )


def gaussian_fourier_value(p: Params) -> float:
    """(-Delta)^s exp(-|x|^2/2) evaluated at the origin: 2^s G((n+2s)/2)/G(n/2)."""
    n, s = p.n, p.s
    return 2.0**s * math.exp(log_gamma((n + 2 * s) / 2.0) - log_gamma(n / 2.0))


def poisson_mass_quadrature(p: Params, y: float, npanel: int = 24, gauss: int = 16) -> float:
    """Kernel mass int_{R^n} P(x, y) dx by direct quadrature (defining property).

    Substituting t = y tan(phi) turns the radial integral into
    int_0^{pi/2} sin^(n-1) cos^(2s-1); the cos endpoint singularity for
    s < 1/2 is resolved with panels geometrically refined toward pi/2.
    The y-independence of the result is part of what the tests check.
    """
    import numpy as np

    if y <= 0:
        raise DomainError("Poisson kernel mass is defined for y > 0")
    n, s = p.n, p.s
    xs, ws = np.polynomial.legendre.leggauss(gauss)
    edges = [0.0]
    step = math.pi / 4.0
    while len(edges) < npanel:
        edges.append(math.pi / 2.0 - step)
        step *= 0.5
    edges.append(math.pi / 2.0)
    edges = np.unique(np.clip(edges, 0.0, math.pi / 2.0))
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        phi = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xs
        total += 0.5 * (hi - lo) * float(
            np.sum(ws * np.sin(phi) ** (n - 1) * np.cos(phi) ** (2 * s - 1))
        )
    return sphere_area(n) * poisson_constant(p) * total


def conjugate_mass_quadrature(p: Params, y: float) -> float:
    """int_{R^n} Gamma(x, y) dx; must equal y^(2s-1) (conjugate unit mass)."""
    conj = Params(p.n, 1.0 - p.s)
    # Gamma(., y) = gamma_ns * y^(2(1-s)) / (...)^((n+2(1-s))/2) / y^(1-a_conj...) :
    # it is exactly y^(-a) times the unit-mass kernel of order 1-s.
    return y ** (2.0 * p.s - 1.0) * (
        poisson_mass_quadrature(conj, y) / poisson_constant(conj) * conjugate_constant(p)
    )
