"""Radial collocation for (-Delta)^s u = lambda f(u) on the unit ball.

Discretization summary. States live on a graded grid over [0, 1] (uniform
core, geometric refinement toward the boundary) with the boundary node
pinned to zero and piecewise-linear interpolation in between. The
collocation matrix applies the operator row by row with the principal-value
integral split three ways:

* a local window around each node, integrated against a quadratic model
  of the state (a two-point model in the span of the exact boundary
  profile (1 - t^2)^s for rows inside the graded cluster, where the state
  is not C^2);
* the interior far field, panel quadrature of the radially reduced kernel
  against the piecewise-linear interpolant;
* the exterior contribution from {|z| > 1}, where the state vanishes,
  integrated with boundary-layer panels.

Separately from the row operator, the energy form of the H^s seminorm is
assembled as the Gagliardo double integral of the hat functions, which is
symmetric positive definite by construction; it drives every stability
quantity (quadratic form, principal eigenvalue of the linearization).
Newton, pseudo-arclength continuation and fold refinement run on the
collocation operator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .core import Params, operator_constant, sphere_area
from .errors import AccuracyError, DomainError, NewtonFailure
from .extension import RadialFunction
from .quad import (
    ang_reduced,
    exterior_kernel_mass,
    gauss_rule,
    jacobi_rule,
    split_toward,
)

__all__ = [
    "graded_grid",
    "Grid",
    "Nonlinearity",
    "EXP_NONLINEARITY",
    "power_nonlinearity",
    "CONSTANT_NONLINEARITY",
    "DiscreteOperator",
    "assemble",
    "newton_solve",
    "ContinuationControls",
    "BranchPoint",
    "Branch",
    "continue_branch",
    "principal_eigenvalue",
    "principal_eigenvalue_dense",
    "boundary_exponent",
    "monotonicity_check",
]


@dataclass(frozen=True)
class Grid:
    """Graded radial grid: nodes[0] = 0, nodes[-1] = 1; DOFs exclude the last."""

    nodes: np.ndarray
    transition: float  # start of the geometrically graded boundary cluster

    @property
    def dof_nodes(self) -> np.ndarray:
        return self.nodes[:-1]

    @property
    def m(self) -> int:
        return self.nodes.size - 1


def graded_grid(M: int, ratio: float = 0.85, frac_boundary: float = 0.4) -> Grid:
    """M intervals: a uniform core (resolving the centered maximum) and a
    boundary cluster whose interval lengths decrease geometrically with the
    given ratio toward rho = 1. The split point matches the two local
    spacings so the grid has no jump at the transition.
    """
    if M < 12:
        raise DomainError("grid needs at least 12 intervals")
    mb = max(8, int(round(frac_boundary * M)))
    mi = M - mb
    gsum = (1.0 - ratio**mb) / (1.0 - ratio)
    rt = mi / (mi + gsum)
    interior = np.linspace(0.0, rt, mi + 1)
    steps = (1.0 - rt) / gsum * ratio ** np.arange(mb)
    boundary = rt + np.cumsum(steps)
    boundary[-1] = 1.0
    nodes = np.concatenate([interior, boundary])
    if np.any(np.diff(nodes) <= 0):
        raise DomainError("grid construction produced duplicate nodes")
    return Grid(nodes=nodes, transition=rt)


@dataclass(frozen=True)
class Nonlinearity:
    """Value/derivative callables with the monotonicity attestation."""

    name: str
    value: callable
    deriv: callable
    nondecreasing: bool = True

    def __post_init__(self):
        if not self.nondecreasing:
            raise DomainError("solver scope requires a nondecreasing nonlinearity")
        f0 = float(self.value(np.zeros(1))[0])
        if not f0 > 0.0:
            raise DomainError("nonlinearity must satisfy f(0) > 0")


EXP_NONLINEARITY = Nonlinearity("exp", lambda u: np.exp(u), lambda u: np.exp(u))

CONSTANT_NONLINEARITY = Nonlinearity(
    "linear", lambda u: np.ones_like(u), lambda u: np.zeros_like(u)
)


def power_nonlinearity(p: float) -> Nonlinearity:
    if p <= 1.0:
        raise DomainError("power nonlinearity needs exponent > 1")
    return Nonlinearity(
        f"power{p:g}",
        lambda u: (1.0 + u) ** p,
        lambda u: p * (1.0 + u) ** (p - 1.0),
    )


def make_nonlinearity(name: str, p: float | None = None) -> Nonlinearity:
    if name == "exp":
        return EXP_NONLINEARITY
    if name == "linear":
        return CONSTANT_NONLINEARITY
    if name == "power":
        return power_nonlinearity(2.0 if p is None else p)
    raise DomainError(f"unknown nonlinearity {name!r}")


class DiscreteOperator:
    """Assembled radial fractional Laplacian on a graded grid.

    `apply` is the collocation action (row-accurate, used by Newton and
    the continuation); `form` is the symmetric positive-definite Gagliardo
    matrix of the H^s seminorm on the same hat functions (used by every
    stability quantity). `weights` are the lumped L^2 pairing weights.
    The two discretizations are independent routes to the same operator
    and are cross-validated in the tests.
    """

    def __init__(self, params: Params, grid: Grid, matrix: np.ndarray,
                 weights: np.ndarray):
        self.params = params
        self.grid = grid
        self.matrix = matrix
        self.weights = weights
        self._form = None

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u

    @property
    def form(self) -> np.ndarray:
        if self._form is None:
            self._form = assemble_form(self.params, self.grid)
        return self._form

    def seminorm_sq(self, u: np.ndarray) -> float:
        """Discrete H^s seminorm squared of a grid function (zero outside)."""
        return float(u @ (self.form @ u))

    def state(self, u: np.ndarray) -> RadialFunction:
        return RadialFunction(self.grid.nodes, np.append(u, 0.0))


def _quadratic_stencils(hl: float, hr: float):
    d1 = np.array([-hr / (hl * (hl + hr)), (hr - hl) / (hl * hr), hl / (hr * (hl + hr))])
    d2 = np.array([2.0 / (hl * (hl + hr)), -2.0 / (hl * hr), 2.0 / (hr * (hl + hr))])
    return d1, d2


def assemble(params: Params, grid: Grid, *, gauss: int = 10,
             window_coef: float = 0.6) -> DiscreteOperator:
    """Collocation matrix and L^2 weights.

    The local window has radius ~ window_coef * sqrt(h), wide enough that
    the piecewise-linear far field never meets the kernel concentration
    zone; inside it the state is replaced by the row's local model whose
    kernel moments are integrated with a Jacobi rule at the singularity
    plus geometric panels.
    """
    n, s = params.n, params.s
    if n < 2:
        raise DomainError("the radial solver is stated for n >= 2")
    nodes = grid.dof_nodes
    gn = grid.nodes
    M = nodes.size
    if np.any(np.diff(gn) <= 0):
        raise DomainError("grid has duplicate nodes")
    cpow = (n + 2.0 * s) / 2.0
    om = sphere_area(n - 1)
    sig = sphere_area(n)
    cns = operator_constant(params)
    xs, ws = gauss_rule(gauss)
    xj, wj = jacobi_rule(16, 1.0 - 2.0 * s)

    def kernel(rho, t):
        t = np.asarray(t, dtype=float)
        return om * t ** (n - 1) * ang_reduced(n, cpow, (rho - t) ** 2, 2.0 * rho * t)

    def boundary_profile(t):
        t = np.asarray(t, dtype=float)
        return np.clip(1.0 - t * t, 0.0, None) ** s

    rows = np.zeros((M, M + 1))
    for i, rho in enumerate(nodes):
        row = np.zeros(M + 1)
        in_cluster = rho > grid.transition + 1e-12
        if i == 0:
            h1 = gn[1] - gn[0]
            D = max(min(window_coef * math.sqrt(h1), 1.0), h1)
            # J(0, t) = sigma t^(-1-2s) exactly; even symmetry kills u'(0)
            m2 = sig * D ** (2.0 - 2.0 * s) / (2.0 - 2.0 * s)
            row[0] += m2 / h1**2
            row[1] -= m2 / h1**2
            lo_edge, hi_edge = 0.0, D
        else:
            hl = rho - gn[i - 1]
            hr = gn[i + 1] - rho
            D = min(window_coef * math.sqrt(max(hl, hr)), rho, 1.0 - rho)
            D = max(D, min(hl, hr))
            w_in = min(hl, hr, D)
            tau = w_in * (xj + 1.0) / 2.0
            wq = wj * (w_in / 2.0) ** (2.0 - 2.0 * s)
            jp = kernel(rho, rho + tau)
            jm = kernel(rho, rho - tau)
            base = tau ** (1.0 - 2.0 * s)
            m1 = float(np.sum(wq * tau * (jp - jm) / base))
            m2 = float(np.sum(wq * tau**2 * (jp + jm) / base))
            if in_cluster:
                bp0 = boundary_profile(rho)
                sm = float(np.sum(wq * (
                    (2.0 * bp0 - boundary_profile(rho + tau) - boundary_profile(rho - tau))
                    * 0.5 * (jp + jm)
                    + (boundary_profile(rho - tau) - boundary_profile(rho + tau))
                    * 0.5 * (jp - jm)
                ) / base))
            if D > w_in * (1.0 + 1e-12):
                edges = [w_in]
                while edges[-1] * 2.0 < D:
                    edges.append(edges[-1] * 2.0)
                edges.append(D)
                for alo, ahi in zip(edges[:-1], edges[1:]):
                    tv = 0.5 * (alo + ahi) + 0.5 * (ahi - alo) * xs
                    jpw = kernel(rho, rho + tv) * ws * 0.5 * (ahi - alo)
                    jmw = kernel(rho, rho - tv) * ws * 0.5 * (ahi - alo)
                    m1 += float(np.sum(tv * (jpw - jmw)))
                    m2 += float(np.sum(tv * tv * (jpw + jmw)))
                    if in_cluster:
                        sm += float(np.sum((bp0 - boundary_profile(rho + tv)) * jpw))
                        sm += float(np.sum((bp0 - boundary_profile(rho - tv)) * jmw))
            if in_cluster:
                dbp = boundary_profile(rho) - boundary_profile(gn[i + 1])
                row[i] += sm / dbp
                row[i + 1] -= sm / dbp
            else:
                d1, d2 = _quadratic_stencils(hl, hr)
                row[i - 1:i + 2] = -(d1 * m1 + 0.5 * d2 * m2)
            lo_edge, hi_edge = rho - D, rho + D
        # interior far field against the piecewise-linear interpolant
        for j in range(M):
            alo, ahi = gn[j], gn[j + 1]
            pieces = []
            if ahi <= lo_edge or alo >= hi_edge:
                pieces.append((alo, ahi))
            else:
                if alo < lo_edge:
                    pieces.append((alo, lo_edge))
                if ahi > hi_edge:
                    pieces.append((hi_edge, ahi))
            for plo, phi in pieces:
                for slo, shi in split_toward(plo, phi, rho, max_splits=40):
                    if shi <= slo:
                        continue
                    tv = 0.5 * (slo + shi) + 0.5 * (shi - slo) * xs
                    jw = kernel(rho, tv) * ws * 0.5 * (shi - slo)
                    lam = (tv - gn[j]) / (gn[j + 1] - gn[j])
                    row[i] += float(np.sum(jw))
                    row[j] -= float(np.sum(jw * (1.0 - lam)))
                    row[j + 1] -= float(np.sum(jw * lam))
        row[i] += exterior_kernel_mass(params, float(rho))
        rows[i] = row
    matrix = cns * rows[:, :M]
    weights = lumped_weights(params, grid)
    return DiscreteOperator(params, grid, matrix, weights)


def lumped_weights(params: Params, grid: Grid) -> np.ndarray:
    """Lumped hat-function masses for the radial L^2 pairing."""
    n = params.n
    sig = sphere_area(n)
    gn = grid.nodes
    M = gn.size - 1
    xs, ws = gauss_rule(8)
    w = np.zeros(M)
    for i in range(M):
        total = 0.0
        if i > 0:
            lo, hi = gn[i - 1], gn[i]
            t = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xs
            total += 0.5 * (hi - lo) * float(
                np.sum(ws * ((t - lo) / (hi - lo)) * t ** (n - 1))
            )
        lo, hi = gn[i], gn[i + 1]
        t = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xs
        total += 0.5 * (hi - lo) * float(
            np.sum(ws * ((hi - t) / (hi - lo)) * t ** (n - 1))
        )
        w[i] = sig * total
    return w


def assemble_form(params: Params, grid: Grid, *, gauss: int = 8) -> np.ndarray:
    """Gagliardo matrix of the H^s seminorm on hat functions, exact SPD.

    Q[p, q] realizes (c_ns/2) iint (u(x)-u(z))^2 K plus the exterior mass
    term int u^2 E; the diagonal-adjacent interval pairs are integrated in
    (sigma, delta) coordinates with a Jacobi rule carrying the
    |delta|^(1-2s) factor of the reduced kernel.
    """
    n, s = params.n, params.s
    gn = grid.nodes
    M = gn.size - 1
    cpow = (n + 2.0 * s) / 2.0
    om = sphere_area(n - 1)
    sig = sphere_area(n)
    cns = operator_constant(params)
    xs, ws = gauss_rule(gauss)
    xj, wj = jacobi_rule(12, 1.0 - 2.0 * s)
    Q = np.zeros((M + 1, M + 1))

    def ksym(r, t):
        r = np.asarray(r, dtype=float)
        t = np.asarray(t, dtype=float)
        return (
            sig * r ** (n - 1) * om * t ** (n - 1)
            * ang_reduced(n, cpow, (r - t) ** 2, 2.0 * r * t)
        )

    def hats(j, t):
        lam = (t - gn[j]) / (gn[j + 1] - gn[j])
        return 1.0 - lam, lam

    # far interval pairs (gap >= 1 interval): tensor panels, subdivided toward
    # the facing endpoints when the intervals are long relative to their gap
    for a in range(M):
        for b in range(a + 2, M):
            gap = gn[b] - gn[a + 1]
            pa = split_toward(gn[a], gn[a + 1], gn[a + 1] + max(gap, 1e-14))
            pb = split_toward(gn[b], gn[b + 1], gn[b] - max(gap, 1e-14))
            for la, ha in pa:
                ra = 0.5 * (la + ha) + 0.5 * (ha - la) * xs
                wa = ws * 0.5 * (ha - la)
                va0, va1 = hats(a, ra)
                for lb, hb in pb:
                    rb = 0.5 * (lb + hb) + 0.5 * (hb - lb) * xs
                    wb = ws * 0.5 * (hb - lb)
                    vb0, vb1 = hats(b, rb)
                    K = ksym(ra[:, None], rb[None, :]) * wa[:, None] * wb[None, :]
                    ka = K.sum(axis=1)
                    kb = K.sum(axis=0)
                    # cross terms carry -2 per matrix entry (the two ordered
                    # region pairs double the bilinear contribution)
                    for pidx, vp in ((a, va0), (a + 1, va1)):
                        for qidx, vq in ((b, vb0), (b + 1, vb1)):
                            c = -2.0 * float(vp @ K @ vq)
                            Q[pidx, qidx] += c
                            Q[qidx, pidx] += c
                    for pidx, vp in ((a, va0), (a + 1, va1)):
                        for qidx, vq in ((a, va0), (a + 1, va1)):
                            Q[pidx, qidx] += 2.0 * float(np.sum(vp * vq * ka))
                    for pidx, vp in ((b, vb0), (b + 1, vb1)):
                        for qidx, vq in ((b, vb0), (b + 1, vb1)):
                            Q[pidx, qidx] += 2.0 * float(np.sum(vp * vq * kb))
    # same and adjacent pairs: delta = r - t coordinates, doubled for the mirror
    for a in range(M):
        for b in (a, a + 1):
            if b >= M:
                continue
            dmax = gn[b + 1] - gn[a]
            dj = min(gn[a + 1] - gn[a], gn[b + 1] - gn[b], dmax)

            def sigma_range(delta):
                lo = max(gn[b], gn[a] + delta)
                hi = min(gn[b + 1], gn[a + 1] + delta)
                return lo, hi

            def accumulate(delta, dw, singular_scaled):
                lo, hi = sigma_range(delta)
                if hi <= lo:
                    return
                rr = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xs
                wr = ws * 0.5 * (hi - lo)
                tt = rr - delta
                K = ksym(rr, tt)
                if singular_scaled:
                    K = K / delta ** (1.0 - 2.0 * s)
                hb0, hb1 = hats(b, rr)
                ha0, ha1 = hats(a, tt)
                contrib = {}
                for pidx in {a, a + 1, b, b + 1}:
                    pr = hb0 if pidx == b else (hb1 if pidx == b + 1 else 0.0)
                    pt = ha0 if pidx == a else (ha1 if pidx == a + 1 else 0.0)
                    contrib[pidx] = np.asarray(pr) - np.asarray(pt)
                for pidx, dp in contrib.items():
                    for qidx, dq in contrib.items():
                        Q[pidx, qidx] += 2.0 * dw * float(np.sum(wr * dp * dq * K))

            for delta, dw in zip(dj * (xj + 1.0) / 2.0, wj * (dj / 2.0) ** (2.0 - 2.0 * s)):
                accumulate(float(delta), float(dw), True)
            edge = dj
            while edge < dmax * (1.0 - 1e-14):
                nxt = min(edge * 2.0, dmax)
                dv = 0.5 * (edge + nxt) + 0.5 * (nxt - edge) * xs
                dwv = ws * 0.5 * (nxt - edge)
                for delta, dw in zip(dv, dwv):
                    accumulate(float(delta), float(dw), False)
                edge = nxt
    Q *= cns / 2.0
    # exterior mass c int u^2 E(rho) with boundary-layer refinement at the end.
    # The boundary hat itself is not in H^s for s >= 1/2 (its exterior energy
    # diverges); its row and column are pinned to zero and never assembled.
    for j in range(M):
        lo, hi = gn[j], gn[j + 1]
        last = j == M - 1
        if last:
            edges = [lo]
            width = (hi - lo) / 2.0
            while width > (hi - lo) * 1e-7 and len(edges) < 40:
                edges.append(hi - width)
                width /= 2.0
            pieces = np.unique(edges)  # the final sliver of width 1e-7 h is
            # dropped: its contribution to the kept entry is O((1e-7)^(3-2s))
        else:
            pieces = np.array([lo, hi])
        for plo, phi in zip(pieces[:-1], pieces[1:]):
            rr = 0.5 * (plo + phi) + 0.5 * (phi - plo) * xs
            wr = ws * 0.5 * (phi - plo)
            ev = np.array([exterior_kernel_mass(params, float(r)) for r in rr])
            v0, v1 = hats(j, rr)
            block = cns * wr * ev * sig * rr ** (n - 1)
            Q[j, j] += float(np.sum(block * v0 * v0))
            if not last:
                Q[j, j + 1] += float(np.sum(block * v0 * v1))
                Q[j + 1, j] += float(np.sum(block * v0 * v1))
                Q[j + 1, j + 1] += float(np.sum(block * v1 * v1))
    Q = Q[:M, :M]
    return 0.5 * (Q + Q.T)


def newton_solve(op: DiscreteOperator, f: Nonlinearity, lam: float,
                 init: np.ndarray | RadialFunction, *, max_iter: int = 50,
                 tol_coef: float = 1e-10) -> RadialFunction:
    """Newton iteration for A u = lambda f(u) at fixed lambda.

    Converges to sup-norm residual <= tol_coef * (1 + lambda); raises
    NewtonFailure on non-convergence within max_iter (the expected signal
    near and beyond the fold) and on a non-monotone limit.
    """
    if lam < 0:
        raise DomainError("lambda must be nonnegative")
    u = init.values[:-1].copy() if isinstance(init, RadialFunction) else np.asarray(
        init, dtype=float
    ).copy()
    if u.shape != (op.m,):
        raise DomainError("initial state does not match the operator grid")
    tol = tol_coef * (1.0 + lam)
    for _ in range(max_iter):
        res = op.apply(u) - lam * f.value(u)
        if np.max(np.abs(res)) <= 0.5 * tol:
            break
        jac = op.matrix - lam * np.diag(f.deriv(u))
        try:
            du = sla.lu_solve(sla.lu_factor(jac), -res)
        except (sla.LinAlgError, ValueError) as exc:
            raise NewtonFailure(f"linear solve failed at lambda={lam}") from exc
        u = u + du
        if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > 1e8:
            raise NewtonFailure(f"iteration diverged at lambda={lam}")
    res = op.apply(u) - lam * f.value(u)
    if np.max(np.abs(res)) > tol:
        raise NewtonFailure(
            f"no convergence at lambda={lam}: residual {np.max(np.abs(res)):.3e}"
        )
    state = op.state(u)
    if not monotonicity_check(state):
        raise NewtonFailure(f"converged state is not radially non-increasing at {lam}")
    return state


@dataclass(frozen=True)
class ContinuationControls:
    initial_step: float = 0.05
    min_step: float = 1e-12
    max_step: float = 0.15
    fold_tol: float = 1e-9      # arclength bracket width at the fold
    lam_max: float = float("inf")
    max_points: int = 400
    stability_tol: float = 1e-8  # accepted points must have mu1 > -this


@dataclass(frozen=True)
class BranchPoint:
    lam: float
    state: RadialFunction
    sup_norm: float
    mu1: float
    arclength: float


@dataclass
class Branch:
    points: list
    lambda_star: float | None
    fold_found: bool
    params: Params
    nonlinearity: str
    fold_mu1: float | None = None  # pencil eigenvalue at the refined fold point

    def lambdas(self) -> np.ndarray:
        return np.array([p.lam for p in self.points])

    def sup_norms(self) -> np.ndarray:
        return np.array([p.sup_norm for p in self.points])

    def mu1s(self) -> np.ndarray:
        return np.array([p.mu1 for p in self.points])

    def records(self) -> list:
        out = []
        for p in self.points:
            try:
                bexp = boundary_exponent(p.state)
            except (AccuracyError, DomainError):
                bexp = float("nan")
            out.append(
                {
                    "lambda": p.lam,
                    "sup_norm": p.sup_norm,
                    "mu1": p.mu1,
                    "boundary_exponent": bexp,
                }
            )
        return out

    def write_csv(self, path) -> None:
        cols = ["lambda", "sup_norm", "mu1", "boundary_exponent"]
        lines = [",".join(cols)]
        for rec in self.records():
            lines.append(",".join(f"{rec[c]:.10g}" for c in cols))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")

    def write_json(self, path, *, include_states: bool = False) -> None:
        doc = {
            "n": self.params.n,
            "s": self.params.s,
            "nonlinearity": self.nonlinearity,
            "fold_found": self.fold_found,
            "lambda_star": self.lambda_star,
            "points": self.records(),
        }
        if include_states:
            doc["grid"] = [float(x) for x in self.points[0].state.nodes]
            doc["states"] = [[float(v) for v in p.state.values] for p in self.points]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, default=lambda x: float(f"{x:.17g}"))
            fh.write("\n")


class _PencilEigen:
    """Smallest eigenvalue of (Q - lam W F) x = mu W x by inverse iteration."""

    def __init__(self, op: DiscreteOperator):
        self.op = op
        self.sqrt_w = np.sqrt(op.weights)

    def smallest(self, lam: float, fprime_diag: np.ndarray, *, tol: float = 1e-12,
                 max_iter: int = 200) -> float:
        K = self.op.form - lam * np.diag(self.op.weights * fprime_diag)
        C = K / self.sqrt_w[:, None] / self.sqrt_w[None, :]
        C = 0.5 * (C + C.T)
        # Gershgorin lower bound gives a safe initial shift
        lower = float(np.min(np.diag(C) - np.sum(np.abs(C), axis=1) + np.abs(np.diag(C))))
        shift = lower - 1.0
        x = np.ones(C.shape[0]) / math.sqrt(C.shape[0])
        mu = float(x @ C @ x)
        for it in range(max_iter):
            try:
                lu = sla.lu_factor(C - shift * np.eye(C.shape[0]))
            except sla.LinAlgError:
                shift -= abs(shift) * 1e-8 + 1e-12
                continue
            x = sla.lu_solve(lu, x)
            x /= np.linalg.norm(x)
            mu_new = float(x @ C @ x)
            resid = float(np.linalg.norm(C @ x - mu_new * x))
            if resid <= tol * max(1.0, abs(mu_new)):
                return mu_new
            # switch to Rayleigh shifts once the fixed shift has locked on
            if it >= 3:
                shift = mu_new - max(resid, 1e-14)
            mu = mu_new
        raise AccuracyError("inverse iteration for the principal eigenvalue stalled")


def principal_eigenvalue(op: DiscreteOperator, f: Nonlinearity,
                         lam: float, state: RadialFunction | np.ndarray) -> float:
    """mu_1 of the linearized pencil at a state: min of the stability form
    over the unit L^2 sphere of grid functions."""
    u = state.values[:-1] if isinstance(state, RadialFunction) else np.asarray(state)
    if u.shape != (op.m,):
        raise DomainError("state does not match the operator grid")
    return _PencilEigen(op).smallest(lam, f.deriv(u))


def principal_eigenvalue_dense(op: DiscreteOperator, f: Nonlinearity,
                               lam: float, state: RadialFunction | np.ndarray) -> float:
    """Brute-force oracle: full dense eigendecomposition of the same pencil."""
    u = state.values[:-1] if isinstance(state, RadialFunction) else np.asarray(state)
    K = op.form - lam * np.diag(op.weights * f.deriv(u))
    vals = sla.eigh(K, np.diag(op.weights), eigvals_only=True)
    return float(vals[0])


def boundary_exponent(state: RadialFunction) -> float:
    """Least-squares slope of log u against log(1 - rho) over the last
    graded decade of nodes; the boundary profile delta^s makes this ~ s."""
    nodes = state.nodes[:-1]
    vals = state.values[:-1]
    gap = 1.0 - nodes
    gmin = gap[-1]
    mask = (gap <= 10.0 * gmin) & (vals > 0.0) & (nodes > 0.0)
    if int(np.sum(mask)) < 4:
        raise AccuracyError("fewer than 4 usable nodes in the last graded decade")
    slope, _ = np.polyfit(np.log(gap[mask]), np.log(vals[mask]), 1)
    return float(slope)


def monotonicity_check(state: RadialFunction) -> bool:
    """True iff node values are non-increasing up to 1e-10 relative slack."""
    vals = state.values
    slack = 1e-10 * max(float(np.max(np.abs(vals))), 1.0)
    return bool(np.all(np.diff(vals) <= slack))


def continue_branch(op: DiscreteOperator, f: Nonlinearity,
                    controls: ContinuationControls = ContinuationControls()) -> Branch:
    """Pseudo-arclength continuation of the minimal branch from lambda = 0.

    The tangent is normalized in (d lambda)^2 + ||du||_L2^2; a fold is
    declared when its lambda-component changes sign, and lambda_star is
    then refined by bisection in arclength from the last accepted point.
    Accepted points are the stable pre-fold ones (the bisection probes are
    not recorded). If the step underflows before any sign change the
    branch is returned with fold_found = False.
    """
    M = op.m
    w = op.weights
    eig = _PencilEigen(op)

    def tangent(u, lam, tu, tl):
        jac = op.matrix - lam * np.diag(f.deriv(u))
        big = np.zeros((M + 1, M + 1))
        big[:M, :M] = jac
        big[:M, M] = -f.value(u)
        big[M, :M] = w * tu
        big[M, M] = tl
        rhs = np.zeros(M + 1)
        rhs[M] = 1.0
        t = sla.lu_solve(sla.lu_factor(big), rhs)
        norm = math.sqrt(float(t[:M] @ (w * t[:M])) + t[M] ** 2)
        return t[:M] / norm, t[M] / norm

    def correct(u0, lam0, tu, tl, h, ubase, lbase, *, max_iter=25):
        u, lam = u0.copy(), lam0
        for _ in range(max_iter):
            res = op.apply(u) - lam * f.value(u)
            con = float(tu @ (w * (u - ubase))) + tl * (lam - lbase) - h
            if max(float(np.max(np.abs(res))), abs(con)) <= 1e-11 * (1.0 + abs(lam)):
                return u, lam, True
            jac = op.matrix - lam * np.diag(f.deriv(u))
            big = np.zeros((M + 1, M + 1))
            big[:M, :M] = jac
            big[:M, M] = -f.value(u)
            big[M, :M] = w * tu
            big[M, M] = tl
            try:
                dd = sla.lu_solve(sla.lu_factor(big), -np.concatenate([res, [con]]))
            except (sla.LinAlgError, ValueError):
                return u, lam, False
            u = u + dd[:M]
            lam = lam + dd[M]
            if not np.all(np.isfinite(u)) or abs(lam) > 1e6:
                return u, lam, False
        return u, lam, False

    def accept(u, lam, arc) -> BranchPoint | None:
        state = op.state(u)
        if not monotonicity_check(state):
            return None
        mu1 = eig.smallest(lam, f.deriv(u))
        if mu1 <= -controls.stability_tol:
            return None
        return BranchPoint(lam, state, float(np.max(u)), mu1, arc)

    u = np.zeros(M)
    lam = 0.0
    tu = np.zeros(M)
    tl = 1.0
    tu, tl = tangent(u, lam, tu, tl)
    arc = 0.0
    first = accept(u, lam, arc)
    if first is None:
        raise AccuracyError("the trivial state failed acceptance")
    points = [first]
    h = controls.initial_step
    fold_found = False
    lambda_star = None

    while len(points) < controls.max_points:
        un, ln, ok = correct(u + h * tu, lam + h * tl, tu, tl, h, u, lam)
        if not ok:
            h *= 0.5
            if h < controls.min_step:
                break
            continue
        tun, tln = tangent(un, ln, tu, tl)
        passed_fold = tln < 0.0 <= tl or (tl > 0.0 and tln < 0.0)
        candidate = None if passed_fold else accept(un, ln, arc + h)
        if passed_fold or candidate is None:
            # bracket the fold in arclength from the last accepted point
            lo, hi = 0.0, h
            best = (u, lam)
            for _ in range(120):
                mid = 0.5 * (lo + hi)
                um, lm, okm = correct(u + mid * tu, lam + mid * tl, tu, tl, mid, u, lam)
                if not okm:
                    hi = mid
                    continue
                tum, tlm = tangent(um, lm, tu, tl)
                if tlm > 0.0:
                    lo = mid
                    best = (um, lm)
                else:
                    hi = mid
                if hi - lo < controls.fold_tol:
                    break
            fold_found = hi - lo < max(controls.fold_tol * 4.0, 1e-7) and lo > 0.0
            if fold_found:
                lambda_star = best[1]
                fold_mu1 = eig.smallest(best[1], f.deriv(best[0]))
                # densify the recorded approach to the fold: natural-parameter
                # solves just below lambda*, walking down from the fold state
                ub = best[0]
                approach = [fr * lambda_star for fr in (0.995, 0.9995, 0.99995)]
                for lam_t in approach:
                    if lam_t <= points[-1].lam:
                        continue
                    try:
                        state = newton_solve(op, f, lam_t, ub)
                    except NewtonFailure:
                        continue
                    pt = accept(state.values[:-1], lam_t, arc + lo)
                    if pt is not None and (
                        pt.mu1 < points[-1].mu1
                        and pt.sup_norm > points[-1].sup_norm * (1.0 + 1e-13)
                        and pt.lam > points[-1].lam
                    ):
                        points.append(pt)
                return Branch(
                    points=points,
                    lambda_star=lambda_star,
                    fold_found=True,
                    params=op.params,
                    nonlinearity=f.name,
                    fold_mu1=fold_mu1,
                )
            break
        if ln > controls.lam_max:
            break
        points.append(candidate)
        u, lam, tu, tl = un, ln, tun, tln
        arc += h
        h = min(h * 1.4, controls.max_step)

    return Branch(
        points=points,
        lambda_star=lambda_star,
        fold_found=fold_found,
        params=op.params,
        nonlinearity=f.name,
    )


def state_at_lambda(op: DiscreteOperator, f: Nonlinearity, branch: Branch,
                    lam: float) -> RadialFunction:
    """Minimal-branch state at a prescribed lambda below the fold.

    Starts Newton from the nearest accepted point at or below lam, with a
    short natural-parameter walk when the jump is large.
    """
    lams = branch.lambdas()
    below = np.where(lams <= lam)[0]
    if below.size == 0:
        raise DomainError("no accepted branch point at or below the requested lambda")
    k = int(below[np.argmax(lams[below])])
    u = branch.points[k].state.values[:-1].copy()
    start = lams[k]
    steps = max(1, int(math.ceil(abs(lam - start) / 0.05)))
    for lam_step in np.linspace(start, lam, steps + 1)[1:]:
        u = newton_solve(op, f, float(lam_step), u).values[:-1]
    return op.state(u)
