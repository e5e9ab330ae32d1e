"""Concave maximization of the conditional-gain objective.

For a finitely supported first marginal the problem reduces to maximizing
sum_i p_i phi(x_i - gamma(a_i)) over the polytope spanned by the vectors of
row gamma-integrals of the curtain couplings. The canonical candidate x0
(constant gain spread) is tried first; otherwise Frank-Wolfe with away steps
runs over the weight simplex, whose linear maximization oracle is a single
argmax over enumerated vertices.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .curtain import Coupling, DEFAULT_ENUM_CAP, build_curtain, enumerate_curtains
from .errors import (
    DomainViolation,
    NotConvexOrder,
    NotNested,
    NotTwoPoint,
    NumericalError,
    SupportTooLarge,
    ValidationError,
)
from .gains import GainSpec
from .measures import (
    DiscreteMarginal,
    PieceMeasure,
    convex_order_leq,
    discretize_conditional_mean,
)

_NEG_CLAMP = 1e-10


@dataclass(frozen=True)
class VertexSet:
    """Row gamma-integral vectors of the enumerated curtain couplings."""

    vertices: np.ndarray                  # K x n
    couplings: tuple[Coupling, ...]
    orders: tuple[tuple[int, ...], ...]
    gamma_at_atoms: np.ndarray            # n

    @property
    def size(self) -> int:
        return self.vertices.shape[0]


@dataclass(frozen=True)
class SolveResult:
    value: float
    weights: np.ndarray                   # simplex vector over the couplings
    x: np.ndarray                         # n-vector of row gamma-integrals
    coupling: Coupling
    flat: bool
    upper_bound: float
    gap: float
    method: str
    fw_iterations: int = 0
    fw_gap: float = 0.0


def row_gamma(row: PieceMeasure, spec: GainSpec) -> float:
    """Conditional expectation of the transform under a (probability) row.

    Dividing by the actual row mass cancels the one-ulp mass drift of
    constructed rows exactly; a concave outer gain with infinite slope at 0
    would otherwise amplify that drift to 1e-8-scale objective noise.
    """
    return spec.gamma.integrate(row) / row.total_mass


def evaluate_J(nu: Coupling, spec: GainSpec) -> float:
    """sum_i p_i phi(row_i[gamma] - gamma(a_i)), clamping tiny negative spreads."""
    total = 0.0
    for p, a, row in zip(nu.first.weights, nu.first.atoms, nu.rows):
        u = row_gamma(row, spec) - spec.gamma(a)
        total += p * spec.phi(_clamp_spread(u))
    return total


def _clamp_spread(u: float) -> float:
    if u < 0.0:
        if u < -_NEG_CLAMP:
            raise DomainViolation(
                f"conditional gain spread {u} below -1e-10: not a martingale row")
        return 0.0
    return u


def gamma_means(mu1: DiscreteMarginal | PieceMeasure, mu2: PieceMeasure,
                spec: GainSpec) -> tuple[float, float]:
    m1 = mu1.as_measure() if isinstance(mu1, DiscreteMarginal) else mu1
    return spec.gamma.integrate(m1), spec.gamma.integrate(mu2)


def upper_bound(mu1: DiscreteMarginal | PieceMeasure, mu2: PieceMeasure,
                spec: GainSpec) -> float:
    """Canonical bound phi(mu2[gamma] - mu1[gamma]); no coupling beats it."""
    g1, g2 = gamma_means(mu1, mu2, spec)
    return spec.phi(_clamp_spread(g2 - g1))


def x0_vector(mu1: DiscreteMarginal, mu2: PieceMeasure, spec: GainSpec) -> np.ndarray:
    """The constant-spread candidate (gamma(a_i) + mu2[gamma] - mu1[gamma])_i."""
    g1, g2 = gamma_means(mu1, mu2, spec)
    return np.array([spec.gamma(a) + (g2 - g1) for a in mu1.atoms])


def check_flat(nu: Coupling, spec: GainSpec, tol: float = 1e-8) -> bool:
    """True iff the conditional gain spread is constant across source atoms."""
    g1 = sum(p * spec.gamma(a) for p, a in zip(nu.first.weights, nu.first.atoms))
    spreads = [row_gamma(row, spec) - spec.gamma(a)
               for a, row in zip(nu.first.atoms, nu.rows)]
    delta = sum(p * s for p, s in zip(nu.first.weights, spreads))
    return max(abs(s - delta) for s in spreads) <= tol


def mix(couplings: Sequence[Coupling], weights: Sequence[float]) -> Coupling:
    """Row-wise convex combination; preserves the martingale property."""
    if len(couplings) == 0 or len(couplings) != len(weights):
        raise ValidationError("need matching non-empty couplings and weights")
    first = couplings[0].first
    rows = []
    for i in range(first.n):
        acc = PieceMeasure.zero(first.domain)
        for w, c in zip(weights, couplings):
            if w > 0.0:
                acc = acc + c.rows[i].scaled(w)
        rows.append(acc)
    return Coupling(first, tuple(rows))


def build_vertex_set(mu1: DiscreteMarginal, mu2: PieceMeasure, spec: GainSpec,
                     enum_cap: int = DEFAULT_ENUM_CAP) -> VertexSet:
    enumerated = enumerate_curtains(mu1, mu2, enum_cap)
    couplings = tuple(c for c, _ in enumerated)
    orders = tuple(o for _, o in enumerated)
    ga = np.array([spec.gamma(a) for a in mu1.atoms])
    V = np.array([[row_gamma(row, spec) for row in c.rows] for c in couplings])
    if np.any(V < ga[None, :] - 1e-10):
        raise NumericalError("a vertex violates conditional Jensen beyond 1e-10")
    return VertexSet(V, couplings, orders, ga)


# ---------------------------------------------------------------------------
# two-point closed form
# ---------------------------------------------------------------------------


def solve_two_point(mu1: DiscreteMarginal, mu2: PieceMeasure,
                    spec: GainSpec) -> SolveResult:
    """Closed-form optimum for a two-atom first marginal.

    The feasible first coordinate ranges over [x_*, x^*] given by the two
    curtain couplings; the optimum clamps the constant-spread candidate into
    that interval.
    """
    if mu1.n != 2:
        raise NotTwoPoint(f"first marginal has {mu1.n} atoms")
    if not convex_order_leq(mu1.as_measure(), mu2):
        raise NotConvexOrder("marginals not in convex order")
    p1, p2 = mu1.weights
    a1, a2 = mu1.atoms
    nu_lo, _ = build_curtain(mu1, mu2, (0, 1), _skip_checks=True)
    nu_hi, _ = build_curtain(mu1, mu2, (1, 0), _skip_checks=True)
    x_lo = row_gamma(nu_lo.rows[0], spec)
    x_hi = row_gamma(nu_hi.rows[0], spec)
    if x_hi < x_lo:  # orientation depends on gamma's slope
        nu_lo, nu_hi = nu_hi, nu_lo
        x_lo, x_hi = x_hi, x_lo
    g1, g2 = gamma_means(mu1, mu2, spec)
    mu2_gamma = g2
    x0 = spec.gamma(a1) + (g2 - g1)
    x_hat = min(max(x0, x_lo), x_hi)
    if x_hi > x_lo:
        lam = (x_hi - x_hat) / (x_hi - x_lo)
    else:
        lam = 1.0
    coupling = mix([nu_lo, nu_hi], [lam, 1.0 - lam])
    x2 = (mu2_gamma - p1 * x_hat) / p2
    x = np.array([x_hat, x2])
    value = p1 * spec.phi(_clamp_spread(x_hat - spec.gamma(a1))) + \
        p2 * spec.phi(_clamp_spread(x2 - spec.gamma(a2)))
    ub = spec.phi(_clamp_spread(g2 - g1))
    flat = check_flat(coupling, spec)
    weights = np.array([lam, 1.0 - lam])
    return SolveResult(value=value, weights=weights, x=x, coupling=coupling,
                       flat=flat, upper_bound=ub, gap=ub - value,
                       method="two-point")


# ---------------------------------------------------------------------------
# finite support: vertex enumeration + concave maximization over the hull
# ---------------------------------------------------------------------------


def solve_finite(mu1: DiscreteMarginal, mu2: PieceMeasure, spec: GainSpec,
                 sense: str = "max", *, enum_cap: int = DEFAULT_ENUM_CAP,
                 fw_tol: float = 1e-9, fw_max_iter: int = 100_000,
                 ) -> SolveResult:
    """Optimize the conditional-gain objective over all martingale couplings.

    max: short-circuits to the constant-spread point when it lies in the
    vertex hull, else Frank-Wolfe with away steps on the weight simplex.
    min: the minimizing vertex (concave objective attains minima at vertices).
    """
    if sense not in ("max", "min"):
        raise ValidationError(f"sense must be 'max' or 'min', got {sense!r}")
    if mu1.n > enum_cap:
        raise SupportTooLarge(f"support size {mu1.n} exceeds cap {enum_cap}")
    if not convex_order_leq(mu1.as_measure(), mu2):
        raise NotConvexOrder("marginals not in convex order")
    vs = build_vertex_set(mu1, mu2, spec, enum_cap)
    p = np.array(mu1.weights)
    ga = vs.gamma_at_atoms
    ub = upper_bound(mu1, mu2, spec)

    def objective(x: np.ndarray) -> float:
        return float(sum(pi * spec.phi(_clamp_spread(xi - gi))
                         for pi, xi, gi in zip(p, x, ga)))

    if sense == "min":
        vals = np.array([objective(v) for v in vs.vertices])
        k = int(np.argmin(vals))  # first index wins ties: lexicographic order
        weights = np.zeros(vs.size)
        weights[k] = 1.0
        coupling = vs.couplings[k]
        return SolveResult(value=float(vals[k]), weights=weights,
                           x=vs.vertices[k].copy(), coupling=coupling,
                           flat=check_flat(coupling, spec), upper_bound=ub,
                           gap=ub - float(vals[k]), method="vertex-min")

    from .oracle import hull_membership
    x0 = x0_vector(mu1, mu2, spec)
    ok, rho = hull_membership(vs.vertices, x0)
    if ok:
        coupling = mix(vs.couplings, rho)
        value = objective(x0)
        return SolveResult(value=value, weights=rho, x=x0, coupling=coupling,
                           flat=True, upper_bound=ub, gap=ub - value,
                           method="x0-feasible")

    rho, x, value, iters, gap = _frank_wolfe(vs.vertices, p, ga, spec,
                                             objective, fw_tol, fw_max_iter)
    coupling = mix(vs.couplings, rho)
    return SolveResult(value=value, weights=rho, x=x, coupling=coupling,
                       flat=check_flat(coupling, spec), upper_bound=ub,
                       gap=ub - value, method="frank-wolfe",
                       fw_iterations=iters, fw_gap=gap)


def _frank_wolfe(V: np.ndarray, p: np.ndarray, ga: np.ndarray, spec: GainSpec,
                 objective, tol: float, max_iter: int,
                 ) -> tuple[np.ndarray, np.ndarray, float, int, float]:
    """Away-step Frank-Wolfe over the simplex of vertex weights.

    The gradient in weight space is V @ w with w_i = p_i phi'(x_i - g_i);
    the linear maximization oracle is an argmax over rows of V.
    """
    K, n = V.shape
    rho = np.zeros(K)
    # start from the best single vertex
    start_vals = [objective(V[k]) for k in range(K)]
    rho[int(np.argmax(start_vals))] = 1.0
    x = V.T @ rho

    def grad_x(xv: np.ndarray) -> np.ndarray:
        return p * np.array([spec.phi.derivative(max(xi - gi, 0.0))
                             for xi, gi in zip(xv, ga)])

    value = objective(x)
    it = 0
    fw_gap = math.inf
    for it in range(1, max_iter + 1):
        g = grad_x(x)
        scores = V @ g
        s = int(np.argmax(scores))
        base = float(scores @ rho)
        fw_gap = float(scores[s]) - base
        if fw_gap <= tol * (1.0 + abs(value)):
            break
        active = np.flatnonzero(rho > 1e-15)
        v = int(active[np.argmin(scores[active])])
        away_gap = base - float(scores[v])
        if fw_gap >= away_gap or rho[v] >= 1.0 - 1e-15:
            delta = V[s] - x
            gamma_max = 1.0
            toward, away_from = s, -1
        else:
            delta = x - V[v]
            gamma_max = rho[v] / (1.0 - rho[v])
            toward, away_from = -1, v
        t = _line_search(x, delta, gamma_max, p, ga, spec)
        if t <= 0.0:
            break
        if toward >= 0:
            rho *= (1.0 - t)
            rho[toward] += t
        else:
            rho *= (1.0 + t)
            rho[away_from] -= t
        np.clip(rho, 0.0, None, out=rho)
        rho /= rho.sum()
        x = V.T @ rho
        value = objective(x)
    return rho, x, value, it, fw_gap


def _line_search(x: np.ndarray, delta: np.ndarray, t_max: float,
                 p: np.ndarray, ga: np.ndarray, spec: GainSpec) -> float:
    """Exact step on the concave 1-D section via bisection on the derivative."""
    def dh(t: float) -> float:
        xt = x + t * delta
        w = np.array([spec.phi.derivative(max(xi - gi, 0.0))
                      for xi, gi in zip(xt, ga)])
        return float(np.dot(p * w, delta))

    if dh(0.0) <= 0.0:
        return 0.0
    if dh(t_max) >= 0.0:
        return t_max
    lo, hi = 0.0, t_max
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if dh(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# discretization pipeline for a continuous first marginal
# ---------------------------------------------------------------------------


def approx_solve(mu1: PieceMeasure, mu2: PieceMeasure, spec: GainSpec,
                 levels: Sequence[Sequence[float]], *,
                 enum_cap: int = DEFAULT_ENUM_CAP, fw_tol: float = 1e-9,
                 fw_max_iter: int = 100_000,
                 ) -> list[tuple[int, DiscreteMarginal, SolveResult]]:
    """Solve on nested conditional-mean discretizations of the first marginal.

    Levels must refine each other; the reported values are nonincreasing
    (coarser first marginals dominate). Returns one
    (level index, discretized marginal, result) triple per level.
    """
    cut_sets = [sorted(float(c) for c in cuts) for cuts in levels]
    for prev, nxt in zip(cut_sets, cut_sets[1:]):
        if not _refines(prev, nxt):
            raise NotNested("each level must contain the previous level's cuts")
    if not _gamma_bounded_for(mu1, mu2, spec):
        warnings.warn(
            "discretization convergence is guaranteed for bounded transforms; "
            "unbounded transform on non-compact support, proceeding anyway",
            RuntimeWarning)
    out = []
    for li, cuts in enumerate(cut_sets):
        mu1n = discretize_conditional_mean(mu1, cuts)
        res = solve_finite(mu1n, mu2, spec, "max", enum_cap=enum_cap,
                           fw_tol=fw_tol, fw_max_iter=fw_max_iter)
        out.append((li, mu1n, res))
    return out


def _refines(prev: list[float], nxt: list[float], tol: float = 1e-12) -> bool:
    j = 0
    for c in prev:
        while j < len(nxt) and nxt[j] < c - tol:
            j += 1
        if j >= len(nxt) or abs(nxt[j] - c) > tol:
            return False
    return True


def _gamma_bounded_for(mu1: PieceMeasure, mu2: PieceMeasure, spec: GainSpec) -> bool:
    lo = min(mu1.support_min, mu2.support_min)
    hi = max(mu1.support_max, mu2.support_max)
    return spec.gamma.bounded_on(lo, hi)


def dyadic_cuts(mu1: PieceMeasure, cells: int) -> list[float]:
    """Equal-width cuts splitting the support hull into the given cell count."""
    if cells < 1:
        raise ValidationError("need at least one cell")
    lo, hi = mu1.support_min, mu1.support_max
    return [lo + (hi - lo) * k / cells for k in range(1, cells)]
