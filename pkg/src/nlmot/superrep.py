"""Duality-side artifacts: lifted couplings and static superreplication.

The canonical bound v* = phi(mu2[gamma] - mu1[gamma]) is realized as the
price of a static portfolio: positions u1 = c1 - a* gamma and u2 = a* gamma
in the two maturities, no delta, and weight -a* on the gamma-forward leg,
where a* = 1/b* and b* solves the tangency equation of the inverse gain's
Legendre transform at v*.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .curtain import Coupling
from .errors import DegenerateBound, NoRoot, NotInvertible, ValidationError
from .gains import ConcavePower, GainSpec, Identity, PhiFn, Sqrt
from .measures import DiscreteMarginal, PieceMeasure
from .solver import evaluate_J, gamma_means, row_gamma


@dataclass(frozen=True)
class LiftedCoupling:
    """Coupling together with its per-atom conditional gain values."""

    base: Coupling
    v_values: tuple[float, ...]

    def expected_gain(self) -> float:
        return sum(p * v for p, v in zip(self.base.first.weights, self.v_values))

    def project(self) -> Coupling:
        return self.base


@dataclass(frozen=True)
class Portfolio:
    """Static superreplicating portfolio priced at the canonical bound."""

    a_star: float
    b_star: float
    v_star: float
    u1_const: float
    u1_gamma_coef: float
    u2_gamma_coef: float
    delta: float
    gamma_weight: float
    phi_shift: float = 0.0  # value of the gain at 0, added back to prices


def lift(nu: Coupling, spec: GainSpec) -> LiftedCoupling:
    """Attach the conditional gain as a third coordinate; expectation is J."""
    vs = []
    for a, row in zip(nu.first.atoms, nu.rows):
        u = row_gamma(row, spec) - spec.gamma(a)
        vs.append(spec.phi(max(u, 0.0)))
    out = LiftedCoupling(nu, tuple(vs))
    j = evaluate_J(nu, spec)
    if abs(out.expected_gain() - j) > 1e-12 * (1.0 + abs(j)):
        raise ValidationError("lifted expectation drifted from the objective")
    return out


def solve_b_star(spec: GainSpec, v_star: float) -> float:
    """Solve (phi^-1)*(b) = b v* - phi^-1(v*) for b > 0.

    By Fenchel-Young the left side dominates the right everywhere with
    equality exactly on the subdifferential of phi^-1 at v*, so the root is
    the minimum of a nonnegative convex function; closed forms exist for the
    smooth catalog members (2 v* for the square root).
    """
    phi = spec.phi
    if not phi.invertible:
        raise NotInvertible("b* needs an invertible concave gain")
    if not v_star > 0:
        raise DegenerateBound(f"v* = {v_star} must be positive")
    if isinstance(phi, Sqrt):
        return 2.0 * v_star
    if isinstance(phi, ConcavePower):
        r = 1.0 / phi.q
        return r * v_star ** (r - 1.0)
    if isinstance(phi, Identity):
        return 1.0
    # numeric fallback: minimize the convex residual h(b) >= 0
    def h(b: float) -> float:
        c = phi.conjugate(b)
        if math.isinf(c):
            return math.inf
        return c - b * v_star + phi.inverse(v_star)

    lo, hi = 1e-8, 1e8
    b = _ternary_min(h, lo, hi, 1e-12)
    if h(b) > 1e-9 * (1.0 + abs(v_star)):
        raise NoRoot(f"no solution of the slope equation in [{lo}, {hi}]")
    return b


def _ternary_min(f, lo, hi, rel_tol):
    while hi - lo > rel_tol * (1.0 + abs(lo) + abs(hi)):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if f(m1) <= f(m2):
            hi = m2
        else:
            lo = m1
    return 0.5 * (lo + hi)


def build_portfolio(mu1: DiscreteMarginal | PieceMeasure, mu2: PieceMeasure,
                    spec: GainSpec) -> Portfolio:
    """The canonical static portfolio; its price equals v* identically.

    Works with the gain normalized to vanish at 0; the original level is
    recorded and added back when quoting prices.
    """
    shift = spec.phi(0.0)
    g1, g2 = gamma_means(mu1, mu2, spec)
    v_star_raw = spec.phi(max(g2 - g1, 0.0))
    v_star = v_star_raw - shift
    if not v_star > 0:
        raise DegenerateBound(f"normalized bound {v_star} is not positive")
    normalized = _normalized_phi(spec.phi, shift)
    b_star = solve_b_star(GainSpec(spec.gamma, normalized), v_star)
    a_star = 1.0 / b_star
    u1_const = v_star - a_star * normalized.inverse(v_star) + shift
    return Portfolio(a_star=a_star, b_star=b_star, v_star=v_star_raw,
                     u1_const=u1_const, u1_gamma_coef=-a_star,
                     u2_gamma_coef=a_star, delta=0.0, gamma_weight=-a_star,
                     phi_shift=shift)


def _normalized_phi(phi: PhiFn, shift: float) -> PhiFn:
    if shift == 0.0:
        return phi
    from .gains import PiecewiseLinearConcave
    if isinstance(phi, PiecewiseLinearConcave):
        return replace(phi, value0=phi.value0 - shift)
    raise NotInvertible("cannot normalize this gain to vanish at 0")


def portfolio_price(p: Portfolio, mu1: DiscreteMarginal | PieceMeasure,
                    mu2: PieceMeasure, spec: GainSpec) -> float:
    """mu1[u1] + mu2[u2]; equals v* by construction."""
    g1, g2 = gamma_means(mu1, mu2, spec)
    return p.u1_const + p.u1_gamma_coef * g1 + p.u2_gamma_coef * g2


def payoff_slack(p: Portfolio, spec: GainSpec, s1: np.ndarray, s2: np.ndarray,
                 v: np.ndarray) -> np.ndarray:
    """Pointwise superreplication slack of the portfolio on a lattice.

    slack = u1(s1) + u2(s2) + delta (s2 - s1)
            + gamma_weight (gamma(s2) - gamma(s1) - phi^-1(v)) - v,
    which must be nonnegative everywhere for a valid portfolio. The inverse
    is taken of the normalized gain (v shifted by the gain's value at 0).
    """
    normalized = _normalized_phi(spec.phi, p.phi_shift)
    g1 = np.array([spec.gamma(x) for x in np.atleast_1d(s1)])
    g2 = np.array([spec.gamma(x) for x in np.atleast_1d(s2)])
    vv = np.atleast_1d(v).astype(float)
    inv = np.array([normalized.inverse(max(x - p.phi_shift, 0.0)) for x in vv])
    S1, S2, Vi = np.meshgrid(np.arange(g1.size), np.arange(g2.size),
                             np.arange(vv.size), indexing="ij")
    u1 = p.u1_const + p.u1_gamma_coef * g1[S1]
    u2 = p.u2_gamma_coef * g2[S2]
    fwd = p.gamma_weight * (g2[S2] - g1[S1] - inv[Vi])
    s1v = np.atleast_1d(s1).astype(float)
    s2v = np.atleast_1d(s2).astype(float)
    dl = p.delta * (s2v[S2] - s1v[S1])
    return u1 + u2 + dl + fwd - vv[Vi]


def verify_superrep(p: Portfolio, spec: GainSpec, s1: np.ndarray,
                    s2: np.ndarray, v: np.ndarray) -> float:
    """Worst slack over the lattice; negative values falsify the portfolio."""
    if np.any(np.asarray(v) < 0):
        raise ValidationError("gain grid must be nonnegative")
    return float(np.min(payoff_slack(p, spec, s1, s2, v)))
