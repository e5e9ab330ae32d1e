"""Measure algebra for piecewise-linear-CDF measures.

A measure is an ordered list of pieces, each an atom or a uniform block, so
its CDF is piecewise linear and every quantile operation (restriction between
cumulative-mass levels, connected and co-connected parts, shadows) is exact:
uniform blocks split affinely, atoms split by mass proration.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    CutOnAtom,
    MomentOutOfRange,
    NotProbability,
    QuantileOutOfRange,
    ValidationError,
)

# Pieces lighter than this fraction of the total are dropped on construction.
_MASS_DROP_REL = 1e-14
# Relative tolerance for merging adjacent uniform blocks of equal density.
_DENSITY_MERGE_REL = 1e-12


@dataclass(frozen=True, slots=True)
class DomainInterval:
    """Open interval the measures live on; None means unbounded on that side."""

    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self):
        lo = -math.inf if self.lo is None else float(self.lo)
        hi = math.inf if self.hi is None else float(self.hi)
        if not lo < hi:
            raise ValidationError(f"empty domain interval ({lo}, {hi})")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def contains(self, x: float) -> bool:
        return self.lo < x < self.hi


FULL_LINE = DomainInterval()


@dataclass(frozen=True, slots=True)
class Atom:
    x: float
    mass: float

    @property
    def left(self) -> float:
        return self.x

    @property
    def right(self) -> float:
        return self.x

    @property
    def moment(self) -> float:
        return self.mass * self.x


@dataclass(frozen=True, slots=True)
class Uniform:
    lo: float
    hi: float
    mass: float

    @property
    def left(self) -> float:
        return self.lo

    @property
    def right(self) -> float:
        return self.hi

    @property
    def density(self) -> float:
        return self.mass / (self.hi - self.lo)

    @property
    def moment(self) -> float:
        return self.mass * 0.5 * (self.lo + self.hi)


Piece = Atom | Uniform


def _canonicalize(pieces: Iterable[Piece]) -> list[Piece]:
    """Sort, split overlaps, merge duplicates, drop negligible mass.

    Overlapping uniform blocks are split on the common endpoint grid and
    re-merged, and a uniform is split at any atom interior to it, so the
    result satisfies: supports pairwise non-overlapping except that an atom
    may sit at a uniform endpoint.
    """
    atoms: list[tuple[float, float]] = []
    unis: list[tuple[float, float, float]] = []
    for p in pieces:
        if p.mass <= 0.0:
            continue
        if isinstance(p, Atom):
            atoms.append((p.x, p.mass))
        else:
            if not p.lo < p.hi:
                raise ValidationError(f"uniform block needs lo < hi, got ({p.lo}, {p.hi})")
            unis.append((p.lo, p.hi, p.mass))

    atoms.sort()
    merged_atoms: list[tuple[float, float]] = []
    for x, m in atoms:
        if merged_atoms and merged_atoms[-1][0] == x:
            merged_atoms[-1] = (x, merged_atoms[-1][1] + m)
        else:
            merged_atoms.append((x, m))

    # Split every uniform at all endpoints/atoms strictly inside it.
    cuts = sorted({e for lo, hi, _ in unis for e in (lo, hi)} | {x for x, _ in merged_atoms})
    frags: dict[tuple[float, float], float] = {}
    for lo, hi, m in unis:
        dens = m / (hi - lo)
        inner = cuts[bisect_right(cuts, lo): bisect_left(cuts, hi)]
        edges = [lo, *inner, hi]
        for a, b in zip(edges, edges[1:]):
            frags[(a, b)] = frags.get((a, b), 0.0) + dens * (b - a)

    frag_list = sorted((lo, hi, m) for (lo, hi), m in frags.items())
    atom_xs = [x for x, _ in merged_atoms]
    out_unis: list[tuple[float, float, float]] = []
    for lo, hi, m in frag_list:
        if out_unis:
            plo, phi, pm = out_unis[-1]
            if phi > lo + 0.0:
                raise ValidationError("uniform blocks overlap after canonicalization")
            d1, d2 = pm / (phi - plo), m / (hi - lo)
            if (
                phi == lo
                and abs(d1 - d2) <= _DENSITY_MERGE_REL * (abs(d1) + abs(d2))
                and not _in_sorted(atom_xs, lo)
            ):
                out_unis[-1] = (plo, hi, pm + m)
                continue
        out_unis.append((lo, hi, m))

    result: list[Piece] = [Atom(x, m) for x, m in merged_atoms]
    result += [Uniform(lo, hi, m) for lo, hi, m in out_unis]
    # Atoms sort before uniforms sharing the same left endpoint.
    result.sort(key=lambda p: (p.left, isinstance(p, Uniform), p.right))

    total = sum(p.mass for p in result)
    if total > 0.0:
        thresh = _MASS_DROP_REL * total
        result = [p for p in result if p.mass >= thresh]
    return result


def _in_sorted(xs: list[float], v: float) -> bool:
    i = bisect_left(xs, v)
    return i < len(xs) and xs[i] == v


class PieceMeasure:
    """Finite positive measure with piecewise-linear CDF."""

    __slots__ = ("pieces", "domain", "_cum", "_mcum", "_slicer")

    def __init__(self, pieces: Iterable[Piece], domain: DomainInterval = FULL_LINE, *,
                 _canonical: bool = False):
        plist = list(pieces) if _canonical else _canonicalize(pieces)
        self.pieces: tuple[Piece, ...] = tuple(plist)
        self.domain = domain
        for p in self.pieces:
            if not (domain.contains(p.left) and domain.contains(p.right)):
                raise ValidationError(f"piece {p} not strictly inside domain {domain}")
        cum = [0.0]
        mcum = [0.0]
        for p in self.pieces:
            cum.append(cum[-1] + p.mass)
            mcum.append(mcum[-1] + p.moment)
        self._cum = cum
        self._mcum = mcum
        self._slicer = None

    # -- constructors --------------------------------------------------

    @staticmethod
    def zero(domain: DomainInterval = FULL_LINE) -> "PieceMeasure":
        return PieceMeasure((), domain, _canonical=True)

    @staticmethod
    def point(x: float, mass: float = 1.0, domain: DomainInterval = FULL_LINE) -> "PieceMeasure":
        return PieceMeasure([Atom(x, mass)], domain)

    @staticmethod
    def uniform(lo: float, hi: float, mass: float = 1.0,
                domain: DomainInterval = FULL_LINE) -> "PieceMeasure":
        return PieceMeasure([Uniform(lo, hi, mass)], domain)

    # -- basic quantities ------------------------------------------------

    @property
    def total_mass(self) -> float:
        return self._cum[-1]

    @property
    def first_moment(self) -> float:
        return self._mcum[-1]

    @property
    def mean(self) -> float:
        return self.first_moment / self.total_mass

    @property
    def support_min(self) -> float:
        return self.pieces[0].left

    @property
    def support_max(self) -> float:
        return max(p.right for p in self.pieces)

    def is_probability(self, tol: float = 1e-10) -> bool:
        return abs(self.total_mass - 1.0) <= tol

    def breakpoints(self) -> list[float]:
        pts = set()
        for p in self.pieces:
            pts.add(p.left)
            pts.add(p.right)
        return sorted(pts)

    def cdf(self, x: float) -> float:
        """Right-continuous CDF value at x."""
        s = 0.0
        for p in self.pieces:
            if isinstance(p, Atom):
                if p.x <= x:
                    s += p.mass
            else:
                if x >= p.hi:
                    s += p.mass
                elif x > p.lo:
                    s += p.mass * (x - p.lo) / (p.hi - p.lo)
        return s

    def cdf_left(self, x: float) -> float:
        """Left limit of the CDF at x."""
        s = 0.0
        for p in self.pieces:
            if isinstance(p, Atom):
                if p.x < x:
                    s += p.mass
            else:
                if x >= p.hi:
                    s += p.mass
                elif x > p.lo:
                    s += p.mass * (x - p.lo) / (p.hi - p.lo)
        return s

    def call_value(self, k: float) -> float:
        """Integral of (x - k)+ against the measure; exact per piece."""
        s = 0.0
        for p in self.pieces:
            if isinstance(p, Atom):
                if p.x > k:
                    s += p.mass * (p.x - k)
            else:
                if k <= p.lo:
                    s += p.mass * (0.5 * (p.lo + p.hi) - k)
                elif k < p.hi:
                    s += p.density * 0.5 * (p.hi - k) ** 2
        return s

    def integrate(self, f: Callable[[float], float], rel_tol: float = 1e-12) -> float:
        """Integrate a smooth function: atoms exactly, uniforms by adaptive quadrature."""
        s = 0.0
        for p in self.pieces:
            if isinstance(p, Atom):
                s += p.mass * f(p.x)
            else:
                s += p.density * _adaptive_gauss(f, p.lo, p.hi, rel_tol)
        return s

    # -- algebra ---------------------------------------------------------

    def scaled(self, factor: float) -> "PieceMeasure":
        if factor < 0:
            raise ValidationError("negative scaling of a positive measure")
        if factor == 0:
            return PieceMeasure.zero(self.domain)
        out = []
        for p in self.pieces:
            if isinstance(p, Atom):
                out.append(Atom(p.x, p.mass * factor))
            else:
                out.append(Uniform(p.lo, p.hi, p.mass * factor))
        return PieceMeasure(out, self.domain, _canonical=True)

    def __add__(self, other: "PieceMeasure") -> "PieceMeasure":
        dom = self.domain if self.domain != FULL_LINE else other.domain
        return PieceMeasure(list(self.pieces) + list(other.pieces), dom)

    def approx_equal(self, other: "PieceMeasure", tol: float = 1e-12) -> bool:
        """CDF agreement (values and left limits) on the union of breakpoints."""
        if abs(self.total_mass - other.total_mass) > tol:
            return False
        for x in sorted(set(self.breakpoints()) | set(other.breakpoints())):
            if abs(self.cdf(x) - other.cdf(x)) > tol:
                return False
            if abs(self.cdf_left(x) - other.cdf_left(x)) > tol:
                return False
        return True

    def canonical_key(self, decimals: int = 9) -> tuple:
        """Hashable fingerprint with positions/masses rounded; used for dedup."""
        key = []
        for p in self.pieces:
            if isinstance(p, Atom):
                key.append(("a", round(p.x, decimals), round(p.mass, decimals)))
            else:
                key.append(("u", round(p.lo, decimals), round(p.hi, decimals),
                            round(p.mass, decimals)))
        return tuple(key)

    # -- quantile operations ----------------------------------------------

    def _get_slicer(self) -> "_Slicer":
        if self._slicer is None:
            self._slicer = _Slicer(self)
        return self._slicer

    def restrict_quantile(self, a: float, b: float) -> "PieceMeasure":
        """The part of the measure between cumulative-mass levels a and b."""
        m = self.total_mass
        tol = 1e-12 * (1.0 + m)
        if a < -tol or b > m + tol or a > b + tol:
            raise QuantileOutOfRange(
                f"quantile window ({a}, {b}) outside [0, {m}]")
        a = min(max(a, 0.0), m)
        b = min(max(b, 0.0), m)
        if b <= a:
            return PieceMeasure.zero(self.domain)
        pieces = self._get_slicer().slice(a, b)
        out = PieceMeasure(pieces, self.domain, _canonical=True)
        # Tiny proration drift: pin the mass to exactly b - a.
        if out.total_mass > 0.0 and out.total_mass != b - a:
            out = out.scaled((b - a) / out.total_mass)
        return out

    def connected_part(self, mass: float, first_moment: float) -> "PieceMeasure":
        """Unique quantile window with the prescribed mass and first moment."""
        c = self.connected_window_start(mass, first_moment)
        if mass <= 0.0:
            return PieceMeasure.zero(self.domain)
        out = self.restrict_quantile(c, c + mass)
        if out.total_mass != mass:
            out = out.scaled(mass / out.total_mass)
        return out

    def co_connected_part(self, mass: float, first_moment: float) -> "PieceMeasure":
        """Complement of a quantile window, with the prescribed mass and moment."""
        m = self.total_mass
        if mass <= 1e-15 * (1.0 + m):
            return PieceMeasure.zero(self.domain)
        w = m - mass
        c = self.connected_window_start(w, self.first_moment - first_moment)
        left = self.restrict_quantile(0.0, c)
        right = self.restrict_quantile(c + w, m)
        out = left + right
        if out.total_mass > 0.0 and out.total_mass != mass:
            out = out.scaled(mass / out.total_mass)
        return out

    def connected_window_start(self, mass: float, first_moment: float,
                               pre_tol: float = 1e-10) -> float:
        """Start level c of the window [c, c+mass] matching the moment.

        The map c -> moment of the window is nondecreasing and piecewise
        quadratic; it is inverted exactly on its bracketing segment, taking
        the leftmost solution on intervals of constancy.
        """
        m = self.total_mass
        mass_tol = 1e-12 * (1.0 + m)
        if mass < -mass_tol or mass > m + mass_tol:
            raise MomentOutOfRange(f"window mass {mass} outside [0, {m}]")
        mass = min(max(mass, 0.0), m)
        if mass == 0.0:
            return 0.0
        return self._get_slicer().find_window(mass, first_moment, pre_tol)


# -- exact quantile machinery ---------------------------------------------


class _Slicer:
    """Prefix tables over a canonical piece list for exact window queries."""

    __slots__ = ("pieces", "cum", "mcum", "total")

    def __init__(self, measure: PieceMeasure):
        self.pieces = measure.pieces
        self.cum = measure._cum
        self.mcum = measure._mcum
        self.total = measure.total_mass

    def _locate(self, u: float) -> int:
        """Index of the piece whose cumulative span contains level u."""
        i = bisect_right(self.cum, u) - 1
        return min(max(i, 0), len(self.pieces) - 1)

    def position(self, u: float) -> float:
        """Position of the quantile level u (left-continuous inside pieces)."""
        i = self._locate(u)
        p = self.pieces[i]
        if isinstance(p, Atom):
            return p.x
        t = (u - self.cum[i]) / p.mass
        return p.lo + (p.hi - p.lo) * min(max(t, 0.0), 1.0)

    def pos_slope(self, u: float) -> tuple[float, float]:
        """(position, d position / d level) at level u, zero slope on atoms."""
        i = self._locate(u)
        p = self.pieces[i]
        if isinstance(p, Atom):
            return p.x, 0.0
        t = (u - self.cum[i]) / p.mass
        span = p.hi - p.lo
        return p.lo + span * min(max(t, 0.0), 1.0), span / p.mass

    def moment_below(self, u: float) -> float:
        """Cumulative first moment of the restriction to levels [0, u]."""
        i = self._locate(u)
        p = self.pieces[i]
        du = u - self.cum[i]
        base = self.mcum[i]
        if du <= 0.0:
            return base
        if isinstance(p, Atom):
            return base + p.x * min(du, p.mass)
        t = min(du / p.mass, 1.0)
        span = p.hi - p.lo
        # integral of (lo + span*s) over s in [0, t], times mass
        return base + p.mass * (p.lo * t + 0.5 * span * t * t)

    def window_moment(self, a: float, b: float) -> float:
        return self.moment_below(b) - self.moment_below(a)

    def slice(self, a: float, b: float) -> list[Piece]:
        """Pieces of the restriction to cumulative levels [a, b]."""
        out: list[Piece] = []
        ia, ib = self._locate(a), self._locate(b)
        for i in range(ia, min(ib + 1, len(self.pieces))):
            p = self.pieces[i]
            lo_u = max(a, self.cum[i])
            hi_u = min(b, self.cum[i + 1])
            du = hi_u - lo_u
            if du <= 0.0:
                continue
            if isinstance(p, Atom):
                out.append(Atom(p.x, du))
            else:
                span = p.hi - p.lo
                t1 = (lo_u - self.cum[i]) / p.mass
                t2 = (hi_u - self.cum[i]) / p.mass
                x1 = p.lo + span * t1
                x2 = p.lo + span * t2
                if x2 - x1 <= 0.0:
                    out.append(Atom(0.5 * (x1 + x2), du))
                else:
                    out.append(Uniform(x1, x2, du))
        return out

    def find_window(self, w: float, target: float, pre_tol: float) -> float:
        """Leftmost c with window_moment(c, c+w) == target, exactly inverted."""
        cmax = self.total - w
        lo_m = self.window_moment(0.0, w)
        hi_m = self.window_moment(cmax, cmax + w)
        scale = 1.0 + abs(lo_m) + abs(hi_m)
        if target < lo_m - pre_tol * scale or target > hi_m + pre_tol * scale:
            raise MomentOutOfRange(
                f"moment {target} outside attainable [{lo_m}, {hi_m}] for mass {w}")
        target = min(max(target, lo_m), hi_m)

        # Candidate c values where either window edge crosses a piece boundary.
        cands = {0.0, cmax}
        for u in self.cum[1:-1]:
            if 0.0 < u < cmax:
                cands.add(u)
            ur = u - w
            if 0.0 < ur < cmax:
                cands.add(ur)
        grid = sorted(cands)
        vals = [self.window_moment(c, c + w) for c in grid]

        # vals is nondecreasing up to rounding noise; land on the leftmost
        # bracketing segment.
        noise = 1e-14 * scale
        k = bisect_left(vals, target)
        while k > 0 and vals[k - 1] >= target - noise:
            k -= 1
        while k < len(vals) and vals[k] < target - noise:
            k += 1
        if k == 0:
            return grid[0]
        if k == len(vals):
            return grid[-1]
        c0, c1 = grid[k - 1], grid[k]
        m0 = vals[k - 1]
        # On [c0, c1] the moment is m0 + d0*t + d1*t^2/2 with both edges
        # inside fixed pieces (locate is right-continuous at boundaries);
        # invert the quadratic, preferring the smaller root.
        xl, sl = self.pos_slope(c0)
        xr, sr = self.pos_slope(c0 + w)
        d0 = xr - xl
        d1 = sr - sl
        t = _solve_monotone_quadratic(0.5 * d1, d0, m0 - target, c1 - c0)
        c = c0 + t
        # Safeguard: polish with bisection against the exact moment map.
        f = lambda cc: self.window_moment(cc, cc + w) - target
        tol = 1e-13 * (1.0 + abs(target))
        if abs(f(c)) > tol:
            a, b = c0, c1
            fa = m0 - target
            for _ in range(200):
                mid = 0.5 * (a + b)
                fm = f(mid)
                if abs(fm) <= tol or b - a <= 1e-16 * (1.0 + abs(b)):
                    c = mid
                    break
                if (fa <= 0.0) == (fm <= 0.0):
                    a, fa = mid, fm
                else:
                    b = mid
            else:
                c = 0.5 * (a + b)
        return min(max(c, 0.0), cmax)


def _solve_monotone_quadratic(a2: float, a1: float, a0: float, tmax: float) -> float:
    """Smallest t in [0, tmax] with a2*t^2 + a1*t + a0 = 0, q nondecreasing."""
    if a0 >= 0.0:
        return 0.0
    if abs(a2) <= 1e-300:
        if a1 <= 0.0:
            return tmax
        return min(max(-a0 / a1, 0.0), tmax)
    disc = a1 * a1 - 4.0 * a2 * a0
    if disc < 0.0:
        return tmax
    sq = math.sqrt(disc)
    # Stable pair of roots; pick the smallest nonnegative one.
    if a1 >= 0.0:
        r1 = (2.0 * a0) / (-a1 - sq) if (-a1 - sq) != 0.0 else math.inf
        r2 = (-a1 - sq) / (2.0 * a2)
    else:
        r1 = (-a1 + sq) / (2.0 * a2)
        r2 = (2.0 * a0) / (-a1 + sq) if (-a1 + sq) != 0.0 else math.inf
    roots = sorted(r for r in (r1, r2) if r >= -1e-15)
    for r in roots:
        if r <= tmax * (1.0 + 1e-12):
            return min(max(r, 0.0), tmax)
    return tmax


# -- quadrature -------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


def _gauss(f: Callable[[float], float], lo: float, hi: float) -> float:
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    return half * sum(w * f(mid + half * x) for x, w in zip(_GL_NODES, _GL_WEIGHTS))


def _adaptive_gauss(f, lo, hi, rel_tol=1e-12, _depth=0):
    whole = _gauss(f, lo, hi)
    mid = 0.5 * (lo + hi)
    split = _gauss(f, lo, mid) + _gauss(f, mid, hi)
    if abs(split - whole) <= rel_tol * (1.0 + abs(split)) or _depth >= 24:
        return split
    return (_adaptive_gauss(f, lo, mid, rel_tol, _depth + 1)
            + _adaptive_gauss(f, mid, hi, rel_tol, _depth + 1))


# -- convex order ------------------------------------------------------------


def convex_order_report(mu: PieceMeasure, nu: PieceMeasure) -> tuple[bool, str]:
    """Exact convex-order test mu <=cx nu with a human-readable reason.

    The difference of call functions is piecewise quadratic with breakpoints
    at all piece endpoints of both measures; it is checked at breakpoints and
    at the interior minimum of each quadratic segment.
    """
    if not mu.is_probability() or not nu.is_probability():
        raise NotProbability("convex order is defined for probability measures")
    if abs(mu.mean - nu.mean) > 1e-9:
        return False, "means differ"
    bps = sorted(set(mu.breakpoints()) | set(nu.breakpoints()))
    if not bps:
        return True, "ok"
    diff = lambda k: nu.call_value(k) - mu.call_value(k)
    thresh = -1e-10
    for k in bps:
        if diff(k) < thresh:
            return False, f"call function dominated fails at k={k}"
    for k1, k2 in zip(bps, bps[1:]):
        h = 0.5 * (k2 - k1)
        if h <= 0.0:
            continue
        km = 0.5 * (k1 + k2)
        d1, dm, d2 = diff(k1), diff(km), diff(k2)
        a = (d1 + d2 - 2.0 * dm) / (2.0 * h * h)
        b = (d2 - d1) / (2.0 * h)
        if a > 1e-300:
            t = -b / (2.0 * a)
            if -h < t < h and diff(km + t) < thresh:
                return False, f"call function dominated fails at k={km + t}"
    return True, "ok"


def convex_order_leq(mu: PieceMeasure, nu: PieceMeasure) -> bool:
    ok, _ = convex_order_report(mu, nu)
    return ok


# -- discrete first marginal --------------------------------------------------


class DiscreteMarginal:
    """Finitely supported probability: strictly increasing atoms, positive weights."""

    __slots__ = ("atoms", "weights", "domain")

    def __init__(self, atoms: Sequence[float], weights: Sequence[float],
                 domain: DomainInterval = FULL_LINE):
        atoms = tuple(float(a) for a in atoms)
        weights = tuple(float(w) for w in weights)
        if len(atoms) == 0 or len(atoms) != len(weights):
            raise ValidationError("atoms and weights must be non-empty, equal length")
        if any(a2 <= a1 for a1, a2 in zip(atoms, atoms[1:])):
            raise ValidationError("atoms must be strictly increasing")
        if any(w <= 0 for w in weights):
            raise ValidationError("weights must be strictly positive")
        if abs(sum(weights) - 1.0) > 1e-12:
            raise NotProbability(f"weights sum to {sum(weights)}, not 1")
        if not all(domain.contains(a) for a in atoms):
            raise ValidationError("atoms must lie strictly inside the domain")
        self.atoms = atoms
        self.weights = weights
        self.domain = domain

    @property
    def n(self) -> int:
        return len(self.atoms)

    @property
    def mean(self) -> float:
        return sum(a * w for a, w in zip(self.atoms, self.weights))

    def as_measure(self) -> PieceMeasure:
        return PieceMeasure([Atom(a, w) for a, w in zip(self.atoms, self.weights)],
                            self.domain)


def discretize_conditional_mean(mu1: PieceMeasure, cuts: Sequence[float]) -> DiscreteMarginal:
    """Collapse each partition cell to an atom at its conditional mean.

    The result is dominated by mu1 in convex order and preserves the mean
    exactly; each cut must carry zero mass (no atom of mu1 at a cut).
    """
    cuts = [float(c) for c in cuts]
    if any(c2 <= c1 for c1, c2 in zip(cuts, cuts[1:])):
        raise ValidationError("cuts must be strictly increasing")
    for p in mu1.pieces:
        if isinstance(p, Atom) and any(abs(p.x - c) <= 1e-12 for c in cuts):
            raise CutOnAtom(f"cut coincides with atom at {p.x}")
    edges = [-math.inf, *cuts, math.inf]
    masses = [0.0] * (len(edges) - 1)
    moments = [0.0] * (len(edges) - 1)
    for p in mu1.pieces:
        if isinstance(p, Atom):
            j = bisect_left(cuts, p.x)
            masses[j] += p.mass
            moments[j] += p.mass * p.x
        else:
            dens = p.density
            for j in range(len(edges) - 1):
                a = max(p.lo, edges[j])
                b = min(p.hi, edges[j + 1])
                if b > a:
                    masses[j] += dens * (b - a)
                    moments[j] += dens * 0.5 * (b * b - a * a)
    total = sum(masses)
    if total <= 0.0:
        raise ValidationError("measure has no mass")
    atoms, weights = [], []
    for m, mo in zip(masses, moments):
        if m > 1e-15 * total:
            atoms.append(mo / m)
            weights.append(m / total)
    s = sum(weights)
    weights = [w / s for w in weights]
    return DiscreteMarginal(atoms, weights, mu1.domain)


# -- extremal sub-measures -----------------------------------------------------


def extremal_submeasure(gamma: PieceMeasure, mass: float, first_moment: float,
                        phi: Callable[[float], float], sense: str = "max",
                        ) -> tuple[PieceMeasure, float]:
    """Optimize the phi-integral over sub-measures with fixed mass and moment.

    The maximum over {mu : mu[1]=mass, mu[id]=moment, mu <= gamma} of mu[phi]
    for concave phi is attained at the connected part, the minimum at the
    co-connected part.
    """
    if sense not in ("max", "min"):
        raise ValidationError(f"sense must be 'max' or 'min', got {sense!r}")
    if sense == "max":
        part = gamma.connected_part(mass, first_moment)
    else:
        part = gamma.co_connected_part(mass, first_moment)
    return part, part.integrate(phi)
