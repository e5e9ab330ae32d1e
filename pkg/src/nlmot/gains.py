"""Catalog of convex payoff transforms and concave outer gains.

Closed catalog rather than arbitrary callbacks: every member integrates
exactly (or to 1e-12 adaptively) against a piecewise-linear-CDF measure and
serializes to JSON. The concave side also exposes inverses and the Legendre
transform of the inverse, which the superreplication module needs.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

from .errors import DomainViolation, NotInvertible, ValidationError
from .measures import Atom, DomainInterval, PieceMeasure, _adaptive_gauss

_PHI_CLAMP = 1e-12


# ---------------------------------------------------------------------------
# convex transforms of the second leg
# ---------------------------------------------------------------------------


class GammaFn:
    """Convex function with exact piecewise integrals against a PieceMeasure."""

    kind: str = ""
    domain: DomainInterval = DomainInterval()

    def __call__(self, x: float) -> float:
        raise NotImplementedError

    def integrate(self, mu: PieceMeasure) -> float:
        """Integral of the function against mu; exact per piece where possible."""
        s = 0.0
        for p in mu.pieces:
            if isinstance(p, Atom):
                self._check_point(p.x)
                s += p.mass * self(p.x)
            else:
                self._check_interval(p.lo, p.hi)
                s += p.density * self._segment_integral(p.lo, p.hi)
        return s

    def bounded_on(self, lo: float, hi: float) -> bool:
        """Whether the function is bounded on the closure of (lo, hi)."""
        return math.isfinite(lo) and math.isfinite(hi) and \
            self.domain.lo < lo and hi < self.domain.hi

    def _check_point(self, x: float) -> None:
        if not self.domain.contains(x):
            raise DomainViolation(f"point {x} outside domain {self.domain}")

    def _check_interval(self, lo: float, hi: float) -> None:
        if not (self.domain.contains(lo) and self.domain.contains(hi)):
            raise DomainViolation(
                f"support [{lo}, {hi}] touches the boundary of {self.domain}")

    def _segment_integral(self, lo: float, hi: float) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class VixLog(GammaFn):
    """x -> -(2/tau) ln x on (0, inf); the forward log-contract payoff."""

    tau: float = 1.0
    kind: str = field(default="vixlog", init=False)
    domain: DomainInterval = field(default=DomainInterval(0.0, math.inf), init=False)

    def __post_init__(self):
        if not self.tau > 0:
            raise ValidationError("tau must be positive")

    def __call__(self, x: float) -> float:
        self._check_point(x)
        return -(2.0 / self.tau) * math.log(x)

    def _segment_integral(self, lo, hi):
        # antiderivative of ln is x ln x - x
        return -(2.0 / self.tau) * ((hi * math.log(hi) - hi) - (lo * math.log(lo) - lo))


@dataclass(frozen=True)
class Quadratic(GammaFn):
    """x -> x^2."""

    kind: str = field(default="quadratic", init=False)

    def __call__(self, x: float) -> float:
        return x * x

    def _segment_integral(self, lo, hi):
        return (hi ** 3 - lo ** 3) / 3.0


@dataclass(frozen=True)
class Affine(GammaFn):
    """x -> slope*x + intercept."""

    slope: float = 1.0
    intercept: float = 0.0
    kind: str = field(default="affine", init=False)

    def __call__(self, x: float) -> float:
        return self.slope * x + self.intercept

    def _segment_integral(self, lo, hi):
        return self.slope * 0.5 * (hi * hi - lo * lo) + self.intercept * (hi - lo)


@dataclass(frozen=True)
class PowerAbs(GammaFn):
    """x -> |x|^p with p >= 1; exact for integer p, adaptive otherwise."""

    p: float = 2.0
    kind: str = field(default="power", init=False)

    def __post_init__(self):
        if not self.p >= 1.0:
            raise ValidationError("power exponent must be >= 1 for convexity")

    def __call__(self, x: float) -> float:
        return abs(x) ** self.p

    def _segment_integral(self, lo, hi):
        if lo < 0.0 < hi:
            return self._one_side(lo, 0.0) + self._one_side(0.0, hi)
        return self._one_side(lo, hi)

    def _one_side(self, lo, hi):
        if hi <= 0.0:
            lo, hi = -hi, -lo
        if self.p == round(self.p):
            q = self.p + 1.0
            return (hi ** q - lo ** q) / q
        return _adaptive_gauss(lambda x: abs(x) ** self.p, lo, hi, 1e-12)


@dataclass(frozen=True)
class PiecewiseLinearConvex(GammaFn):
    """Piecewise-linear convex function: slopes nondecreasing across breakpoints.

    slopes has one more entry than breakpoints; the value at the first
    breakpoint anchors the function.
    """

    breakpoints: tuple[float, ...] = ()
    slopes: tuple[float, ...] = (1.0,)
    value0: float = 0.0
    kind: str = field(default="pwl_convex", init=False)

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        sl = tuple(float(s) for s in self.slopes)
        if len(sl) != len(bps) + 1:
            raise ValidationError("need len(slopes) == len(breakpoints) + 1")
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise ValidationError("breakpoints must be strictly increasing")
        if any(s2 < s1 - 1e-15 for s1, s2 in zip(sl, sl[1:])):
            raise ValidationError("slopes must be nondecreasing for convexity")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "slopes", sl)

    def __call__(self, x: float) -> float:
        bps, sl = self.breakpoints, self.slopes
        if not bps:
            return self.value0 + sl[0] * x
        v = self.value0
        if x < bps[0]:
            return v + sl[0] * (x - bps[0])
        prev = bps[0]
        for i in range(1, len(bps)):
            if x <= bps[i]:
                return v + sl[i] * (x - prev)
            v += sl[i] * (bps[i] - prev)
            prev = bps[i]
        return v + sl[-1] * (x - prev)

    def _segment_integral(self, lo, hi):
        # trapezoid on each linear stretch
        pts = [lo] + [b for b in self.breakpoints if lo < b < hi] + [hi]
        s = 0.0
        for a, b in zip(pts, pts[1:]):
            s += 0.5 * (self(a) + self(b)) * (b - a)
        return s


# ---------------------------------------------------------------------------
# concave outer gains on [0, inf)
# ---------------------------------------------------------------------------


class PhiFn:
    """Concave nondecreasing function on [0, inf) with finite value at 0."""

    kind: str = ""
    invertible: bool = False

    def __call__(self, u: float) -> float:
        if u < -_PHI_CLAMP:
            raise DomainViolation(f"concave gain evaluated at {u} < 0")
        return self._eval(max(u, 0.0))

    def _eval(self, u: float) -> float:
        raise NotImplementedError

    def derivative(self, u: float) -> float:
        """One-sided derivative, evaluated no closer to 0 than 1e-12."""
        raise NotImplementedError

    def inverse(self, v: float) -> float:
        raise NotInvertible(f"{self.kind} has no inverse")

    def conjugate(self, b: float) -> float:
        """Legendre transform of the inverse: sup_u (b*u - inverse(u)).

        Returns math.inf when the supremum is unbounded.
        """
        raise NotInvertible(f"{self.kind} has no inverse to transform")


@dataclass(frozen=True)
class Sqrt(PhiFn):
    kind: str = field(default="sqrt", init=False)
    invertible: bool = field(default=True, init=False)

    def _eval(self, u):
        return math.sqrt(u)

    def derivative(self, u):
        return 0.5 / math.sqrt(max(u, _PHI_CLAMP))

    def inverse(self, v):
        return v * v

    def conjugate(self, b):
        if b < 0:
            raise ValidationError("conjugate argument must be nonnegative")
        return 0.25 * b * b


@dataclass(frozen=True)
class ConcavePower(PhiFn):
    """u -> u^q with 0 < q < 1."""

    q: float = 0.5
    kind: str = field(default="power", init=False)
    invertible: bool = field(default=True, init=False)

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise ValidationError("exponent must lie in (0, 1)")

    def _eval(self, u):
        return u ** self.q

    def derivative(self, u):
        u = max(u, _PHI_CLAMP)
        return self.q * u ** (self.q - 1.0)

    def inverse(self, v):
        return v ** (1.0 / self.q)

    def conjugate(self, b):
        if b < 0:
            raise ValidationError("conjugate argument must be nonnegative")
        if b == 0.0:
            return 0.0
        r = 1.0 / self.q
        u = (b / r) ** (1.0 / (r - 1.0))
        return b * u - u ** r


@dataclass(frozen=True)
class Identity(PhiFn):
    kind: str = field(default="identity", init=False)
    invertible: bool = field(default=True, init=False)

    def _eval(self, u):
        return u

    def derivative(self, u):
        return 1.0

    def inverse(self, v):
        return v

    def conjugate(self, b):
        if b < 0:
            raise ValidationError("conjugate argument must be nonnegative")
        return 0.0 if b <= 1.0 else math.inf


@dataclass(frozen=True)
class PiecewiseLinearConcave(PhiFn):
    """Piecewise-linear concave gain: slopes nonincreasing and nonnegative.

    breakpoints must start after 0; value0 is the value at u = 0.
    """

    breakpoints: tuple[float, ...] = ()
    slopes: tuple[float, ...] = (1.0,)
    value0: float = 0.0
    kind: str = field(default="pwl_concave", init=False)

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        sl = tuple(float(s) for s in self.slopes)
        if len(sl) != len(bps) + 1:
            raise ValidationError("need len(slopes) == len(breakpoints) + 1")
        if any(b <= 0 for b in bps):
            raise ValidationError("breakpoints must be positive")
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise ValidationError("breakpoints must be strictly increasing")
        if any(s2 > s1 + 1e-15 for s1, s2 in zip(sl, sl[1:])):
            raise ValidationError("slopes must be nonincreasing for concavity")
        if any(s < 0 for s in sl):
            raise ValidationError("slopes must be nonnegative (nondecreasing gain)")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "slopes", sl)
        object.__setattr__(self, "invertible", all(s > 0 for s in sl))

    def _eval(self, u):
        v = self.value0
        prev = 0.0
        for b, s in zip(self.breakpoints, self.slopes):
            if u <= b:
                return v + s * (u - prev)
            v += s * (b - prev)
            prev = b
        return v + self.slopes[-1] * (u - prev)

    def derivative(self, u):
        u = max(u, _PHI_CLAMP)
        i = bisect_right(self.breakpoints, u)
        return self.slopes[i]

    def inverse(self, v):
        if not self.invertible:
            raise NotInvertible("piecewise-linear gain with a flat stretch")
        if v < self.value0:
            raise ValidationError(f"value {v} below the range of the gain")
        acc = self.value0
        prev = 0.0
        for b, s in zip(self.breakpoints, self.slopes):
            nxt = acc + s * (b - prev)
            if v <= nxt:
                return prev + (v - acc) / s
            acc, prev = nxt, b
        return prev + (v - acc) / self.slopes[-1]

    def conjugate(self, b):
        if b < 0:
            raise ValidationError("conjugate argument must be nonnegative")
        if not self.invertible:
            raise NotInvertible("piecewise-linear gain with a flat stretch")
        # inverse is convex piecewise linear with final slope 1/slopes[-1];
        # the sup is +inf beyond that slope, otherwise attained on [0, U].
        if b > 1.0 / self.slopes[-1] + 1e-15:
            return math.inf
        # sup_u b*u - inverse(u) over u >= value0 (range of the gain);
        # concave objective, golden-section on an expanding bracket.
        obj = lambda u: b * u - self.inverse(u)
        ub = (self._eval(self.breakpoints[-1]) if self.breakpoints else 1.0) + 1.0
        while obj(ub * 2.0) > obj(ub) and ub < 1e12:
            ub *= 2.0
        lo = self.value0
        best = _golden_max(obj, lo, ub * 2.0, 1e-12)
        return max(best, obj(lo))


def _golden_max(f, lo, hi, tol):
    """Golden-section maximization of a concave function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol * (1.0 + abs(a) + abs(b)):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    u = 0.5 * (a + b)
    return f(u)


# ---------------------------------------------------------------------------
# combined specification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GainSpec:
    """The pair (convex transform, concave outer gain) defining the objective."""

    gamma: GammaFn
    phi: PhiFn

    def gamma_integral(self, mu: PieceMeasure) -> float:
        return self.gamma.integrate(mu)
