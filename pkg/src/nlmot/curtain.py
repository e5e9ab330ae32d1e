"""Curtain martingale couplings via iterated shadows.

A curtain coupling for an enumeration of the source atoms is built by
repeatedly taking the shadow (connected part with the atom's mass and
barycenter) of the residual target measure. Enumerating all orderings and
deduplicating yields the finite vertex family over which the non-linear
objective is maximized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    MarginalMismatch,
    MomentOutOfRange,
    NotConvexOrder,
    ShadowInfeasible,
    SupportTooLarge,
    ValidationError,
)
from .measures import (
    Atom,
    DiscreteMarginal,
    PieceMeasure,
    _Slicer,
    convex_order_leq,
)

DEFAULT_ENUM_CAP = 9


@dataclass(frozen=True)
class Coupling:
    """Discrete first marginal plus one conditional law per source atom."""

    first: DiscreteMarginal
    rows: tuple[PieceMeasure, ...]

    def __post_init__(self):
        if len(self.rows) != self.first.n:
            raise ValidationError("need one row per source atom")

    @property
    def n(self) -> int:
        return self.first.n

    def second_marginal(self) -> PieceMeasure:
        out = PieceMeasure.zero(self.first.domain)
        for w, row in zip(self.first.weights, self.rows):
            out = out + row.scaled(w)
        return out

    def validate(self, mu2: PieceMeasure | None = None,
                 row_mass_tol: float = 1e-10, row_mean_tol: float = 1e-9,
                 marginal_tol: float = 1e-9) -> None:
        """Check the martingale and marginal invariants, raising on failure."""
        for a, row in zip(self.first.atoms, self.rows):
            if abs(row.total_mass - 1.0) > row_mass_tol:
                raise ValidationError(f"row at {a} has mass {row.total_mass}")
            if abs(row.mean - a) > row_mean_tol:
                raise ValidationError(
                    f"row at {a} has barycenter {row.mean}: martingale broken")
        if mu2 is not None:
            mixed = self.second_marginal()
            if not mixed.approx_equal(mu2, marginal_tol):
                raise MarginalMismatch("second marginal differs from declared target")

    def canonical_key(self, decimals: int = 9) -> tuple:
        return tuple(r.canonical_key(decimals) for r in self.rows)


@dataclass(frozen=True)
class CurtainCertificate:
    """Enumeration order plus, per step, the shadow's quantile window in the residual."""

    order: tuple[int, ...]
    windows: tuple[tuple[float, float], ...]


# ---------------------------------------------------------------------------
# residual bookkeeping in the quantile space of the target
# ---------------------------------------------------------------------------


class _Residual:
    """Remaining target mass as disjoint quantile intervals of the original."""

    __slots__ = ("slicer", "intervals")

    def __init__(self, slicer: _Slicer, intervals: list[tuple[float, float]]):
        self.slicer = slicer
        self.intervals = intervals

    @staticmethod
    def whole(mu2: PieceMeasure) -> "_Residual":
        sl = mu2._get_slicer()
        return _Residual(sl, [(0.0, mu2.total_mass)])

    @property
    def mass(self) -> float:
        return sum(b - a for a, b in self.intervals)

    def moment(self) -> float:
        return sum(self.slicer.window_moment(a, b) for a, b in self.intervals)

    def _to_original(self, r: float) -> float:
        """Map a residual level to an original level, right-continuously."""
        acc = 0.0
        for a, b in self.intervals:
            ln = b - a
            if r < acc + ln:
                return a + (r - acc)
            acc += ln
        return self.intervals[-1][1] if self.intervals else 0.0

    def _window_to_original(self, c: float, d: float) -> list[tuple[float, float]]:
        """Original-quantile intervals covered by residual levels [c, d]."""
        out = []
        acc = 0.0
        for a, b in self.intervals:
            ln = b - a
            lo = max(c, acc)
            hi = min(d, acc + ln)
            if hi > lo:
                out.append((a + (lo - acc), a + (hi - acc)))
            acc += ln
        return out

    def window_moment(self, c: float, d: float) -> float:
        return sum(self.slicer.window_moment(a, b)
                   for a, b in self._window_to_original(c, d))

    def find_connected_window(self, w: float, target: float,
                              tol_rel: float = 1e-9) -> float:
        """Leftmost residual level c with moment of [c, c+w] equal to target."""
        total = self.mass
        if w > total:
            if w - total > tol_rel * (1.0 + total):
                raise MomentOutOfRange(f"window mass {w} exceeds residual {total}")
            w = total
        cmax = total - w
        lo_m = self.window_moment(0.0, w)
        hi_m = self.window_moment(cmax, total)
        scale = 1.0 + abs(lo_m) + abs(hi_m)
        if target < lo_m - tol_rel * scale or target > hi_m + tol_rel * scale:
            raise MomentOutOfRange(
                f"moment {target} outside attainable [{lo_m}, {hi_m}]")
        target = min(max(target, lo_m), hi_m)

        # Candidate window starts: residual levels where either edge crosses
        # an original piece boundary or a residual interval boundary.
        marks = set()
        acc = 0.0
        sl = self.slicer
        for a, b in self.intervals:
            marks.add(acc)
            for u in sl.cum:
                if a < u < b:
                    marks.add(acc + (u - a))
            acc += b - a
        marks.add(acc)
        cands = {0.0, cmax}
        for r in marks:
            if 0.0 < r < cmax:
                cands.add(r)
            rl = r - w
            if 0.0 < rl < cmax:
                cands.add(rl)
        grid = sorted(cands)
        vals = [self.window_moment(c, c + w) for c in grid]

        noise = 1e-14 * scale
        from bisect import bisect_left
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
        xl, slo = sl.pos_slope(self._to_original(c0))
        xr, sro = sl.pos_slope(self._to_original(c0 + w))
        d1 = sro - slo
        d0 = xr - xl
        from .measures import _solve_monotone_quadratic
        t = _solve_monotone_quadratic(0.5 * d1, d0, m0 - target, c1 - c0)
        c = c0 + t
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

    def extract_window(self, c: float, w: float,
                       ) -> tuple[list, "_Residual"]:
        """Pieces of the window [c, c+w] and the residual with it removed.

        Fragments below 1e-13 of the total are rounding slivers from window
        edges landing one ulp off a piece boundary; they are dropped so that
        deduplication keys stay clean.
        """
        sliver = 1e-13 * (1.0 + self.slicer.total)
        spans = [(a, b) for a, b in self._window_to_original(c, c + w)
                 if b - a > sliver]
        pieces = []
        for a, b in spans:
            pieces.extend(self.slicer.slice(a, b))
        pieces = [p for p in pieces if p.mass > sliver]
        remaining: list[tuple[float, float]] = []
        acc = 0.0
        for a, b in self.intervals:
            ln = b - a
            lo = max(c, acc)
            hi = min(c + w, acc + ln)
            if hi <= lo:
                remaining.append((a, b))
            else:
                if lo > acc:
                    remaining.append((a, a + (lo - acc)))
                if hi < acc + ln:
                    remaining.append((a + (hi - acc), b))
            acc += ln
        remaining = [(a, b) for a, b in remaining if b - a > sliver]
        return pieces, _Residual(self.slicer, remaining)


# ---------------------------------------------------------------------------
# construction and enumeration
# ---------------------------------------------------------------------------


def build_curtain(mu1: DiscreteMarginal, mu2: PieceMeasure,
                  order: Sequence[int], *, enum_cap: int = DEFAULT_ENUM_CAP,
                  _skip_checks: bool = False,
                  ) -> tuple[Coupling, CurtainCertificate]:
    """The unique curtain coupling realizing the given enumeration of atoms.

    Step i takes the shadow of atom order[i] in the residual target: the
    connected part with mass p and barycenter a. Existence is guaranteed in
    convex order; drift beyond tolerance raises ShadowInfeasible.
    """
    order = tuple(int(i) for i in order)
    n = mu1.n
    if sorted(order) != list(range(n)):
        raise ValidationError(f"order must be a permutation of 0..{n - 1}")
    if not _skip_checks:
        if n > enum_cap:
            raise SupportTooLarge(f"support size {n} exceeds cap {enum_cap}")
        if not convex_order_leq(mu1.as_measure(), mu2):
            raise NotConvexOrder("first marginal not dominated in convex order")

    residual = _Residual.whole(mu2)
    rows: list[PieceMeasure | None] = [None] * n
    windows = []
    for idx in order:
        p = mu1.weights[idx]
        a = mu1.atoms[idx]
        try:
            c = residual.find_connected_window(p, p * a)
        except MomentOutOfRange as exc:
            raise ShadowInfeasible(f"shadow step for atom {a} failed: {exc}") from exc
        pieces, residual = residual.extract_window(c, p)
        shadow = PieceMeasure(pieces, mu2.domain, _canonical=True)
        if shadow.total_mass <= 0.0:
            raise ShadowInfeasible(f"empty shadow for atom {a}")
        rows[idx] = shadow.scaled(1.0 / shadow.total_mass)
        windows.append((c, c + p))
    if residual.mass > 1e-9:
        raise ShadowInfeasible(f"final residual mass {residual.mass} above 1e-9")
    coupling = Coupling(mu1, tuple(rows))
    return coupling, CurtainCertificate(order, tuple(windows))


def enumerate_curtains(mu1: DiscreteMarginal, mu2: PieceMeasure,
                       enum_cap: int = DEFAULT_ENUM_CAP,
                       ) -> list[tuple[Coupling, tuple[int, ...]]]:
    """All distinct curtain couplings, tagged with their first enumeration.

    One coupling per permutation, deduplicated by rows rounded to 1e-9;
    output order is lexicographic in the producing permutation. Orderings
    sharing a prefix share the residual computation.
    """
    n = mu1.n
    if n > enum_cap:
        raise SupportTooLarge(
            f"support size {n} needs {n}! orderings, above cap {enum_cap}")
    if not convex_order_leq(mu1.as_measure(), mu2):
        raise NotConvexOrder("first marginal not dominated in convex order")

    out: list[tuple[Coupling, tuple[int, ...]]] = []
    seen: set[tuple] = set()
    rows_buf: list[PieceMeasure | None] = [None] * n

    def recurse(residual: _Residual, remaining: tuple[int, ...], prefix: tuple[int, ...]):
        if not remaining:
            coupling = Coupling(mu1, tuple(rows_buf))
            key = coupling.canonical_key()
            if key not in seen:
                seen.add(key)
                out.append((coupling, prefix))
            return
        for idx in remaining:
            p = mu1.weights[idx]
            a = mu1.atoms[idx]
            try:
                c = residual.find_connected_window(p, p * a)
            except MomentOutOfRange as exc:
                raise ShadowInfeasible(
                    f"shadow step for atom {a} failed: {exc}") from exc
            pieces, nxt = residual.extract_window(c, p)
            shadow = PieceMeasure(pieces, mu2.domain, _canonical=True)
            if shadow.total_mass <= 0.0:
                raise ShadowInfeasible(f"empty shadow for atom {a}")
            rows_buf[idx] = shadow.scaled(1.0 / shadow.total_mass)
            recurse(nxt, tuple(i for i in remaining if i != idx), prefix + (idx,))

    recurse(_Residual.whole(mu2), tuple(range(n)), ())
    return out


def is_curtain(nu: Coupling, tol: float = 1e-12) -> bool:
    """Pairwise forbidden-straddle test on the support fans.

    With the coupling carried by the union of {a_i} x supp(row_i), the
    curtain property fails exactly when two rows mutually hit the interior
    of each other's support hull.
    """
    hulls = []
    for row in nu.rows:
        hulls.append((row.support_min, row.support_max))
    for i in range(nu.n):
        for j in range(i + 1, nu.n):
            if _hits_interior(nu.rows[j], hulls[i], tol) and \
                    _hits_interior(nu.rows[i], hulls[j], tol):
                return False
    return True


def _hits_interior(row: PieceMeasure, hull: tuple[float, float], tol: float) -> bool:
    lo, hi = hull
    if hi - lo <= 2 * tol:
        return False
    for p in row.pieces:
        if isinstance(p, Atom):
            if lo + tol < p.x < hi - tol:
                return True
        else:
            if min(p.hi, hi) - max(p.lo, lo) > tol:
                return True
    return False


def compose(rho: Coupling, eta: Coupling, tol: float = 1e-9) -> Coupling:
    """Kernel product rho * eta of two discrete-to-discrete-source couplings.

    rho's second marginal must coincide with eta's first marginal; the
    resulting rows are mixtures of eta's rows and the martingale property is
    preserved.
    """
    mid_atoms = eta.first.atoms
    mid = rho.second_marginal()
    if not mid.approx_equal(eta.first.as_measure(), tol):
        raise MarginalMismatch(
            "second marginal of the first factor differs from the first "
            "marginal of the second")
    rows = []
    for row in rho.rows:
        weights = np.zeros(len(mid_atoms))
        for p in row.pieces:
            if not isinstance(p, Atom):
                raise MarginalMismatch(
                    "composition needs an atomic intermediate marginal")
            k = int(np.argmin([abs(p.x - a) for a in mid_atoms]))
            if abs(p.x - mid_atoms[k]) > tol:
                raise MarginalMismatch(
                    f"intermediate atom {p.x} not in the second factor's support")
            weights[k] += p.mass
        mixed = PieceMeasure.zero(eta.first.domain)
        for w, target_row in zip(weights, eta.rows):
            if w > 0.0:
                mixed = mixed + target_row.scaled(w)
        rows.append(mixed)
    return Coupling(rho.first, tuple(rows))


# ---------------------------------------------------------------------------
# discrete helpers shared with the oracle layer
# ---------------------------------------------------------------------------


def coupling_to_matrix(nu: Coupling, target_atoms: Sequence[float],
                       tol: float = 1e-9) -> np.ndarray:
    """Conditional masses as an n x m matrix over the given target atoms."""
    m = len(target_atoms)
    out = np.zeros((nu.n, m))
    for i, (w, row) in enumerate(zip(nu.first.weights, nu.rows)):
        for p in row.pieces:
            if not isinstance(p, Atom):
                raise ValidationError("matrix form needs purely atomic rows")
            k = int(np.argmin([abs(p.x - a) for a in target_atoms]))
            if abs(p.x - target_atoms[k]) > tol:
                raise ValidationError(f"atom {p.x} not among the target atoms")
            out[i, k] += w * p.mass
    return out


def matrix_to_coupling(mu1: DiscreteMarginal, mu2: DiscreteMarginal,
                       pi: np.ndarray, drop_tol: float = 1e-13) -> Coupling:
    """Coupling object from a transport matrix over discrete marginals."""
    pi = np.asarray(pi, dtype=float)
    rows = []
    for i in range(mu1.n):
        p = mu1.weights[i]
        pieces = [Atom(b, float(pi[i, j]) / p)
                  for j, b in enumerate(mu2.atoms) if pi[i, j] > drop_tol]
        rows.append(PieceMeasure(pieces, mu1.domain))
    return Coupling(mu1, tuple(rows))
