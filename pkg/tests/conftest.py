"""Shared instance builders for the test suite."""

import numpy as np
import pytest

from nlmot import (
    Atom,
    Coupling,
    DiscreteMarginal,
    GainSpec,
    PieceMeasure,
    Sqrt,
    Uniform,
    VixLog,
)


def pair_unif() -> PieceMeasure:
    """Uniform on [1,2] union [-2,-1]: the running continuous target."""
    return PieceMeasure([Uniform(-2.0, -1.0, 0.5), Uniform(1.0, 2.0, 0.5)])


def three_point() -> DiscreteMarginal:
    return DiscreteMarginal([-1.0, 0.0, 1.0], [1 / 3, 1 / 3, 1 / 3])


def coarsen(mu2: DiscreteMarginal, splits: np.ndarray) -> DiscreteMarginal | None:
    """Group consecutive target atoms and collapse to conditional means.

    The result is dominated by mu2 in convex order by construction.
    """
    groups = np.split(np.arange(mu2.n), splits)
    atoms, weights = [], []
    b = np.asarray(mu2.atoms)
    w = np.asarray(mu2.weights)
    for g in groups:
        wg = float(w[g].sum())
        atoms.append(float(np.dot(b[g], w[g]) / wg))
        weights.append(wg)
    order = np.argsort(atoms)
    atoms = list(np.asarray(atoms)[order])
    weights = list(np.asarray(weights)[order])
    if any(a2 - a1 < 1e-6 for a1, a2 in zip(atoms, atoms[1:])):
        return None
    s = sum(weights)
    return DiscreteMarginal(atoms, [x / s for x in weights])


def random_discrete_pair(rng: np.random.Generator, n: int, m: int,
                         lo: float = 0.5, hi: float = 4.0,
                         ) -> tuple[DiscreteMarginal, DiscreteMarginal]:
    """Random (mu1, mu2) in convex order with supports of sizes n <= m."""
    while True:
        b = np.sort(rng.uniform(lo, hi, m))
        if m > 1 and np.min(np.diff(b)) < 1e-2:
            continue
        w = rng.dirichlet(np.ones(m))
        w = np.maximum(w, 5e-3)
        w = w / w.sum()
        mu2 = DiscreteMarginal([float(x) for x in b], [float(x) for x in w])
        if n >= m:
            return mu2, mu2
        splits = np.sort(rng.choice(np.arange(1, m), size=n - 1, replace=False))
        mu1 = coarsen(mu2, splits)
        if mu1 is not None and mu1.n == n:
            return mu1, mu2


def solve_alpha4(tol: float = 1e-13) -> float:
    """Root of the flatness equation for the 2x4 positive-support instance."""
    p2, p3, p4 = 0.2, 0.3, 0.4
    q2, q3, q4 = 0.4, 0.3, 0.2
    a2, a3 = 2.0, 3.5

    def f(a4):
        lhs = a2 ** (p2 - q2) * a3 ** (p3 - q3) * a4 ** (p4 - q4)
        num = 1 + p2 * (a2 - 1) + p3 * (a3 - 1) + p4 * (a4 - 1)
        den = 1 + q2 * (a2 - 1) + q3 * (a3 - 1) + q4 * (a4 - 1)
        return lhs - num / den

    lo, hi = 3.6, 10.0
    assert f(lo) * f(hi) < 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(lo) * f(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def flat_two_by_four() -> tuple[DiscreteMarginal, DiscreteMarginal, Coupling, GainSpec]:
    """The 2-atom / 4-atom instance admitting a constant-spread coupling."""
    a4 = solve_alpha4()
    bs = [1.0, 2.0, 3.5, a4]
    p = [0.1, 0.2, 0.3, 0.4]
    q = [0.1, 0.4, 0.3, 0.2]
    a_lo = sum(x * y for x, y in zip(q, bs))
    a_hi = sum(x * y for x, y in zip(p, bs))
    mu1 = DiscreteMarginal([a_lo, a_hi], [0.5, 0.5])
    mu2 = DiscreteMarginal(bs, [0.5 * x + 0.5 * y for x, y in zip(p, q)])
    rows = (
        PieceMeasure([Atom(b, mass) for b, mass in zip(bs, q)]),
        PieceMeasure([Atom(b, mass) for b, mass in zip(bs, p)]),
    )
    nu = Coupling(mu1, rows)
    spec = GainSpec(VixLog(1.0), Sqrt())
    return mu1, mu2, nu, spec


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
