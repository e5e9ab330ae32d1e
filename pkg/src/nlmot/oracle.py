"""Brute-force oracles for desk-scale verification.

A dense two-phase simplex (Bland's rule throughout, since transportation
polytopes are highly degenerate) backs three oracles: exact LPs over the
discrete martingale-coupling polytope, convex-hull membership, and direct
concave maximization by projected gradient on the coupling polytope. No
external solver: instances are tiny and determinism matters more than speed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import CapError, Infeasible, Unbounded, ValidationError
from .gains import GainSpec
from .measures import DiscreteMarginal

_EPS = 1e-11


# ---------------------------------------------------------------------------
# dense simplex
# ---------------------------------------------------------------------------


def simplex_solve(A: np.ndarray, b: np.ndarray, c: np.ndarray,
                  maximize: bool = False) -> tuple[float, np.ndarray]:
    """Solve min/max c.x subject to A x = b, x >= 0.

    Returns (objective value, optimal basic solution). Raises Infeasible or
    Unbounded. Two-phase tableau with Bland's pivoting rule.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).copy()
    c = np.asarray(c, dtype=float)
    if maximize:
        c = -c
    m, n = A.shape
    A = A.copy()
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    # Phase 1 tableau: [A | I | b], minimize the artificial sum.
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    basis = list(range(n, n + m))
    # reduced costs for phase-1 objective
    T[m, :n] = -A.sum(axis=0)
    T[m, -1] = -b.sum()

    _pivot_loop(T, basis, n + m)
    if T[m, -1] < -1e-9:
        raise Infeasible("phase 1 optimum positive: no feasible point")

    # Drive artificials out of the basis or drop redundant rows. A redundant
    # row holds only accumulated rounding noise in the structural columns;
    # pivoting on such noise would divide the row by it and corrupt the
    # tableau, so only well-scaled pivot elements qualify.
    pivot_floor = 1e-7 * max(1.0, float(np.max(np.abs(T[:m, :n]))))
    keep_rows = []
    for i in range(m):
        if basis[i] >= n:
            row = T[i, :n]
            j = int(np.argmax(np.abs(row)))
            if abs(row[j]) <= pivot_floor:
                continue  # redundant constraint
            _pivot(T, i, j, basis)
        keep_rows.append(i)

    rows = [i for i in keep_rows]
    T2 = np.zeros((len(rows) + 1, n + 1))
    T2[:len(rows), :n] = T[rows][:, :n]
    T2[:len(rows), -1] = T[rows][:, -1]
    basis2 = [basis[i] for i in rows]
    # phase-2 reduced costs
    T2[-1, :n] = c
    T2[-1, -1] = 0.0
    for i, bi in enumerate(basis2):
        T2[-1] -= c[bi] * T2[i]

    # tiny negative basic values are pivot drift
    np.clip(T2[:len(rows), -1], 0.0, None, out=T2[:len(rows), -1])
    _pivot_loop(T2, basis2, n)

    x = np.zeros(n)
    for i, bi in enumerate(basis2):
        x[bi] = T2[i, -1]
    if float(x.min()) < -1e-8:
        raise NumericalError(f"simplex produced negative basic value {x.min()}")
    np.clip(x, 0.0, None, out=x)
    value = float(c @ x)
    return (-value if maximize else value), x


def _pivot_loop(T: np.ndarray, basis: list[int], ncols: int) -> None:
    m = T.shape[0] - 1
    for _ in range(200000):
        # Bland: entering = smallest index with negative reduced cost.
        cands = np.flatnonzero(T[m, :ncols] < -_EPS)
        if cands.size == 0:
            return
        enter = int(cands[0])
        col = T[:m, enter]
        ratios = np.full(m, np.inf)
        pos = col > _EPS
        ratios[pos] = T[:m, -1][pos] / col[pos]
        best = np.inf
        leave = -1
        for i in range(m):
            if ratios[i] < best - 1e-15 or (
                    ratios[i] <= best + 1e-15 and leave >= 0 and basis[i] < basis[leave]):
                best = ratios[i]
                leave = i
        if leave < 0 or not np.isfinite(best):
            raise Unbounded("unbounded direction in a supposedly bounded program")
        _pivot(T, leave, enter, basis)
    raise Unbounded("simplex did not terminate")


def _pivot(T: np.ndarray, row: int, col: int, basis: list[int]) -> None:
    T[row] /= T[row, col]
    piv = T[row]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * piv
    basis[row] = col


# ---------------------------------------------------------------------------
# the discrete coupling polytope
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CouplingPolytope:
    """Martingale couplings of two finitely supported probabilities.

    Variables pi[i, j] >= 0 with row sums p_i, column sums w_j and
    conditional-mean constraints sum_j pi[i, j] b_j = p_i a_i. Feasible iff
    the marginals are in convex order (Strassen).
    """

    a: tuple[float, ...]
    p: tuple[float, ...]
    b: tuple[float, ...]
    w: tuple[float, ...]

    @staticmethod
    def from_marginals(mu1: DiscreteMarginal, mu2: DiscreteMarginal) -> "CouplingPolytope":
        return CouplingPolytope(mu1.atoms, mu1.weights, mu2.atoms, mu2.weights)

    @property
    def n(self) -> int:
        return len(self.a)

    @property
    def m(self) -> int:
        return len(self.b)

    def equality_system(self) -> tuple[np.ndarray, np.ndarray]:
        n, m = self.n, self.m
        A = np.zeros((2 * n + m, n * m))
        rhs = np.zeros(2 * n + m)
        for i in range(n):
            A[i, i * m:(i + 1) * m] = 1.0
            rhs[i] = self.p[i]
        for j in range(m):
            A[n + j, j::m] = 1.0
            rhs[n + j] = self.w[j]
        barr = np.asarray(self.b)
        for i in range(n):
            A[n + m + i, i * m:(i + 1) * m] = barr
            rhs[n + m + i] = self.p[i] * self.a[i]
        return A, rhs


def lp_max(polytope: CouplingPolytope, objective: np.ndarray) -> tuple[float, np.ndarray]:
    """Maximize sum objective[i, j] * pi[i, j] over the coupling polytope."""
    n, m = polytope.n, polytope.m
    if n * m > 10_000:
        raise CapError(f"LP size {n}x{m} exceeds the 1e4 variable cap")
    objective = np.asarray(objective, dtype=float)
    if objective.shape != (n, m):
        raise ValidationError(f"objective must be {n}x{m}")
    A, rhs = polytope.equality_system()
    value, x = simplex_solve(A, rhs, objective.ravel(), maximize=True)
    pi = x.reshape(n, m)
    resid = max(float(np.max(np.abs(A @ x - rhs))), 0.0)
    if resid > 1e-10:
        raise Infeasible(f"constraint residual {resid} above 1e-10")
    return value, pi


def hull_membership(vertices: Sequence[np.ndarray], x: np.ndarray,
                    slack_tol: float = 1e-8) -> tuple[bool, np.ndarray | None]:
    """Is x a convex combination of the vertices, within slack_tol per coordinate?

    Solves the feasibility LP {rho >= 0, sum rho = 1, V' rho = x} with elastic
    slacks and checks the per-coordinate residual of the best point found.
    """
    V = np.asarray(vertices, dtype=float)
    if V.ndim != 2:
        raise ValidationError("vertices must form a 2-D array")
    K, n = V.shape
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValidationError(f"point must have dimension {n}")
    # columns: rho (K), s+ (n), s- (n)
    A = np.zeros((n + 1, K + 2 * n))
    A[:n, :K] = V.T
    A[:n, K:K + n] = np.eye(n)
    A[:n, K + n:] = -np.eye(n)
    A[n, :K] = 1.0
    rhs = np.concatenate([x, [1.0]])
    c = np.concatenate([np.zeros(K), np.ones(2 * n)])
    try:
        _, sol = simplex_solve(A, rhs, c, maximize=False)
    except Infeasible:
        return False, None
    rho = sol[:K]
    ssum = rho.sum()
    if ssum <= 0:
        return False, None
    rho = np.maximum(rho, 0.0) / ssum
    resid = V.T @ rho - x
    if float(np.max(np.abs(resid))) <= slack_tol:
        return True, rho
    return False, None


# ---------------------------------------------------------------------------
# direct concave maximization over the coupling polytope
# ---------------------------------------------------------------------------


def direct_concave_max(polytope: CouplingPolytope, spec: GainSpec,
                       restarts: int = 20, seed: int = 0,
                       grad_tol: float = 1e-10, max_iter: int = 2000,
                       ) -> tuple[float, np.ndarray]:
    """Maximize the conditional-gain objective directly over the polytope.

    Objective: sum_i p_i phi(sum_j pi[i,j] gamma(b_j) / p_i - gamma(a_i)),
    concave in pi. Projected gradient on the affine feasible set, active-set
    freeze for nonnegativity, step halving, best of seeded random restarts.
    """
    n, m = polytope.n, polytope.m
    if n > 4 or m > 6:
        raise CapError("direct oracle capped at n <= 4, m <= 6")
    A, rhs = polytope.equality_system()
    nm = n * m
    p = np.asarray(polytope.p)
    ga = np.array([spec.gamma(a) for a in polytope.a])
    gb = np.array([spec.gamma(bj) for bj in polytope.b])
    phi = spec.phi

    def value(pi_flat: np.ndarray) -> float:
        pi = pi_flat.reshape(n, m)
        u = pi @ gb / p - ga
        return float(sum(p[i] * phi(max(u[i], 0.0)) for i in range(n)))

    def gradient(pi_flat: np.ndarray) -> np.ndarray:
        pi = pi_flat.reshape(n, m)
        u = pi @ gb / p - ga
        dphi = np.array([phi.derivative(max(ui, 0.0)) for ui in u])
        return (dphi[:, None] * gb[None, :]).ravel()

    null_cache: dict[bytes, np.ndarray] = {}

    def null_basis(frozen: np.ndarray) -> np.ndarray:
        key = frozen.tobytes()
        if key not in null_cache:
            rows = [A]
            idx = np.flatnonzero(frozen)
            if idx.size:
                eye = np.zeros((idx.size, nm))
                eye[np.arange(idx.size), idx] = 1.0
                rows.append(eye)
            M = np.vstack(rows)
            _, s, vh = np.linalg.svd(M)
            rank = int(np.sum(s > 1e-12 * max(1.0, s[0] if s.size else 1.0)))
            null_cache[key] = vh[rank:].T
        return null_cache[key]

    rng = np.random.default_rng(seed)
    best_val = -np.inf
    best_pi = None
    for restart in range(restarts):
        obj = rng.standard_normal((n, m))
        try:
            _, pi0 = lp_max(polytope, obj)
        except Infeasible:
            raise
        x = pi0.ravel().copy()
        fx = value(x)
        stall = 0
        for _ in range(max_iter):
            g = gradient(x)
            frozen = np.zeros(nm, dtype=bool)
            d = None
            for _ in range(nm + 1):
                N = null_basis(frozen)
                if N.shape[1] == 0:
                    d = np.zeros(nm)
                    break
                d = N @ (N.T @ g)
                newly = (~frozen) & (x <= 1e-12) & (d < -1e-12)
                if not newly.any():
                    break
                frozen |= newly
            dn = float(np.linalg.norm(d))
            if dn <= grad_tol:
                break
            neg = d < -1e-15
            tmax = float(np.min(x[neg] / -d[neg])) if neg.any() else 1.0
            tmax = min(max(tmax, 0.0), 1e6)
            if tmax <= 0.0:
                break
            t = tmax
            improved = False
            for _ in range(80):
                xn = np.maximum(x + t * d, 0.0)
                fn = value(xn)
                if fn > fx + 1e-4 * t * dn * dn:
                    x, fx = xn, fn
                    improved = True
                    break
                t *= 0.5
            if not improved:
                stall += 1
                if stall >= 3:
                    break
            else:
                stall = 0
        if fx > best_val + 1e-15:
            best_val = fx
            best_pi = x.reshape(n, m).copy()
    if best_pi is None:
        raise Infeasible("no feasible start produced")
    return best_val, best_pi


# ---------------------------------------------------------------------------
# sub-measure LP (oracle for the connected-part extremal property)
# ---------------------------------------------------------------------------


def submeasure_extremum(positions: Sequence[float], masses: Sequence[float],
                        mass: float, first_moment: float,
                        phi: Callable[[float], float], sense: str = "max",
                        ) -> float:
    """LP value of optimizing sum mu_k phi(x_k) over discrete sub-measures.

    Feasible set: 0 <= mu_k <= masses_k, sum mu_k = mass,
    sum mu_k x_k = first_moment.
    """
    xs = np.asarray(positions, dtype=float)
    ms = np.asarray(masses, dtype=float)
    k = xs.size
    # variables: mu (k), slack s (k) with mu + s = masses
    A = np.zeros((k + 2, 2 * k))
    A[:k, :k] = np.eye(k)
    A[:k, k:] = np.eye(k)
    A[k, :k] = 1.0
    A[k + 1, :k] = xs
    rhs = np.concatenate([ms, [mass, first_moment]])
    c = np.concatenate([np.array([phi(x) for x in xs]), np.zeros(k)])
    val, _ = simplex_solve(A, rhs, c, maximize=(sense == "max"))
    return val
