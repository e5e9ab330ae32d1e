"""Dense simplex, coupling polytope LPs, hull membership, direct maximization."""

import itertools

import numpy as np
import pytest

from nlmot import (
    CouplingPolytope,
    GainSpec,
    Sqrt,
    VixLog,
    direct_concave_max,
    hull_membership,
    is_curtain,
    lp_max,
    simplex_solve,
    upper_bound,
)
from nlmot.curtain import matrix_to_coupling
from nlmot.errors import Infeasible
from conftest import flat_two_by_four, random_discrete_pair


def unique_coupling_polytope():
    """2x2 marginals admitting exactly one martingale coupling."""
    d, u, D, U = 0.8, 1.3, 0.4, 1.6
    qd = (d - D) / (U - D)
    qu = (u - D) / (U - D)
    pd = (u - 1.0) / (u - d)
    pu = 1.0 - pd
    wD = pd * (1 - qd) + pu * (1 - qu)
    pol = CouplingPolytope((d, u), (pd, pu), (D, U), (wD, 1.0 - wD))
    pi_unique = np.array([[pd * (1 - qd), pd * qd], [pu * (1 - qu), pu * qu]])
    return pol, pi_unique


class TestSimplex:
    def test_tiny_lp(self):
        A = np.array([[1.0, 1.0, 1.0]])
        b = np.array([1.0])
        c = np.array([2.0, 1.0, 0.0])
        val, x = simplex_solve(A, b, c, maximize=True)
        assert val == pytest.approx(2.0)
        assert x[0] == pytest.approx(1.0)

    def test_infeasible(self):
        A = np.array([[1.0], [1.0]])
        b = np.array([1.0, 2.0])
        with pytest.raises(Infeasible):
            simplex_solve(A, b, np.array([1.0]))

    def test_degenerate_transportation(self, rng):
        # equal supplies/demands create massive degeneracy; Bland must cope
        n = 5
        A_rows = []
        for i in range(n):
            row = np.zeros(n * n)
            row[i * n:(i + 1) * n] = 1.0
            A_rows.append(row)
        for j in range(n):
            row = np.zeros(n * n)
            row[j::n] = 1.0
            A_rows.append(row)
        A = np.array(A_rows)
        b = np.ones(2 * n) / n
        for _ in range(5):
            c = rng.standard_normal(n * n)
            val, x = simplex_solve(A, b, c)
            assert np.max(np.abs(A @ x - b)) < 1e-10
            # optimal assignment lower bound: permutation matrices are feasible
            perm_best = min(sum(c[i * n + p[i]] for i in range(n)) / n
                            for p in itertools.permutations(range(n)))
            assert val <= perm_best + 1e-9


class TestCouplingLP:
    def test_unique_coupling_any_objective(self, rng):
        pol, pi_unique = unique_coupling_polytope()
        for _ in range(10):
            _, pi = lp_max(pol, rng.standard_normal((2, 2)))
            assert np.max(np.abs(pi - pi_unique)) < 1e-10

    def test_zero_objective(self):
        pol, _ = unique_coupling_polytope()
        val, _ = lp_max(pol, np.zeros((2, 2)))
        assert val == pytest.approx(0.0, abs=1e-12)

    def test_infeasible_signals_convex_order_failure(self):
        pol = CouplingPolytope((1.0,), (1.0,), (0.0, 1.0), (0.5, 0.5))
        # mean of mu2 is 0.5 != 1.0: no martingale transport
        with pytest.raises(Infeasible):
            lp_max(pol, np.zeros((1, 2)))

    def test_weak_duality_hand_dual_2x2(self):
        pol, _ = unique_coupling_polytope()
        obj = np.array([[1.0, 2.0], [3.0, 4.0]])
        val, _ = lp_max(pol, obj)
        # dual feasible point: y_row_i + y_col_j + y_mart_i * b_j >= obj_ij
        # (maximization primal => dual gives an upper bound)
        b = pol.b
        y_row = np.array([0.0, 0.0])
        y_mart = np.array([(2.0 - 1.0) / (b[1] - b[0]),
                           (4.0 - 3.0) / (b[1] - b[0])])
        y_col = np.array([max(obj[i, 0] - y_row[i] - y_mart[i] * b[0]
                              for i in range(2)) for _ in range(1)])
        y_col = np.array([y_col[0], max(obj[i, 1] - y_row[i] - y_mart[i] * b[1]
                                        for i in range(2))])
        for i in range(2):
            for j in range(2):
                assert y_row[i] + y_col[j] + y_mart[i] * b[j] >= obj[i, j] - 1e-12
        dual_value = (y_row @ pol.p + y_col @ pol.w
                      + y_mart @ (np.array(pol.p) * np.array(pol.a)))
        assert val <= dual_value + 1e-10

    def test_tensor_objective_optimizer_is_curtain(self, rng):
        for _ in range(15):
            n = int(rng.integers(2, 5))
            m = int(rng.integers(n, 7))
            mu1, mu2 = random_discrete_pair(rng, n, m)
            pol = CouplingPolytope.from_marginals(mu1, mu2)
            g = rng.permutation(n) + rng.uniform(0.1, 0.9, n)
            f = np.array(mu2.atoms) ** 2
            _, pi = lp_max(pol, np.outer(g, f))
            nu = matrix_to_coupling(mu1, mu2, pi)
            assert is_curtain(nu)


class TestHullMembership:
    def test_vertex_and_midpoint(self):
        V = [np.array([0.0, 0.0]), np.array([2.0, 0.0]), np.array([0.0, 2.0])]
        ok, w = hull_membership(V, np.array([2.0, 0.0]))
        assert ok and w[1] == pytest.approx(1.0, abs=1e-10)
        ok, w = hull_membership(V, np.array([1.0, 1.0]))
        assert ok and w[0] == pytest.approx(0.0, abs=1e-8)

    def test_outside_bounding_box(self):
        V = [np.array([0.0, 0.0]), np.array([1.0, 0.0])]
        ok, _ = hull_membership(V, np.array([2.0, 1.0]))
        assert not ok


class TestDirectConcaveMax:
    def test_singleton_polytope(self):
        pol, pi_unique = unique_coupling_polytope()
        spec = GainSpec(VixLog(1.0), Sqrt())
        val, pi = direct_concave_max(pol, spec, restarts=5, seed=1)
        ga = spec.gamma
        u = [float(pi_unique[i] @ [ga(b) for b in pol.b]) / pol.p[i] - ga(pol.a[i])
             for i in range(2)]
        expect = sum(pol.p[i] * spec.phi(max(u[i], 0.0)) for i in range(2))
        assert val == pytest.approx(expect, abs=1e-10)

    def test_flat_instance_attains_bound(self):
        mu1, mu2, _, spec = flat_two_by_four()
        pol = CouplingPolytope.from_marginals(mu1, mu2)
        val, _ = direct_concave_max(pol, spec, restarts=20, seed=0)
        ub = upper_bound(mu1, mu2.as_measure(), spec)
        assert val == pytest.approx(ub, abs=1e-7)
        assert val <= ub + 1e-9

    def test_never_beats_bound(self, rng):
        spec = GainSpec(VixLog(1.0), Sqrt())
        for _ in range(10):
            mu1, mu2 = random_discrete_pair(rng, 3, 5)
            pol = CouplingPolytope.from_marginals(mu1, mu2)
            val, _ = direct_concave_max(pol, spec, restarts=8, seed=3)
            assert val <= upper_bound(mu1, mu2.as_measure(), spec) + 1e-9
