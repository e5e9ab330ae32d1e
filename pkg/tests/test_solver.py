"""Objective evaluation, two-point closed form, finite-support solver."""

import numpy as np
import pytest

from nlmot import (
    Coupling,
    CouplingPolytope,
    DiscreteMarginal,
    GainSpec,
    PieceMeasure,
    Quadratic,
    Sqrt,
    VixLog,
    approx_solve,
    build_curtain,
    compose,
    direct_concave_max,
    dyadic_cuts,
    enumerate_curtains,
    evaluate_J,
    mix,
    solve_finite,
    solve_two_point,
    upper_bound,
    x0_vector,
)
from nlmot.errors import NotConvexOrder, NotNested, NotTwoPoint
from conftest import (
    coarsen,
    flat_two_by_four,
    pair_unif,
    random_discrete_pair,
    three_point,
)


class TestEvaluateJ:
    def test_identity_coupling_gives_phi_zero(self):
        mu1 = three_point()
        spec = GainSpec(Quadratic(), Sqrt())
        nu, _ = build_curtain(mu1, mu1.as_measure(), (0, 1, 2))
        assert evaluate_J(nu, spec) == pytest.approx(spec.phi(0.0), abs=1e-14)

    def test_flat_instance_equals_bound(self):
        mu1, mu2, nu, spec = flat_two_by_four()
        assert evaluate_J(nu, spec) == pytest.approx(
            upper_bound(mu1, mu2.as_measure(), spec), abs=1e-12)

    def test_never_exceeds_bound(self, rng):
        spec = GainSpec(Quadratic(), Sqrt())
        for _ in range(20):
            mu1, mu2 = random_discrete_pair(rng, 3, 5, lo=-2.0, hi=2.0)
            ub = upper_bound(mu1, mu2.as_measure(), spec)
            for nu, _ in enumerate_curtains(mu1, mu2.as_measure()):
                assert evaluate_J(nu, spec) <= ub + 1e-9


class TestTwoPoint:
    def test_equal_marginals(self):
        mu1 = DiscreteMarginal([0.5, 1.5], [0.4, 0.6])
        spec = GainSpec(Quadratic(), Sqrt())
        res = solve_two_point(mu1, mu1.as_measure(), spec)
        assert res.value == pytest.approx(spec.phi(0.0), abs=1e-12)
        assert res.x[0] == pytest.approx(spec.gamma(0.5), abs=1e-12)

    def test_flat_instance_hits_bound(self):
        mu1, mu2, _, spec = flat_two_by_four()
        res = solve_two_point(mu1, mu2.as_measure(), spec)
        x0 = x0_vector(mu1, mu2.as_measure(), spec)
        assert res.flat
        assert res.x[0] == pytest.approx(x0[0], abs=1e-12)
        assert res.value == pytest.approx(res.upper_bound, abs=1e-9)
        res.coupling.validate(mu2.as_measure())

    def test_against_grid_oracle(self, rng):
        for trial in range(8):
            mu1, mu2 = random_discrete_pair(rng, 2, 4)
            spec = GainSpec(VixLog(2.0), Sqrt())
            res = solve_two_point(mu1, mu2.as_measure(), spec)
            nu_a, _ = build_curtain(mu1, mu2.as_measure(), (0, 1))
            nu_b, _ = build_curtain(mu1, mu2.as_measure(), (1, 0))
            xs_ = sorted([spec.gamma.integrate(nu_a.rows[0]),
                          spec.gamma.integrate(nu_b.rows[0])])
            g2 = spec.gamma.integrate(mu2.as_measure())
            p1, p2 = mu1.weights
            ga1, ga2 = spec.gamma(mu1.atoms[0]), spec.gamma(mu1.atoms[1])
            xs = np.linspace(xs_[0], xs_[1], 1_000_001)
            u1 = np.maximum(xs - ga1, 0.0)
            u2 = np.maximum((g2 - p1 * xs) / p2 - ga2, 0.0)
            vals = p1 * np.sqrt(u1) + p2 * np.sqrt(u2)
            assert res.value == pytest.approx(float(vals.max()), abs=1e-6)

    def test_needs_two_atoms(self):
        spec = GainSpec(Quadratic(), Sqrt())
        with pytest.raises(NotTwoPoint):
            solve_two_point(three_point(), pair_unif(), spec)

    def test_convex_order_required(self):
        spec = GainSpec(Quadratic(), Sqrt())
        mu1 = DiscreteMarginal([-3.0, 3.0], [0.5, 0.5])
        with pytest.raises(NotConvexOrder):
            solve_two_point(mu1, pair_unif(), spec)


class TestSolveFinite:
    def test_matches_two_point(self, rng):
        spec = GainSpec(VixLog(1.0), Sqrt())
        for _ in range(6):
            mu1, mu2 = random_discrete_pair(rng, 2, 5)
            r2 = solve_two_point(mu1, mu2.as_measure(), spec)
            rf = solve_finite(mu1, mu2.as_measure(), spec)
            assert rf.value == pytest.approx(r2.value, abs=1e-8)

    def test_x0_shortcircuit_on_flat_instance(self):
        mu1, mu2, _, spec = flat_two_by_four()
        res = solve_finite(mu1, mu2.as_measure(), spec)
        assert res.method == "x0-feasible"
        assert res.flat
        assert res.gap == pytest.approx(0.0, abs=1e-10)
        res.coupling.validate(mu2.as_measure())

    def test_weights_on_simplex_and_value_consistent(self, rng):
        spec = GainSpec(Quadratic(), Sqrt())
        ga = spec.gamma
        for _ in range(6):
            mu1, mu2 = random_discrete_pair(rng, 3, 6)
            res = solve_finite(mu1, mu2.as_measure(), spec)
            assert res.weights.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all(res.weights >= -1e-15)
            recomputed = sum(
                p * spec.phi(max(x - ga(a), 0.0))
                for p, a, x in zip(mu1.weights, mu1.atoms, res.x))
            assert res.value == pytest.approx(recomputed, abs=1e-10)
            assert res.gap >= -1e-9

    def test_fw_certificate_recomputed(self, rng):
        spec = GainSpec(Quadratic(), Sqrt())
        found = 0
        while found < 4:
            mu1, mu2 = random_discrete_pair(rng, 3, 6)
            res = solve_finite(mu1, mu2.as_measure(), spec)
            if res.method != "frank-wolfe":
                continue
            found += 1
            from nlmot.solver import build_vertex_set
            vs = build_vertex_set(mu1, mu2.as_measure(), spec)
            p = np.array(mu1.weights)
            w = p * np.array([spec.phi.derivative(max(x - g, 0.0))
                              for x, g in zip(res.x, vs.gamma_at_atoms)])
            scores = vs.vertices @ w
            gap = float(scores.max() - scores @ res.weights)
            assert gap <= 1e-9 * (1.0 + abs(res.value)) + 1e-12

    def test_min_sense_is_vertex(self, rng):
        spec = GainSpec(Quadratic(), Sqrt())
        for _ in range(6):
            mu1, mu2 = random_discrete_pair(rng, 3, 5)
            res = solve_finite(mu1, mu2.as_measure(), spec, "min")
            vals = [evaluate_J(c, spec)
                    for c, _ in enumerate_curtains(mu1, mu2.as_measure())]
            assert res.value <= min(vals) + 1e-10
            assert np.count_nonzero(res.weights) == 1

    def test_against_direct_oracle(self, rng):
        spec = GainSpec(VixLog(1.0), Sqrt())
        for _ in range(5):
            mu1, mu2 = random_discrete_pair(rng, 3, 5)
            rf = solve_finite(mu1, mu2.as_measure(), spec)
            pol = CouplingPolytope.from_marginals(mu1, mu2)
            dval, _ = direct_concave_max(pol, spec, restarts=20, seed=11)
            assert rf.value == pytest.approx(dval, abs=1e-5)


class TestMix:
    def test_single(self, rng):
        mu1, mu2 = random_discrete_pair(rng, 3, 5)
        nu, _ = build_curtain(mu1, mu2.as_measure(), (0, 1, 2))
        same = mix([nu], [1.0])
        for a, b in zip(same.rows, nu.rows):
            assert a.approx_equal(b, 1e-12)

    def test_midpoint_of_two_point_curtains(self, rng):
        mu1, mu2 = random_discrete_pair(rng, 2, 4)
        spec = GainSpec(Quadratic(), Sqrt())
        nu_a, _ = build_curtain(mu1, mu2.as_measure(), (0, 1))
        nu_b, _ = build_curtain(mu1, mu2.as_measure(), (1, 0))
        half = mix([nu_a, nu_b], [0.5, 0.5])
        xa = spec.gamma.integrate(nu_a.rows[0])
        xb = spec.gamma.integrate(nu_b.rows[0])
        assert spec.gamma.integrate(half.rows[0]) == pytest.approx(
            0.5 * (xa + xb), abs=1e-11)

    def test_preserves_second_marginal(self, rng):
        mu1, mu2 = random_discrete_pair(rng, 3, 6)
        found = enumerate_curtains(mu1, mu2.as_measure())
        w = rng.dirichlet(np.ones(len(found)))
        mixed = mix([c for c, _ in found], list(w))
        mixed.validate(mu2.as_measure())


class TestCompositionMonotonicity:
    def test_coarser_first_marginal_improves(self, rng):
        # J(rho * nu) >= J(nu) for rho a transport from a coarsening
        spec = GainSpec(Quadratic(), Sqrt())
        done = 0
        while done < 30:
            mu1, mu2 = random_discrete_pair(rng, 3, 6)
            mu0 = coarsen(mu1, np.array([int(rng.integers(1, 3))]))
            if mu0 is None:
                continue
            done += 1
            nu, _ = build_curtain(mu1, mu2.as_measure(),
                                  tuple(rng.permutation(mu1.n)))
            rho, _ = build_curtain(mu0, mu1.as_measure(), tuple(range(mu0.n)))
            assert evaluate_J(compose(rho, nu), spec) >= evaluate_J(nu, spec) - 1e-9

    def test_wider_second_marginal_improves(self, rng):
        # J(nu * rho) >= J(nu) for rho a martingale transport out of mu2
        spec = GainSpec(Quadratic(), Sqrt())
        done = 0
        while done < 30:
            mu1, mu2 = random_discrete_pair(rng, 2, 4)
            # widen mu2 by splitting every atom into a centered pair
            eps = float(rng.uniform(0.05, 0.2))
            atoms3, w3 = [], []
            for a, w in zip(mu2.atoms, mu2.weights):
                atoms3 += [a - eps, a + eps]
                w3 += [w / 2, w / 2]
            order = np.argsort(atoms3)
            atoms3 = [atoms3[i] for i in order]
            w3 = [w3[i] for i in order]
            if min(np.diff(atoms3)) < 1e-6:
                continue
            done += 1
            mu3 = DiscreteMarginal(atoms3, w3)
            nu, _ = build_curtain(mu1, mu2.as_measure(),
                                  tuple(rng.permutation(mu1.n)))
            rho, _ = build_curtain(mu2, mu3.as_measure(), tuple(range(mu2.n)))
            assert evaluate_J(compose(nu, rho), spec) >= evaluate_J(nu, spec) - 1e-9


class TestApproxSolve:
    def test_values_nonincreasing(self):
        mu1 = PieceMeasure.uniform(0.5, 1.5)
        mu2 = PieceMeasure.uniform(0.25, 1.75)
        spec = GainSpec(VixLog(1.0), Sqrt())
        levels = [dyadic_cuts(mu1, n) for n in (2, 4)]
        out = approx_solve(mu1, mu2, spec, levels)
        values = [r.value for _, _, r in out]
        assert values[1] <= values[0] + 1e-9

    def test_identity_level(self, rng):
        # first marginal already atomic at cell means: level equals direct solve
        mu1, mu2 = random_discrete_pair(rng, 3, 6)
        spec = GainSpec(Quadratic(), Sqrt())
        cuts = [0.5 * (a1 + a2) for a1, a2 in zip(mu1.atoms, mu1.atoms[1:])]
        out = approx_solve(mu1.as_measure(), mu2.as_measure(), spec, [cuts])
        direct = solve_finite(mu1, mu2.as_measure(), spec)
        assert out[0][2].value == pytest.approx(direct.value, abs=1e-9)

    def test_single_cell_value(self):
        mu1 = PieceMeasure.uniform(0.5, 1.5)
        mu2 = PieceMeasure.uniform(0.25, 1.75)
        spec = GainSpec(VixLog(1.0), Sqrt())
        out = approx_solve(mu1, mu2, spec, [[]])
        g2 = spec.gamma.integrate(mu2)
        expect = spec.phi(max(g2 - spec.gamma(mu1.mean), 0.0))
        assert out[0][2].value == pytest.approx(expect, abs=1e-10)

    def test_not_nested(self):
        mu1 = PieceMeasure.uniform(0.0, 1.0)
        mu2 = PieceMeasure.uniform(-0.5, 1.5)
        spec = GainSpec(Quadratic(), Sqrt())
        with pytest.raises(NotNested):
            approx_solve(mu1, mu2, spec, [[0.5], [0.3, 0.7]])
