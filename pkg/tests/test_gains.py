"""Gain catalog: exact integrals, inverses, conjugates."""

import math

import pytest

from nlmot import (
    Affine,
    ConcavePower,
    GainSpec,
    Identity,
    PieceMeasure,
    PiecewiseLinearConcave,
    PiecewiseLinearConvex,
    PowerAbs,
    Quadratic,
    Sqrt,
    Uniform,
    VixLog,
)
from nlmot.errors import DomainViolation, NotInvertible, ValidationError


class TestGammaIntegrals:
    def test_vixlog_atom_at_e(self):
        spec = VixLog(2.0)
        m = PieceMeasure.point(math.e)
        assert spec.integrate(m) == pytest.approx(-1.0, abs=1e-14)

    def test_vixlog_uniform(self):
        # integral of ln on [1,2] is 2 ln 2 - 1
        spec = VixLog(2.0)
        m = PieceMeasure.uniform(1.0, 2.0)
        assert spec.integrate(m) == pytest.approx(-(2 * math.log(2) - 1), abs=1e-14)

    def test_quadratic_uniform(self):
        m = PieceMeasure.uniform(-1.0, 1.0)
        assert Quadratic().integrate(m) == pytest.approx(1 / 3, abs=1e-14)

    def test_affine(self):
        m = PieceMeasure.uniform(0.0, 2.0)
        assert Affine(3.0, -1.0).integrate(m) == pytest.approx(3.0 * 1.0 - 1.0)

    def test_power_integer_exact(self):
        m = PieceMeasure.uniform(-1.0, 2.0)
        # integral of |x|^3 / 3 over [-1, 2]: (1/4 + 16/4) / 3
        assert PowerAbs(3.0).integrate(m) == pytest.approx((0.25 + 4.0) / 3, abs=1e-13)

    def test_power_fractional_adaptive(self):
        m = PieceMeasure.uniform(0.5, 2.0)
        p = 2.5
        exact = (2.0 ** 3.5 - 0.5 ** 3.5) / 3.5 / 1.5
        assert PowerAbs(p).integrate(m) == pytest.approx(exact, rel=1e-12)

    def test_pwl_convex_trapezoid(self):
        g = PiecewiseLinearConvex((0.0, 1.0), (-1.0, 0.0, 2.0), value0=0.5)
        m = PieceMeasure.uniform(-1.0, 2.0)
        # value: 0.5+ (x) for x<0 slope -1 anchored at 0; flat to 1; slope 2 after
        exact = ((0.5 + 1.5) / 2 * 1.0 + 0.5 * 1.0 + (0.5 + 2.5) / 2 * 1.0) / 3.0
        assert g.integrate(m) == pytest.approx(exact, abs=1e-13)

    def test_vixlog_domain_violation(self):
        with pytest.raises(DomainViolation):
            VixLog(1.0).integrate(PieceMeasure.uniform(-1.0, 1.0))
        with pytest.raises(DomainViolation):
            VixLog(1.0).integrate(PieceMeasure.point(-2.0))

    def test_linearity(self, rng):
        spec = VixLog(1.5)
        a = PieceMeasure([Uniform(0.5, 1.5, 0.7)])
        b = PieceMeasure([Uniform(1.0, 3.0, 0.5)])
        lhs = spec.integrate(a + b)
        rhs = spec.integrate(a) + spec.integrate(b)
        assert lhs == pytest.approx(rhs, abs=1e-12 * (1 + abs(rhs)))

    def test_jensen(self, rng):
        specs = [VixLog(1.0), Quadratic(), PowerAbs(1.7), Affine(2.0, 1.0)]
        for _ in range(30):
            lo = rng.uniform(0.2, 1.0)
            hi = lo + rng.uniform(0.2, 2.0)
            m = PieceMeasure([Uniform(lo, hi, 0.6), Atom_(rng.uniform(lo, hi), 0.4)])
            for g in specs:
                assert g.integrate(m) >= g(m.mean) - 1e-10


def Atom_(x, mass):
    from nlmot import Atom
    return Atom(float(x), float(mass))


class TestPhi:
    def test_inverse_roundtrip(self, rng):
        for phi in (Sqrt(), ConcavePower(0.3), ConcavePower(0.8), Identity(),
                    PiecewiseLinearConcave((1.0, 2.0), (3.0, 2.0, 0.5))):
            for v in rng.uniform(0.0, 1e6, 25):
                u = phi.inverse(phi(v))
                assert u == pytest.approx(v, rel=1e-12, abs=1e-9)

    def test_sqrt_inverse(self):
        assert Sqrt().inverse(3.0) == 9.0

    def test_negative_clamp(self):
        assert Sqrt()(-1e-13) == 0.0
        with pytest.raises(DomainViolation):
            Sqrt()(-1e-6)

    def test_not_invertible(self):
        phi = PiecewiseLinearConcave((1.0,), (1.0, 0.0))
        assert not phi.invertible
        with pytest.raises(NotInvertible):
            phi.inverse(0.5)

    def test_monotone_concave_validation(self):
        with pytest.raises(ValidationError):
            PiecewiseLinearConcave((1.0,), (1.0, 2.0))  # increasing slopes
        with pytest.raises(ValidationError):
            PiecewiseLinearConcave((1.0,), (1.0, -0.5))  # decreasing gain


class TestConjugate:
    def test_sqrt_closed_form(self, rng):
        phi = Sqrt()
        for b in rng.uniform(0.0, 10.0, 20):
            assert phi.conjugate(b) == pytest.approx(b * b / 4.0)

    def test_identity(self):
        phi = Identity()
        assert phi.conjugate(1.0) == 0.0
        assert phi.conjugate(0.3) == 0.0
        assert math.isinf(phi.conjugate(1.5))

    def test_power_half_matches_sqrt(self, rng):
        p = ConcavePower(0.5)
        s = Sqrt()
        for b in rng.uniform(0.01, 5.0, 20):
            assert p.conjugate(b) == pytest.approx(s.conjugate(b), rel=1e-12)

    def test_power_fenchel_young(self, rng):
        phi = ConcavePower(0.7)
        for _ in range(30):
            b = rng.uniform(0.05, 3.0)
            u = rng.uniform(0.0, 50.0)
            assert phi.conjugate(b) >= b * u - phi.inverse(u) - 1e-9

    def test_pwl_golden_section(self):
        phi = PiecewiseLinearConcave((1.0,), (2.0, 1.0))
        # inverse is pwl convex: slope 1/2 to u=2, then 1; conjugate at b:
        # sup_u b*u - inv(u); for b in (1/2, 1]: attained at the kink u=2,
        # value 2b - 1
        for b in (0.6, 0.8, 1.0):
            assert phi.conjugate(b) == pytest.approx(2 * b - 1.0, abs=1e-9)
        assert math.isinf(phi.conjugate(1.2))

    def test_derivative_clamped_near_zero(self):
        assert Sqrt().derivative(0.0) == pytest.approx(0.5 / math.sqrt(1e-12))
        assert Sqrt().derivative(4.0) == pytest.approx(0.25)


class TestGainSpec:
    def test_integral_helper(self):
        spec = GainSpec(Quadratic(), Sqrt())
        m = PieceMeasure.uniform(-1.0, 1.0)
        assert spec.gamma_integral(m) == pytest.approx(1 / 3)
