from __future__ import annotations

import random
from fractions import Fraction

import pytest

from versal.arith import QQ, RatFunc, TruncatedPoly, UniPoly, q, render_q
from versal.errors import InternalError, ValidationError


def test_q_coercion():
    assert q(3) == Fraction(3)
    assert q("2/5") == Fraction(2, 5)
    assert q(Fraction(-7, 3)) == Fraction(-7, 3)
    with pytest.raises(ValidationError):
        q(0.5)


def test_render_q():
    assert render_q(QQ(7)) == "7"
    assert render_q(QQ(-3, 2)) == "-3/2"
    assert render_q(QQ(0)) == "0"


class TestUniPoly:
    def test_basic_ops(self):
        x = UniPoly.x()
        p = (x + UniPoly.const(1)) * (x - UniPoly.const(1))
        assert p == x * x - UniPoly.one()
        assert p.degree == 2
        assert p.eval(QQ(3)) == QQ(8)

    def test_degree_of_zero(self):
        assert UniPoly.zero().degree == -1

    def test_divmod_exact(self):
        x = UniPoly.x()
        num = x * x * x - UniPoly.const(8)
        den = x - UniPoly.const(2)
        quo, rem = divmod(num, den)
        assert rem == UniPoly.zero()
        assert quo * den == num
        assert num.exact_div(den) == quo

    def test_exact_div_raises_on_remainder(self):
        x = UniPoly.x()
        with pytest.raises(InternalError):
            (x * x + UniPoly.one()).exact_div(x - UniPoly.const(1))

    def test_gcd_frozen(self):
        x = UniPoly.x()
        a = x * x - UniPoly.one()            # (x-1)(x+1)
        b = x * x - x.scale(QQ(2)) + UniPoly.one()   # (x-1)^2
        g = a.gcd(b)
        assert g == x - UniPoly.const(1)

    def test_gcd_coprime(self):
        x = UniPoly.x()
        assert (x * x + UniPoly.one()).gcd(x) == UniPoly.one()

    def test_derivative(self):
        x = UniPoly.x()
        p = x * x * x + x.scale(QQ(5))
        assert p.derivative() == x * x * UniPoly.const(3) + UniPoly.const(5)

    def test_taylor_shift(self):
        x = UniPoly.x()
        p = x * x
        sh = p.taylor_shift(QQ(1))      # (x+1)^2
        assert sh == x * x + x.scale(QQ(2)) + UniPoly.one()
        for v in (QQ(0), QQ(2), QQ(-5, 3)):
            assert sh.eval(v) == p.eval(v + 1)

    def test_render(self):
        x = UniPoly.x()
        p = x * x - x.scale(QQ(1, 2)) + UniPoly.const(3)
        assert p.render("x") == "x^2 - 1/2*x + 3"
        assert UniPoly.zero().render("x") == "0"

    def test_ring_axioms_random(self):
        rng = random.Random(20240211)

        def rand_poly():
            deg = rng.randrange(0, 5)
            return UniPoly([QQ(rng.randrange(-9, 10)) for _ in range(deg + 1)])

        for _ in range(60):
            a, b, c = rand_poly(), rand_poly(), rand_poly()
            assert a * (b + c) == a * b + a * c
            assert (a * b) * c == a * (b * c)
            assert a + b == b + a
            g = a.gcd(b)
            if g.degree >= 0 and a != UniPoly.zero():
                _, rem = divmod(a, g)
                assert rem == UniPoly.zero()


class TestRatFunc:
    def test_normal_form(self):
        x = UniPoly.x()
        r = RatFunc(x * x - UniPoly.one(), x - UniPoly.const(1))
        assert r == RatFunc(x + UniPoly.one(), UniPoly.one())
        assert r.den.monic() == r.den

    def test_field_ops(self):
        x = RatFunc.x()
        one = RatFunc.one()
        f = one / (x - one)
        g = one / (x + one)
        s = f + g
        # 1/(x-1) + 1/(x+1) = 2x/(x^2-1), frozen by hand
        two_x = RatFunc(UniPoly([QQ(0), QQ(2)]), UniPoly.one())
        assert s == two_x / (x * x - one)
        assert f * g == one / (x * x - one)
        assert (f - f) == RatFunc.zero()
        assert f.inverse() == x - one

    def test_derivative_quotient_rule(self):
        x = RatFunc.x()
        f = RatFunc.one() / x
        # d(1/x) = -1/x^2
        assert f.derivative() == -(RatFunc.one() / (x * x))

    def test_eval_and_pole(self):
        x = RatFunc.x()
        f = (x + RatFunc.one()) / (x - RatFunc.one())
        assert f.eval(QQ(3)) == QQ(2)
        with pytest.raises(ValidationError):
            f.eval(QQ(1))

    def test_field_axioms_random(self):
        rng = random.Random(77)

        def rand_rf():
            num = UniPoly([QQ(rng.randrange(-6, 7)) for _ in range(rng.randrange(1, 4))])
            while True:
                den = UniPoly([QQ(rng.randrange(-6, 7)) for _ in range(rng.randrange(1, 4))])
                if den != UniPoly.zero():
                    return RatFunc(num, den)

        for _ in range(40):
            a, b, c = rand_rf(), rand_rf(), rand_rf()
            assert (a + b) * c == a * c + b * c
            assert (a * b).derivative() == a.derivative() * b + a * b.derivative()
            if a != RatFunc.zero():
                assert a * a.inverse() == RatFunc.one()


class TestTruncatedPoly:
    def test_cube_frozen(self):
        one = TruncatedPoly.const(QQ(1), nvars=2, order=2)
        t1 = TruncatedPoly.variable(0, nvars=2, order=2)
        t2 = TruncatedPoly.variable(1, nvars=2, order=2)
        f = one + t1 + t2
        cube = f * f * f
        assert cube.terms == {
            (0, 0): QQ(1),
            (1, 0): QQ(3),
            (0, 1): QQ(3),
            (2, 0): QQ(3),
            (1, 1): QQ(6),
            (0, 2): QQ(3),
        }

    def test_geometric_inverse_frozen(self):
        one = TruncatedPoly.const(QQ(1), nvars=1, order=4)
        t = TruncatedPoly.variable(0, nvars=1, order=4)
        inv = (one - t).inverse()
        assert inv.terms == {(k,): QQ(1) for k in range(5)}

    def test_inverse_requires_unit(self):
        t = TruncatedPoly.variable(0, nvars=1, order=3)
        with pytest.raises(ValidationError):
            t.inverse()

    def test_truncate_and_parts(self):
        one = TruncatedPoly.const(QQ(1), nvars=1, order=3)
        t = TruncatedPoly.variable(0, nvars=1, order=3)
        f = (one + t) * (one + t)
        assert f.homogeneous_part(1).terms == {(1,): QQ(2)}
        assert f.truncate(1).terms == {(0,): QQ(1), (1,): QQ(2)}
        assert f.max_degree() == 2

    def test_render_grlex(self):
        one = TruncatedPoly.const(QQ(1), nvars=2, order=2)
        t1 = TruncatedPoly.variable(0, nvars=2, order=2)
        t2 = TruncatedPoly.variable(1, nvars=2, order=2)
        f = one + t2 + t1 * t2
        assert f.render() == "1 + t2 + t1*t2"

    def test_ring_axioms_random(self):
        rng = random.Random(424242)

        def rand_tp():
            terms = {}
            for _ in range(rng.randrange(0, 6)):
                e = (rng.randrange(0, 3), rng.randrange(0, 3))
                terms[e] = QQ(rng.randrange(-5, 6))
            return TruncatedPoly(2, 3, terms)

        for _ in range(50):
            a, b, c = rand_tp(), rand_tp(), rand_tp()
            assert a * (b + c) == a * b + a * c
            assert (a * b) * c == a * (b * c)
            assert a * b == b * a

    def test_inverse_random(self):
        rng = random.Random(99)
        for _ in range(20):
            terms = {(0, 0): QQ(rng.choice([1, -1, 2, 3]))}
            for _ in range(rng.randrange(0, 5)):
                e = (rng.randrange(0, 3), rng.randrange(0, 3))
                if e != (0, 0):
                    terms[e] = QQ(rng.randrange(-4, 5))
            f = TruncatedPoly(2, 3, terms)
            inv = f.inverse()
            assert f * inv == TruncatedPoly.const(QQ(1), nvars=2, order=3)
