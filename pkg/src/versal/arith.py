"""Exact base arithmetic: rationals, univariate polynomials, rational
functions and truncated multivariate power series over Q.

Everything here is immutable by convention and float-free; all
normal forms are canonical so rendered output is byte-stable.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd as _igcd
from typing import Iterable, Iterator

from .errors import InternalError, ValidationError

QQ = Fraction


def q(value) -> Fraction:
    """Coerce an int / str / Fraction into an exact rational."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise ValidationError(f"cannot coerce {value!r} into an exact rational")


def render_q(x: Fraction) -> str:
    """Canonical string for a rational: '7', '-3/2'."""
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


# ---------------------------------------------------------------------------
# univariate polynomials

_ZERO = Fraction(0)
_ONE = Fraction(1)


class UniPoly:
    """Dense univariate polynomial over Q, coefficients low degree first."""

    __slots__ = ("c",)

    def __init__(self, coeffs: Iterable[Fraction] = ()):
        cs = [x if isinstance(x, Fraction) else Fraction(x) for x in coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        self.c = tuple(cs)

    # -- constructors
    @classmethod
    def zero(cls) -> "UniPoly":
        return cls(())

    @classmethod
    def one(cls) -> "UniPoly":
        return cls((_ONE,))

    @classmethod
    def const(cls, a) -> "UniPoly":
        return cls((q(a),))

    @classmethod
    def x(cls) -> "UniPoly":
        return cls((_ZERO, _ONE))

    @classmethod
    def linear(cls, root) -> "UniPoly":
        """The monic linear factor (X - root)."""
        return cls((-q(root), _ONE))

    # -- basic queries
    @property
    def degree(self) -> int:
        """Degree, with deg 0 = -1."""
        return len(self.c) - 1

    def is_zero(self) -> bool:
        return not self.c

    def is_constant(self) -> bool:
        return len(self.c) <= 1

    def leading(self) -> Fraction:
        if not self.c:
            raise InternalError("leading coefficient of the zero polynomial")
        return self.c[-1]

    def coeff(self, i: int) -> Fraction:
        return self.c[i] if 0 <= i < len(self.c) else _ZERO

    # -- ring operations
    def __add__(self, other: "UniPoly") -> "UniPoly":
        a, b = self.c, other.c
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for i, v in enumerate(b):
            out[i] = out[i] + v
        return UniPoly(out)

    def __sub__(self, other: "UniPoly") -> "UniPoly":
        return self + (-other)

    def __neg__(self) -> "UniPoly":
        return UniPoly(tuple(-v for v in self.c))

    def __mul__(self, other: "UniPoly") -> "UniPoly":
        a, b = self.c, other.c
        if not a or not b:
            return UniPoly(())
        out = [_ZERO] * (len(a) + len(b) - 1)
        for i, ai in enumerate(a):
            if ai:
                for j, bj in enumerate(b):
                    if bj:
                        out[i + j] += ai * bj
        return UniPoly(out)

    def scale(self, k) -> "UniPoly":
        k = q(k)
        if k == 0:
            return UniPoly(())
        return UniPoly(tuple(v * k for v in self.c))

    def shift(self, k: int) -> "UniPoly":
        """Multiply by X^k."""
        if self.is_zero():
            return self
        return UniPoly((_ZERO,) * k + self.c)

    def __eq__(self, other) -> bool:
        return isinstance(other, UniPoly) and self.c == other.c

    def __hash__(self) -> int:
        return hash(self.c)

    def __repr__(self) -> str:
        return f"UniPoly({self.render()})"

    # -- euclidean structure
    def divmod(self, den: "UniPoly") -> tuple["UniPoly", "UniPoly"]:
        if den.is_zero():
            raise ValidationError("polynomial division by zero")
        num = list(self.c)
        d = den.c
        dd = len(d) - 1
        lead = d[-1]
        if len(num) <= dd:
            return UniPoly(()), self
        qc = [_ZERO] * (len(num) - dd)
        for i in range(len(num) - 1, dd - 1, -1):
            f = num[i] / lead
            if f:
                qc[i - dd] = f
                for j in range(dd + 1):
                    num[i - dd + j] -= f * d[j]
        return UniPoly(qc), UniPoly(num[:dd])

    __divmod__ = divmod

    def __floordiv__(self, den: "UniPoly") -> "UniPoly":
        return self.divmod(den)[0]

    def __mod__(self, den: "UniPoly") -> "UniPoly":
        return self.divmod(den)[1]

    def exact_div(self, den: "UniPoly") -> "UniPoly":
        quo, rem = self.divmod(den)
        if not rem.is_zero():
            raise InternalError("exact polynomial division left a remainder")
        return quo

    def monic(self) -> "UniPoly":
        if self.is_zero():
            return self
        return self.scale(1 / self.leading())

    def gcd(self, other: "UniPoly") -> "UniPoly":
        """Monic gcd via a primitive PRS over Z (no coefficient blowup)."""
        if self.is_zero():
            return other.monic()
        if other.is_zero():
            return self.monic()
        a = _int_primitive(self.c)
        b = _int_primitive(other.c)
        if len(a) < len(b):
            a, b = b, a
        while b:
            r = _int_prem(a, b)
            a, b = b, _int_prim_part(r)
        return UniPoly(tuple(Fraction(v) for v in a)).monic()

    # -- calculus / evaluation
    def derivative(self) -> "UniPoly":
        return UniPoly(tuple(i * v for i, v in enumerate(self.c) if i))

    def eval(self, at) -> Fraction:
        at = q(at)
        acc = _ZERO
        for v in reversed(self.c):
            acc = acc * at + v
        return acc

    def taylor_shift(self, a) -> "UniPoly":
        """Coefficients of p(a + X)."""
        a = q(a)
        out = list(self.c)
        n = len(out)
        # synthetic division by (X - a), repeated
        for i in range(n - 1):
            for j in range(n - 2, i - 1, -1):
                out[j] += a * out[j + 1]
        return UniPoly(out)

    def render(self, var: str = "x") -> str:
        if not self.c:
            return "0"
        parts = []
        for i in range(len(self.c) - 1, -1, -1):
            v = self.c[i]
            if v == 0:
                continue
            if i == 0:
                body = render_q(abs(v))
            else:
                mag = abs(v)
                head = "" if mag == 1 else f"{render_q(mag)}*"
                body = f"{head}{var}" if i == 1 else f"{head}{var}^{i}"
            if not parts:
                parts.append(body if v > 0 else f"-{body}")
            else:
                parts.append(f" + {body}" if v > 0 else f" - {body}")
        return "".join(parts)


def _int_primitive(cs: tuple[Fraction, ...]) -> list[int]:
    """Clear denominators and divide by integer content (sign-normalized)."""
    den = 1
    for v in cs:
        den = den * v.denominator // _igcd(den, v.denominator)
    ints = [int(v * den) for v in cs]
    return _int_prim_part(ints)


def _int_prim_part(ints: list[int]) -> list[int]:
    while ints and ints[-1] == 0:
        ints.pop()
    if not ints:
        return []
    g = 0
    for v in ints:
        g = _igcd(g, abs(v))
    if ints[-1] < 0:
        g = -g
    return [v // g for v in ints]


def _int_prem(a: list[int], b: list[int]) -> list[int]:
    """Pseudo-remainder of integer polynomial lists (low degree first)."""
    a = list(a)
    db, lb = len(b) - 1, b[-1]
    while len(a) - 1 >= db and a:
        la = a[-1]
        da = len(a) - 1
        a = [v * lb for v in a]
        for j in range(db + 1):
            a[da - db + j] -= la * b[j]
        while a and a[-1] == 0:
            a.pop()
    return a


# ---------------------------------------------------------------------------
# rational functions


class RatFunc:
    """Rational function num/den over Q, den monic, gcd(num, den) = 1."""

    __slots__ = ("num", "den")

    def __init__(self, num: UniPoly, den: UniPoly = UniPoly((_ONE,))):
        if den.is_zero():
            raise ValidationError("rational function with zero denominator")
        if num.is_zero():
            self.num = UniPoly(())
            self.den = UniPoly((_ONE,))
            return
        if not den.is_constant():
            g = num.gcd(den)
            if g.degree > 0:
                num = num.exact_div(g)
                den = den.exact_div(g)
        lead = den.leading()
        if lead != 1:
            num = num.scale(1 / lead)
            den = den.scale(1 / lead)
        self.num = num
        self.den = den

    @classmethod
    def const(cls, a) -> "RatFunc":
        return cls(UniPoly.const(a))

    @classmethod
    def zero(cls) -> "RatFunc":
        return cls(UniPoly(()))

    @classmethod
    def one(cls) -> "RatFunc":
        return cls(UniPoly.one())

    @classmethod
    def x(cls) -> "RatFunc":
        return cls(UniPoly.x())

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_constant(self) -> bool:
        return self.num.is_constant() and self.den.is_constant()

    def const_value(self) -> Fraction:
        if not self.is_constant():
            raise ValidationError("not a constant rational function")
        return self.num.coeff(0)

    def __add__(self, other: "RatFunc") -> "RatFunc":
        if self.den == other.den:
            return RatFunc(self.num + other.num, self.den)
        return RatFunc(self.num * other.den + other.num * self.den,
                       self.den * other.den)

    def __sub__(self, other: "RatFunc") -> "RatFunc":
        return self + (-other)

    def __neg__(self) -> "RatFunc":
        out = RatFunc.__new__(RatFunc)
        out.num = -self.num
        out.den = self.den
        return out

    def __mul__(self, other: "RatFunc") -> "RatFunc":
        return RatFunc(self.num * other.num, self.den * other.den)

    def scale(self, k) -> "RatFunc":
        k = q(k)
        out = RatFunc.__new__(RatFunc)
        out.num = self.num.scale(k)
        out.den = self.den if k != 0 else UniPoly.one()
        return out

    def inverse(self) -> "RatFunc":
        if self.is_zero():
            raise ValidationError("inverse of the zero rational function")
        return RatFunc(self.den, self.num)

    def __truediv__(self, other: "RatFunc") -> "RatFunc":
        return self * other.inverse()

    def derivative(self) -> "RatFunc":
        if self.den.is_constant():
            return RatFunc(self.num.derivative(), self.den)
        return RatFunc(
            self.num.derivative() * self.den - self.num * self.den.derivative(),
            self.den * self.den)

    def eval(self, at) -> Fraction:
        d = self.den.eval(at)
        if d == 0:
            raise ValidationError("evaluation at a pole")
        return self.num.eval(at) / d

    def __eq__(self, other) -> bool:
        return (isinstance(other, RatFunc)
                and self.num == other.num and self.den == other.den)

    def __hash__(self) -> int:
        return hash((self.num, self.den))

    def __repr__(self) -> str:
        return f"RatFunc({self.render()})"

    def render(self, var: str = "x") -> str:
        if self.den == UniPoly.one():
            return self.num.render(var)
        return f"({self.num.render(var)})/({self.den.render(var)})"


# ---------------------------------------------------------------------------
# truncated multivariate power series


def grlex_key(e: tuple[int, ...]) -> tuple:
    """Sort key: ascending total degree, then first variables first."""
    return (sum(e), tuple(-v for v in e))


class TruncatedPoly:
    """Element of Q[t_1..t_n]/(t)^(order+1), sparse exponent-dict storage."""

    __slots__ = ("nvars", "order", "terms")

    def __init__(self, nvars: int, order: int, terms: dict | None = None):
        if nvars < 0 or order < 0:
            raise ValidationError("truncated series needs nvars >= 0, order >= 0")
        self.nvars = nvars
        self.order = order
        out: dict[tuple[int, ...], Fraction] = {}
        if terms:
            for e, v in terms.items():
                if len(e) != nvars:
                    raise ValidationError("exponent tuple of wrong length")
                if sum(e) <= order and v != 0:
                    out[e] = v if isinstance(v, Fraction) else Fraction(v)
        self.terms = out

    # -- constructors
    @classmethod
    def zero(cls, nvars: int, order: int) -> "TruncatedPoly":
        return cls(nvars, order)

    @classmethod
    def const(cls, a, nvars: int, order: int) -> "TruncatedPoly":
        a = q(a)
        return cls(nvars, order, {(0,) * nvars: a} if a else None)

    @classmethod
    def variable(cls, i: int, nvars: int, order: int) -> "TruncatedPoly":
        if not 0 <= i < nvars:
            raise ValidationError(f"variable index {i} out of range")
        e = tuple(1 if j == i else 0 for j in range(nvars))
        return cls(nvars, order, {e: _ONE})

    def _check(self, other: "TruncatedPoly") -> None:
        if self.nvars != other.nvars or self.order != other.order:
            raise ValidationError("mixed truncated-series rings")

    # -- queries
    def is_zero(self) -> bool:
        return not self.terms

    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * self.nvars, _ZERO)

    def coeff(self, e: tuple[int, ...]) -> Fraction:
        return self.terms.get(e, _ZERO)

    # -- ring operations
    def __add__(self, other: "TruncatedPoly") -> "TruncatedPoly":
        self._check(other)
        out = dict(self.terms)
        for e, v in other.terms.items():
            s = out.get(e, _ZERO) + v
            if s:
                out[e] = s
            else:
                out.pop(e, None)
        return TruncatedPoly(self.nvars, self.order, out)

    def __sub__(self, other: "TruncatedPoly") -> "TruncatedPoly":
        return self + (-other)

    def __neg__(self) -> "TruncatedPoly":
        return TruncatedPoly(self.nvars, self.order,
                             {e: -v for e, v in self.terms.items()})

    def __mul__(self, other: "TruncatedPoly") -> "TruncatedPoly":
        self._check(other)
        order = self.order
        out: dict[tuple[int, ...], Fraction] = {}
        for e1, v1 in self.terms.items():
            d1 = sum(e1)
            for e2, v2 in other.terms.items():
                if d1 + sum(e2) > order:
                    continue
                e = tuple(a + b for a, b in zip(e1, e2))
                s = out.get(e, _ZERO) + v1 * v2
                if s:
                    out[e] = s
                else:
                    del out[e]
        return TruncatedPoly(self.nvars, order, out)

    def scale(self, k) -> "TruncatedPoly":
        k = q(k)
        if k == 0:
            return TruncatedPoly(self.nvars, self.order)
        return TruncatedPoly(self.nvars, self.order,
                             {e: v * k for e, v in self.terms.items()})

    def inverse(self) -> "TruncatedPoly":
        """Multiplicative inverse; needs an invertible constant term."""
        c0 = self.constant_term()
        if c0 == 0:
            raise ValidationError("inverse of a series without unit term")
        inv = TruncatedPoly.const(1 / c0, self.nvars, self.order)
        one = TruncatedPoly.const(1, self.nvars, self.order)
        # Newton iteration doubles the valuation of the defect each round.
        steps = max(1, self.order.bit_length() + 1)
        for _ in range(steps):
            inv = inv * (one + one - self * inv)
        if not (self * inv - one).is_zero():
            raise InternalError("series inversion failed to converge")
        return inv

    # -- truncation structure
    def truncate(self, new_order: int) -> "TruncatedPoly":
        if new_order >= self.order:
            return TruncatedPoly(self.nvars, new_order, self.terms)
        return TruncatedPoly(self.nvars, new_order,
                             {e: v for e, v in self.terms.items()
                              if sum(e) <= new_order})

    def homogeneous_part(self, d: int) -> "TruncatedPoly":
        return TruncatedPoly(self.nvars, self.order,
                             {e: v for e, v in self.terms.items() if sum(e) == d})

    def max_degree(self) -> int:
        """Largest total degree carrying a term (-1 for zero)."""
        return max((sum(e) for e in self.terms), default=-1)

    def sorted_terms(self) -> Iterator[tuple[tuple[int, ...], Fraction]]:
        for e in sorted(self.terms, key=grlex_key):
            yield e, self.terms[e]

    def __eq__(self, other) -> bool:
        return (isinstance(other, TruncatedPoly) and self.nvars == other.nvars
                and self.order == other.order and self.terms == other.terms)

    def __repr__(self) -> str:
        return f"TruncatedPoly({self.render()})"

    def render(self, names: list[str] | None = None) -> str:
        """Canonical graded-lex rendering, e.g. '1 + 3*t1 - t1*t2^2'."""
        if not self.terms:
            return "0"
        if names is None:
            names = [f"t{i + 1}" for i in range(self.nvars)]
        parts = []
        for e, v in self.sorted_terms():
            factors = []
            for i, k in enumerate(e):
                if k == 1:
                    factors.append(names[i])
                elif k > 1:
                    factors.append(f"{names[i]}^{k}")
            mag = abs(v)
            if not factors:
                body = render_q(mag)
            else:
                head = "" if mag == 1 else f"{render_q(mag)}*"
                body = head + "*".join(factors)
            if not parts:
                parts.append(body if v > 0 else f"-{body}")
            else:
                parts.append(f" + {body}" if v > 0 else f" - {body}")
        return "".join(parts)


def monomials_upto(nvars: int, order: int) -> list[tuple[int, ...]]:
    """All exponent tuples of total degree <= order, in graded-lex order."""
    if nvars < 0 or order < 0:
        raise ValidationError("monomial enumeration needs nvars, order >= 0")
    if nvars == 0:
        return [()]
    out: list[tuple[int, ...]] = []

    def rec(prefix: tuple[int, ...], budget: int) -> None:
        if len(prefix) == nvars - 1:
            for k in range(budget + 1):
                out.append(prefix + (k,))
            return
        for k in range(budget + 1):
            rec(prefix + (k,), budget - k)

    rec((), order)
    out.sort(key=grlex_key)
    return out
