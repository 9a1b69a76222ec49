"""Exact function-field arithmetic on the supported curves.

Two curves are supported: the projective line, and the genus-one curve
``y^2 = x (x - 1) (x - lam)`` with ``lam`` rational and distinct from 0, 1.
Elements of the function field are stored as ``a(x) + b(x) y`` with rational
coefficients, and every local question (order of vanishing, residue,
evaluation) is answered through exact Laurent expansions in a local
parameter.  Each Laurent series carries a sound truncation bound, so a
computed coefficient is always the true coefficient; precision is raised
adaptively until the requested window is certified.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable

from .arith import QQ, RatFunc, UniPoly, q, render_q
from .errors import InternalError, ValidationError

_ZERO = QQ(0)
_ONE = QQ(1)


class _NeedMorePrecision(Exception):
    """Internal signal: the current expansion window is too short."""


class LaurentSeries:
    """Finite window of a Laurent series in the local parameter u.

    Coefficients are known exactly for exponents in ``[shift, trunc)``;
    exponents below ``shift`` are exactly zero and exponents at or above
    ``trunc`` are unknown.  All ring operations propagate ``trunc`` soundly.
    """

    __slots__ = ("shift", "coeffs", "trunc")

    def __init__(self, shift: int, coeffs: list[Fraction], trunc: int):
        # normalize: drop leading zeros, keep the certified bound
        i = 0
        while i < len(coeffs) and coeffs[i] == 0:
            i += 1
        if i:
            shift += i
            coeffs = coeffs[i:]
        # drop anything at/above trunc (defensive)
        if shift + len(coeffs) > trunc:
            coeffs = coeffs[: trunc - shift]
        if not coeffs:
            shift = trunc
        elif shift + len(coeffs) != trunc:
            raise InternalError("Laurent window does not reach its truncation bound")
        self.shift = shift
        self.coeffs = coeffs
        self.trunc = trunc

    @classmethod
    def const(cls, value: Fraction, trunc: int) -> "LaurentSeries":
        return cls(0, [value] + [_ZERO] * (trunc - 1), trunc) if trunc > 0 else cls(trunc, [], trunc)

    @classmethod
    def monomial(cls, value: Fraction, exponent: int, trunc: int) -> "LaurentSeries":
        if exponent >= trunc:
            return cls(trunc, [], trunc)
        return cls(exponent, [value] + [_ZERO] * (trunc - exponent - 1), trunc)

    @classmethod
    def from_poly(cls, p: UniPoly, trunc: int) -> "LaurentSeries":
        cs = [c for c in p.c][:max(0, trunc)]
        return cls(0, cs + [_ZERO] * (trunc - len(cs)), trunc) if trunc > 0 else cls(trunc, [], trunc)

    def valuation(self) -> int | None:
        """Exponent of the first nonzero known coefficient, or None."""
        for i, c in enumerate(self.coeffs):
            if c != 0:
                return self.shift + i
        return None

    def coeff(self, n: int) -> Fraction:
        if n >= self.trunc:
            raise _NeedMorePrecision
        if n < self.shift:
            return _ZERO
        return self.coeffs[n - self.shift]

    def window(self, lo: int, hi: int) -> list[Fraction]:
        return [self.coeff(n) for n in range(lo, hi)]

    def is_zero_window(self) -> bool:
        return self.valuation() is None

    def __add__(self, other: "LaurentSeries") -> "LaurentSeries":
        t = min(self.trunc, other.trunc)
        s = min(self.shift, other.shift, t)
        out = [_ZERO] * (t - s)
        for src in (self, other):
            for i, c in enumerate(src.coeffs):
                n = src.shift + i
                if n < t:
                    out[n - s] += c
        return LaurentSeries(s, out, t)

    def __neg__(self) -> "LaurentSeries":
        return LaurentSeries(self.shift, [-c for c in self.coeffs], self.trunc)

    def __sub__(self, other: "LaurentSeries") -> "LaurentSeries":
        return self + (-other)

    def scale(self, k: Fraction) -> "LaurentSeries":
        if k == 0:
            return LaurentSeries(self.trunc, [], self.trunc)
        return LaurentSeries(self.shift, [k * c for c in self.coeffs], self.trunc)

    def __mul__(self, other: "LaurentSeries") -> "LaurentSeries":
        va = self.valuation()
        vb = other.valuation()
        va = self.trunc if va is None else va
        vb = other.trunc if vb is None else vb
        t = min(self.trunc + vb, other.trunc + va)
        s = va + vb
        if s >= t:
            return LaurentSeries(t, [], t)
        out = [_ZERO] * (t - s)
        for i, ca in enumerate(self.coeffs):
            if ca == 0:
                continue
            na = self.shift + i
            for j, cb in enumerate(other.coeffs):
                if cb == 0:
                    continue
                n = na + other.shift + j
                if s <= n < t:
                    out[n - s] += ca * cb
        return LaurentSeries(s, out, t)

    def inverse(self) -> "LaurentSeries":
        v = self.valuation()
        if v is None:
            raise _NeedMorePrecision
        rel = self.trunc - v          # relative precision available
        a = self.window(v, self.trunc)
        lead = a[0]
        inv = [_ZERO] * rel
        inv[0] = 1 / lead
        for k in range(1, rel):
            acc = _ZERO
            for i in range(1, k + 1):
                acc += a[i] * inv[k - i]
            inv[k] = -acc / lead
        return LaurentSeries(-v, inv, self.trunc - 2 * v)

    def derivative(self) -> "LaurentSeries":
        out = []
        for i, c in enumerate(self.coeffs):
            n = self.shift + i
            out.append(QQ(n) * c)
        return LaurentSeries(self.shift - 1, out, self.trunc - 1)

    def truncate(self, t: int) -> "LaurentSeries":
        if t >= self.trunc:
            return self
        return LaurentSeries(self.shift, self.coeffs[: max(0, t - self.shift)], t)

    def __eq__(self, other) -> bool:
        return (isinstance(other, LaurentSeries) and self.shift == other.shift
                and self.coeffs == other.coeffs and self.trunc == other.trunc)

    def __repr__(self) -> str:
        terms = [f"{render_q(c)}*u^{self.shift + i}"
                 for i, c in enumerate(self.coeffs) if c != 0]
        body = " + ".join(terms) if terms else "0"
        return f"<{body} + O(u^{self.trunc})>"


class MarkedPoint:
    """A rational point of the curve, named for use in scenario input."""

    __slots__ = ("name", "kind", "x0", "y0")

    def __init__(self, name: str, kind: str, x0: Fraction | None, y0: Fraction | None):
        self.name = name
        self.kind = kind          # "finite" | "infinity"
        self.x0 = x0
        self.y0 = y0

    @property
    def key(self) -> tuple:
        if self.kind == "infinity":
            return ("inf",)
        return ("fin", self.x0, self.y0)

    def __eq__(self, other) -> bool:
        return isinstance(other, MarkedPoint) and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __repr__(self) -> str:
        if self.kind == "infinity":
            return f"MarkedPoint({self.name}=infinity)"
        if self.y0 is None:
            return f"MarkedPoint({self.name}=({render_q(self.x0)}))"
        return f"MarkedPoint({self.name}=({render_q(self.x0)}, {render_q(self.y0)}))"


class FFElement:
    """Function-field element ``a(x) + b(x) y`` (``b = 0`` on the line)."""

    __slots__ = ("curve", "a", "b")

    def __init__(self, curve: "Curve", a: RatFunc, b: RatFunc):
        if b != RatFunc.zero() and curve.genus == 0:
            raise ValidationError("the projective line has no y generator")
        self.curve = curve
        self.a = a
        self.b = b

    def _check(self, other: "FFElement") -> None:
        if self.curve is not other.curve:
            raise ValidationError("elements live on different curves")

    def is_zero(self) -> bool:
        return self.a == RatFunc.zero() and self.b == RatFunc.zero()

    def __add__(self, other: "FFElement") -> "FFElement":
        self._check(other)
        return FFElement(self.curve, self.a + other.a, self.b + other.b)

    def __sub__(self, other: "FFElement") -> "FFElement":
        self._check(other)
        return FFElement(self.curve, self.a - other.a, self.b - other.b)

    def __neg__(self) -> "FFElement":
        return FFElement(self.curve, -self.a, -self.b)

    def __mul__(self, other: "FFElement") -> "FFElement":
        self._check(other)
        qr = self.curve.q_rat
        a = self.a * other.a + self.b * other.b * qr
        b = self.a * other.b + self.b * other.a
        return FFElement(self.curve, a, b)

    def scale(self, k: Fraction) -> "FFElement":
        return FFElement(self.curve, self.a.scale(k), self.b.scale(k))

    def conjugate(self) -> "FFElement":
        return FFElement(self.curve, self.a, -self.b)

    def inverse(self) -> "FFElement":
        if self.is_zero():
            raise ValidationError("inverse of the zero function")
        norm = self.a * self.a - self.b * self.b * self.curve.q_rat
        if norm == RatFunc.zero():
            raise InternalError("vanishing norm for a nonzero element")
        ninv = norm.inverse()
        return FFElement(self.curve, self.a * ninv, -(self.b * ninv))

    def __truediv__(self, other: "FFElement") -> "FFElement":
        return self * other.inverse()

    def __eq__(self, other) -> bool:
        return (isinstance(other, FFElement) and self.curve is other.curve
                and self.a == other.a and self.b == other.b)

    def __hash__(self) -> int:
        return hash((id(self.curve), self.a, self.b))

    def pole_degree_bound(self) -> int:
        """Upper bound for the degree of the pole divisor (hence any order)."""
        da = max(self.a.num.degree, self.a.den.degree, 0)
        if self.curve.genus == 0:
            return da
        out = 2 * da
        if self.b != RatFunc.zero():
            out += 2 * max(self.b.num.degree, self.b.den.degree, 0) + 3
        return out

    def render(self) -> str:
        var = self.curve.var
        a_txt = self.a.render(var)
        if self.b == RatFunc.zero():
            return a_txt
        b_txt = self.b.render(var)
        if self.a == RatFunc.zero():
            return f"({b_txt})*y"
        return f"{a_txt} + ({b_txt})*y"

    def __repr__(self) -> str:
        return f"FFElement({self.render()})"


class Differential:
    """A meromorphic differential, stored as (coefficient) * d(coordinate)."""

    __slots__ = ("curve", "w")

    def __init__(self, curve: "Curve", w: FFElement):
        self.curve = curve
        self.w = w

    def __add__(self, other: "Differential") -> "Differential":
        return Differential(self.curve, self.w + other.w)

    def __sub__(self, other: "Differential") -> "Differential":
        return Differential(self.curve, self.w - other.w)

    def __neg__(self) -> "Differential":
        return Differential(self.curve, -self.w)

    def mul_function(self, f: FFElement) -> "Differential":
        return Differential(self.curve, self.w * f)

    def scale(self, k: Fraction) -> "Differential":
        return Differential(self.curve, self.w.scale(k))

    def is_zero(self) -> bool:
        return self.w.is_zero()

    def __eq__(self, other) -> bool:
        return (isinstance(other, Differential) and self.curve is other.curve
                and self.w == other.w)

    def __repr__(self) -> str:
        return f"Differential(({self.w.render()}) d{self.curve.var})"


class Curve:
    """Shared expansion/valuation machinery for both supported curves."""

    genus: int
    var: str

    def __init__(self) -> None:
        self._param_cache: dict[tuple, tuple[int, tuple[LaurentSeries, ...]]] = {}

    # -- constructors ------------------------------------------------------
    def zero(self) -> FFElement:
        return FFElement(self, RatFunc.zero(), RatFunc.zero())

    def one(self) -> FFElement:
        return FFElement(self, RatFunc.one(), RatFunc.zero())

    def constant(self, value) -> FFElement:
        return FFElement(self, RatFunc.const(q(value)), RatFunc.zero())

    def x(self) -> FFElement:
        return FFElement(self, RatFunc.x(), RatFunc.zero())

    def ff(self, a: RatFunc, b: RatFunc | None = None) -> FFElement:
        return FFElement(self, a, RatFunc.zero() if b is None else b)

    # -- points ------------------------------------------------------------
    def infinity(self, name: str = "INF") -> MarkedPoint:
        return MarkedPoint(name, "infinity", None, None)

    def special_points(self) -> list[MarkedPoint]:
        """Points where d(coordinate) has a zero or pole."""
        raise NotImplementedError

    # -- expansion ---------------------------------------------------------
    def _params(self, point: MarkedPoint, prec: int) -> tuple[LaurentSeries, ...]:
        """Cached local parametrization of the coordinates, certified to prec."""
        key = point.key
        hit = self._param_cache.get(key)
        if hit is not None and hit[0] >= prec:
            return tuple(s.truncate(prec) if s.trunc > prec else s for s in hit[1])
        series = self._compute_params(point, prec)
        self._param_cache[key] = (prec, series)
        return series

    def _compute_params(self, point: MarkedPoint, prec: int) -> tuple[LaurentSeries, ...]:
        raise NotImplementedError

    def _expand_raw(self, f: FFElement, point: MarkedPoint, prec: int) -> LaurentSeries:
        raise NotImplementedError

    def expand(self, f: FFElement, point: MarkedPoint, trunc: int) -> LaurentSeries:
        """Laurent expansion of f at the point, certified up to u^trunc."""
        if f.curve is not self:
            raise ValidationError("element does not belong to this curve")
        prec = max(trunc + 8, 8)
        ceiling = 64 * (abs(trunc) + f.pole_degree_bound() + 16)
        while True:
            try:
                out = self._expand_raw(f, point, prec)
            except _NeedMorePrecision:
                out = None
            if out is not None and out.trunc >= trunc:
                return out.truncate(trunc)
            prec *= 2
            if prec > ceiling:
                raise InternalError("local expansion failed to reach the requested window")

    def order_at(self, f: FFElement, point: MarkedPoint) -> int:
        """Exact order of vanishing of f at the point (poles negative)."""
        if f.is_zero():
            raise ValidationError("order of the zero function is undefined")
        bound = f.pole_degree_bound()
        series = self.expand(f, point, bound + 1)
        v = series.valuation()
        if v is None:
            raise InternalError("nonzero function expanded to zero beyond its order bound")
        return v

    def evaluate(self, f: FFElement, point: MarkedPoint) -> Fraction:
        """Value at the point; raises if f has a pole there."""
        series = self.expand(f, point, 1)
        v = series.valuation()
        if v is not None and v < 0:
            raise ValidationError(f"function has a pole at {point.name}")
        try:
            return series.coeff(0)
        except _NeedMorePrecision:  # pragma: no cover - trunc >= 1 by contract
            raise InternalError("expansion window missed the constant term")

    def coordinate_series(self, point: MarkedPoint, prec: int) -> tuple[LaurentSeries, ...]:
        """Local expansions of the coordinate functions, certified to prec.

        Returns ``(x(u),)`` on the line and ``(x(u), y(u))`` on the genus-one
        curve.  Callers doing bulk expansion work share these series instead
        of re-deriving the parametrization per element.
        """
        return self._params(point, prec)

    # -- differentials -----------------------------------------------------
    def d_coord_order(self, point: MarkedPoint) -> int:
        """Order of d(coordinate) at the point."""
        raise NotImplementedError

    def differential_order(self, omega: Differential, point: MarkedPoint) -> int:
        return self.order_at(omega.w, point) + self.d_coord_order(point)

    def residue_at(self, omega: Differential, point: MarkedPoint) -> Fraction:
        """Exact residue: the u^{-1} coefficient of w(u) * coord'(u)."""
        if omega.w.is_zero():
            return _ZERO
        bound = omega.w.pole_degree_bound() + 4
        prec = bound + 8
        ceiling = 64 * (bound + 16)
        while True:
            try:
                w_series = self._expand_raw(omega.w, point, prec)
                coord = self._params(point, prec)[0]
                prod = w_series * coord.derivative()
                if prod.trunc >= 0:
                    return prod.coeff(-1)
            except _NeedMorePrecision:
                pass
            prec *= 2
            if prec > ceiling:
                raise InternalError("residue expansion failed to reach u^-1")

    def exterior_d(self, f: FFElement) -> Differential:
        raise NotImplementedError

    # -- misc ----------------------------------------------------------------
    def conjugate_point(self, point: MarkedPoint) -> MarkedPoint | None:
        """The second point with the same x-coordinate, if distinct."""
        return None

    def validate_point(self, point: MarkedPoint) -> None:
        raise NotImplementedError


class ProjectiveLine(Curve):
    """The projective line with affine coordinate z."""

    genus = 0
    var = "z"

    def __init__(self) -> None:
        super().__init__()
        self.q_rat = RatFunc.zero()   # no y generator; kept for shared code paths

    def point(self, name: str, z0) -> MarkedPoint:
        return MarkedPoint(name, "finite", q(z0), None)

    def special_points(self) -> list[MarkedPoint]:
        return [self.infinity()]

    def validate_point(self, point: MarkedPoint) -> None:
        if point.kind == "finite" and point.x0 is None:
            raise ValidationError("finite point needs a coordinate")

    def _compute_params(self, point: MarkedPoint, prec: int) -> tuple[LaurentSeries, ...]:
        if point.kind == "infinity":
            return (LaurentSeries.monomial(_ONE, -1, prec),)
        z = LaurentSeries(0, [point.x0, _ONE] + [_ZERO] * (prec - 2), prec)
        return (z,)

    def _expand_raw(self, f: FFElement, point: MarkedPoint, prec: int) -> LaurentSeries:
        (z,) = self._params(point, prec)
        return _eval_ratfunc(f.a, z, prec)

    def d_coord_order(self, point: MarkedPoint) -> int:
        return 0 if point.kind == "finite" else -2

    def exterior_d(self, f: FFElement) -> Differential:
        return Differential(self, self.ff(f.a.derivative()))


class LegendreCurve(Curve):
    """The smooth plane curve y^2 = x (x - 1) (x - lam)."""

    genus = 1
    var = "x"

    def __init__(self, lam) -> None:
        super().__init__()
        lam = q(lam)
        if lam == 0 or lam == 1:
            raise ValidationError("the parameter must avoid 0 and 1")
        self.lam = lam
        x = UniPoly.x()
        self.q_poly = x * (x - UniPoly.one()) * (x - UniPoly.const(lam))
        self.q_rat = RatFunc(self.q_poly, UniPoly.one())

    def y(self) -> FFElement:
        return FFElement(self, RatFunc.zero(), RatFunc.one())

    def point(self, name: str, x0, y0) -> MarkedPoint:
        p = MarkedPoint(name, "finite", q(x0), q(y0))
        self.validate_point(p)
        return p

    def validate_point(self, point: MarkedPoint) -> None:
        if point.kind == "infinity":
            return
        if point.y0 is None:
            raise ValidationError("a finite point needs both coordinates")
        if point.y0 * point.y0 != self.q_poly.eval(point.x0):
            raise ValidationError(f"point {point.name} does not lie on the curve")

    def is_two_torsion(self, point: MarkedPoint) -> bool:
        return point.kind == "finite" and point.y0 == 0

    def two_torsion_x(self) -> list[Fraction]:
        return [QQ(0), QQ(1), self.lam]

    def special_points(self) -> list[MarkedPoint]:
        pts = [MarkedPoint(f"T{i}", "finite", c, QQ(0))
               for i, c in enumerate(self.two_torsion_x())]
        pts.append(self.infinity())
        return pts

    def conjugate_point(self, point: MarkedPoint) -> MarkedPoint | None:
        if point.kind == "infinity" or point.y0 == 0:
            return None
        return MarkedPoint(point.name + "'", "finite", point.x0, -point.y0)

    def _compute_params(self, point: MarkedPoint, prec: int) -> tuple[LaurentSeries, ...]:
        steps = max(prec.bit_length() + 2, 4)
        if point.kind == "infinity":
            # x = w/u^2, y = w/u^3 with w^2 - w - (1+lam) w u^2 + lam u^4 = 0
            one = LaurentSeries.const(_ONE, prec)
            c2 = LaurentSeries.monomial(_ONE + self.lam, 2, prec)
            c4 = LaurentSeries.monomial(self.lam, 4, prec)
            w = one
            for _ in range(steps):
                fw = w * w - w - c2 * w + c4
                dfw = w + w - one - c2
                w = w - fw * dfw.inverse()
            self._verify_zero(w * w - w - c2 * w + c4, "parametrization at infinity")
            u_m2 = LaurentSeries.monomial(_ONE, -2, prec)
            u_m3 = LaurentSeries.monomial(_ONE, -3, prec)
            return (u_m2 * w, u_m3 * w)
        if point.y0 == 0:
            # two-torsion: u = y, solve q(x(u)) = u^2 with x(0) = x0
            u2 = LaurentSeries.monomial(_ONE, 2, prec)
            xs = LaurentSeries.const(point.x0, prec)
            for _ in range(steps):
                fx = _eval_poly(self.q_poly, xs, prec) - u2
                dfx = _eval_poly(self.q_poly.derivative(), xs, prec)
                xs = xs - fx * dfx.inverse()
            self._verify_zero(_eval_poly(self.q_poly, xs, prec) - u2,
                              "two-torsion parametrization")
            y = LaurentSeries.monomial(_ONE, 1, prec)
            return (xs, y)
        # generic finite point: u = x - x0, y = sqrt(q(x0+u)) branch through y0
        xs = LaurentSeries(0, [point.x0, _ONE] + [_ZERO] * (prec - 2), prec)
        qs = LaurentSeries.from_poly(self.q_poly.taylor_shift(point.x0), prec)
        ys = LaurentSeries.const(point.y0, prec)
        half = QQ(1, 2)
        for _ in range(steps):
            ys = (ys + qs * ys.inverse()).scale(half)
        self._verify_zero(ys * ys - qs, "square-root parametrization")
        return (xs, ys)

    @staticmethod
    def _verify_zero(series: LaurentSeries, what: str) -> None:
        if not series.is_zero_window():
            raise InternalError(f"{what} failed to satisfy the curve equation")

    def _expand_raw(self, f: FFElement, point: MarkedPoint, prec: int) -> LaurentSeries:
        xs, ys = self._params(point, prec)
        out = _eval_ratfunc(f.a, xs, prec)
        if f.b != RatFunc.zero():
            out = out + _eval_ratfunc(f.b, xs, prec) * ys
        return out

    def d_coord_order(self, point: MarkedPoint) -> int:
        if point.kind == "infinity":
            return -3
        return 1 if point.y0 == 0 else 0

    def exterior_d(self, f: FFElement) -> Differential:
        # d(a + b y) = (a' + (b' + b q'/(2q)) y) dx
        a, b = f.a, f.b
        w_a = a.derivative()
        if b == RatFunc.zero():
            return Differential(self, self.ff(w_a))
        qq = self.q_rat
        corr = b * RatFunc(self.q_poly.derivative(), UniPoly.one()) / (qq + qq)
        return Differential(self, self.ff(w_a, b.derivative() + corr))


def _eval_poly(p: UniPoly, xs: LaurentSeries, prec: int) -> LaurentSeries:
    """Horner evaluation of a polynomial on a Laurent series."""
    out = LaurentSeries.const(_ZERO, prec)
    for c in reversed(p.c):
        out = out * xs + LaurentSeries.const(c, prec)
    return out


def _eval_ratfunc(r: RatFunc, xs: LaurentSeries, prec: int) -> LaurentSeries:
    num = _eval_poly(r.num, xs, prec)
    if r.den == UniPoly.one():
        return num
    return num * _eval_poly(r.den, xs, prec).inverse()


def sum_of_orders(curve: Curve, f: FFElement, points: Iterable[MarkedPoint]) -> int:
    return sum(curve.order_at(f, p) for p in points)
