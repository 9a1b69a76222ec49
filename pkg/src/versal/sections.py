"""Finite-dimensional spaces of scalar sections with prescribed pole bounds.

A space is cut out from the function field by local conditions
``ord_P(f) >= -allowance(P)`` over a finite candidate set of points, with f
regular everywhere else.  The candidate set is closed under the
hyperelliptic involution and always contains the point at infinity, so a
complete spanning family can be written down in closed form:

    { x^i / d,  x^i y / d }   with   d = prod (x - c)^{N_c}

over the distinct finite x-coordinates c.  Membership of a candidate pole
divisor then reduces to an exact kernel computation on Laurent windows.
The degree caps on i come from the order of x and y at infinity, and the
even/odd split of those orders means the two families cannot cancel at
infinity, which is what makes the caps complete rather than heuristic.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping

from .arith import QQ, RatFunc, UniPoly
from .curve import Curve, FFElement, MarkedPoint, _NeedMorePrecision, _eval_poly
from .errors import (
    InternalError,
    MembershipError,
    SectionInstabilityError,
    ValidationError,
)
from ._kernels import rref_rows
from .linalg import QMatrix, LinearSolver, is_zero_vec

_ZERO = QQ(0)


def _point_sort_key(point: MarkedPoint) -> tuple:
    if point.kind == "infinity":
        return (1, _ZERO, _ZERO)
    return (0, point.x0, point.y0 if point.y0 is not None else _ZERO)


class SectionSpace:
    """Exact basis of {f : ord_P(f) >= -allowance(P), f regular elsewhere}."""

    __slots__ = ("curve", "allowances", "den", "tags", "dim", "basis_rows",
                 "basis_elements", "_coord_solver", "_dp", "_ds")

    def __init__(self, curve: Curve,
                 pole_allowances: Mapping[MarkedPoint, int] | Iterable[tuple[MarkedPoint, int]],
                 *, slack: int = 1):
        if slack < 1:
            raise ValidationError("spanning slack must be positive")
        items = (pole_allowances.items() if isinstance(pole_allowances, Mapping)
                 else list(pole_allowances))
        table: dict[tuple, tuple[MarkedPoint, int]] = {}
        for point, allowance in items:
            curve.validate_point(point)
            if point.key in table:
                raise ValidationError(f"point {point.name} listed twice")
            table[point.key] = (point, int(allowance))
        # close under the involution and pin down infinity
        for point, _ in list(table.values()):
            mate = curve.conjugate_point(point)
            if mate is not None and mate.key not in table:
                table[mate.key] = (mate, 0)
        if ("inf",) not in table:
            table[("inf",)] = (curve.infinity(), 0)
        candidates = sorted(table.values(), key=lambda pa: _point_sort_key(pa[0]))
        self.curve = curve
        self.allowances = candidates

        # shared denominator over the finite x-coordinates
        by_x: dict[Fraction, int] = {}
        for point, allowance in candidates:
            if point.kind == "finite":
                by_x[point.x0] = max(by_x.get(point.x0, 0), allowance, 0)
        den = UniPoly.one()
        x = UniPoly.x()
        for c in sorted(by_x):
            n_c = by_x[c] + slack
            factor = x - UniPoly.const(c)
            for _ in range(n_c):
                den = den * factor
        self.den = den

        n_inf = table[("inf",)][1]
        deg_d = max(den.degree, 0)
        if curve.genus == 0:
            dp, ds = deg_d + n_inf, -1
        else:
            # ord at infinity of x^i/d is even, of x^i y/d odd: no cancellation
            dp = deg_d + n_inf // 2
            ds = deg_d + (n_inf - 3) // 2
        self._dp, self._ds = dp, ds
        tags: list[tuple[str, int]] = [("p", i) for i in range(dp + 1)]
        tags += [("s", i) for i in range(ds + 1)]
        self.tags = tags

        rows = self._constraint_rows()
        if tags:
            kernel = QMatrix.from_rows(rows).kernel_basis() if rows else \
                QMatrix.identity(len(tags)).rows
            if kernel:
                red, pivots = rref_rows([list(v) for v in kernel])
                basis_rows = red[:len(pivots)]
            else:
                basis_rows = []
        else:
            basis_rows = []
        self.basis_rows = basis_rows
        self.dim = len(basis_rows)
        self.basis_elements = [self._element_from_spanning(v) for v in basis_rows]
        self._coord_solver = None

    # -- construction internals -------------------------------------------
    def _spanning_series(self, point: MarkedPoint, prec: int):
        """Laurent windows of every spanning element at the point."""
        coords = self.curve.coordinate_series(point, prec)
        xs = coords[0]
        ys = coords[1] if len(coords) > 1 else None
        den_inv = _eval_poly(self.den, xs, prec).inverse()
        out = []
        power = den_inv
        p_cache = []
        for i in range(max(self._dp, self._ds) + 1):
            p_cache.append(power)
            power = power * xs
        for kind, i in self.tags:
            s = p_cache[i]
            if kind == "s":
                s = s * ys
            out.append(s)
        return out

    def _constraint_rows(self) -> list[list[Fraction]]:
        rows: list[list[Fraction]] = []
        if not self.tags:
            return rows
        for point, allowance in self.allowances:
            t_need = -allowance
            prec = max(t_need + 4 * max(self.den.degree, 1) + 8, 8)
            ceiling = 256 * (abs(t_need) + self.den.degree + len(self.tags) + 16)
            while True:
                try:
                    series = self._spanning_series(point, prec)
                except _NeedMorePrecision:
                    series = None
                if series is not None and all(s.trunc >= t_need for s in series):
                    break
                prec *= 2
                if prec > ceiling:
                    raise InternalError("section constraints failed to stabilize")
            lo = min(s.shift for s in series)
            for k in range(lo, t_need):
                row = [s.coeff(k) for s in series]
                if not is_zero_vec(row):
                    rows.append(row)
        return rows

    def _element_from_spanning(self, vec) -> FFElement:
        a_coeffs: list[Fraction] = []
        b_coeffs: list[Fraction] = []
        for (kind, i), c in zip(self.tags, vec):
            target = a_coeffs if kind == "p" else b_coeffs
            while len(target) <= i:
                target.append(_ZERO)
            target[i] += c
        a = RatFunc(UniPoly(a_coeffs), self.den)
        b = RatFunc(UniPoly(b_coeffs), self.den)
        return FFElement(self.curve, a, b)

    # -- public API ---------------------------------------------------------
    def spanning_vector(self, f: FFElement) -> list[Fraction]:
        """Coordinates of f over the spanning family; MembershipError if outside."""
        if f.curve is not self.curve:
            raise ValidationError("element lives on a different curve")
        den_rf = RatFunc(self.den, UniPoly.one())
        a = f.a * den_rf
        b = f.b * den_rf
        if a.den != UniPoly.one() or b.den != UniPoly.one():
            raise MembershipError("section has a pole outside the allowed set")
        if ((not a.num.is_zero() and a.num.degree > self._dp)
                or (not b.num.is_zero() and b.num.degree > self._ds)):
            raise MembershipError("section grows too fast at infinity")
        vec = []
        for kind, i in self.tags:
            src = a.num if kind == "p" else b.num
            vec.append(src.c[i] if i <= src.degree else _ZERO)
        return vec

    def coords(self, f: FFElement) -> list[Fraction]:
        """Coordinates in the canonical basis; MembershipError if outside."""
        vec = self.spanning_vector(f)
        if self.dim == 0:
            if is_zero_vec(vec):
                return []
            raise MembershipError("nonzero section in a zero space")
        if self._coord_solver is None:
            cols = QMatrix.from_rows(self.basis_rows).transpose()
            self._coord_solver = LinearSolver(cols)
        sol = self._coord_solver.solve(vec)
        if sol is None:
            raise MembershipError("section violates a pole condition")
        return sol

    def contains(self, f: FFElement) -> bool:
        try:
            self.coords(f)
            return True
        except MembershipError:
            return False

    def element(self, coords) -> FFElement:
        if len(coords) != self.dim:
            raise ValidationError("coordinate length mismatch")
        vec = [_ZERO] * len(self.tags)
        for c, row in zip(coords, self.basis_rows):
            if c:
                vec = [a + c * b for a, b in zip(vec, row)]
        return self._element_from_spanning(vec)

    def verify_stability(self) -> None:
        """Rebuild with a fatter spanning family; dimensions must agree."""
        fat = SectionSpace(self.curve,
                           [(p, a) for p, a in self.allowances],
                           slack=3)
        if fat.dim != self.dim:
            raise SectionInstabilityError(
                f"section space dimension moved from {self.dim} to {fat.dim}")


def scalar_sections(curve: Curve, pole_allowances, **kw) -> SectionSpace:
    return SectionSpace(curve, pole_allowances, **kw)
