"""Exact linear algebra over Q with canonical outputs.

All reductions pick pivots deterministically, canonical solves set free
variables to zero, and quotient lifts come from an echelon sweep, so every
basis / witness produced downstream is reproducible byte for byte.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

from ._kernels import rref_rows
from .errors import InternalError, MembershipError, ValidationError

_ZERO = Fraction(0)
_ONE = Fraction(1)

Vec = list  # list[Fraction]


def vzero(n: int) -> Vec:
    return [_ZERO] * n


def vadd(a: Sequence[Fraction], b: Sequence[Fraction]) -> Vec:
    return [x + y for x, y in zip(a, b)]


def vsub(a: Sequence[Fraction], b: Sequence[Fraction]) -> Vec:
    return [x - y for x, y in zip(a, b)]


def vscale(a: Sequence[Fraction], k: Fraction) -> Vec:
    return [x * k for x in a]


def is_zero_vec(a: Sequence[Fraction]) -> bool:
    return all(x == 0 for x in a)


class QMatrix:
    """Dense matrix over Q (rows of Fractions)."""

    __slots__ = ("nrows", "ncols", "rows")

    def __init__(self, nrows: int, ncols: int, rows: list[list[Fraction]]):
        if len(rows) != nrows or any(len(r) != ncols for r in rows):
            raise ValidationError("matrix shape mismatch")
        self.nrows = nrows
        self.ncols = ncols
        self.rows = rows

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable]) -> "QMatrix":
        rs = [[v if isinstance(v, Fraction) else Fraction(v) for v in row]
              for row in rows]
        if not rs:
            return cls(0, 0, [])
        return cls(len(rs), len(rs[0]), rs)

    @classmethod
    def zero(cls, m: int, n: int) -> "QMatrix":
        return cls(m, n, [vzero(n) for _ in range(m)])

    @classmethod
    def identity(cls, n: int) -> "QMatrix":
        rows = [vzero(n) for _ in range(n)]
        for i in range(n):
            rows[i][i] = _ONE
        return cls(n, n, rows)

    def copy_rows(self) -> list[list[Fraction]]:
        return [list(r) for r in self.rows]

    def entry(self, i: int, j: int) -> Fraction:
        return self.rows[i][j]

    def col(self, j: int) -> Vec:
        return [r[j] for r in self.rows]

    def transpose(self) -> "QMatrix":
        return QMatrix(self.ncols, self.nrows,
                       [[self.rows[i][j] for i in range(self.nrows)]
                        for j in range(self.ncols)])

    def __add__(self, other: "QMatrix") -> "QMatrix":
        self._same_shape(other)
        return QMatrix(self.nrows, self.ncols,
                       [vadd(a, b) for a, b in zip(self.rows, other.rows)])

    def __sub__(self, other: "QMatrix") -> "QMatrix":
        self._same_shape(other)
        return QMatrix(self.nrows, self.ncols,
                       [vsub(a, b) for a, b in zip(self.rows, other.rows)])

    def __neg__(self) -> "QMatrix":
        return QMatrix(self.nrows, self.ncols, [[-v for v in r] for r in self.rows])

    def scale(self, k) -> "QMatrix":
        k = k if isinstance(k, Fraction) else Fraction(k)
        return QMatrix(self.nrows, self.ncols,
                       [vscale(r, k) for r in self.rows])

    def __mul__(self, other: "QMatrix") -> "QMatrix":
        if self.ncols != other.nrows:
            raise ValidationError("matrix product shape mismatch")
        bt = other.transpose().rows
        out = [[sum((a * b for a, b in zip(row, col)), _ZERO) for col in bt]
               for row in self.rows]
        return QMatrix(self.nrows, other.ncols, out)

    def apply(self, v: Sequence[Fraction]) -> Vec:
        """Matrix-vector product M·v."""
        if len(v) != self.ncols:
            raise ValidationError("vector length mismatch")
        return [sum((a * b for a, b in zip(row, v)), _ZERO) for row in self.rows]

    def _same_shape(self, other: "QMatrix") -> None:
        if self.nrows != other.nrows or self.ncols != other.ncols:
            raise ValidationError("matrix shape mismatch")

    def __eq__(self, other) -> bool:
        return (isinstance(other, QMatrix) and self.nrows == other.nrows
                and self.ncols == other.ncols and self.rows == other.rows)

    def __repr__(self) -> str:
        return f"QMatrix({self.nrows}x{self.ncols})"

    # -- reductions -------------------------------------------------------
    def rref(self) -> tuple["QMatrix", tuple[int, ...]]:
        rows, pivots = rref_rows(self.rows)
        return QMatrix(self.nrows, self.ncols, rows), pivots

    def rank(self) -> int:
        return len(self.rref()[1])

    def kernel_basis(self) -> list[Vec]:
        """Canonical basis of {v : M·v = 0}, one vector per free column."""
        red, pivots = self.rref()
        pivset = set(pivots)
        free = [c for c in range(self.ncols) if c not in pivset]
        basis = []
        for f in free:
            v = vzero(self.ncols)
            v[f] = _ONE
            for r, c in enumerate(pivots):
                v[c] = -red.rows[r][f]
            basis.append(v)
        return basis

    def solver(self) -> "LinearSolver":
        return LinearSolver(self)

    def solve(self, b: Sequence[Fraction]) -> Vec | None:
        return LinearSolver(self).solve(b)


class LinearSolver:
    """Cached RREF-with-transform factorization for repeated canonical solves."""

    __slots__ = ("matrix", "red", "transform", "pivots", "rank")

    def __init__(self, matrix: QMatrix):
        m, n = matrix.nrows, matrix.ncols
        aug = [list(r) + [_ONE if i == j else _ZERO for j in range(m)]
               for i, r in enumerate(matrix.rows)]
        red, pivots = rref_rows(aug)
        pivots = tuple(p for p in pivots if p < n)
        self.matrix = matrix
        self.red = [r[:n] for r in red]
        self.transform = [r[n:] for r in red]
        self.pivots = pivots
        self.rank = len(pivots)

    def solve(self, b: Sequence[Fraction]) -> Vec | None:
        """Canonical solution of M·x = b (free variables zero), or None."""
        m, n = self.matrix.nrows, self.matrix.ncols
        if len(b) != m:
            raise ValidationError("rhs length mismatch")
        y = [sum((t * v for t, v in zip(trow, b)), _ZERO) for trow in self.transform]
        for i in range(self.rank, m):
            if y[i] != 0:
                return None
        x = vzero(n)
        for r, c in enumerate(self.pivots):
            x[c] = y[r]
        return x

    def solve_or_raise(self, b: Sequence[Fraction], what: str = "linear system") -> Vec:
        x = self.solve(b)
        if x is None:
            raise InternalError(f"inconsistent {what} that theory says is solvable")
        return x

    def in_image(self, b: Sequence[Fraction]) -> bool:
        return self.solve(b) is not None


class Subspace:
    """Subspace of Q^n stored by its canonical RREF basis."""

    __slots__ = ("ambient", "basis", "pivots")

    def __init__(self, ambient: int, basis: list[Vec], pivots: tuple[int, ...]):
        self.ambient = ambient
        self.basis = basis
        self.pivots = pivots

    @classmethod
    def from_vectors(cls, vectors: Iterable[Sequence[Fraction]], ambient: int) -> "Subspace":
        vs = [list(v) for v in vectors]
        for v in vs:
            if len(v) != ambient:
                raise ValidationError("vector length mismatch")
        if not vs:
            return cls(ambient, [], ())
        red, pivots = rref_rows(vs)
        return cls(ambient, red[:len(pivots)], pivots)

    @classmethod
    def full(cls, ambient: int) -> "Subspace":
        return cls.from_vectors(QMatrix.identity(ambient).rows, ambient)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def coords(self, v: Sequence[Fraction]) -> Vec:
        """Coordinates of v in the RREF basis; MembershipError if outside."""
        if len(v) != self.ambient:
            raise ValidationError("vector length mismatch")
        out = [v[p] for p in self.pivots]
        rem = list(v)
        for c, row in zip(out, self.basis):
            if c:
                rem = [a - c * b for a, b in zip(rem, row)]
        if not is_zero_vec(rem):
            raise MembershipError("vector lies outside the subspace")
        return out

    def contains(self, v: Sequence[Fraction]) -> bool:
        try:
            self.coords(v)
            return True
        except MembershipError:
            return False

    def contains_space(self, other: "Subspace") -> bool:
        return all(self.contains(v) for v in other.basis)

    def from_coords(self, coords: Sequence[Fraction]) -> Vec:
        if len(coords) != self.dim:
            raise ValidationError("coordinate length mismatch")
        out = vzero(self.ambient)
        for c, row in zip(coords, self.basis):
            if c:
                out = [a + c * b for a, b in zip(out, row)]
        return out

    def sum_(self, other: "Subspace") -> "Subspace":
        if self.ambient != other.ambient:
            raise ValidationError("ambient mismatch")
        return Subspace.from_vectors(self.basis + other.basis, self.ambient)

    def intersect(self, other: "Subspace") -> "Subspace":
        """Zassenhaus-free intersection via a kernel computation."""
        if self.ambient != other.ambient:
            raise ValidationError("ambient mismatch")
        if self.dim == 0 or other.dim == 0:
            return Subspace(self.ambient, [], ())
        cols = [list(b) for b in self.basis] + [[-x for x in b] for b in other.basis]
        m = QMatrix.from_rows(cols).transpose()
        vecs = []
        for k in m.kernel_basis():
            v = vzero(self.ambient)
            for c, row in zip(k[:self.dim], self.basis):
                if c:
                    v = [a + c * b for a, b in zip(v, row)]
            vecs.append(v)
        return Subspace.from_vectors(vecs, self.ambient)


class QuotientSpace:
    """Quotient numerator/divisor with canonical echelon lifts (sigma)."""

    __slots__ = ("numerator", "divisor", "_pivmap", "lifts", "_lift_pivots")

    def __init__(self, numerator: Subspace, divisor: Subspace):
        if numerator.ambient != divisor.ambient:
            raise ValidationError("ambient mismatch")
        if not numerator.contains_space(divisor):
            raise ValidationError("divisor is not contained in the numerator")
        self.numerator = numerator
        self.divisor = divisor
        pivmap: dict[int, tuple[Vec, int]] = {}
        for p, row in zip(divisor.pivots, divisor.basis):
            pivmap[p] = (list(row), -1)
        lifts: list[Vec] = []
        for v in numerator.basis:
            rem = list(v)
            while True:
                lead = next((i for i, x in enumerate(rem) if x != 0), None)
                if lead is None:
                    break
                hit = pivmap.get(lead)
                if hit is None:
                    f = rem[lead]
                    if f != 1:
                        rem = [x / f for x in rem]
                    pivmap[lead] = (rem, len(lifts))
                    lifts.append(rem)
                    break
                rem = [a - rem[lead] * b for a, b in zip(rem, hit[0])]
        self._pivmap = pivmap
        self.lifts = lifts
        self._lift_pivots = [next(i for i, x in enumerate(l) if x != 0) for l in lifts]

    @property
    def dim(self) -> int:
        return len(self.lifts)

    def project(self, v: Sequence[Fraction]) -> Vec:
        """Quotient coordinates of an ambient vector (must lie in numerator)."""
        coords = vzero(self.dim)
        rem = list(v)
        while True:
            lead = next((i for i, x in enumerate(rem) if x != 0), None)
            if lead is None:
                return coords
            hit = self._pivmap.get(lead)
            if hit is None:
                raise MembershipError("vector lies outside the numerator space")
            f = rem[lead]
            if hit[1] >= 0:
                coords[hit[1]] += f
            rem = [a - f * b for a, b in zip(rem, hit[0])]

    def lift(self, coords: Sequence[Fraction]) -> Vec:
        """Canonical representative (sigma) of a coordinate vector."""
        if len(coords) != self.dim:
            raise ValidationError("coordinate length mismatch")
        out = vzero(self.numerator.ambient)
        for c, row in zip(coords, self.lifts):
            if c:
                out = [a + c * b for a, b in zip(out, row)]
        return out

    def is_zero_class(self, v: Sequence[Fraction]) -> bool:
        return is_zero_vec(self.project(v))


class IdealReducer:
    """Canonical rewriting modulo a polynomial ideal, inside Q[t]/(t)^(order+1).

    The span of ``monomial * generator`` over all monomials is row-reduced
    once; a reduced row ``t^p + sum c_j t^j`` yields the rewrite rule
    ``t^p -> -sum c_j t^j`` whose right-hand side touches no pivot monomial,
    so a single pass over the pivots normalizes any coefficient dictionary.
    """

    __slots__ = ("nvars", "order", "rules")

    def __init__(self, generators, nvars: int, order: int):
        from .arith import TruncatedPoly, grlex_key, monomials_upto
        self.nvars = nvars
        self.order = order
        monos = monomials_upto(nvars, order)
        index = {e: i for i, e in enumerate(monos)}
        rows: list[list[Fraction]] = []
        for gen in generators:
            if gen.nvars != nvars:
                raise ValidationError("ideal generator has the wrong variable count")
            if gen.is_zero():
                continue
            dmin = min(sum(e) for e in gen.terms)
            for m in monos:
                if sum(m) + dmin > order:
                    continue
                shifted = gen * TruncatedPoly(nvars, order, {m: Fraction(1)})
                if shifted.is_zero():
                    continue
                row = [Fraction(0)] * len(monos)
                for e, v in shifted.terms.items():
                    row[index[e]] = v
                rows.append(row)
        rules: dict[tuple[int, ...], list[tuple[tuple[int, ...], Fraction]]] = {}
        if rows:
            red, pivots = rref_rows(rows)
            for r, pc in enumerate(pivots):
                rhs = [(monos[j], -red[r][j])
                       for j in range(pc + 1, len(monos)) if red[r][j]]
                rules[monos[pc]] = rhs
        self.rules = rules

    def reduce_terms(self, terms: dict) -> dict:
        """Normalize an exponent->value dict; values need __add__ and scale()."""
        out = dict(terms)
        for e in list(out):
            rule = self.rules.get(e)
            if rule is None:
                continue
            v = out.pop(e)
            for e2, c in rule:
                w = v.scale(c)
                out[e2] = out[e2] + w if e2 in out else w
        return out

    def reduce_poly(self, p):
        from .arith import TruncatedPoly
        out: dict[tuple[int, ...], Fraction] = {}
        for e, v in p.terms.items():
            rule = self.rules.get(e)
            if rule is None:
                out[e] = out.get(e, Fraction(0)) + v
            else:
                for e2, c in rule:
                    out[e2] = out.get(e2, Fraction(0)) + v * c
        return TruncatedPoly(p.nvars, self.order, out)

    def poly_is_zero(self, p) -> bool:
        return self.reduce_poly(p).is_zero()
