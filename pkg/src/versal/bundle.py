"""Vector bundles and logarithmic connections given by exact transition data.

A bundle is a covering of the curve by affine charts (each chart removes a
finite set of marked points) together with transition matrices over the
overlaps.  Connections are per-chart matrices of dx-coefficients with a
prescribed pole divisor.  Everything downstream (Cech complexes, deformation
machinery) consumes the objects defined here; all arithmetic is exact.

Families over a truncated polynomial base k[t]/(m^(K+1) + I) are handled by
``FamilyMatrix``/``FamilyBundle``.  The family global-section machinery sizes
its section containers by measuring the actual pole depth of the conjugation
transport G E_ij G^-1, which makes the computed H^0 spaces provably complete
(no truncation plateau is needed: a glued section is regular on every chart
that keeps the point, so its poles on the charts that drop it are bounded by
the measured transport excess).
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .arith import TruncatedPoly, monomials_upto, q
from .curve import Curve, Differential, FFElement, MarkedPoint
from .errors import (InternalError, MembershipError, SectionInstabilityError,
                     ValidationError)
from .linalg import (IdealReducer, LinearSolver, QMatrix, QuotientSpace,
                     Subspace)
from .sections import SectionSpace, _point_sort_key

Pair = tuple[int, int]

_ZERO = Fraction(0)
_ONE = Fraction(1)


class CheckReport:
    """Outcome of a validator: named checks with pass/fail and detail."""

    __slots__ = ("items",)

    def __init__(self) -> None:
        self.items: list[tuple[str, bool, str]] = []

    def add(self, name: str, ok: bool, detail: str = "") -> None:
        self.items.append((name, bool(ok), detail))

    @property
    def ok(self) -> bool:
        return all(ok for _, ok, _ in self.items)

    def failures(self) -> list[tuple[str, str]]:
        return [(name, detail) for name, ok, detail in self.items if not ok]

    def lines(self) -> list[str]:
        out = []
        for name, ok, detail in self.items:
            mark = "ok" if ok else "FAIL"
            out.append(f"[{mark}] {name}" + (f": {detail}" if detail else ""))
        return out

    def raise_if_failed(self) -> None:
        bad = self.failures()
        if bad:
            name, detail = bad[0]
            raise ValidationError(f"{name}: {detail}" if detail else name)


# ---------------------------------------------------------------------------
# matrices over the function field


class FMatrix:
    """Square matrix with FFElement entries."""

    __slots__ = ("curve", "r", "rows")

    def __init__(self, curve: Curve, rows: list[list[FFElement]]):
        r = len(rows)
        for row in rows:
            if len(row) != r:
                raise ValidationError("matrix must be square")
        self.curve = curve
        self.r = r
        self.rows = rows

    @classmethod
    def zero(cls, curve: Curve, r: int) -> "FMatrix":
        z = curve.zero()
        return cls(curve, [[z for _ in range(r)] for _ in range(r)])

    @classmethod
    def identity(cls, curve: Curve, r: int) -> "FMatrix":
        z, one = curve.zero(), curve.one()
        return cls(curve, [[one if i == j else z for j in range(r)]
                           for i in range(r)])

    @classmethod
    def diagonal(cls, curve: Curve, entries: Sequence[FFElement]) -> "FMatrix":
        r = len(entries)
        z = curve.zero()
        return cls(curve, [[entries[i] if i == j else z for j in range(r)]
                           for i in range(r)])

    def entry(self, i: int, j: int) -> FFElement:
        return self.rows[i][j]

    def is_zero(self) -> bool:
        return all(e.is_zero() for row in self.rows for e in row)

    def __add__(self, other: "FMatrix") -> "FMatrix":
        self._check(other)
        return FMatrix(self.curve, [[a + b for a, b in zip(ra, rb)]
                                    for ra, rb in zip(self.rows, other.rows)])

    def __sub__(self, other: "FMatrix") -> "FMatrix":
        self._check(other)
        return FMatrix(self.curve, [[a - b for a, b in zip(ra, rb)]
                                    for ra, rb in zip(self.rows, other.rows)])

    def __neg__(self) -> "FMatrix":
        return FMatrix(self.curve, [[-a for a in row] for row in self.rows])

    def __mul__(self, other: "FMatrix") -> "FMatrix":
        self._check(other)
        r = self.r
        out = []
        for i in range(r):
            row = []
            for j in range(r):
                acc = self.curve.zero()
                for k in range(r):
                    a = self.rows[i][k]
                    b = other.rows[k][j]
                    if not (a.is_zero() or b.is_zero()):
                        acc = acc + a * b
                row.append(acc)
            out.append(row)
        return FMatrix(self.curve, out)

    def scale(self, k) -> "FMatrix":
        k = q(k)
        return FMatrix(self.curve, [[a.scale(k) for a in row]
                                    for row in self.rows])

    def mul_ff(self, f: FFElement) -> "FMatrix":
        return FMatrix(self.curve, [[a * f for a in row] for row in self.rows])

    def trace(self) -> FFElement:
        acc = self.curve.zero()
        for i in range(self.r):
            acc = acc + self.rows[i][i]
        return acc

    def det(self) -> FFElement:
        r = self.r
        if r == 1:
            return self.rows[0][0]
        acc = self.curve.zero()
        sign = _ONE
        for j in range(r):
            a = self.rows[0][j]
            if not a.is_zero():
                minor = FMatrix(self.curve,
                                [[self.rows[i][k] for k in range(r) if k != j]
                                 for i in range(1, r)])
                acc = acc + (a * minor.det()).scale(sign)
            sign = -sign
        return acc

    def inverse(self) -> "FMatrix":
        """Gauss-Jordan over the function field; first nonzero pivot."""
        r = self.r
        work = [list(row) for row in self.rows]
        out = [list(row) for row in FMatrix.identity(self.curve, r).rows]
        for col in range(r):
            piv = None
            for i in range(col, r):
                if not work[i][col].is_zero():
                    piv = i
                    break
            if piv is None:
                raise ValidationError("matrix is singular")
            work[col], work[piv] = work[piv], work[col]
            out[col], out[piv] = out[piv], out[col]
            inv = work[col][col].inverse()
            work[col] = [e * inv for e in work[col]]
            out[col] = [e * inv for e in out[col]]
            for i in range(r):
                if i != col and not work[i][col].is_zero():
                    f = work[i][col]
                    work[i] = [a - f * b for a, b in zip(work[i], work[col])]
                    out[i] = [a - f * b for a, b in zip(out[i], out[col])]
        return FMatrix(self.curve, out)

    def d_w(self) -> "FMatrix":
        """Entrywise exterior derivative, as a matrix of dx-coefficients."""
        return FMatrix(self.curve,
                       [[self.curve.exterior_d(a).w for a in row]
                        for row in self.rows])

    def conjugate_by(self, g: "FMatrix", ginv: "FMatrix") -> "FMatrix":
        return g * self * ginv

    def __eq__(self, other) -> bool:
        return (isinstance(other, FMatrix) and self.r == other.r
                and all(a == b for ra, rb in zip(self.rows, other.rows)
                        for a, b in zip(ra, rb)))

    def render(self) -> list[list[str]]:
        return [[a.render() for a in row] for row in self.rows]

    def __repr__(self) -> str:
        return f"FMatrix({self.render()})"

    def _check(self, other: "FMatrix") -> None:
        if self.r != other.r:
            raise ValidationError("matrix size mismatch")


# ---------------------------------------------------------------------------
# coverings


class Covering:
    """Affine charts U_i = X minus a finite set of marked points."""

    __slots__ = ("curve", "removed", "marked", "_candidates")

    def __init__(self, curve: Curve,
                 removed_sets: Sequence[Iterable[MarkedPoint]],
                 marked: Iterable[MarkedPoint]):
        self.curve = curve
        marked_list: list[MarkedPoint] = []
        seen: set[tuple] = set()
        for p in marked:
            curve.validate_point(p)
            if p.key in seen:
                raise ValidationError(f"marked point {p.name} listed twice")
            seen.add(p.key)
            marked_list.append(p)
        self.marked = marked_list

        charts: list[tuple[MarkedPoint, ...]] = []
        for idx, rem in enumerate(removed_sets):
            pts = sorted(rem, key=_point_sort_key)
            if not pts:
                raise ValidationError(f"chart {idx} must remove at least one point")
            keys = set()
            for p in pts:
                if p.key not in seen:
                    raise ValidationError(
                        f"chart {idx} removes the unmarked point {p.name}")
                if p.key in keys:
                    raise ValidationError(
                        f"chart {idx} removes {p.name} twice")
                keys.add(p.key)
            charts.append(tuple(pts))
        if len(charts) < 2:
            raise ValidationError("a covering needs at least two charts")
        common = set.intersection(*(set(p.key for p in c) for c in charts))
        if common:
            raise ValidationError("charts do not cover the curve")
        self.removed = tuple(charts)
        self._candidates: list[MarkedPoint] | None = None

    @property
    def n(self) -> int:
        return len(self.removed)

    def pairs(self) -> list[Pair]:
        n = self.n
        return [(a, b) for a in range(n) for b in range(a + 1, n)]

    def triples(self) -> list[tuple[int, int, int]]:
        n = self.n
        return [(a, b, c) for a in range(n) for b in range(a + 1, n)
                for c in range(b + 1, n)]

    def removed_keys(self, idx: int) -> set[tuple]:
        return {p.key for p in self.removed[idx]}

    def region_removed(self, charts: Sequence[int]) -> list[MarkedPoint]:
        """Points missing from the intersection of the given charts."""
        out: dict[tuple, MarkedPoint] = {}
        for c in charts:
            for p in self.removed[c]:
                out.setdefault(p.key, p)
        return sorted(out.values(), key=_point_sort_key)

    def chart_of(self, point: MarkedPoint) -> int:
        for idx in range(self.n):
            if point.key not in self.removed_keys(idx):
                return idx
        raise InternalError("covering admits a point on no chart")

    def candidate_points(self) -> list[MarkedPoint]:
        """Marked points closed under conjugation, plus the curve's special
        points (zeros/poles of d(coordinate)) and infinity."""
        if self._candidates is None:
            table: dict[tuple, MarkedPoint] = {}
            for p in list(self.marked) + self.curve.special_points():
                table.setdefault(p.key, p)
            for p in list(table.values()):
                mate = self.curve.conjugate_point(p)
                if mate is not None:
                    table.setdefault(mate.key, mate)
            self._candidates = sorted(table.values(), key=_point_sort_key)
        return self._candidates

    def finite_candidate_x(self) -> list[Fraction]:
        return sorted({p.x0 for p in self.candidate_points()
                       if p.kind == "finite"})


# ---------------------------------------------------------------------------
# support checks


def _poly_support_ok(p, xs: Sequence[Fraction]) -> bool:
    """True if every root of p lies among the given x-coordinates."""
    from .arith import UniPoly
    work = p
    for c in xs:
        lin = UniPoly.linear(c)
        while work.degree > 0 and work.eval(c) == 0:
            work = work.exact_div(lin)
    return work.degree <= 0


def support_ok(f: FFElement, xs: Sequence[Fraction]) -> bool:
    return _poly_support_ok(f.a.den, xs) and _poly_support_ok(f.b.den, xs)


# ---------------------------------------------------------------------------
# bundles


class Bundle:
    """Rank-r locally free sheaf: transitions e_b = e_a g_ab on overlaps."""

    __slots__ = ("covering", "rank", "g", "_inv")

    def __init__(self, covering: Covering, rank: int,
                 transitions: Mapping[Pair, FMatrix]):
        if rank < 1:
            raise ValidationError("rank must be positive")
        self.covering = covering
        self.rank = rank
        need = set(covering.pairs())
        got = set(transitions)
        if got != need:
            raise ValidationError(
                "transition data must cover exactly the increasing chart pairs")
        for pair, m in transitions.items():
            if m.r != rank:
                raise ValidationError(f"transition {pair} has the wrong size")
        self.g = {pair: transitions[pair] for pair in sorted(need)}
        self._inv: dict[Pair, FMatrix] = {}

    @property
    def curve(self) -> Curve:
        return self.covering.curve

    def transition(self, a: int, b: int) -> FMatrix:
        if a == b:
            return FMatrix.identity(self.curve, self.rank)
        if a < b:
            return self.g[(a, b)]
        key = (b, a)
        if key not in self._inv:
            self._inv[key] = self.g[key].inverse()
        return self._inv[key]


def _entry_orders(curve: Curve, m: FMatrix, point: MarkedPoint) -> int | None:
    """Minimal order over the nonzero entries, or None if all vanish."""
    best: int | None = None
    for row in m.rows:
        for e in row:
            if e.is_zero():
                continue
            o = curve.order_at(e, point)
            best = o if best is None else min(best, o)
    return best


def validate_bundle(bundle: Bundle) -> CheckReport:
    cov = bundle.covering
    curve = cov.curve
    xs = cov.finite_candidate_x()
    report = CheckReport()
    for (a, b) in cov.pairs():
        g = bundle.g[(a, b)]
        label = f"g_{a}{b}"
        bad = [f"entry ({i},{j})" for i, row in enumerate(g.rows)
               for j, e in enumerate(row) if not support_ok(e, xs)]
        report.add(f"{label} support", not bad,
                   "" if not bad else bad[0] + " has a pole off the marked locus")
        removed = cov.removed_keys(a) | cov.removed_keys(b)
        holes = []
        for i, row in enumerate(g.rows):
            for j, e in enumerate(row):
                if e.is_zero():
                    continue
                for p in cov.candidate_points():
                    if p.key in removed:
                        continue
                    if curve.order_at(e, p) < 0:
                        holes.append(f"entry ({i},{j}) has a pole at {p.name}")
        report.add(f"{label} regularity on the overlap", not holes,
                   holes[0] if holes else "")
        det = g.det()
        if det.is_zero():
            report.add(f"det {label} invertibility", False, "determinant is zero")
            continue
        if not support_ok(det, xs):
            report.add(f"det {label} support", False,
                       "determinant has a pole off the marked locus")
            continue
        total = 0
        vanish = []
        for p in cov.candidate_points():
            o = curve.order_at(det, p)
            total += o
            if o != 0 and p.key not in removed:
                vanish.append(f"det vanishes or poles at {p.name} on the overlap")
        report.add(f"det {label} divisor support", total == 0,
                   "" if total == 0 else
                   "determinant has zeros or poles off the marked locus")
        report.add(f"det {label} invertibility on the overlap", not vanish,
                   vanish[0] if vanish else "")
    for (a, b, c) in cov.triples():
        lhs = bundle.g[(a, b)] * bundle.g[(b, c)]
        ok = lhs == bundle.g[(a, c)]
        report.add(f"cocycle g_{a}{b} g_{b}{c} = g_{a}{c}", ok,
                   "" if ok else "triple product differs from the stored matrix")
    return report


def bundle_degree(bundle: Bundle) -> int:
    """Degree of det E, by following the section that is 1 in frame 0."""
    cov = bundle.covering
    deg = 0
    for p in cov.removed[0]:
        c = cov.chart_of(p)
        det = bundle.transition(0, c).det()
        deg -= cov.curve.order_at(det, p)
    return deg


# ---------------------------------------------------------------------------
# connections


class Connection:
    """Per-chart dx-coefficient matrices A_a with poles bounded by a divisor."""

    __slots__ = ("bundle", "profile", "forms")

    def __init__(self, bundle: Bundle, profile: Mapping[MarkedPoint, int],
                 forms: Mapping[int, FMatrix]):
        self.bundle = bundle
        prof: dict[MarkedPoint, int] = {}
        for p, m in profile.items():
            bundle.curve.validate_point(p)
            m = int(m)
            if m < 0:
                raise ValidationError("pole multiplicities must be >= 0")
            if m > 0:
                prof[p] = m
        self.profile = prof
        n = bundle.covering.n
        if set(forms) != set(range(n)):
            raise ValidationError("a connection needs one matrix per chart")
        for idx, m in forms.items():
            if m.r != bundle.rank:
                raise ValidationError(f"form on chart {idx} has the wrong size")
        self.forms = {idx: forms[idx] for idx in range(n)}

    @property
    def curve(self) -> Curve:
        return self.bundle.curve


def profile_multiplicity(profile: Mapping[MarkedPoint, int],
                         point: MarkedPoint) -> int:
    for p, m in profile.items():
        if p.key == point.key:
            return m
    return 0


def validate_connection(conn: Connection) -> CheckReport:
    bundle = conn.bundle
    cov = bundle.covering
    curve = cov.curve
    xs = cov.finite_candidate_x()
    report = CheckReport()
    marked_keys = {p.key for p in cov.candidate_points()}
    stray = [p.name for p in conn.profile if p.key not in marked_keys]
    report.add("pole divisor supported on marked points", not stray,
               f"{stray[0]} is not marked" if stray else "")
    for idx in range(cov.n):
        m = conn.forms[idx]
        label = f"A_{idx}"
        bad = [f"entry ({i},{j})" for i, row in enumerate(m.rows)
               for j, e in enumerate(row) if not support_ok(e, xs)]
        report.add(f"{label} support", not bad,
                   "" if not bad else bad[0] + " has a pole off the marked locus")
        removed = cov.removed_keys(idx)
        holes = []
        for p in cov.candidate_points():
            if p.key in removed:
                continue
            allowed = profile_multiplicity(conn.profile, p) + curve.d_coord_order(p)
            for i, row in enumerate(m.rows):
                for j, e in enumerate(row):
                    if e.is_zero():
                        continue
                    if curve.order_at(e, p) < -allowed:
                        holes.append(
                            f"entry ({i},{j}) exceeds the pole bound at {p.name}")
        report.add(f"{label} pole bounds", not holes, holes[0] if holes else "")
    for (a, b) in cov.pairs():
        g = bundle.g[(a, b)]
        ginv = bundle.transition(b, a)
        rhs = ginv * g.d_w() + ginv * conn.forms[a] * g
        ok = conn.forms[b] == rhs
        report.add(f"frame change A_{b} = g^-1 dg + g^-1 A_{a} g on U_{a}{b}",
                   ok, "" if ok else "the two sides differ")
    return report


def residue_matrix(conn: Connection, point: MarkedPoint) -> QMatrix:
    """Residue of the connection at a simple pole, in the frame of the
    first chart containing the point."""
    if profile_multiplicity(conn.profile, point) > 1:
        raise ValidationError(
            "residue matrices are only taken at simple poles")
    cov = conn.bundle.covering
    idx = cov.chart_of(point)
    m = conn.forms[idx]
    rows = []
    for row in m.rows:
        out = []
        for e in row:
            out.append(_ZERO if e.is_zero()
                       else cov.curve.residue_at(Differential(cov.curve, e), point))
        rows.append(out)
    return QMatrix.from_rows(rows)


def atiyah_cocycle(bundle: Bundle) -> dict[Pair, FMatrix]:
    """The 1-cocycle (dg) g^-1 of dx-coefficient matrices, in the frame of
    the lower chart of each pair."""
    out = {}
    for (a, b) in bundle.covering.pairs():
        g = bundle.g[(a, b)]
        out[(a, b)] = g.d_w() * bundle.transition(b, a)
    return out


def apply_gauge(bundle: Bundle, frames: Mapping[int, FMatrix],
                conn: Connection | None = None):
    """Change each chart frame by h_a: g' = h_a^-1 g h_b, A' = h^-1 dh + h^-1 A h."""
    cov = bundle.covering
    hs = {idx: frames[idx] for idx in range(cov.n)}
    hinv = {idx: hs[idx].inverse() for idx in hs}
    new_g = {}
    for (a, b) in cov.pairs():
        new_g[(a, b)] = hinv[a] * bundle.g[(a, b)] * hs[b]
    nb = Bundle(cov, bundle.rank, new_g)
    if conn is None:
        return nb, None
    new_forms = {}
    for idx in range(cov.n):
        h = hs[idx]
        new_forms[idx] = hinv[idx] * h.d_w() + hinv[idx] * conn.forms[idx] * h
    return nb, Connection(nb, conn.profile, new_forms)


def frame_shift_bound(bundle: Bundle) -> int:
    """Worst pole depth of the conjugation transport g_ki (g^-1)_jl over all
    pairs and candidate points."""
    cov = bundle.covering
    worst = 0
    for (a, b) in cov.pairs():
        g = bundle.g[(a, b)]
        ginv = bundle.transition(b, a)
        for grow in g.rows:
            for ge in grow:
                if ge.is_zero():
                    continue
                for irow in ginv.rows:
                    for ie in irow:
                        if ie.is_zero():
                            continue
                        prod = ge * ie
                        for p in cov.candidate_points():
                            worst = max(worst, -cov.curve.order_at(prod, p))
    return worst


# ---------------------------------------------------------------------------
# endomorphism-valued section spaces


class EndSpace:
    """r x r matrices whose entries range over a scalar section space."""

    __slots__ = ("curve", "rank", "scalar", "dim")

    def __init__(self, curve: Curve, rank: int, scalar: SectionSpace):
        self.curve = curve
        self.rank = rank
        self.scalar = scalar
        self.dim = rank * rank * scalar.dim

    def coords(self, m: FMatrix) -> list[Fraction]:
        out: list[Fraction] = []
        for row in m.rows:
            for e in row:
                out.extend(self.scalar.coords(e))
        return out

    def matrix(self, coords: Sequence[Fraction]) -> FMatrix:
        if len(coords) != self.dim:
            raise ValidationError("coordinate length mismatch")
        r, sd = self.rank, self.scalar.dim
        rows = []
        for i in range(r):
            row = []
            for j in range(r):
                base = (i * r + j) * sd
                row.append(self.scalar.element(coords[base:base + sd]))
            rows.append(row)
        return FMatrix(self.curve, rows)

    def contains(self, m: FMatrix) -> bool:
        try:
            self.coords(m)
        except MembershipError:
            return False
        return True

    def basis(self) -> Iterable[FMatrix]:
        for i in range(self.rank):
            for j in range(self.rank):
                for e in self.scalar.basis_elements:
                    m = FMatrix.zero(self.curve, self.rank)
                    m.rows[i][j] = e
                    yield m


def chart_allowances(covering: Covering, idx: int, level: int,
                     shift: Mapping[MarkedPoint, int] | None = None,
                     domega: bool = False) -> dict[MarkedPoint, int]:
    """Pole allowances for sections over chart idx: `level` at removed
    points, plus the divisor shift and (optionally) the d(coordinate) twist
    at every candidate point."""
    removed = covering.removed_keys(idx)
    out: dict[MarkedPoint, int] = {}
    for p in covering.candidate_points():
        a = (level if p.key in removed else 0) \
            + profile_multiplicity(shift or {}, p) \
            + (covering.curve.d_coord_order(p) if domega else 0)
        if a != 0:
            out[p] = a
    return out


def region_allowances(covering: Covering, charts: Sequence[int], level: int,
                      shift: Mapping[MarkedPoint, int] | None = None,
                      domega: bool = False) -> dict[MarkedPoint, int]:
    removed = {p.key for p in covering.region_removed(charts)}
    out: dict[MarkedPoint, int] = {}
    for p in covering.candidate_points():
        a = (level if p.key in removed else 0) \
            + profile_multiplicity(shift or {}, p) \
            + (covering.curve.d_coord_order(p) if domega else 0)
        if a != 0:
            out[p] = a
    return out


def end_space(curve: Curve, rank: int,
              allowances: Mapping[MarkedPoint, int], *, slack: int = 1) -> EndSpace:
    return EndSpace(curve, rank, SectionSpace(curve, allowances, slack=slack))


# ---------------------------------------------------------------------------
# families over a truncated base


class FamilyMatrix:
    """Matrix with entries in O(U) (x) k[t]/(t)^(order+1): an exponent-keyed
    dictionary of FMatrix coefficients."""

    __slots__ = ("curve", "r", "nvars", "order", "terms")

    def __init__(self, curve: Curve, r: int, nvars: int, order: int,
                 terms: Mapping[tuple[int, ...], FMatrix] | None = None):
        self.curve = curve
        self.r = r
        self.nvars = nvars
        self.order = order
        clean: dict[tuple[int, ...], FMatrix] = {}
        for e, m in (terms or {}).items():
            if len(e) != nvars or any(k < 0 for k in e):
                raise ValidationError("bad exponent tuple")
            if sum(e) > order:
                continue
            if m.r != r:
                raise ValidationError("family coefficient has the wrong size")
            if not m.is_zero():
                clean[e] = m
        self.terms = clean

    @classmethod
    def constant(cls, m: FMatrix, nvars: int, order: int) -> "FamilyMatrix":
        e = (0,) * nvars
        return cls(m.curve, m.r, nvars, order, {e: m})

    @classmethod
    def zero(cls, curve: Curve, r: int, nvars: int, order: int) -> "FamilyMatrix":
        return cls(curve, r, nvars, order, {})

    @classmethod
    def identity(cls, curve: Curve, r: int, nvars: int, order: int) -> "FamilyMatrix":
        return cls.constant(FMatrix.identity(curve, r), nvars, order)

    def coeff(self, e: tuple[int, ...]) -> FMatrix:
        return self.terms.get(e, FMatrix.zero(self.curve, self.r))

    def constant_part(self) -> FMatrix:
        return self.coeff((0,) * self.nvars)

    def is_zero(self) -> bool:
        return not self.terms

    def _check(self, other: "FamilyMatrix") -> None:
        if (self.r, self.nvars, self.order) != (other.r, other.nvars, other.order):
            raise ValidationError("family matrix shape mismatch")

    def __add__(self, other: "FamilyMatrix") -> "FamilyMatrix":
        self._check(other)
        terms = dict(self.terms)
        for e, m in other.terms.items():
            terms[e] = terms[e] + m if e in terms else m
        return FamilyMatrix(self.curve, self.r, self.nvars, self.order, terms)

    def __sub__(self, other: "FamilyMatrix") -> "FamilyMatrix":
        return self + (-other)

    def __neg__(self) -> "FamilyMatrix":
        return FamilyMatrix(self.curve, self.r, self.nvars, self.order,
                            {e: -m for e, m in self.terms.items()})

    def __mul__(self, other: "FamilyMatrix") -> "FamilyMatrix":
        self._check(other)
        acc: dict[tuple[int, ...], FMatrix] = {}
        for e1, m1 in self.terms.items():
            d1 = sum(e1)
            for e2, m2 in other.terms.items():
                if d1 + sum(e2) > self.order:
                    continue
                e = tuple(a + b for a, b in zip(e1, e2))
                prod = m1 * m2
                acc[e] = acc[e] + prod if e in acc else prod
        return FamilyMatrix(self.curve, self.r, self.nvars, self.order, acc)

    def scale(self, k) -> "FamilyMatrix":
        k = q(k)
        return FamilyMatrix(self.curve, self.r, self.nvars, self.order,
                            {e: m.scale(k) for e, m in self.terms.items()})

    def mul_ff(self, f: FFElement) -> "FamilyMatrix":
        return FamilyMatrix(self.curve, self.r, self.nvars, self.order,
                            {e: m.mul_ff(f) for e, m in self.terms.items()})

    def mul_poly(self, p: TruncatedPoly) -> "FamilyMatrix":
        if p.nvars != self.nvars:
            raise ValidationError("variable count mismatch")
        acc: dict[tuple[int, ...], FMatrix] = {}
        for e1, m in self.terms.items():
            d1 = sum(e1)
            for e2, c in p.terms.items():
                if d1 + sum(e2) > self.order:
                    continue
                e = tuple(a + b for a, b in zip(e1, e2))
                sm = m.scale(c)
                acc[e] = acc[e] + sm if e in acc else sm
        return FamilyMatrix(self.curve, self.r, self.nvars, self.order, acc)

    def shift(self, mu: tuple[int, ...]) -> "FamilyMatrix":
        """Multiply by the monomial t^mu."""
        d = sum(mu)
        terms = {}
        for e, m in self.terms.items():
            if sum(e) + d <= self.order:
                terms[tuple(a + b for a, b in zip(e, mu))] = m
        return FamilyMatrix(self.curve, self.r, self.nvars, self.order, terms)

    def truncate(self, new_order: int) -> "FamilyMatrix":
        return FamilyMatrix(self.curve, self.r, self.nvars, new_order,
                            {e: m for e, m in self.terms.items()
                             if sum(e) <= new_order})

    def homogeneous(self, d: int) -> "FamilyMatrix":
        return FamilyMatrix(self.curve, self.r, self.nvars, self.order,
                            {e: m for e, m in self.terms.items() if sum(e) == d})

    def d_w(self) -> "FamilyMatrix":
        return FamilyMatrix(self.curve, self.r, self.nvars, self.order,
                            {e: m.d_w() for e, m in self.terms.items()})

    def inverse(self) -> "FamilyMatrix":
        """Invert the constant part, then a finite Neumann sum for the rest."""
        f0 = self.constant_part()
        f0inv = FamilyMatrix.constant(f0.inverse(), self.nvars, self.order)
        rest = self - FamilyMatrix.constant(f0, self.nvars, self.order)
        m = f0inv * rest
        acc = FamilyMatrix.identity(self.curve, self.r, self.nvars, self.order)
        power = acc
        for _ in range(self.order):
            power = -(power * m)
            if power.is_zero():
                break
            acc = acc + power
        return acc * f0inv

    def __eq__(self, other) -> bool:
        return (isinstance(other, FamilyMatrix)
                and (self.r, self.nvars, self.order) ==
                    (other.r, other.nvars, other.order)
                and set(self.terms) == set(other.terms)
                and all(self.terms[e] == other.terms[e] for e in self.terms))

    def __repr__(self) -> str:
        return (f"FamilyMatrix(r={self.r}, nvars={self.nvars}, "
                f"order={self.order}, {len(self.terms)} terms)")


class FamilyBundle:
    """Bundle (and optional connection) over k[t]/((t)^(order+1) + I)."""

    __slots__ = ("covering", "rank", "nvars", "order", "transitions", "forms",
                 "profile", "ideal", "_inv")

    def __init__(self, covering: Covering, rank: int, nvars: int, order: int,
                 transitions: Mapping[Pair, FamilyMatrix],
                 forms: Mapping[int, FamilyMatrix] | None = None,
                 profile: Mapping[MarkedPoint, int] | None = None,
                 ideal: Sequence[TruncatedPoly] = ()):
        self.covering = covering
        self.rank = rank
        self.nvars = nvars
        self.order = order
        need = set(covering.pairs())
        if set(transitions) != need:
            raise ValidationError(
                "family transitions must cover exactly the increasing pairs")
        self.transitions = {p: transitions[p] for p in sorted(need)}
        if forms is not None and set(forms) != set(range(covering.n)):
            raise ValidationError("a family connection needs one matrix per chart")
        self.forms = None if forms is None else \
            {idx: forms[idx] for idx in range(covering.n)}
        self.profile = dict(profile or {})
        self.ideal = list(ideal)
        for gen in self.ideal:
            if gen.nvars != nvars:
                raise ValidationError("ideal generator variable count mismatch")
        self._inv: dict[Pair, FamilyMatrix] = {}

    @property
    def curve(self) -> Curve:
        return self.covering.curve

    def transition(self, a: int, b: int) -> FamilyMatrix:
        if a == b:
            return FamilyMatrix.identity(self.curve, self.rank,
                                         self.nvars, self.order)
        if a < b:
            return self.transitions[(a, b)]
        key = (b, a)
        if key not in self._inv:
            self._inv[key] = self.transitions[key].inverse()
        return self._inv[key]

    def base_bundle(self) -> Bundle:
        return Bundle(self.covering, self.rank,
                      {p: fm.constant_part() for p, fm in self.transitions.items()})

    def base_connection(self) -> Connection | None:
        if self.forms is None:
            return None
        base = self.base_bundle()
        return Connection(base, self.profile,
                          {idx: fm.constant_part() for idx, fm in self.forms.items()})


def bundle_family(bundle: Bundle, nvars: int, order: int,
                  conn: Connection | None = None) -> FamilyBundle:
    """Embed a plain bundle (and connection) as a constant family."""
    trans = {p: FamilyMatrix.constant(m, nvars, order)
             for p, m in bundle.g.items()}
    forms = None
    profile = None
    if conn is not None:
        forms = {idx: FamilyMatrix.constant(m, nvars, order)
                 for idx, m in conn.forms.items()}
        profile = conn.profile
    return FamilyBundle(bundle.covering, bundle.rank, nvars, order,
                        trans, forms, profile)


def restrict_family(fb: FamilyBundle, new_order: int) -> FamilyBundle:
    """Truncate the family to a lower order in the deformation variables."""
    if new_order > fb.order:
        raise ValidationError("cannot extend a family by truncation")
    trans = {p: fm.truncate(new_order) for p, fm in fb.transitions.items()}
    forms = None if fb.forms is None else \
        {idx: fm.truncate(new_order) for idx, fm in fb.forms.items()}
    gens = []
    for g in fb.ideal:
        t = g.truncate(new_order)
        if not t.is_zero():
            gens.append(t)
    return FamilyBundle(fb.covering, fb.rank, fb.nvars, new_order,
                        trans, forms, fb.profile, gens)


# ---------------------------------------------------------------------------
# family global sections


class _FamilySystem:
    """Coboundary system for family End-valued 0-cochains.

    Unknowns: per chart, per monomial, coordinates of an End-valued section
    of that chart's (possibly twisted) section space.  Rows: for each
    increasing pair (a,b), the pair-space coordinates of
    Ad(G_ab) M_b - M_a, monomial by monomial, after ideal reduction.

    Chart allowances are provably sufficient for global sections: at a point
    P removed from chart a but kept on chart b, a glued section is regular
    (twisted-regular) on chart b, so its chart-a representative has pole
    depth at most the measured transport excess of G E_ij G^-1 at P.
    """

    __slots__ = ("fb", "shift", "domega", "monomials", "reducer",
                 "chart_spaces", "pair_spaces", "conj", "matrix", "_solver",
                 "unknown_offsets", "unknown_dim")

    def __init__(self, fb: FamilyBundle,
                 shift: Mapping[MarkedPoint, int] | None = None,
                 domega: bool = False,
                 extra_rhs: Mapping[Pair, Sequence[FamilyMatrix]] | None = None,
                 extra_level: int = 0):
        cov = fb.covering
        curve = cov.curve
        r = fb.rank
        self.fb = fb
        self.shift = dict(shift or {})
        self.domega = domega
        self.monomials = monomials_upto(fb.nvars, fb.order)
        self.reducer = IdealReducer(fb.ideal, fb.nvars, fb.order) \
            if fb.ideal else None

        # conjugation transport per pair: P_ij = G E_ij G^-1
        conj: dict[Pair, list[list[FamilyMatrix]]] = {}
        for pair in cov.pairs():
            g = fb.transition(pair[0], pair[1])
            ginv = fb.transition(pair[1], pair[0])
            block = []
            for i in range(r):
                row = []
                for j in range(r):
                    eij = FMatrix.zero(curve, r)
                    eij.rows[i][j] = curve.one()
                    row.append(g * FamilyMatrix.constant(eij, fb.nvars, fb.order)
                               * ginv)
                block.append(row)
            conj[pair] = block
        self.conj = conj

        # measured transport excess at each candidate point
        excess: dict[Pair, dict[tuple, int]] = {}
        for pair, block in conj.items():
            table: dict[tuple, int] = {}
            for p in cov.candidate_points():
                worst = 0
                for row in block:
                    for fm in row:
                        for m in fm.terms.values():
                            o = _entry_orders(curve, m, p)
                            if o is not None:
                                worst = max(worst, -o)
                table[p.key] = worst
            excess[pair] = table

        def twist_at(p: MarkedPoint) -> int:
            t = profile_multiplicity(self.shift, p)
            if domega:
                t += curve.d_coord_order(p)
            return t

        # chart spaces with per-point sufficient allowances
        chart_spaces: list[EndSpace] = []
        chart_allow: list[dict[tuple, int]] = []
        for idx in range(cov.n):
            removed = cov.removed_keys(idx)
            allow: dict[MarkedPoint, int] = {}
            for p in cov.candidate_points():
                a = twist_at(p)
                if p.key in removed:
                    depth = 0
                    for pair in cov.pairs():
                        if idx not in pair:
                            continue
                        other = pair[0] if pair[1] == idx else pair[1]
                        if p.key in cov.removed_keys(other):
                            continue
                        depth = max(depth, excess[pair][p.key])
                    a = a + depth + extra_level
                if a != 0:
                    allow[p] = a
            space = end_space(curve, r, allow)
            chart_spaces.append(space)
            chart_allow.append({pt.key: al for pt, al in space.scalar.allowances})
        self.chart_spaces = chart_spaces

        # pair containers sized by measurement
        pair_spaces: dict[Pair, EndSpace] = {}
        for pair in cov.pairs():
            a, b = pair
            allow: dict[MarkedPoint, int] = {}
            for p in cov.candidate_points():
                need = max(chart_allow[a].get(p.key, 0),
                           chart_allow[b].get(p.key, 0) + excess[pair][p.key])
                for fm in (extra_rhs or {}).get(pair, ()):  # solve targets
                    for m in fm.terms.values():
                        o = _entry_orders(curve, m, p)
                        if o is not None:
                            need = max(need, -o)
                if need != 0:
                    allow[p] = need
            pair_spaces[pair] = end_space(curve, r, allow)
        self.pair_spaces = pair_spaces

        # assemble the matrix column by column
        offsets = []
        total = 0
        nmono = len(self.monomials)
        for idx in range(cov.n):
            offsets.append(total)
            total += nmono * chart_spaces[idx].dim
        self.unknown_offsets = offsets
        self.unknown_dim = total

        row_dim = sum(pair_spaces[p].dim for p in cov.pairs()) * nmono
        cols: list[list[Fraction]] = []
        for idx in range(cov.n):
            space = chart_spaces[idx]
            sd = space.scalar.dim
            for mu in self.monomials:
                for i in range(r):
                    for j in range(r):
                        for k in range(sd):
                            cols.append(self._column(idx, mu, i, j, k, row_dim))
        matrix_rows = [[cols[c][rr] for c in range(total)]
                       for rr in range(row_dim)]
        self.matrix = QMatrix(row_dim, total, matrix_rows) if total else \
            QMatrix.zero(row_dim, 0)
        self._solver: LinearSolver | None = None

    # -- column assembly ----------------------------------------------------
    def _column(self, idx: int, mu: tuple[int, ...], i: int, j: int, k: int,
                row_dim: int) -> list[Fraction]:
        fb = self.fb
        cov = fb.covering
        curve = cov.curve
        col: list[Fraction] = []
        bk = self.chart_spaces[idx].scalar.basis_elements[k]
        for pair in cov.pairs():
            a, b = pair
            pspace = self.pair_spaces[pair]
            terms: dict[tuple[int, ...], FMatrix] = {}
            if idx == a:
                m = FMatrix.zero(curve, fb.rank)
                m.rows[i][j] = -bk
                terms[mu] = m
            elif idx == b:
                moved = self.conj[pair][i][j].mul_ff(bk).shift(mu)
                for e, m in moved.terms.items():
                    terms[e] = terms[e] + m if e in terms else m
            if self.reducer is not None and terms:
                terms = self.reducer.reduce_terms(terms)
            for nu in self.monomials:
                m = terms.get(nu)
                if m is None or m.is_zero():
                    col.extend([_ZERO] * pspace.dim)
                else:
                    col.extend(self._pair_coords(pspace, m))
        if len(col) != row_dim:
            raise InternalError("family system row bookkeeping is off")
        return col

    def _pair_coords(self, pspace: EndSpace, m: FMatrix) -> list[Fraction]:
        try:
            return pspace.coords(m)
        except MembershipError as exc:
            raise InternalError(
                f"family container too small for a pair value: {exc}") from exc

    # -- public surface -----------------------------------------------------
    def cochain(self, vec: Sequence[Fraction]) -> dict[int, FamilyMatrix]:
        fb = self.fb
        out: dict[int, FamilyMatrix] = {}
        nmono = len(self.monomials)
        for idx in range(fb.covering.n):
            space = self.chart_spaces[idx]
            base = self.unknown_offsets[idx]
            terms = {}
            for mi, mu in enumerate(self.monomials):
                lo = base + mi * space.dim
                coords = list(vec[lo:lo + space.dim])
                m = space.matrix(coords)
                if not m.is_zero():
                    terms[mu] = m
            out[idx] = FamilyMatrix(fb.curve, fb.rank, fb.nvars, fb.order, terms)
        return out

    def coords_cochain(self, coch: Mapping[int, FamilyMatrix]) -> list[Fraction]:
        fb = self.fb
        out: list[Fraction] = []
        for idx in range(fb.covering.n):
            space = self.chart_spaces[idx]
            fm = coch[idx]
            for mu in self.monomials:
                m = fm.coeff(mu)
                try:
                    out.extend(space.coords(m))
                except MembershipError as exc:
                    raise InternalError(
                        "a truncated section escaped its chart container: "
                        f"{exc}") from exc
        return out

    def rhs_vector(self, rhs: Mapping[Pair, FamilyMatrix]) -> list[Fraction]:
        """Coordinates of a right-hand side in the pair containers.

        Raises MembershipError when the data is too singular for the
        containers at this refinement level -- callers running a pole-bound
        ladder treat that as a miss, not a failure.
        """
        out: list[Fraction] = []
        for pair in self.fb.covering.pairs():
            pspace = self.pair_spaces[pair]
            fm = rhs[pair]
            terms = dict(fm.terms)
            if self.reducer is not None:
                terms = self.reducer.reduce_terms(terms)
            for nu in self.monomials:
                m = terms.get(nu)
                if m is None or m.is_zero():
                    out.extend([_ZERO] * pspace.dim)
                else:
                    out.extend(pspace.coords(m))
        return out

    def kernel(self) -> list[list[Fraction]]:
        return [list(v) for v in self.matrix.kernel_basis()]

    def solve(self, rhs: Mapping[Pair, FamilyMatrix]) -> dict[int, FamilyMatrix] | None:
        if self._solver is None:
            self._solver = self.matrix.solver()
        vec = self._solver.solve(self.rhs_vector(rhs))
        if vec is None:
            return None
        return self.cochain(vec)


class FamilyH0:
    """Global End-valued sections of a family (optionally twisted by dx and
    a pole divisor), with a canonical exact basis."""

    __slots__ = ("fb", "system", "vectors", "dim")

    def __init__(self, fb: FamilyBundle,
                 shift: Mapping[MarkedPoint, int] | None = None,
                 domega: bool = False):
        self.fb = fb
        self.system = _FamilySystem(fb, shift=shift, domega=domega)
        self.vectors = self.system.kernel()
        self.dim = len(self.vectors)

    def cochain(self, k: int) -> dict[int, FamilyMatrix]:
        return self.system.cochain(self.vectors[k])

    def coords(self, coch: Mapping[int, FamilyMatrix]) -> list[Fraction] | None:
        """Coefficients in the canonical basis, or None if not a section."""
        ambient = self.system.coords_cochain(coch)
        if not self.vectors:
            return [] if all(c == 0 for c in ambient) else None
        basis = QMatrix.from_rows(self.vectors).transpose()
        return basis.solve(ambient)


def family_end_h0(fb: FamilyBundle,
                  shift: Mapping[MarkedPoint, int] | None = None,
                  domega: bool = False) -> FamilyH0:
    """H^0 of End(family), optionally shifted by a divisor and twisted by
    d(coordinate) -- so both End (x) Omega^1(D) and End(-D) are expressible."""
    return FamilyH0(fb, shift=shift, domega=domega)


def solve_pair_equation(fb: FamilyBundle, rhs: Mapping[Pair, FamilyMatrix],
                        shift: Mapping[MarkedPoint, int] | None = None,
                        domega: bool = False,
                        extra_level: int = 0) -> dict[int, FamilyMatrix] | None:
    """One splitting attempt: per-chart M with Ad(G_ab) M_b - M_a = rhs_ab,
    in containers enlarged by extra_level, or None if inconsistent there."""
    system = _FamilySystem(fb, shift=shift, domega=domega,
                           extra_rhs={p: [m] for p, m in rhs.items()},
                           extra_level=extra_level)
    return system.solve(rhs)


# ---------------------------------------------------------------------------
# restriction between truncation orders


class ResRestriction:
    """The restriction H^0(End E_j) -> H^0(End E_i) between truncations."""

    __slots__ = ("source", "target", "image", "surjective", "cokernel_dim",
                 "witness")

    def __init__(self, source: FamilyH0, target: FamilyH0, cut_order: int):
        self.source = source
        self.target = target
        rows = []
        for k in range(source.dim):
            coch = source.cochain(k)
            cut = {idx: fm.truncate(cut_order) for idx, fm in coch.items()}
            coords = target.coords(cut)
            if coords is None:
                raise InternalError(
                    "a truncated global section failed to restrict")
            rows.append(coords)
        self.image = Subspace.from_vectors(rows, target.dim)
        self.surjective = self.image.dim == target.dim
        self.cokernel_dim = target.dim - self.image.dim
        self.witness: dict[int, FamilyMatrix] | None = None
        if not self.surjective:
            quot = QuotientSpace(Subspace.full(target.dim), self.image)
            lift = quot.lift([_ONE] + [_ZERO] * (quot.dim - 1))
            witness: dict[int, FamilyMatrix] | None = None
            for k, c in enumerate(lift):
                if c == 0:
                    continue
                piece = target.cochain(k)
                if witness is None:
                    witness = {idx: fm.scale(c) for idx, fm in piece.items()}
                else:
                    witness = {idx: witness[idx] + fm.scale(c)
                               for idx, fm in piece.items()}
            self.witness = witness

    def in_image(self, coch: Mapping[int, FamilyMatrix]) -> bool:
        coords = self.target.coords(coch)
        if coords is None:
            raise ValidationError("the matrix is not a global section downstairs")
        return self.image.contains(coords)


def res_surjective(fb: FamilyBundle, j: int, i: int,
                   profile: Mapping[MarkedPoint, int] | None = None) -> ResRestriction:
    """Decide surjectivity of the restriction from order-j to order-i
    truncations on global endomorphism sections (twisted by Omega^1(D) when
    a pole profile is given)."""
    if not 0 <= i < j <= fb.order:
        raise ValidationError("need 0 <= i < j <= family order")
    domega = profile is not None
    src = family_end_h0(restrict_family(fb, j), shift=profile, domega=domega)
    tgt = family_end_h0(restrict_family(fb, i), shift=profile, domega=domega)
    return ResRestriction(src, tgt, i)


# ---------------------------------------------------------------------------
# family-level Atiyah obstruction


class FamilyAtiyah:
    """Connection obstruction of a family: the cocycle dG G^-1 per overlap.

    The obstruction vanishes exactly when the family carries a connection
    with pole divisor bounded by ``profile``, i.e. per-chart forms A with
    Ad(G_ab) A_b - A_a = dG_ab G_ab^-1 on every overlap.  A found witness is
    itself the proof (the equation is checked by exact linear algebra).

    A *failed* solve proves nothing by itself -- unlike global sections,
    witness forms are not bounded by the transport-excess measurement -- so
    the search retries with progressively enlarged containers.  When the
    covering has two charts with disjoint removed sets and the base ring has
    no relation ideal, a failed search falls back to a residue certificate:
    for a global section S of End with vanishing forced at the pole divisor,

        phi_S(c) = sum over P removed from chart 1 of  Res_P tr(c_01 S_0) dx

    kills every coboundary Ad(G)b_1 - b_0 (tr((Ad(G)b_1) S_0) = tr(b_1 S_1)
    has poles only where chart 1 is punctured, so its residues there sum to
    zero; tr(b_0 S_0) is regular at those points), hence a nonzero value
    certifies a nonzero class.  The kill property is additionally verified
    on container generators rather than taken on faith.
    """

    __slots__ = ("fb", "cocycle", "witness", "vanishes", "certificate",
                 "pairing", "solve_level")

    def __init__(self, fb: FamilyBundle,
                 profile: Mapping[MarkedPoint, int] | None = None,
                 levels: Sequence[int] = (0, 2, 4, 8, 16)):
        cov = fb.covering
        cocycle: dict[Pair, FamilyMatrix] = {}
        for pair in cov.pairs():
            g = fb.transition(pair[0], pair[1])
            cocycle[pair] = g.d_w() * fb.transition(pair[1], pair[0])
        self.fb = fb
        self.cocycle = cocycle
        self.witness: dict[int, FamilyMatrix] | None = None
        self.certificate: dict[int, FamilyMatrix] | None = None
        self.pairing: TruncatedPoly | None = None
        self.solve_level: int | None = None
        for lvl in levels:
            witness = solve_pair_equation(fb, cocycle, shift=profile,
                                          domega=True, extra_level=lvl)
            if witness is not None:
                self.witness = witness
                self.solve_level = lvl
                self.vanishes = True
                return
        if self._residue_certificate(profile):
            self.vanishes = False
            return
        raise SectionInstabilityError(
            "connection witness search exhausted its container sizes and no "
            "residue certificate of non-splitting was available")

    # -- residue pairing against sections vanishing on the pole divisor ------
    def _residue_certificate(self, profile) -> bool:
        fb = self.fb
        cov = fb.covering
        if cov.n != 2 or fb.ideal:
            return False
        if cov.removed_keys(0) & cov.removed_keys(1):
            return False
        dual_shift = {p: -m for p, m in (profile or {}).items()}
        dual = family_end_h0(fb, shift=dual_shift, domega=False)
        probe = cov.removed[1]
        twisted = _FamilySystem(fb, shift=profile, domega=True)
        for k in range(dual.dim):
            s = dual.cochain(k)
            self._verify_kills_coboundaries(twisted, s, probe)
            val = self._pairing(self.cocycle[(0, 1)], s[0], probe)
            if not val.is_zero():
                self.certificate = s
                self.pairing = val
                return True
        return False

    def _pairing(self, c01: FamilyMatrix, s0: FamilyMatrix,
                 probe: Sequence[MarkedPoint]) -> TruncatedPoly:
        fb = self.fb
        curve = fb.curve
        coeffs: dict[tuple[int, ...], Fraction] = {}
        for e, m in (c01 * s0).terms.items():
            total = _ZERO
            tr = m.trace()
            if not tr.is_zero():
                for p in probe:
                    total += curve.residue_at(Differential(curve, tr), p)
            if total:
                coeffs[e] = total
        return TruncatedPoly(fb.nvars, fb.order, coeffs)

    def _verify_kills_coboundaries(self, twisted: _FamilySystem,
                                   s: Mapping[int, FamilyMatrix],
                                   probe: Sequence[MarkedPoint]) -> None:
        fb = self.fb
        g = fb.transition(0, 1)
        ginv = fb.transition(1, 0)
        for idx in (0, 1):
            for b in twisted.chart_spaces[idx].basis():
                fm = FamilyMatrix.constant(b, fb.nvars, fb.order)
                c01 = -fm if idx == 0 else g * fm * ginv
                if not self._pairing(c01, s[0], probe).is_zero():
                    raise InternalError(
                        "residue functional failed to kill a coboundary")


def family_atiyah(fb: FamilyBundle,
                  profile: Mapping[MarkedPoint, int] | None = None) -> FamilyAtiyah:
    return FamilyAtiyah(fb, profile=profile)
