"""Order-by-order deformations of bundles and log connections on a curve.

Given a bundle (and optionally a connection with bounded poles), this module
classifies first-order deformations, evaluates the quadratic first
obstruction, and runs the inductive correction loop that produces a
truncated versal family together with its obstruction power series.

The induction keeps one exact invariant: the transition/connection defect of
the working family equals sum_m f_m * (W_m G), where the f_m are the
obstruction-series polynomials accumulated so far and the W_m are fixed
degree-two class representatives.  Each round inspects the lowest surviving
degree of that difference, records the class of every monomial coefficient
into the f_m, and removes the classless remainder with a canonical
degree-one solve.  No ideal reduction happens inside the loop; modulo the
final ideal the defect then vanishes identically, which `verify_family`
re-checks through an independent rewriting route.

A truncated family is determined by its tangent data only up to chart
frames *and* coordinate changes of the base: two flat families can agree to
first order yet drift apart at a higher degree by a nonzero tangent class.
For rank-one bundles (endomorphisms commute, every monomial slice of the
logarithm is a closed pair) the drift is measured by `per_order_classes`
and removed by `normal_form`, which `kuranishi` applies so that an
unobstructed rank-one family always matches the straightforward
exponential family up to chart frames.

Conventions (matching the cohomology module): transitions act by
e_second = e_first g, one-cochains over the overlap live in the first
chart's frame, and the connection defect of a family is
dG + A_first G - G A_second per overlap.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations
from typing import Mapping, Sequence

from .arith import TruncatedPoly, grlex_key
from .bundle import (Bundle, CheckReport, Connection, FMatrix, FamilyBundle,
                     FamilyMatrix, Pair, chart_allowances, end_space,
                     profile_multiplicity, region_allowances, support_ok)
from .cech import (HyperCohomology, SheafCohomology, TwoTermComplex,
                   _matrix_from_columns, measured_allowances)
from .errors import InternalError, SectionInstabilityError, ValidationError
from .linalg import IdealReducer, QMatrix

_ZERO = Fraction(0)
_ONE = Fraction(1)

MAX_DEFORMATION_ORDER = 8
PRIMITIVE_LEVELS = (1, 2, 4, 8)
SEARCH_LEVELS = (1, 2, 4, 8)


class FirstOrderDatum:
    """One first-order deformation: an End-valued one-cocycle over the
    overlap (the transition shift), per-chart connection-matrix shifts in
    connection mode, and its class coordinates (forms variables first)."""

    __slots__ = ("mode", "cocycle", "forms", "coords")

    def __init__(self, mode: str, cocycle: FMatrix,
                 forms: Mapping[int, FMatrix] | None,
                 coords: Sequence[Fraction]):
        if mode not in ("bundle", "connection"):
            raise ValidationError("mode must be 'bundle' or 'connection'")
        if (forms is None) != (mode == "bundle"):
            raise ValidationError(
                "connection-mode data carry per-chart form shifts; "
                "bundle-mode data carry none")
        self.mode = mode
        self.cocycle = cocycle
        self.forms = None if forms is None else dict(forms)
        self.coords = [Fraction(c) for c in coords]

    def scaled(self, factor) -> "FirstOrderDatum":
        k = Fraction(factor)
        forms = None if self.forms is None else \
            {idx: m.scale(k) for idx, m in self.forms.items()}
        return FirstOrderDatum(self.mode, self.cocycle.scale(k), forms,
                               [k * c for c in self.coords])

    def plus(self, other: "FirstOrderDatum") -> "FirstOrderDatum":
        if self.mode != other.mode:
            raise ValidationError("cannot add data of different modes")
        forms = None if self.forms is None else \
            {idx: self.forms[idx] + other.forms[idx] for idx in self.forms}
        return FirstOrderDatum(self.mode, self.cocycle + other.cocycle, forms,
                               [a + b for a, b in zip(self.coords,
                                                      other.coords)])


class ObstructionSeries:
    """The obstruction power series: one truncated polynomial per basis
    functional of the degree-two class space, in variables ordered
    forms-part first, transitions-part second."""

    __slots__ = ("nvars", "order", "forms_count", "transitions_count",
                 "polys")

    def __init__(self, nvars: int, order: int, forms_count: int,
                 transitions_count: int, polys: Sequence[TruncatedPoly]):
        if forms_count + transitions_count != nvars:
            raise ValidationError("variable split does not add up")
        self.nvars = nvars
        self.order = order
        self.forms_count = forms_count
        self.transitions_count = transitions_count
        self.polys = list(polys)
        for p in self.polys:
            if p.nvars != nvars or p.order != order:
                raise ValidationError("series polynomial shape mismatch")

    def is_zero(self) -> bool:
        return all(p.is_zero() for p in self.polys)

    def degree_part(self, k: int) -> list[TruncatedPoly]:
        out = []
        for p in self.polys:
            out.append(TruncatedPoly(
                self.nvars, self.order,
                {e: c for e, c in p.terms.items() if sum(e) == k}))
        return out

    def evaluate_degree(self, k: int,
                        values: Sequence[Fraction]) -> list[Fraction]:
        """Each polynomial's degree-k part evaluated at a coordinate vector."""
        if len(values) != self.nvars:
            raise ValidationError("coordinate vector length mismatch")
        out = []
        for p in self.polys:
            total = _ZERO
            for e, c in p.terms.items():
                if sum(e) != k:
                    continue
                term = c
                for i, exp in enumerate(e):
                    for _ in range(exp):
                        term *= values[i]
                total += term
            out.append(total)
        return out

    def monomials_touch_transitions(self) -> bool:
        """True when every series monomial involves at least one
        transitions-part variable."""
        lo = self.forms_count
        for p in self.polys:
            for e in p.terms:
                if not any(e[i] for i in range(lo, self.nvars)):
                    return False
        return True


class KuranishiResult:
    """A truncated versal family with its tangent data, obstruction series,
    and the verification report of the defining congruences."""

    __slots__ = ("mode", "data", "series", "family", "report")

    def __init__(self, mode: str, data: Sequence[FirstOrderDatum],
                 series: ObstructionSeries, family: FamilyBundle,
                 report: CheckReport):
        self.mode = mode
        self.data = list(data)
        self.series = series
        self.family = family
        self.report = report

    @property
    def tangent_dim(self) -> int:
        return len(self.data)


# ---------------------------------------------------------------------------
# standalone helpers


def connection_defects(fb: FamilyBundle) -> dict[Pair, FamilyMatrix]:
    """dG + A_first G - G A_second for every increasing overlap."""
    if fb.forms is None:
        raise ValidationError("the family carries no connection matrices")
    out = {}
    for (a, b) in fb.covering.pairs():
        g = fb.transitions[(a, b)]
        out[(a, b)] = g.d_w() + fb.forms[a] * g - g * fb.forms[b]
    return out


def family_gauge(fb: FamilyBundle,
                 frames: Mapping[int, FamilyMatrix]) -> FamilyBundle:
    """Change each chart frame of a family: G' = H_a^-1 G H_b,
    A' = H^-1 A H + H^-1 dH."""
    cov = fb.covering
    hs = {idx: frames[idx] for idx in range(cov.n)}
    hinv = {idx: hs[idx].inverse() for idx in hs}
    trans = {(a, b): hinv[a] * fb.transitions[(a, b)] * hs[b]
             for (a, b) in cov.pairs()}
    forms = None
    if fb.forms is not None:
        forms = {idx: hinv[idx] * fb.forms[idx] * hs[idx]
                 + hinv[idx] * hs[idx].d_w()
                 for idx in range(cov.n)}
    return FamilyBundle(cov, fb.rank, fb.nvars, fb.order, trans, forms,
                        fb.profile, fb.ideal)


def _reduced_terms(fm: FamilyMatrix,
                   reducer: IdealReducer | None) -> dict[tuple, FMatrix]:
    terms = dict(fm.terms)
    if reducer is not None:
        terms = reducer.reduce_terms(terms)
    return {e: m for e, m in terms.items() if not m.is_zero()}


def _fm_log(u: FamilyMatrix) -> FamilyMatrix:
    """log(Id + u) as a truncated series; u must have no constant term."""
    if not u.constant_part().is_zero():
        raise InternalError("the family logarithm needs a vanishing "
                            "constant term")
    acc = FamilyMatrix.zero(u.curve, u.r, u.nvars, u.order)
    power = FamilyMatrix.identity(u.curve, u.r, u.nvars, u.order)
    for m in range(1, u.order + 1):
        power = power * u
        if power.is_zero():
            break
        acc = acc + power.scale(Fraction((-1) ** (m + 1), m))
    return acc


def _fm_exp(v: FamilyMatrix) -> FamilyMatrix:
    """exp(v) as a truncated series; v must have no constant term."""
    if not v.constant_part().is_zero():
        raise InternalError("the family exponential needs a vanishing "
                            "constant term")
    acc = FamilyMatrix.identity(v.curve, v.r, v.nvars, v.order)
    power = FamilyMatrix.identity(v.curve, v.r, v.nvars, v.order)
    fact = 1
    for m in range(1, v.order + 1):
        power = power * v
        if power.is_zero():
            break
        fact *= m
        acc = acc + power.scale(Fraction(1, fact))
    return acc


def verify_family(obj) -> CheckReport:
    """Exact congruence checks for a family modulo its ideal and the
    truncation order: triple-overlap cocycle identities and, in connection
    mode, the transition/connection compatibility on every overlap."""
    fb = obj.family if isinstance(obj, KuranishiResult) else obj
    report = CheckReport()

    bad_gen = [p for p in fb.ideal
               if not p.is_zero() and min(sum(e) for e in p.terms) < 2]
    report.add("obstruction ideal starts in degree 2", not bad_gen,
               "" if not bad_gen
               else f"a generator has a degree-"
                    f"{min(sum(e) for e in bad_gen[0].terms)} term")

    reducer = IdealReducer(fb.ideal, fb.nvars, fb.order) if fb.ideal else None
    cov = fb.covering

    triples = list(combinations(range(cov.n), 3))
    if not triples:
        report.add("cocycle congruence", True,
                   "no triple overlaps with two charts")
    for (a, b, c) in triples:
        defect = fb.transitions[(a, b)] * fb.transitions[(b, c)] \
            - fb.transitions[(a, c)]
        left = _reduced_terms(defect, reducer)
        ok = not left
        detail = ""
        if not ok:
            d = min(sum(e) for e in left)
            detail = f"degree-{d} terms survive"
        report.add(f"cocycle congruence on the ({a},{b},{c}) triple overlap",
                   ok, detail)

    if fb.forms is not None:
        for (a, b), defect in connection_defects(fb).items():
            left = _reduced_terms(defect, reducer)
            ok = not left
            detail = ""
            if not ok:
                d = min(sum(e) for e in left)
                detail = f"degree-{d} terms survive"
            report.add(
                f"connection congruence on the ({a},{b}) overlap", ok, detail)
    return report


def validate_first_order(u: FirstOrderDatum, bundle: Bundle,
                         conn: Connection | None = None) -> CheckReport:
    """Support, pole-bound, and closedness checks for a first-order datum."""
    cov = bundle.covering
    curve = cov.curve
    xs = cov.finite_candidate_x()
    report = CheckReport()

    bad = [f"entry ({i},{j})" for i, row in enumerate(u.cocycle.rows)
           for j, e in enumerate(row) if not support_ok(e, xs)]
    report.add("overlap cochain supported on marked points", not bad,
               bad[0] + " has a pole off the marked locus" if bad else "")

    region = {p.key for p in cov.region_removed((0, 1))} if cov.n == 2 \
        else set()
    holes = []
    for p in cov.candidate_points():
        if p.key in region:
            continue
        for i, row in enumerate(u.cocycle.rows):
            for j, e in enumerate(row):
                if not e.is_zero() and curve.order_at(e, p) < 0:
                    holes.append(f"entry ({i},{j}) has a pole at {p.name}")
    report.add("overlap cochain regular where both charts live", not holes,
               holes[0] if holes else "")

    if u.mode == "bundle":
        report.add("cocycle condition", True,
                   "no triple overlaps with two charts")
        return report

    if conn is None:
        raise ValidationError("connection-mode data need the connection")
    for idx in range(cov.n):
        m = u.forms[idx]
        bad = [f"entry ({i},{j})" for i, row in enumerate(m.rows)
               for j, e in enumerate(row) if not support_ok(e, xs)]
        report.add(f"form shift on chart {idx} supported on marked points",
                   not bad,
                   bad[0] + " has a pole off the marked locus" if bad else "")
        removed = cov.removed_keys(idx)
        holes = []
        for p in cov.candidate_points():
            if p.key in removed:
                continue
            allowed = profile_multiplicity(conn.profile, p) \
                + curve.d_coord_order(p)
            for i, row in enumerate(m.rows):
                for j, e in enumerate(row):
                    if not e.is_zero() and curve.order_at(e, p) < -allowed:
                        holes.append(
                            f"entry ({i},{j}) exceeds the pole bound at "
                            f"{p.name}")
        report.add(f"form shift on chart {idx} within the pole bounds",
                   not holes, holes[0] if holes else "")

    cx = TwoTermComplex(conn)
    g = bundle.g[(0, 1)]
    ginv = bundle.transition(1, 0)
    lhs = g * u.forms[1] * ginv - u.forms[0]
    ok = lhs == cx.nabla_pair((0, 1), u.cocycle)
    report.add("closedness: form shifts glue to the derivative of the "
               "transition shift", ok, "" if ok else "the two sides differ")
    return report


def gauge_shift(u: FirstOrderDatum, frames: Mapping[int, FMatrix],
                bundle: Bundle,
                conn: Connection | None = None) -> FirstOrderDatum:
    """Shift a first-order datum by a per-chart endomorphism cochain: the
    cocycle gains its coboundary, the form shifts gain its covariant
    derivative, and the class coordinates are unchanged."""
    g = bundle.g[(0, 1)]
    ginv = bundle.transition(1, 0)
    cocycle = u.cocycle + g * frames[1] * ginv - frames[0]
    forms = None
    if u.mode == "connection":
        if conn is None:
            raise ValidationError("connection-mode data need the connection")
        cx = TwoTermComplex(conn)
        forms = {idx: u.forms[idx] + cx.nabla_chart(idx, frames[idx])
                 for idx in u.forms}
    return FirstOrderDatum(u.mode, cocycle, forms, list(u.coords))


def yoneda_square_cocycle(bundle: Bundle, conn: Connection,
                          u: FirstOrderDatum,
                          v: FirstOrderDatum | None = None) -> FMatrix:
    """The degree-two defect cochain of a first-order deformation: the
    composition-product square of one datum, or its polarized cross term
    for two data (square(u+v) - square(u) - square(v))."""
    if u.mode != "connection" or (v is not None and v.mode != "connection"):
        raise ValidationError(
            "the quadratic form lives in the connection complex; bundle "
            "deformations of a curve are unobstructed")
    g = bundle.g[(0, 1)]
    ginv = bundle.transition(1, 0)

    def push(m: FMatrix) -> FMatrix:
        return g * m * ginv

    if v is None:
        return u.forms[0] * u.cocycle - u.cocycle * push(u.forms[1])
    return (u.forms[0] * v.cocycle + v.forms[0] * u.cocycle
            - u.cocycle * push(v.forms[1]) - v.cocycle * push(u.forms[1]))


# ---------------------------------------------------------------------------
# the deformation space


class DeformationSpace:
    """Deformation theory of a bundle, or of a log connection, over a fixed
    two-chart covering: tangent basis, class coordinates, quadratic
    obstruction, the order-by-order versal construction, and gauge
    comparisons between families."""

    __slots__ = ("mode", "bundle", "conn", "hyper", "sheaf", "cx",
                 "forms_count", "transitions_count", "obstruction_count",
                 "nvars", "start_level", "_tangent", "_obstruction_reps",
                 "_pm_solver", "_kernel_matrix", "_kernel_solver")

    def __init__(self, bundle: Bundle, conn: Connection | None = None, *,
                 start_level: int = 1):
        self.bundle = bundle
        self.conn = conn
        self.start_level = start_level
        if conn is None:
            self.mode = "bundle"
            self.sheaf = SheafCohomology(bundle, start_level=start_level)
            self.hyper = None
            self.cx = None
            self.forms_count = 0
            self.transitions_count = self.sheaf.h1_dim
            self.obstruction_count = 0
        else:
            if conn.bundle is not bundle:
                raise ValidationError(
                    "the connection belongs to a different bundle")
            if bundle.covering.n != 2:
                raise ValidationError(
                    "connection deformations are supported on two-chart "
                    "coverings")
            self.mode = "connection"
            self.hyper = HyperCohomology(conn, start_level=start_level)
            self.sheaf = self.hyper.e0
            self.cx = self.hyper.cx
            self.forms_count = self.hyper.forms_dim
            self.transitions_count = self.hyper.transitions_dim
            self.obstruction_count = self.hyper.hh2
        self.nvars = self.forms_count + self.transitions_count
        self._tangent: list[FirstOrderDatum] | None = None
        self._obstruction_reps: list[FMatrix] | None = None
        self._pm_solver = None
        self._kernel_matrix: QMatrix | None = None
        self._kernel_solver = None

    # -- tangent space -------------------------------------------------------
    def tangent_basis(self) -> list[FirstOrderDatum]:
        """Canonical first-order data, one per tangent coordinate (forms
        variables first, transitions variables second)."""
        if self._tangent is not None:
            return self._tangent
        data: list[FirstOrderDatum] = []
        n = self.nvars

        def unit(j: int) -> list[Fraction]:
            return [_ONE if i == j else _ZERO for i in range(n)]

        if self.mode == "bundle":
            for j in range(n):
                data.append(FirstOrderDatum(
                    "bundle", self.sheaf.representative(unit(j)), None,
                    unit(j)))
        else:
            for j, (a01, forms) in enumerate(self.hyper.first_order_basis()):
                data.append(FirstOrderDatum("connection", a01, forms,
                                            unit(j)))
        for u in data:
            rep = validate_first_order(u, self.bundle, self.conn)
            if not rep.ok:
                raise InternalError(
                    "a tangent representative failed its own validation: "
                    + "; ".join(name for name, _ in rep.failures()))
        self._tangent = data
        return data

    def datum_from_coords(self, coords: Sequence[Fraction]) -> FirstOrderDatum:
        """The canonical representative with the given class coordinates."""
        coords = [Fraction(c) for c in coords]
        if len(coords) != self.nvars:
            raise ValidationError("coordinate vector length mismatch")
        data = self.tangent_basis()
        curve = self.bundle.curve
        r = self.bundle.rank
        cocycle = FMatrix.zero(curve, r)
        forms = None if self.mode == "bundle" else \
            {idx: FMatrix.zero(curve, r) for idx in range(2)}
        for c, u in zip(coords, data):
            if not c:
                continue
            cocycle = cocycle + u.cocycle.scale(c)
            if forms is not None:
                for idx in forms:
                    forms[idx] = forms[idx] + u.forms[idx].scale(c)
        return FirstOrderDatum(self.mode, cocycle, forms, coords)

    def first_order_class(self, cocycle: FMatrix,
                          forms: Mapping[int, FMatrix] | None = None
                          ) -> list[Fraction]:
        """Class coordinates of a closed first-order pair (forms variables
        first).  In bundle mode only the cocycle is given."""
        if self.mode == "bundle":
            return self.sheaf.class_vector(cocycle)
        hh = self.hyper
        e0, e1 = hh.e0, hh.e1
        g = self.bundle.g[(0, 1)]
        ginv = self.bundle.transition(1, 0)
        if g * forms[1] * ginv - forms[0] != \
                self.cx.nabla_pair((0, 1), cocycle):
            raise ValidationError(
                "the pair is not closed: the form shifts do not glue to the "
                "derivative of the transition shift")

        if e0.h1_dim:
            if self._pm_solver is None:
                self._pm_solver = e0.pair_matrix.solver()
            c = self._pm_solver.solve(e0.class_vector(cocycle))
            if c is None:
                raise InternalError("spanning cocycles lost their rank")
            if self._kernel_matrix is None:
                self._kernel_matrix = _matrix_from_columns(
                    hh.m11.kernel_basis(), e0.h1_dim)
                self._kernel_solver = self._kernel_matrix.solver()
            s = self._kernel_solver.solve(c)
            if s is None:
                raise InternalError(
                    "a closed pair's transition class left the kernel of "
                    "the class-level derivative")
        else:
            s = []

        data = self.tangent_basis()
        reps = data[self.forms_count:]
        a_red = cocycle
        for sj, u in zip(s, reps):
            if sj:
                a_red = a_red - u.cocycle.scale(sj)
        h = e0.split(a_red)
        w: dict[int, FamilyMatrix] = {}
        for idx in range(2):
            m = forms[idx] - self.cx.nabla_chart(idx, h[idx])
            for sj, u in zip(s, reps):
                if sj:
                    m = m - u.forms[idx].scale(sj)
            w[idx] = FamilyMatrix.constant(m, 0, 0)
        coords_w = e1.h0.coords(w)
        if coords_w is None:
            raise InternalError(
                "the residual form shift of a closed pair is not global")
        t = hh.forms_quotient.project(coords_w)
        return list(t) + [Fraction(x) for x in s]

    # -- the quadratic obstruction --------------------------------------------
    def yoneda_square(self, u: FirstOrderDatum,
                      v: FirstOrderDatum | None = None) -> FMatrix:
        return yoneda_square_cocycle(self.bundle, self.conn, u, v)

    def obstruction_representatives(self) -> list[FMatrix]:
        """Fixed degree-two class representatives, one per basis functional."""
        if self._obstruction_reps is None:
            reps = []
            for m in range(self.obstruction_count):
                unit = [_ONE if i == m else _ZERO
                        for i in range(self.obstruction_count)]
                reps.append(self.hyper.obstruction_representative(unit))
            self._obstruction_reps = reps
        return self._obstruction_reps

    def first_obstruction(self, u: FirstOrderDatum
                          ) -> tuple[list[Fraction], FamilyBundle | None]:
        """Degree-two class of one datum; when it vanishes, also a verified
        second-order lift of the datum as a one-variable family."""
        cov = self.bundle.covering
        curve = self.bundle.curve
        r = self.bundle.rank
        if self.mode == "bundle":
            trans = {}
            for pair in cov.pairs():
                base = self.bundle.g[pair]
                terms = {(0,): base}
                if pair == (0, 1):
                    terms[(1,)] = u.cocycle * base
                trans[pair] = FamilyMatrix(curve, r, 1, 2, terms)
            return [], FamilyBundle(cov, r, 1, 2, trans)

        q2 = self.yoneda_square(u)
        cls = self.hyper.obstruction_class(q2)
        if any(cls):
            return cls, None
        sol = self.hyper.solve_degree_one(q2)
        if sol is None:
            raise InternalError(
                "a class-zero quadratic defect failed its degree-one solve")
        a2, b2 = sol
        g = self.bundle.g[(0, 1)]
        trans = {(0, 1): FamilyMatrix(curve, r, 1, 2, {
            (0,): g, (1,): u.cocycle * g, (2,): a2 * g})}
        forms = {idx: FamilyMatrix(curve, r, 1, 2, {
            (0,): self.conn.forms[idx], (1,): u.forms[idx], (2,): b2[idx]})
            for idx in range(2)}
        lift = FamilyBundle(cov, r, 1, 2, trans, forms, self.conn.profile)
        return cls, lift

    def brute_force_second_order(self, rhs01: FMatrix,
                                 levels: Sequence[int] = SEARCH_LEVELS
                                 ) -> list[Fraction]:
        """Degree-two class coordinates of a form cochain, found by one
        joint linear solve over raw cochain containers: write the cochain
        as a degree-one boundary plus a combination of the fixed class
        representatives.  The combination is unique, so its coefficients
        are the class; the cochain lifts exactly when they vanish."""
        if self.mode != "connection":
            raise ValidationError(
                "the degree-two search needs connection mode")
        cov = self.bundle.covering
        curve = self.bundle.curve
        r = self.bundle.rank
        cx = self.cx
        g = self.bundle.g[(0, 1)]
        ginv = self.bundle.transition(1, 0)
        reps = self.obstruction_representatives()
        candidates = cov.candidate_points()
        profile = self.conn.profile
        for level in levels:
            v1a = end_space(curve, r,
                            region_allowances(cov, (0, 1), level))
            v1b = [end_space(curve, r,
                             chart_allowances(cov, idx, level, profile, True))
                   for idx in (0, 1)]
            v1a_basis = list(v1a.basis())
            v1b_basis = [list(sp.basis()) for sp in v1b]
            imgs = [-cx.nabla_pair((0, 1), a) for a in v1a_basis]
            imgs += [-b for b in v1b_basis[0]]
            imgs += [g * b * ginv for b in v1b_basis[1]]
            v2 = end_space(curve, r, measured_allowances(
                curve, imgs + reps + [rhs01], candidates,
                region_allowances(cov, (0, 1), level, profile, True)))
            cols = [v2.coords(m) for m in imgs]
            cols += [v2.coords(wm) for wm in reps]
            mat = _matrix_from_columns(cols, v2.dim)
            sol = mat.solve(v2.coords(rhs01))
            if sol is not None:
                return [Fraction(c) for c in sol[len(sol) - len(reps):]]
        raise SectionInstabilityError(
            "the degree-two search exhausted its container sizes")

    # -- the versal construction ----------------------------------------------
    def kuranishi(self, order: int = 4) -> KuranishiResult:
        """The order-by-order construction of a truncated versal family and
        its obstruction series."""
        if order < 2:
            raise ValidationError("the deformation order must be at least 2")
        if order > MAX_DEFORMATION_ORDER:
            raise ValidationError(
                f"the deformation order exceeds the configured ceiling "
                f"({MAX_DEFORMATION_ORDER})")
        data = self.tangent_basis()
        cov = self.bundle.covering
        curve = self.bundle.curve
        r = self.bundle.rank
        n = self.nvars

        def unit_exp(i: int) -> tuple[int, ...]:
            return tuple(1 if j == i else 0 for j in range(n))

        if self.mode == "bundle":
            trans = {}
            for pair in cov.pairs():
                terms = {(0,) * n: self.bundle.g[pair]}
                if pair == (0, 1):
                    for i, u in enumerate(data):
                        terms[unit_exp(i)] = u.cocycle * self.bundle.g[pair]
                trans[pair] = FamilyMatrix(curve, r, n, order, terms)
            family = FamilyBundle(cov, r, n, order, trans)
            series = ObstructionSeries(n, order, 0, self.transitions_count,
                                       [])
            if r == 1 and cov.n == 2:
                family = self.normal_form(family)
            report = verify_family(family)
            if not report.ok:
                raise InternalError(
                    "the constant-correction family failed verification: "
                    + "; ".join(name for name, _ in report.failures()))
            return KuranishiResult("bundle", data, series, family, report)

        hh = self.hyper
        g = self.bundle.g[(0, 1)]
        ginv = self.bundle.transition(1, 0)
        reps = self.obstruction_representatives()

        gt = {(0,) * n: g}
        for i, u in enumerate(data):
            prod = u.cocycle * g
            if not prod.is_zero():
                gt[unit_exp(i)] = prod
        big_g = FamilyMatrix(curve, r, n, order, gt)
        forms = {}
        for idx in range(2):
            ft = {(0,) * n: self.conn.forms[idx]}
            for i, u in enumerate(data):
                if not u.forms[idx].is_zero():
                    ft[unit_exp(i)] = u.forms[idx]
            forms[idx] = FamilyMatrix(curve, r, n, order, ft)

        defect = big_g.d_w() + forms[0] * big_g - big_g * forms[1]
        polys = [TruncatedPoly.zero(n, order)
                 for _ in range(self.obstruction_count)]

        for k in range(2, order + 1):
            target = defect
            for wm, f in zip(reps, polys):
                if f.is_zero():
                    continue
                target = target - (FamilyMatrix.constant(wm, n, order)
                                   * big_g).mul_poly(f)
            for j in range(k):
                if not target.homogeneous(j).is_zero():
                    raise InternalError(
                        f"a degree-{j} defect survived into the degree-{k} "
                        "round")
            slice_k = target.homogeneous(k)
            if slice_k.is_zero():
                continue
            corrections: list[tuple[tuple[int, ...], FMatrix,
                                    dict[int, FMatrix]]] = []
            for mu in sorted(slice_k.terms, key=grlex_key):
                m_mu = slice_k.terms[mu] * ginv
                cls = hh.obstruction_class(m_mu)
                for m, om in enumerate(cls):
                    if om:
                        polys[m] = polys[m] + TruncatedPoly(n, order,
                                                            {mu: om})
                        m_mu = m_mu - reps[m].scale(om)
                sol = hh.solve_degree_one(m_mu)
                if sol is None:
                    raise InternalError(
                        "a class-zero defect monomial failed its degree-one "
                        "solve")
                corrections.append((mu, sol[0], sol[1]))
            if not corrections:
                continue
            p = FamilyMatrix(curve, r, n, order,
                             {mu: a * g for mu, a, _ in corrections})
            q0 = FamilyMatrix(curve, r, n, order,
                              {mu: b[0] for mu, _, b in corrections})
            q1 = FamilyMatrix(curve, r, n, order,
                              {mu: b[1] for mu, _, b in corrections})
            defect = defect + p.d_w() + forms[0] * p - p * forms[1] \
                + q0 * big_g - big_g * q1 + q0 * p - p * q1
            big_g = big_g + p
            forms[0] = forms[0] + q0
            forms[1] = forms[1] + q1

        check = big_g.d_w() + forms[0] * big_g - big_g * forms[1]
        for wm, f in zip(reps, polys):
            if f.is_zero():
                continue
            check = check - (FamilyMatrix.constant(wm, n, order)
                             * big_g).mul_poly(f)
        if not check.is_zero():
            raise InternalError(
                "the finished family does not satisfy its exact defect "
                "identity")

        family = FamilyBundle(cov, r, n, order, {(0, 1): big_g}, forms,
                              self.conn.profile,
                              [f for f in polys if not f.is_zero()])
        series = ObstructionSeries(n, order, self.forms_count,
                                   self.transitions_count, polys)
        if r == 1 and series.is_zero():
            family = self.normal_form(family)
        report = verify_family(family)
        if not report.ok:
            raise InternalError(
                "the finished family failed its congruence verification: "
                + "; ".join(name for name, _ in report.failures()))
        return KuranishiResult("connection", data, series, family, report)

    # -- canonical coordinates (rank one) ---------------------------------------
    def _require_abelian(self, fb: FamilyBundle) -> None:
        if self.bundle.rank != 1:
            raise ValidationError(
                "per-order class extraction needs a rank-one bundle, where "
                "endomorphisms commute and monomial slices stay closed")
        if self.bundle.covering.n != 2:
            raise ValidationError(
                "per-order class extraction is supported on two-chart "
                "coverings")
        if any(not p.is_zero() for p in list(fb.ideal)):
            raise ValidationError(
                "per-order class extraction works over a flat truncated "
                "base; families carrying a nontrivial ideal are out of "
                "scope")
        if fb.transitions[(0, 1)].constant_part() != self.bundle.g[(0, 1)]:
            raise ValidationError(
                "the family does not restrict to this bundle at the origin")
        if self.mode == "connection":
            if fb.forms is None:
                raise ValidationError(
                    "the family carries no connection matrices")
            for idx in range(2):
                if fb.forms[idx].constant_part() != self.conn.forms[idx]:
                    raise ValidationError(
                        "the family does not restrict to this connection "
                        "at the origin")
        elif fb.forms is not None:
            raise ValidationError(
                "bundle-mode class extraction got a family carrying "
                "connection matrices")

    def per_order_classes(self, fb: FamilyBundle
                          ) -> dict[tuple[int, ...], list[Fraction]]:
        """Tangent class coordinates of every monomial of a rank-one family,
        read off the logarithm of the transition factor together with the
        connection-matrix shifts.  Monomials whose class vanishes are
        omitted, so two families agree class-by-class exactly when these
        dictionaries are equal."""
        self._require_abelian(fb)
        n, order = fb.nvars, fb.order
        curve = self.bundle.curve
        ginv = self.bundle.transition(1, 0)
        lg = _fm_log(fb.transitions[(0, 1)]
                     * FamilyMatrix.constant(ginv, n, order)
                     - FamilyMatrix.identity(curve, 1, n, order))
        keys = set(lg.terms)
        if self.mode == "connection":
            for idx in range(2):
                keys |= {e for e in fb.forms[idx].terms if sum(e) >= 1}
        out: dict[tuple[int, ...], list[Fraction]] = {}
        for mu in sorted(keys, key=grlex_key):
            z = lg.coeff(mu)
            if self.mode == "connection":
                cls = self.first_order_class(
                    z, {idx: fb.forms[idx].coeff(mu) for idx in range(2)})
            else:
                cls = self.first_order_class(z)
            if any(cls):
                out[mu] = cls
        return out

    def normal_form(self, fb: FamilyBundle) -> FamilyBundle:
        """Rewrites a rank-one family over a flat truncated base so that all
        of its tangent classes sit in degree one.  Degree by degree, the
        classes of the logarithm slices are removed by multiplying the
        transition factor with the exponential of minus their canonical
        representatives, shifting the connection matrices along; both steps
        preserve the congruences exactly because rank-one endomorphisms
        commute."""
        self._require_abelian(fb)
        data = self.tangent_basis()
        curve = self.bundle.curve
        cov = self.bundle.covering
        n, order = fb.nvars, fb.order
        ginv = self.bundle.transition(1, 0)
        cur = fb
        for k in range(2, order + 1):
            lg = _fm_log(cur.transitions[(0, 1)]
                         * FamilyMatrix.constant(ginv, n, order)
                         - FamilyMatrix.identity(curve, 1, n, order))
            keys = {e for e in lg.terms if sum(e) == k}
            if self.mode == "connection":
                for idx in range(2):
                    keys |= {e for e in cur.forms[idx].terms if sum(e) == k}
            zterms: dict[tuple[int, ...], FMatrix] = {}
            wterms: dict[int, dict[tuple[int, ...], FMatrix]] = {0: {}, 1: {}}
            for mu in sorted(keys, key=grlex_key):
                z = lg.coeff(mu)
                if self.mode == "connection":
                    cls = self.first_order_class(
                        z, {idx: cur.forms[idx].coeff(mu)
                            for idx in range(2)})
                else:
                    cls = self.first_order_class(z)
                if not any(cls):
                    continue
                corr = FMatrix.zero(curve, 1)
                for cj, u in zip(cls, data):
                    if cj:
                        corr = corr + u.cocycle.scale(cj)
                if not corr.is_zero():
                    zterms[mu] = corr.scale(-1)
                if self.mode == "connection":
                    for idx in range(2):
                        shift = FMatrix.zero(curve, 1)
                        for cj, u in zip(cls, data):
                            if cj:
                                shift = shift + u.forms[idx].scale(cj)
                        if not shift.is_zero():
                            wterms[idx][mu] = shift
            if not zterms and not wterms[0] and not wterms[1]:
                continue
            trans = dict(cur.transitions)
            trans[(0, 1)] = cur.transitions[(0, 1)] * _fm_exp(
                FamilyMatrix(curve, 1, n, order, zterms))
            forms = None
            if self.mode == "connection":
                forms = {idx: cur.forms[idx]
                         - FamilyMatrix(curve, 1, n, order, wterms[idx])
                         for idx in range(2)}
            cur = FamilyBundle(cov, 1, n, order, trans, forms,
                               cur.profile, [])
        if self.mode == "connection":
            for _, defect in connection_defects(cur).items():
                if not defect.is_zero():
                    raise InternalError(
                        "the normal-form pass broke the connection "
                        "congruence on an overlap")
        for mu in self.per_order_classes(cur):
            if sum(mu) >= 2:
                raise InternalError(
                    "the normal-form pass left a class in degree two or "
                    "higher")
        return cur

    # -- gauge comparisons -----------------------------------------------------
    def _solve_chart_primitive(self, c01: FMatrix,
                               formsrhs: Mapping[int, FMatrix],
                               levels: Sequence[int] = PRIMITIVE_LEVELS
                               ) -> dict[int, FMatrix]:
        """A per-chart endomorphism cochain whose coboundary is c01 and
        whose covariant derivative matches the given form shifts, found
        jointly over growing containers."""
        cov = self.bundle.covering
        curve = self.bundle.curve
        r = self.bundle.rank
        cx = self.cx
        g = self.bundle.g[(0, 1)]
        ginv = self.bundle.transition(1, 0)
        candidates = cov.candidate_points()
        profile = self.conn.profile
        for level in levels:
            v0 = [end_space(curve, r, chart_allowances(cov, idx, level))
                  for idx in (0, 1)]
            v0_basis = [list(sp.basis()) for sp in v0]
            imgs_pair = [-b for b in v0_basis[0]] + \
                [g * b * ginv for b in v0_basis[1]]
            pair_space = end_space(curve, r, measured_allowances(
                curve, imgs_pair + [c01], candidates,
                region_allowances(cov, (0, 1), level)))
            form_spaces = []
            for idx in (0, 1):
                imgs = [cx.nabla_chart(idx, b) for b in v0_basis[idx]]
                form_spaces.append(end_space(curve, r, measured_allowances(
                    curve, imgs + [formsrhs[idx]], candidates,
                    chart_allowances(cov, idx, level, profile, True))))
            cols = []
            for idx in (0, 1):
                for b in v0_basis[idx]:
                    col = pair_space.coords(
                        g * b * ginv if idx == 1 else -b)
                    for jdx in (0, 1):
                        m = cx.nabla_chart(jdx, b) if jdx == idx else \
                            FMatrix.zero(curve, r)
                        col = col + form_spaces[jdx].coords(m)
                    cols.append(col)
            nrows = pair_space.dim + form_spaces[0].dim + form_spaces[1].dim
            mat = _matrix_from_columns(cols, nrows)
            rhs = pair_space.coords(c01) \
                + form_spaces[0].coords(formsrhs[0]) \
                + form_spaces[1].coords(formsrhs[1])
            sol = mat.solve(rhs)
            if sol is None:
                continue
            out = {}
            offset = 0
            for idx in (0, 1):
                acc = FMatrix.zero(curve, r)
                for x, b in zip(sol[offset:offset + len(v0_basis[idx])],
                                v0_basis[idx]):
                    if x:
                        acc = acc + b.scale(x)
                offset += len(v0_basis[idx])
                out[idx] = acc
            return out
        raise SectionInstabilityError(
            "the joint primitive search exhausted its container sizes")

    def families_gauge_equivalent(self, fam_a: FamilyBundle,
                                  fam_b: FamilyBundle) -> bool:
        """Whether two verified families are related by a family of chart
        frames, decided order by order: at each degree the difference is a
        closed pair per monomial; the families are equivalent exactly when
        every such class vanishes, in which case a joint primitive gauges
        the degree away and the loop continues.  In bundle mode the same
        procedure runs on the transition factors alone."""
        if (fam_a.nvars, fam_a.order) != (fam_b.nvars, fam_b.order):
            raise ValidationError("the families live over different bases")
        has_forms = self.mode == "connection"
        if has_forms and (fam_a.forms is None or fam_b.forms is None):
            raise ValidationError(
                "connection-mode comparison needs families carrying "
                "connection matrices")
        if not has_forms and (fam_a.forms is not None
                              or fam_b.forms is not None):
            raise ValidationError(
                "bundle-mode comparison got families carrying connection "
                "matrices")
        if any(not p.is_zero() for p in list(fam_a.ideal) + list(fam_b.ideal)):
            raise ValidationError(
                "gauge comparison works over a flat truncated base; "
                "families carrying a nontrivial ideal are out of scope")
        curve = self.bundle.curve
        r = self.bundle.rank
        n, order = fam_a.nvars, fam_a.order
        ginv = self.bundle.transition(1, 0)
        cur = fam_b
        for k in range(1, order + 1):
            dg = _reduced_terms(
                fam_a.transitions[(0, 1)] - cur.transitions[(0, 1)], None)
            da = [_reduced_terms(fam_a.forms[idx] - cur.forms[idx], None)
                  for idx in (0, 1)] if has_forms else [{}, {}]
            monomials = sorted(
                {e for e in dg if sum(e) == k}
                | {e for d in da for e in d if sum(e) == k}, key=grlex_key)
            low = [e for e in dg if sum(e) < k] \
                + [e for d in da for e in d if sum(e) < k]
            if low:
                raise InternalError(
                    "the gauge comparison lost a lower degree")
            if not monomials:
                continue
            frames = {idx: {(0,) * n: FMatrix.identity(curve, r)}
                      for idx in (0, 1)}
            for mu in monomials:
                zero = FMatrix.zero(curve, r)
                c = dg.get(mu, zero) * ginv
                if has_forms:
                    shifts = {idx: da[idx].get(mu, zero) for idx in (0, 1)}
                    if any(self.first_order_class(c, shifts)):
                        return False
                    h = self._solve_chart_primitive(c, shifts)
                else:
                    if any(self.first_order_class(c)):
                        return False
                    h = self.sheaf.split(c)
                for idx in (0, 1):
                    if not h[idx].is_zero():
                        frames[idx][mu] = h[idx]
            cur = family_gauge(cur, {
                idx: FamilyMatrix(curve, r, n, order, frames[idx])
                for idx in (0, 1)})
        leftover = bool(_reduced_terms(
            fam_a.transitions[(0, 1)] - cur.transitions[(0, 1)], None))
        if has_forms:
            leftover = leftover or any(
                _reduced_terms(fam_a.forms[idx] - cur.forms[idx], None)
                for idx in (0, 1))
        if leftover:
            raise InternalError(
                "the gauge comparison matched every class but not the "
                "families")
        return True


# ---------------------------------------------------------------------------
# module-level operations


def classify_first_order(bundle: Bundle, conn: Connection | None = None, *,
                         start_level: int = 1) -> list[FirstOrderDatum]:
    """Canonical basis of first-order deformations of a bundle or of a log
    connection."""
    return DeformationSpace(bundle, conn,
                            start_level=start_level).tangent_basis()


def first_obstruction(bundle: Bundle, conn: Connection | None,
                      u: FirstOrderDatum, *, start_level: int = 1
                      ) -> tuple[list[Fraction], FamilyBundle | None]:
    """Degree-two class of a first-order datum, plus a second-order lift
    when the class vanishes."""
    return DeformationSpace(bundle, conn,
                            start_level=start_level).first_obstruction(u)


def kuranishi(bundle: Bundle, conn: Connection | None = None,
              order: int = 4, *, start_level: int = 1) -> KuranishiResult:
    """Truncated versal family and obstruction series of a bundle or log
    connection."""
    return DeformationSpace(bundle, conn,
                            start_level=start_level).kuranishi(order)
