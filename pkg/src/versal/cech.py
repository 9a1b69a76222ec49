"""Cech cohomology of twisted endomorphism sheaves, and hypercohomology of
the two-term complex [End(E) --nabla--> End(E) (x) Omega^1(D)].

H^0 spaces are exact (the bundle module's measured containers).  H^1 is
handled without truncation guesswork:

* its dimension comes from Riemann-Roch, h^1 = h^0 - chi with
  chi = deg + rank (1 - genus), both sides exact;
* the dual H^0 space (trace-dual twist, complementary differential twist)
  is computed exactly and must have that same dimension;
* a cocycle's class is encoded by its residue pairings against the dual
  basis.  The pairing kills coboundaries (residue theorem; re-verified on
  container generators), and once spanning cocycles with a full-rank pairing
  matrix are found the encoding is a certified isomorphism: zero pairing
  vector if and only if the cocycle splits.

Class arithmetic therefore works on exact coordinate vectors; splitting a
cocycle with zero class retries progressively larger containers.  The
pairing argument needs the two charts to remove disjoint point sets, which
the standard coverings satisfy; other coverings still get H^0 and validated
transition data, but one-cocycle class queries are refused rather than
answered heuristically.

Hypercohomology of a connection complex is assembled sheaf-by-sheaf from
the two boundary maps (flat-section map on H^0, class map on H^1).  An
independent check computes the same dimensions from the total complex of
the Cech bicomplex at growing truncation levels (`hyper_dims_by_total
_complex`), asserting D o D = 0 along the way.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping, Sequence

from .bundle import (Bundle, Connection, FMatrix, FamilyBundle, FamilyMatrix,
                     Pair, _FamilySystem, bundle_family, chart_allowances,
                     end_space, family_end_h0, region_allowances)
from .curve import Curve, Differential, MarkedPoint
from .errors import (InternalError, MembershipError, SectionInstabilityError,
                     ValidationError)
from .linalg import (QMatrix, QuotientSpace, Subspace, is_zero_vec)

_ZERO = Fraction(0)
_ONE = Fraction(1)

SPLIT_LEVELS = (0, 2, 4, 8, 16)


def _matrix_from_columns(cols: Sequence[Sequence[Fraction]],
                         nrows: int) -> QMatrix:
    if not cols:
        return QMatrix.zero(nrows, 0)
    rows = [[col[i] for col in cols] for i in range(nrows)]
    return QMatrix(nrows, len(cols), rows)


class SheafCohomology:
    """H^0 and H^1 of End(E), shifted by a divisor and optionally twisted
    by d(coordinate), with residue-pairing class coordinates."""

    __slots__ = ("bundle", "fb", "shift", "domega", "curve", "covering",
                 "h0", "h0_dim", "degree", "chi", "h1_dim", "dual",
                 "cocycles", "pair_matrix", "search_level", "_pm_solver",
                 "_split_systems")

    def __init__(self, bundle: Bundle,
                 shift: Mapping[MarkedPoint, int] | None = None,
                 domega: bool = False, max_search_level: int = 8,
                 start_level: int = 1):
        cov = bundle.covering
        curve = cov.curve
        self.bundle = bundle
        self.fb = bundle_family(bundle, 0, 0)
        self.shift = dict(shift or {})
        self.domega = domega
        self.curve = curve
        self.covering = cov

        self.h0 = family_end_h0(self.fb, shift=self.shift, domega=domega)
        self.h0_dim = self.h0.dim

        r = bundle.rank
        g = curve.genus
        self.degree = r * r * (sum(self.shift.values())
                               + (2 * g - 2 if domega else 0))
        self.chi = self.degree + r * r * (1 - g)
        self.h1_dim = self.h0_dim - self.chi
        if self.h1_dim < 0:
            raise InternalError("negative h^1 from Riemann-Roch")

        dual_shift = {p: -m for p, m in self.shift.items()}
        self.dual = family_end_h0(self.fb, shift=dual_shift, domega=not domega)
        if self.dual.dim != self.h1_dim:
            raise InternalError(
                f"duality ({self.dual.dim}) and Riemann-Roch ({self.h1_dim}) "
                "disagree on h^1")

        self.cocycles: list[FMatrix] = []
        self.pair_matrix: QMatrix | None = None
        self.search_level: int | None = None
        self._pm_solver = None
        self._split_systems: dict[int, _FamilySystem] = {0: self.h0.system}
        if self.h1_dim:
            self._require_pairing_support()
            self._verify_kill()
            self._find_spanning(start_level, max_search_level)

    # -- pairing ------------------------------------------------------------
    def _require_pairing_support(self) -> None:
        cov = self.covering
        if cov.n != 2 or (cov.removed_keys(0) & cov.removed_keys(1)):
            raise ValidationError(
                "one-cocycle classes need two charts with disjoint removed "
                "point sets")

    def _dual_section(self, k: int) -> FMatrix:
        return self.dual.cochain(k)[0].constant_part()

    def pairing(self, c01: FMatrix, s0: FMatrix) -> Fraction:
        """Sum of residues of tr(c s) dx over the points missing from the
        second chart."""
        tr = (c01 * s0).trace()
        total = _ZERO
        if not tr.is_zero():
            for p in self.covering.removed[1]:
                total += self.curve.residue_at(Differential(self.curve, tr), p)
        return total

    def class_vector(self, c01: FMatrix) -> list[Fraction]:
        """Canonical coordinates of the class of a one-cocycle."""
        return [self.pairing(c01, self._dual_section(k))
                for k in range(self.h1_dim)]

    def is_coboundary(self, c01: FMatrix) -> bool:
        return is_zero_vec(self.class_vector(c01))

    def _verify_kill(self) -> None:
        g = self.fb.transition(0, 1).constant_part()
        ginv = self.fb.transition(1, 0).constant_part()
        duals = [self._dual_section(k) for k in range(self.h1_dim)]
        for idx in (0, 1):
            for b in self.h0.system.chart_spaces[idx].basis():
                c01 = -b if idx == 0 else g * b * ginv
                for s0 in duals:
                    if self.pairing(c01, s0) != 0:
                        raise InternalError(
                            "residue pairing failed to kill a coboundary")

    def _find_spanning(self, start_level: int, max_level: int) -> None:
        for level in range(start_level, max_level + 1):
            allow = region_allowances(self.covering, (0, 1), level,
                                      self.shift, self.domega)
            space = end_space(self.curve, self.bundle.rank, allow)
            rows: list[list[Fraction]] = []
            chosen: list[FMatrix] = []
            for b in space.basis():
                v = self.class_vector(b)
                if is_zero_vec(v):
                    continue
                if QMatrix.from_rows(rows + [v]).rank() > len(rows):
                    rows.append(v)
                    chosen.append(b)
                    if len(rows) == self.h1_dim:
                        break
            if len(rows) == self.h1_dim:
                self.cocycles = chosen
                self.pair_matrix = _matrix_from_columns(rows, self.h1_dim)
                self.search_level = level
                return
        raise SectionInstabilityError(
            "no spanning one-cocycles within the search ceiling")

    # -- representatives and splittings --------------------------------------
    def representative(self, vec: Sequence[Fraction]) -> FMatrix:
        """A one-cocycle whose class has the given coordinates."""
        if self.h1_dim == 0:
            return FMatrix.zero(self.curve, self.bundle.rank)
        if self._pm_solver is None:
            self._pm_solver = self.pair_matrix.solver()
        x = self._pm_solver.solve_or_raise(list(vec), "class representative")
        acc = FMatrix.zero(self.curve, self.bundle.rank)
        for xj, cj in zip(x, self.cocycles):
            if xj:
                acc = acc + cj.scale(xj)
        return acc

    def try_split(self, c01: FMatrix,
                  extra_level: int = 0) -> dict[int, FMatrix] | None:
        """One attempt at b with Ad(g) b_1 - b_0 = c, or None.  The linear
        system for each container level is built once and reused; a right-
        hand side too singular for the level's containers counts as a miss.
        """
        system = self._split_systems.get(extra_level)
        if system is None:
            system = _FamilySystem(self.fb, shift=self.shift,
                                   domega=self.domega,
                                   extra_level=extra_level)
            self._split_systems[extra_level] = system
        rhs = {(0, 1): FamilyMatrix.constant(c01, 0, 0)}
        try:
            out = system.solve(rhs)
        except MembershipError:
            return None
        if out is None:
            return None
        return {idx: fm.constant_part() for idx, fm in out.items()}

    def split(self, c01: FMatrix,
              levels: Sequence[int] = SPLIT_LEVELS) -> dict[int, FMatrix]:
        """Split a zero-class cocycle as a coboundary, exactly."""
        if self.h1_dim and not self.is_coboundary(c01):
            raise ValidationError(
                "the cocycle has a nonzero class; it does not split")
        for lvl in levels:
            out = self.try_split(c01, lvl)
            if out is not None:
                return out
        raise SectionInstabilityError(
            "splitting search exhausted its container sizes")

    def h0_matrices(self, k: int) -> dict[int, FMatrix]:
        """The k-th global-section basis element as per-chart matrices."""
        return {idx: fm.constant_part()
                for idx, fm in self.h0.cochain(k).items()}


class TwoTermComplex:
    """The complex End(E) -> End(E) (x) Omega^1(D) of a connection, acting
    on Cech cochains chartwise (pair values live in the lower chart frame)."""

    __slots__ = ("conn", "bundle", "covering", "curve", "profile")

    def __init__(self, conn: Connection):
        self.conn = conn
        self.bundle = conn.bundle
        self.covering = conn.bundle.covering
        self.curve = conn.bundle.curve
        self.profile = conn.profile

    def nabla_chart(self, idx: int, m: FMatrix) -> FMatrix:
        a = self.conn.forms[idx]
        return m.d_w() + a * m - m * a

    def nabla_pair(self, pair: Pair, c: FMatrix) -> FMatrix:
        a = self.conn.forms[pair[0]]
        return c.d_w() + a * c - c * a


class HyperCohomology:
    """Hypercohomology of a two-term connection complex on two charts.

    Dimensions and class coordinates come from the sheaf-level cohomology
    of the two terms and the maps between them: the flat-section map on
    global sections and the induced map on one-cocycle classes.  The
    first-cohomology splits into a forms part (pure connection-matrix
    deformations, zero transition cocycle) and a transitions part (cocycle
    deformations, with a compensating form solving the closedness equation);
    representatives are listed forms-part first.
    """

    __slots__ = ("cx", "e0", "e1", "m10", "m11", "image10", "image11",
                 "obstruction", "forms_quotient", "hh0", "hh1", "hh2",
                 "forms_dim", "transitions_dim", "_reps", "_flat",
                 "_m11_solver")

    def __init__(self, conn: Connection, start_level: int = 1):
        cx = TwoTermComplex(conn)
        self.cx = cx
        bundle = conn.bundle
        self.e0 = SheafCohomology(bundle, start_level=start_level)
        self.e1 = SheafCohomology(bundle, shift=conn.profile, domega=True,
                                  start_level=start_level)

        cols0: list[list[Fraction]] = []
        for k in range(self.e0.h0_dim):
            imgs = {idx: FamilyMatrix.constant(cx.nabla_chart(idx, m), 0, 0)
                    for idx, m in self.e0.h0_matrices(k).items()}
            v = self.e1.h0.coords(imgs)
            if v is None:
                raise InternalError(
                    "the derivative of a global endomorphism is not a global "
                    "form (is the connection validated?)")
            cols0.append(v)
        self.m10 = _matrix_from_columns(cols0, self.e1.h0_dim)

        cols1 = [self.e1.class_vector(cx.nabla_pair((0, 1), c))
                 for c in self.e0.cocycles]
        self.m11 = _matrix_from_columns(cols1, self.e1.h1_dim)

        rk10 = self.m10.rank()
        rk11 = self.m11.rank()
        self.hh0 = self.e0.h0_dim - rk10
        self.forms_dim = self.e1.h0_dim - rk10
        self.transitions_dim = self.e0.h1_dim - rk11
        self.hh1 = self.forms_dim + self.transitions_dim
        self.hh2 = self.e1.h1_dim - rk11
        self.image10 = Subspace.from_vectors(cols0, self.e1.h0_dim)
        self.image11 = Subspace.from_vectors(cols1, self.e1.h1_dim)
        self.obstruction = QuotientSpace(Subspace.full(self.e1.h1_dim),
                                         self.image11)
        self.forms_quotient = QuotientSpace(Subspace.full(self.e1.h0_dim),
                                            self.image10)
        self._reps: list[tuple[FMatrix, dict[int, FMatrix]]] | None = None
        self._flat: list[dict[int, FMatrix]] | None = None
        self._m11_solver = None

    # -- degree-0 and degree-2 classes ---------------------------------------
    def flat_basis(self) -> list[dict[int, FMatrix]]:
        """Global endomorphisms killed by the connection."""
        if self._flat is None:
            out = []
            for v in self.m10.kernel_basis():
                coch: dict[int, FMatrix] | None = None
                for k, c in enumerate(v):
                    if not c:
                        continue
                    piece = self.e0.h0_matrices(k)
                    if coch is None:
                        coch = {idx: m.scale(c) for idx, m in piece.items()}
                    else:
                        coch = {idx: coch[idx] + m.scale(c)
                                for idx, m in piece.items()}
                out.append(coch if coch is not None else
                           {idx: FMatrix.zero(self.e0.curve, self.e0.bundle.rank)
                            for idx in range(self.e0.covering.n)})
            self._flat = out
        return self._flat

    def obstruction_class(self, omega01: FMatrix) -> list[Fraction]:
        """Degree-2 class coordinates of a pair-indexed form cochain."""
        if self.hh2 == 0:
            return []
        return list(self.obstruction.project(self.e1.class_vector(omega01)))

    def obstruction_representative(self,
                                   coords: Sequence[Fraction]) -> FMatrix:
        """A form cochain whose degree-2 class has the given coordinates."""
        return self.e1.representative(self.obstruction.lift(list(coords)))

    def solve_degree_one(
            self, rhs01: FMatrix,
    ) -> tuple[FMatrix, dict[int, FMatrix]] | None:
        """Solve Ad(g) A_1 - A_0 - nabla a = rhs for (a, A), or None when
        the degree-2 class of the right-hand side is nonzero."""
        v = self.e1.class_vector(rhs01)
        if self.e1.h1_dim == 0:
            u = [_ZERO] * self.e0.h1_dim
        else:
            if self._m11_solver is None:
                self._m11_solver = self.m11.solver()
            u = self._m11_solver.solve(v)
            if u is None:
                return None
        a01 = FMatrix.zero(self.e0.curve, self.e0.bundle.rank)
        for c, coc in zip(u, self.e0.cocycles):
            if c:
                a01 = a01 - coc.scale(c)
        forms = self.e1.split(rhs01 + self.cx.nabla_pair((0, 1), a01))
        return a01, forms

    # -- degree-1 representatives --------------------------------------------
    def first_order_basis(self) -> list[tuple[FMatrix, dict[int, FMatrix]]]:
        """Closed degree-1 representatives (a, A): forms part first (a = 0),
        then the transitions part (a spans the kernel of the class map, A
        solves Ad(g) A_1 - A_0 = nabla a)."""
        if self._reps is not None:
            return self._reps
        curve = self.e0.curve
        r = self.e0.bundle.rank
        reps: list[tuple[FMatrix, dict[int, FMatrix]]] = []
        forms_quot = self.forms_quotient
        for j in range(forms_quot.dim):
            unit = [_ONE if i == j else _ZERO for i in range(forms_quot.dim)]
            w = forms_quot.lift(unit)
            coch: dict[int, FMatrix] = {idx: FMatrix.zero(curve, r)
                                        for idx in range(self.e0.covering.n)}
            for k, c in enumerate(w):
                if not c:
                    continue
                piece = self.e1.h0_matrices(k)
                coch = {idx: coch[idx] + m.scale(c)
                        for idx, m in piece.items()}
            reps.append((FMatrix.zero(curve, r), coch))
        for v in self.m11.kernel_basis():
            a01 = FMatrix.zero(curve, r)
            for c, coc in zip(v, self.e0.cocycles):
                if c:
                    a01 = a01 + coc.scale(c)
            rhs = self.cx.nabla_pair((0, 1), a01)
            forms = self.e1.split(rhs)
            reps.append((a01, forms))
        self._reps = reps
        return reps


# ---------------------------------------------------------------------------
# independent dimension check via the total complex


def measured_allowances(curve: Curve, mats: Sequence[FMatrix],
                      candidates: Sequence[MarkedPoint],
                      base: Mapping[MarkedPoint, int]) -> dict[MarkedPoint, int]:
    table: dict[tuple, list] = {p.key: [p, 0] for p in candidates}
    for p, a in base.items():
        table[p.key][1] = a
    for m in mats:
        for row in m.rows:
            for e in row:
                if e.is_zero():
                    continue
                for rec in table.values():
                    o = curve.order_at(e, rec[0])
                    if -o > rec[1]:
                        rec[1] = -o
    return {p: a for p, a in table.values() if a != 0}


def hyper_dims_by_total_complex(conn: Connection, start_level: int = 1,
                                max_level: int = 6) -> tuple[int, int, int]:
    """Dimensions of the hypercohomology computed directly from the total
    complex at growing truncation levels, returned once two consecutive
    levels agree.  Intended as an independent cross-check of
    HyperCohomology; asserts D o D = 0 on the built matrices."""
    cov = conn.bundle.covering
    if cov.n != 2:
        raise ValidationError("the total-complex check expects two charts")
    prev: tuple[int, int, int] | None = None
    for level in range(start_level, max_level + 1):
        dims = _total_dims_at(conn, level)
        if dims == prev:
            return dims
        prev = dims
    raise SectionInstabilityError(
        "total-complex dimensions did not stabilize within the level ceiling")


def _total_dims_at(conn: Connection, level: int) -> tuple[int, int, int]:
    cx = TwoTermComplex(conn)
    bundle = conn.bundle
    cov = bundle.covering
    curve = bundle.curve
    r = bundle.rank
    candidates = cov.candidate_points()
    g = bundle.g[(0, 1)]
    ginv = bundle.transition(1, 0)

    v0 = [end_space(curve, r, chart_allowances(cov, idx, level))
          for idx in (0, 1)]
    v0_basis = [list(sp.basis()) for sp in v0]

    # degree-1 containers, sized to hold their own level plus every image
    imgs_pair = [-b for b in v0_basis[0]] + \
                [g * b * ginv for b in v0_basis[1]]
    imgs_form = [[cx.nabla_chart(idx, b) for b in v0_basis[idx]]
                 for idx in (0, 1)]
    v1a = end_space(curve, r, measured_allowances(
        curve, imgs_pair, candidates,
        region_allowances(cov, (0, 1), level)))
    v1b = [end_space(curve, r, measured_allowances(
        curve, imgs_form[idx], candidates,
        chart_allowances(cov, idx, level, conn.profile, True)))
        for idx in (0, 1)]
    v1a_basis = list(v1a.basis())
    v1b_basis = [list(sp.basis()) for sp in v1b]

    # degree-2 container
    imgs2 = [-cx.nabla_pair((0, 1), a) for a in v1a_basis]
    imgs2 += [-b for b in v1b_basis[0]]
    imgs2 += [g * b * ginv for b in v1b_basis[1]]
    v2 = end_space(curve, r, measured_allowances(
        curve, imgs2, candidates,
        region_allowances(cov, (0, 1), level, conn.profile, True)))

    def coords(space, m):
        return space.coords(m)

    # D0: b |-> (Ad(g) b_1 - b_0, nabla b)
    d0_cols = []
    for idx in (0, 1):
        for b in v0_basis[idx]:
            pair_part = g * b * ginv if idx == 1 else -b
            col = coords(v1a, pair_part)
            for jdx in (0, 1):
                m = cx.nabla_chart(jdx, b) if jdx == idx else \
                    FMatrix.zero(curve, r)
                col = col + coords(v1b[jdx], m)
            d0_cols.append(col)
    k1_dim = v1a.dim + v1b[0].dim + v1b[1].dim
    d0 = _matrix_from_columns(d0_cols, k1_dim)

    # D1: (a, A) |-> Ad(g) A_1 - A_0 - nabla a
    d1_cols = []
    for a in v1a_basis:
        d1_cols.append(coords(v2, -cx.nabla_pair((0, 1), a)))
    for b in v1b_basis[0]:
        d1_cols.append(coords(v2, -b))
    for b in v1b_basis[1]:
        d1_cols.append(coords(v2, g * b * ginv))
    d1 = _matrix_from_columns(d1_cols, v2.dim)

    square = d1 * d0
    if any(c != 0 for row in square.rows for c in row):
        raise InternalError("the total-complex differential does not square "
                            "to zero")

    rk0 = d0.rank()
    rk1 = d1.rank()
    hh0 = v0[0].dim + v0[1].dim - rk0
    hh1 = (k1_dim - rk1) - rk0
    hh2 = v2.dim - rk1
    return hh0, hh1, hh2
