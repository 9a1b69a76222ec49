"""First-order deformations, quadratic obstructions, gauge comparisons, and
the order-by-order versal construction, against frozen exact values."""

import random
from fractions import Fraction as F

import pytest

from versal.arith import TruncatedPoly
from versal.bundle import (Bundle, Connection, Covering, FamilyBundle,
                           FamilyMatrix, FMatrix, validate_bundle,
                           validate_connection)
from versal.curve import LegendreCurve, ProjectiveLine
from versal.errors import ValidationError
from versal.kuranishi import (DeformationSpace, classify_first_order,
                              connection_defects, gauge_shift, kuranishi,
                              validate_first_order, verify_family,
                              yoneda_square_cocycle)


@pytest.fixture(scope="module")
def ell():
    return LegendreCurve(F(2))


@pytest.fixture(scope="module")
def ecov(ell):
    O = ell.point("O", F(0), F(0))
    return Covering(ell, [[ell.infinity()], [O]], [O, ell.infinity()])


@pytest.fixture(scope="module")
def etriv(ell, ecov):
    b = Bundle(ecov, 1, {(0, 1): FMatrix(ell, [[ell.one()]])})
    assert validate_bundle(b).ok
    return b


@pytest.fixture(scope="module")
def p1():
    return ProjectiveLine()


@pytest.fixture(scope="module")
def pcov(p1):
    Z = p1.point("Z", F(0))
    return Covering(p1, [[p1.infinity()], [Z]], [Z, p1.infinity()])


@pytest.fixture(scope="module")
def ptriv(p1, pcov):
    b = Bundle(pcov, 1, {(0, 1): FMatrix(p1, [[p1.one()]])})
    assert validate_bundle(b).ok
    return b


def d_connection(bundle, profile=None):
    zero = FMatrix.zero(bundle.curve, bundle.rank)
    conn = Connection(bundle, profile or {},
                      {idx: zero for idx in range(bundle.covering.n)})
    assert validate_connection(conn).ok
    return conn


@pytest.fixture(scope="module")
def eds(etriv):
    """Trivial line with the plain derivative on the elliptic curve."""
    return DeformationSpace(etriv, d_connection(etriv))


@pytest.fixture(scope="module")
def ekr(eds):
    return eds.kuranishi(4)


# rank two, trivial bundle, zero connection: a first-order deformation is a
# pair of constant-class matrices and the obstruction is their commutator.
@pytest.fixture(scope="module")
def r2triv(ell, ecov):
    b = Bundle(ecov, 2, {(0, 1): FMatrix.identity(ell, 2)})
    assert validate_bundle(b).ok
    return b


@pytest.fixture(scope="module")
def r2ds(r2triv):
    return DeformationSpace(r2triv, d_connection(r2triv))


@pytest.fixture(scope="module")
def r2kr(r2ds):
    return r2ds.kuranishi(2)


# rank two with a nilpotent connection matrix: fully unobstructed.
@pytest.fixture(scope="module")
def nilds(ell, ecov):
    b = Bundle(ecov, 2, {(0, 1): FMatrix.identity(ell, 2)})
    w = ell.one() / ell.y()
    a = FMatrix(ell, [[ell.zero(), w], [ell.zero(), ell.zero()]])
    conn = Connection(b, {}, {0: a, 1: a})
    assert validate_connection(conn).ok
    return DeformationSpace(b, conn)


def global_form_coeff(curve):
    """dx-coefficient of the everywhere-regular one-form on the Legendre
    curve: 1 / (2y)."""
    return curve.one() / (curve.y() + curve.y())


# ---------------------------------------------------------------------------
# tangent spaces


class TestTangentBasis:
    def test_projective_line_bundle_is_rigid(self, ptriv):
        ds = DeformationSpace(ptriv)
        assert ds.mode == "bundle"
        assert ds.nvars == 0
        assert ds.tangent_basis() == []

    def test_projective_line_connection_is_rigid(self, ptriv):
        ds = DeformationSpace(ptriv, d_connection(ptriv))
        assert (ds.forms_count, ds.transitions_count) == (0, 0)
        assert ds.obstruction_count == 1
        assert ds.tangent_basis() == []

    def test_elliptic_bundle_tangent(self, ell, etriv):
        data = classify_first_order(etriv)
        assert len(data) == 1
        assert data[0].cocycle == FMatrix(ell, [[ell.y() / ell.x()]])
        assert data[0].coords == [F(1)]

    def test_elliptic_connection_tangent(self, ell, eds):
        data = eds.tangent_basis()
        assert (eds.forms_count, eds.transitions_count) == (1, 1)
        assert eds.obstruction_count == 1
        assert len(data) == 2

        first, second = data
        # forms direction: no transition shift, the same everywhere-regular
        # form on both charts
        assert first.cocycle.is_zero()
        omega = FMatrix(ell, [[global_form_coeff(ell)]])
        assert first.forms[0] == omega and first.forms[1] == omega
        # transitions direction: the standard nontrivial cocycle, with form
        # shifts glued by its derivative
        f = FMatrix(ell, [[ell.y() / ell.x()]])
        assert second.cocycle == f
        assert second.forms[1] - second.forms[0] == f.d_w()

        for u in data:
            assert validate_first_order(u, eds.bundle, eds.conn).ok
            assert eds.first_order_class(u.cocycle, u.forms) == u.coords

    def test_rank_two_nilpotent_dimensions(self, nilds):
        assert (nilds.forms_count, nilds.transitions_count) == (2, 2)
        assert nilds.obstruction_count == 2
        assert len(nilds.tangent_basis()) == 4

    def test_rank_two_matrix_pair_dimensions(self, r2ds):
        assert (r2ds.forms_count, r2ds.transitions_count) == (4, 4)
        assert r2ds.obstruction_count == 4
        data = r2ds.tangent_basis()
        assert len(data) == 8
        for u in data:
            assert validate_first_order(u, r2ds.bundle, r2ds.conn).ok

    def test_datum_from_coords_is_linear(self, eds):
        data = eds.tangent_basis()
        u = eds.datum_from_coords([F(2), F(-3)])
        assert u.cocycle == data[1].cocycle.scale(F(-3))
        for idx in (0, 1):
            assert u.forms[idx] == (data[0].forms[idx].scale(F(2))
                                    + data[1].forms[idx].scale(F(-3)))
        assert u.coords == [F(2), F(-3)]

    def test_validation_rejects_stray_poles(self, ell, eds):
        stray = FMatrix(ell, [[ell.one() / (ell.x() - ell.constant(F(3)))]])
        u = eds.tangent_basis()[1]
        bad = type(u)("connection", stray, u.forms, u.coords)
        assert not validate_first_order(bad, eds.bundle, eds.conn).ok


# ---------------------------------------------------------------------------
# gauge shifts of first-order data


class TestGaugeShift:
    def test_zero_shift_is_identity(self, ell, eds):
        u = eds.tangent_basis()[1]
        zero = {0: FMatrix.zero(ell, 1), 1: FMatrix.zero(ell, 1)}
        v = gauge_shift(u, zero, eds.bundle, eds.conn)
        assert v.cocycle == u.cocycle
        assert v.forms[0] == u.forms[0] and v.forms[1] == u.forms[1]

    def test_class_invariance_rank_one(self, ell, eds):
        frames = {0: FMatrix(ell, [[ell.x()]]),
                  1: FMatrix(ell, [[ell.one() / ell.x()]])}
        for u in eds.tangent_basis():
            v = gauge_shift(u, frames, eds.bundle, eds.conn)
            assert validate_first_order(v, eds.bundle, eds.conn).ok
            assert v.cocycle != u.cocycle
            assert eds.first_order_class(v.cocycle, v.forms) == u.coords

    def test_class_invariance_rank_two(self, ell, r2ds):
        x = ell.x()
        frames = {0: FMatrix(ell, [[x, ell.one()],
                                   [ell.zero(), x * x]]),
                  1: FMatrix(ell, [[ell.one() / x, ell.zero()],
                                   [ell.one() / (x * x), ell.one()]])}
        for u in r2ds.tangent_basis():
            v = gauge_shift(u, frames, r2ds.bundle, r2ds.conn)
            assert validate_first_order(v, r2ds.bundle, r2ds.conn).ok
            assert r2ds.first_order_class(v.cocycle, v.forms) == u.coords

    def test_shift_roundtrip_is_exact(self, ell, eds):
        frames = {0: FMatrix(ell, [[ell.x()]]),
                  1: FMatrix(ell, [[ell.one() / ell.x()]])}
        back = {idx: m.scale(F(-1)) for idx, m in frames.items()}
        u = eds.tangent_basis()[1]
        v = gauge_shift(gauge_shift(u, frames, eds.bundle, eds.conn),
                        back, eds.bundle, eds.conn)
        assert v.cocycle == u.cocycle
        assert v.forms[0] == u.forms[0] and v.forms[1] == u.forms[1]


# ---------------------------------------------------------------------------
# quadratic obstructions


def combine(ds, coeffs):
    return ds.datum_from_coords([F(c) for c in coeffs])


class TestFirstObstruction:
    def test_rank_one_squares_vanish_with_lift(self, eds):
        for u in eds.tangent_basis():
            cls, lift = eds.first_obstruction(u)
            assert cls == [F(0)]
            assert lift is not None
            assert verify_family(lift).ok
            assert lift.transitions[(0, 1)].coeff((1,)) == u.cocycle

    def test_bundle_mode_lift(self, etriv):
        ds = DeformationSpace(etriv)
        u = ds.tangent_basis()[0]
        cls, lift = ds.first_obstruction(u)
        assert cls == []
        assert lift.transitions[(0, 1)].coeff((1,)) == u.cocycle

    def test_matrix_pair_pure_squares_vanish(self, r2ds):
        for u in r2ds.tangent_basis():
            cls, lift = r2ds.first_obstruction(u)
            assert cls == [F(0)] * 4
            assert lift is not None and verify_family(lift).ok

    # the commutator pairing between a forms direction and a transitions
    # direction, frozen as class vectors
    MIXED = {
        (0, 5): [0, 0, 1, 0], (0, 6): [0, -1, 0, 0],
        (1, 4): [0, 0, -1, 0], (1, 6): [1, 0, 0, -1],
        (1, 7): [0, 0, 1, 0], (2, 4): [0, 1, 0, 0],
        (2, 5): [-1, 0, 0, 1], (2, 7): [0, -1, 0, 0],
        (3, 5): [0, 0, -1, 0], (3, 6): [0, 1, 0, 0],
    }

    def test_matrix_pair_mixed_squares(self, r2ds):
        n = r2ds.nvars
        seen = {}
        for i in range(n):
            for j in range(i + 1, n):
                coeffs = [F(1) if k in (i, j) else F(0) for k in range(n)]
                cls, _ = r2ds.first_obstruction(combine(r2ds, coeffs))
                if any(cls):
                    seen[(i, j)] = cls
        assert seen == {k: [F(c) for c in v] for k, v in self.MIXED.items()}

    def test_quadratic_scaling(self, r2ds):
        u = combine(r2ds, [1, F(1, 2), 0, -2, 1, F(2, 3), -1, 1])
        cls1, _ = r2ds.first_obstruction(u)
        cls3, _ = r2ds.first_obstruction(u.scaled(F(3)))
        assert any(cls1)
        assert cls3 == [9 * c for c in cls1]

    def test_polarization_identity(self, r2ds):
        u = combine(r2ds, [1, 0, -1, 2, 0, 1, 0, F(1, 3)])
        v = combine(r2ds, [0, 2, 1, 0, -1, 0, F(1, 2), 1])
        cross = yoneda_square_cocycle(r2ds.bundle, r2ds.conn, u, v)
        direct = (r2ds.yoneda_square(u.plus(v)) - r2ds.yoneda_square(u)
                  - r2ds.yoneda_square(v))
        assert cross == direct

    def test_three_routes_to_the_quadratic_class(self, r2ds, r2kr):
        """The degree-two class of a random datum computed by the class
        functionals, by the joint degree-two solve, and by evaluating the
        obstruction series all agree."""
        rng = random.Random(20260816)
        for _ in range(5):
            coords = [F(rng.randint(-4, 4), rng.randint(1, 3))
                      for _ in range(r2ds.nvars)]
            u = combine(r2ds, coords)
            via_class, _ = r2ds.first_obstruction(u)
            via_solve = r2ds.brute_force_second_order(r2ds.yoneda_square(u))
            via_series = r2kr.series.evaluate_degree(2, coords)
            assert via_class == via_solve == via_series


# ---------------------------------------------------------------------------
# the versal construction, rank one


def exponential_family(ds, order, reparam=None):
    """The straightforward abelian family: the transition is the truncated
    exponential of the cocycle direction, the connection matrices move
    linearly along the tangent data.  `reparam` substitutes a polynomial for
    the transitions variable."""
    curve = ds.bundle.curve
    data = ds.tangent_basis()
    n = ds.nvars
    fcoc = data[1].cocycle
    g = ds.bundle.g[(0, 1)]

    def spoly(k):
        # (reparam or s)^k truncated beyond `order`
        base = reparam or {(0, 1): F(1)}
        acc = {(0,) * n: F(1)}
        for _ in range(k):
            nxt = {}
            for ea, ca in acc.items():
                for eb, cb in base.items():
                    e = tuple(i + j for i, j in zip(ea, eb))
                    if sum(e) <= order:
                        nxt[e] = nxt.get(e, F(0)) + ca * cb
            acc = nxt
        return acc

    gterms = {}
    power = FMatrix.identity(curve, 1)
    fact = 1
    for k in range(order + 1):
        if k:
            power = power * fcoc
            fact *= k
        for e, c in spoly(k).items():
            m = (power * g).scale(c / fact)
            gterms[e] = gterms.get(e, FMatrix.zero(curve, 1)) + m
    trans = {(0, 1): FamilyMatrix(curve, 1, n, order, gterms)}

    forms = {}
    for idx in (0, 1):
        ft = {(0,) * n: ds.conn.forms[idx], (1, 0): data[0].forms[idx]}
        for e, c in spoly(1).items():
            if sum(e):
                ft[e] = data[1].forms[idx].scale(c)
        forms[idx] = FamilyMatrix(curve, 1, n, order, ft)
    return FamilyBundle(ds.bundle.covering, 1, n, order, trans, forms,
                        ds.conn.profile)


class TestKuranishiRankOne:
    def test_projective_line_is_rigid(self, ptriv):
        kr = kuranishi(ptriv, d_connection(ptriv), order=3)
        assert kr.tangent_dim == 0
        assert kr.series.is_zero()
        assert kr.report.ok
        g = kr.family.transitions[(0, 1)]
        assert g.coeff(()) == ptriv.g[(0, 1)]

    def test_elliptic_connection_family(self, ell, eds, ekr):
        assert ekr.series.is_zero()
        assert ekr.report.ok
        assert ekr.family.ideal == []
        x, y = ell.x(), ell.y()
        g = ekr.family.transitions[(0, 1)]
        expected = {
            (0, 0): FMatrix(ell, [[ell.one()]]),
            (0, 1): FMatrix(ell, [[y / x]]),
            (0, 3): FMatrix(ell, [[y / x]]),
            (0, 4): FMatrix(ell, [[(x * x - x.scale(F(3))
                                    + ell.constant(F(2))) / x]]),
        }
        assert {e: m for e, m in g.terms.items() if not m.is_zero()} \
            == expected
        for idx in (0, 1):
            assert ekr.family.forms[idx].constant_part() \
                == eds.conn.forms[idx]

    def test_elliptic_connection_per_order_classes(self, eds, ekr):
        assert eds.per_order_classes(ekr.family) == {
            (1, 0): [F(1), F(0)], (0, 1): [F(0), F(1)]}

    def test_matches_the_exponential_family(self, eds, ekr):
        oracle = exponential_family(eds, 4)
        assert verify_family(oracle).ok
        assert eds.per_order_classes(oracle) == {
            (1, 0): [F(1), F(0)], (0, 1): [F(0), F(1)]}
        assert eds.families_gauge_equivalent(ekr.family, oracle)
        assert eds.families_gauge_equivalent(oracle, ekr.family)

    def test_reparametrized_family_is_not_equivalent(self, eds, ekr):
        """Substituting s + s^3 for s keeps the family flat and keeps its
        tangent classes, but shifts a degree-three class: equivalence up to
        chart frames alone must reject it."""
        twisted = exponential_family(eds, 4,
                                     reparam={(0, 1): F(1), (0, 3): F(1)})
        assert verify_family(twisted).ok
        assert eds.per_order_classes(twisted) == {
            (1, 0): [F(1), F(0)], (0, 1): [F(0), F(1)],
            (0, 3): [F(0), F(1)]}
        assert not eds.families_gauge_equivalent(ekr.family, twisted)
        assert not eds.families_gauge_equivalent(twisted, ekr.family)

    def test_elliptic_bundle_family(self, ell, etriv):
        ds = DeformationSpace(etriv)
        kr = ds.kuranishi(4)
        assert kr.report.ok and kr.series.is_zero()
        g = kr.family.transitions[(0, 1)]
        x, y = ell.x(), ell.y()
        assert {e: m for e, m in g.terms.items() if not m.is_zero()} == {
            (0,): FMatrix(ell, [[ell.one()]]),
            (1,): FMatrix(ell, [[y / x]]),
            (3,): FMatrix(ell, [[y / x]]),
            (4,): FMatrix(ell, [[(x * x - x.scale(F(3))
                                  + ell.constant(F(2))) / x]]),
        }
        assert ds.per_order_classes(kr.family) == {(1,): [F(1)]}

        # truncated exponential of the cocycle, as a one-variable family
        f = ds.tangent_basis()[0].cocycle
        gterms = {(0,): FMatrix.identity(ell, 1)}
        power = FMatrix.identity(ell, 1)
        fact = 1
        for k in range(1, 5):
            power = power * f
            fact *= k
            gterms[(k,)] = power.scale(F(1, fact))
        oracle = FamilyBundle(etriv.covering, 1, 1, 4, {
            (0, 1): FamilyMatrix(ell, 1, 1, 4, gterms)})
        assert ds.per_order_classes(oracle) == {(1,): [F(1)]}
        assert ds.families_gauge_equivalent(kr.family, oracle)

    def test_normal_form_needs_rank_one(self, r2ds, nilds):
        fam = nilds.kuranishi(2).family
        with pytest.raises(ValidationError):
            r2ds.normal_form(fam)

    def test_gauge_comparison_needs_a_flat_base(self, r2ds, r2kr):
        with pytest.raises(ValidationError):
            r2ds.families_gauge_equivalent(r2kr.family, r2kr.family)

    def test_order_bounds(self, eds):
        with pytest.raises(ValidationError):
            eds.kuranishi(1)
        with pytest.raises(ValidationError):
            eds.kuranishi(9)


# ---------------------------------------------------------------------------
# the versal construction, rank two


R2_SERIES = [
    "v1*v6 - v2*v5",
    "-v0*v6 + v2*v4 - v2*v7 + v3*v6",
    "v0*v5 - v1*v4 + v1*v7 - v3*v5",
    "-v1*v6 + v2*v5",
]

R2_NAMES = ["v%d" % i for i in range(8)]


class TestKuranishiRankTwo:
    def test_nilpotent_connection_is_unobstructed(self, nilds):
        kr = nilds.kuranishi(3)
        assert kr.series.is_zero()
        assert kr.report.ok
        assert kr.family.ideal == []

    def test_matrix_pair_commutator_series(self, r2kr):
        assert [p.render(R2_NAMES) for p in r2kr.series.polys] == R2_SERIES
        assert r2kr.report.ok
        assert len(r2kr.family.ideal) == 4

    def test_matrix_pair_series_is_stable_in_degree(self, r2ds, r2kr):
        kr3 = r2ds.kuranishi(3)
        assert [p.render(R2_NAMES) for p in kr3.series.polys] == R2_SERIES
        assert kr3.report.ok

    def test_every_series_monomial_moves_the_transitions(self, r2kr):
        """Deforming only the connection matrices is always integrable on a
        curve, so every obstruction monomial touches a transitions
        variable."""
        assert r2kr.series.monomials_touch_transitions()

    def test_construction_is_deterministic(self, r2triv, r2ds, r2kr):
        again = DeformationSpace(r2triv, r2ds.conn).kuranishi(2)
        assert [p.render(R2_NAMES) for p in again.series.polys] \
            == [p.render(R2_NAMES) for p in r2kr.series.polys]
        assert again.family.transitions[(0, 1)].terms \
            == r2kr.family.transitions[(0, 1)].terms
        for idx in (0, 1):
            assert again.family.forms[idx].terms \
                == r2kr.family.forms[idx].terms


# ---------------------------------------------------------------------------
# container-size stability


class TestStartLevelStability:
    def test_rank_one_classes_survive_larger_containers(self, etriv, eds):
        wide = DeformationSpace(etriv, eds.conn, start_level=2)
        assert (wide.forms_count, wide.transitions_count,
                wide.obstruction_count) \
            == (eds.forms_count, eds.transitions_count,
                eds.obstruction_count)
        # representatives may differ between container sizes; their classes
        # may not
        for u in eds.tangent_basis():
            assert wide.first_order_class(u.cocycle, u.forms) == u.coords
        for u in wide.tangent_basis():
            assert eds.first_order_class(u.cocycle, u.forms) == u.coords

    def test_rank_two_series_survives_larger_containers(self, r2triv, r2ds,
                                                        r2kr):
        wide = DeformationSpace(r2triv, r2ds.conn, start_level=2)
        kr = wide.kuranishi(2)
        assert [p.render(R2_NAMES) for p in kr.series.polys] == R2_SERIES


# ---------------------------------------------------------------------------
# verification as a negative control


class TestVerifyFamily:
    def test_tampered_transitions_are_caught(self, ell, eds):
        kr = eds.kuranishi(3)
        fam = kr.family
        bump = FamilyMatrix(ell, 1, 2, 3, {(2, 0): FMatrix(ell, [[ell.x()]])})
        tampered = FamilyBundle(
            fam.covering, 1, 2, 3,
            {(0, 1): fam.transitions[(0, 1)] + bump},
            fam.forms, fam.profile, fam.ideal)
        report = verify_family(tampered)
        assert not report.ok
        (name, detail), = report.failures()
        assert name == "connection congruence on the (0,1) overlap"
        assert detail == "degree-2 terms survive"

    def test_tampered_forms_are_caught(self, ell, eds):
        kr = eds.kuranishi(3)
        fam = kr.family
        bump = FamilyMatrix(ell, 1, 2, 3,
                            {(2, 0): FMatrix(ell, [[ell.one()]])})
        tampered = FamilyBundle(
            fam.covering, 1, 2, 3, fam.transitions,
            {0: fam.forms[0] + bump, 1: fam.forms[1]},
            fam.profile, fam.ideal)
        report = verify_family(tampered)
        assert not report.ok
        (name, detail), = report.failures()
        assert "degree-2" in detail

    def test_low_degree_ideal_generators_are_rejected(self, eds):
        kr = eds.kuranishi(2)
        fam = kr.family
        linear = TruncatedPoly(2, 2, {(1, 0): F(1)})
        bad = FamilyBundle(fam.covering, 1, 2, 2, fam.transitions,
                           fam.forms, fam.profile, [linear])
        report = verify_family(bad)
        assert any(name == "obstruction ideal starts in degree 2"
                   for name, _ in report.failures())

    def test_defects_vanish_modulo_the_ideal(self, r2kr):
        assert verify_family(r2kr.family).ok
        # ... but not identically: the family is genuinely obstructed
        defects = connection_defects(r2kr.family)
        assert not all(d.is_zero() for d in defects.values())
