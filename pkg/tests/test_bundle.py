from __future__ import annotations

from fractions import Fraction as F

import pytest

from versal.bundle import (Bundle, Connection, Covering, FMatrix, FamilyBundle,
                           FamilyMatrix, apply_gauge, atiyah_cocycle,
                           bundle_degree, bundle_family, end_space,
                           family_atiyah, family_end_h0, res_surjective,
                           residue_matrix, validate_bundle,
                           validate_connection)
from versal.curve import LegendreCurve, ProjectiveLine
from versal.errors import ValidationError


@pytest.fixture(scope="module")
def ell():
    return LegendreCurve(2)


@pytest.fixture(scope="module")
def ecov(ell):
    O = ell.point("O", 0, 0)
    return Covering(ell, [[ell.infinity()], [O]], [O, ell.infinity()])


@pytest.fixture(scope="module")
def p1():
    return ProjectiveLine()


@pytest.fixture(scope="module")
def pcov(p1):
    Z = p1.point("Z", 0)
    return Covering(p1, [[p1.infinity()], [Z]], [Z, p1.infinity()])


def line_bundle(cov, n):
    """The bundle on two charts with scalar transition z^n."""
    curve = cov.curve
    t = curve.one()
    for _ in range(abs(n)):
        t = t * curve.x() if n > 0 else t / curve.x()
    g = FMatrix.zero(curve, 1)
    g.rows[0][0] = t
    return Bundle(cov, 1, {(0, 1): g})


def upper_family(ecov, order=1):
    """Rank-2 family [[1, t y/x], [0, 1]] over Q[t]/(t^(order+1))."""
    ell = ecov.curve
    m = FMatrix.zero(ell, 2)
    m.rows[0][1] = ell.y() / ell.x()
    return FamilyBundle(ecov, 2, 1, order, {
        (0, 1): FamilyMatrix.identity(ell, 2, 1, order)
                + FamilyMatrix(ell, 2, 1, order, {(1,): m})})


def witness_splits(fb, at):
    """Check Ad(G) A_b - A_a equals the dG g^-1 cocycle on every overlap."""
    for (a, b), coc in at.cocycle.items():
        lhs = (fb.transition(a, b) * at.witness[b] * fb.transition(b, a)
               - at.witness[a])
        if lhs != coc:
            return False
    return True


class TestFMatrix:
    def test_inverse_round_trip(self, ell):
        m = FMatrix.identity(ell, 2)
        m.rows[0][1] = ell.y()
        m.rows[1][0] = ell.x()
        m.rows[1][1] = ell.one() + ell.x() * ell.y()
        inv = m.inverse()
        assert m * inv == FMatrix.identity(ell, 2)
        assert inv * m == FMatrix.identity(ell, 2)

    def test_singular_raises(self, ell):
        m = FMatrix.zero(ell, 2)
        m.rows[0][0] = ell.x()
        m.rows[1][0] = ell.y()
        with pytest.raises(ValidationError):
            m.inverse()

    def test_det_triangular(self, ell):
        m = FMatrix.identity(ell, 2)
        m.rows[0][0] = ell.x()
        m.rows[0][1] = ell.y()
        assert m.det() == ell.x()

    def test_d_w_product_rule(self, ell):
        a = FMatrix.zero(ell, 1)
        a.rows[0][0] = ell.x() * ell.x()
        b = FMatrix.zero(ell, 1)
        b.rows[0][0] = ell.y()
        lhs = (a * b).d_w()
        rhs = a.d_w() * b + a * b.d_w()
        assert lhs == rhs


class TestBundleValidation:
    def test_line_bundles_pass(self, pcov):
        for n in (-2, 0, 3):
            validate_bundle(line_bundle(pcov, n)).raise_if_failed()

    def test_support_violation_flagged(self, p1, pcov):
        g = FMatrix.zero(p1, 1)
        g.rows[0][0] = p1.one() / (p1.x() - p1.one())   # pole at unmarked z=1
        rep = validate_bundle(Bundle(pcov, 1, {(0, 1): g}))
        assert not rep.ok

    def test_three_chart_cocycle(self, p1):
        Z, W = p1.point("Z", 0), p1.point("W", 1)
        cov = Covering(p1, [[p1.infinity()], [Z], [W]], [Z, W, p1.infinity()])

        def scalar(c):
            g = FMatrix.zero(p1, 1)
            g.rows[0][0] = p1.one().scale(F(c))
            return g

        good = Bundle(cov, 1, {(0, 1): scalar(2), (0, 2): scalar(6),
                               (1, 2): scalar(3)})
        validate_bundle(good).raise_if_failed()
        bad = Bundle(cov, 1, {(0, 1): scalar(2), (0, 2): scalar(5),
                              (1, 2): scalar(3)})
        rep = validate_bundle(bad)
        assert not rep.ok
        assert any("cocycle" in name for name, _ in rep.failures())

    def test_overlap_pole_flagged(self, p1):
        Z, W = p1.point("Z", 0), p1.point("W", 1)
        cov = Covering(p1, [[p1.infinity()], [Z], [W]], [Z, W, p1.infinity()])
        g01 = FMatrix.zero(p1, 1)
        g01.rows[0][0] = p1.one() / (p1.x() - p1.one())  # pole at W in U_0 n U_1
        g12 = FMatrix.zero(p1, 1)
        g12.rows[0][0] = p1.x() - p1.one()
        g02 = FMatrix.identity(p1, 1)
        rep = validate_bundle(Bundle(cov, 1, {(0, 1): g01, (0, 2): g02,
                                              (1, 2): g12}))
        assert not rep.ok

    def test_covering_must_cover(self, p1):
        Z = p1.point("Z", 0)
        with pytest.raises(ValidationError):
            Covering(p1, [[Z], [Z, p1.infinity()]], [Z, p1.infinity()])


class TestDegreeAndResidue:
    def test_line_bundle_degrees(self, pcov):
        assert [bundle_degree(line_bundle(pcov, n)) for n in range(-2, 3)] \
            == [-2, -1, 0, 1, 2]

    def test_elliptic_x_transition_has_degree_two(self, ell, ecov):
        g = FMatrix.zero(ell, 1)
        g.rows[0][0] = ell.x()
        b = Bundle(ecov, 1, {(0, 1): g})
        validate_bundle(b).raise_if_failed()
        assert bundle_degree(b) == 2

    def test_log_connection_residue_balances_degree(self, p1, pcov):
        for n in (1, 2, -1):
            b = line_bundle(pcov, n)
            a1 = FMatrix.zero(p1, 1)
            a1.rows[0][0] = (p1.one() / p1.x()).scale(F(n))
            conn = Connection(b, {p1.infinity(): 1},
                              {0: FMatrix.zero(p1, 1), 1: a1})
            validate_connection(conn).raise_if_failed()
            res = residue_matrix(conn, p1.infinity())
            assert res.rows[0][0] == -n           # sum of Tr Res = -deg

    def test_pole_profile_is_required(self, p1, pcov):
        b = line_bundle(pcov, 1)
        a1 = FMatrix.zero(p1, 1)
        a1.rows[0][0] = p1.one() / p1.x()
        conn = Connection(b, {}, {0: FMatrix.zero(p1, 1), 1: a1})
        rep = validate_connection(conn)
        assert not rep.ok                          # dz/z needs its pole at inf

    def test_elliptic_log_residue(self, ell, ecov):
        # transition x: A_1 = (1/x) dx has its only connection pole at
        # infinity, residue -2 there (x has a double pole), matching deg 2.
        g = FMatrix.zero(ell, 1)
        g.rows[0][0] = ell.x()
        b = Bundle(ecov, 1, {(0, 1): g})
        a1 = FMatrix.zero(ell, 1)
        a1.rows[0][0] = ell.one() / ell.x()
        conn = Connection(b, {ell.infinity(): 1},
                          {0: FMatrix.zero(ell, 1), 1: a1})
        validate_connection(conn).raise_if_failed()
        assert residue_matrix(conn, ell.infinity()).rows[0][0] == -2


class TestGauge:
    def test_gauge_preserves_validity_and_degree(self, ell, ecov):
        h0 = FMatrix.identity(ell, 2)
        h0.rows[0][1] = ell.x()                    # regular away from infinity
        frames = {0: h0, 1: FMatrix.identity(ell, 2)}
        base = Bundle(ecov, 2, {(0, 1): FMatrix.identity(ell, 2)})
        gauged, _ = apply_gauge(base, frames)
        validate_bundle(gauged).raise_if_failed()
        assert bundle_degree(gauged) == 0

    def test_gauge_transforms_connection(self, p1, pcov):
        b = line_bundle(pcov, 1)
        a1 = FMatrix.zero(p1, 1)
        a1.rows[0][0] = p1.one() / p1.x()
        conn = Connection(b, {p1.infinity(): 1},
                          {0: FMatrix.zero(p1, 1), 1: a1})
        two = FMatrix.zero(p1, 1)
        two.rows[0][0] = p1.one() + p1.one()
        gauged, gconn = apply_gauge(b, {0: two, 1: FMatrix.identity(p1, 1)},
                                    conn)
        validate_bundle(gauged).raise_if_failed()
        validate_connection(gconn).raise_if_failed()
        assert residue_matrix(gconn, p1.infinity()).rows[0][0] == -1


class TestFamilyMatrix:
    def test_unipotent_inverse(self, ecov):
        fb = upper_family(ecov)
        g = fb.transition(0, 1)
        ginv = fb.transition(1, 0)
        ident = FamilyMatrix.identity(ecov.curve, 2, 1, 1)
        assert g * ginv == ident
        assert ginv * g == ident
        # [[1, t f], [0, 1]]^-1 = [[1, -t f], [0, 1]]
        assert ginv.coeff((1,)).rows[0][1] == -g.coeff((1,)).rows[0][1]

    def test_neumann_inverse_higher_order(self, ell):
        base = FMatrix.identity(ell, 2)
        base.rows[0][1] = ell.one()
        bump = FMatrix.zero(ell, 2)
        bump.rows[1][0] = ell.x()
        fm = (FamilyMatrix.constant(base, 1, 2)
              + FamilyMatrix(ell, 2, 1, 2, {(1,): bump}))
        ident = FamilyMatrix.identity(ell, 2, 1, 2)
        assert fm * fm.inverse() == ident
        assert fm.inverse() * fm == ident

    def test_family_d_w(self, ell):
        m = FMatrix.zero(ell, 1)
        m.rows[0][0] = ell.x() * ell.x()
        fm = (FamilyMatrix.identity(ell, 1, 1, 1)
              + FamilyMatrix(ell, 1, 1, 1, {(1,): m}))
        d = fm.d_w()
        assert d.constant_part().is_zero()
        assert d.coeff((1,)).rows[0][0] == ell.x() + ell.x()


class TestEndSpace:
    def test_dim_and_round_trip(self, p1, pcov):
        space = end_space(p1, 2, {p1.point("Z", 0): 1})
        assert space.scalar.dim == 2               # 1 and 1/z
        assert space.dim == 8
        m = FMatrix.zero(p1, 2)
        m.rows[0][1] = p1.one() / p1.x()
        m.rows[1][1] = p1.one()
        assert space.matrix(space.coords(m)) == m

    def test_rejects_off_support_pole(self, p1):
        space = end_space(p1, 1, {p1.point("Z", 0): 1})
        m = FMatrix.zero(p1, 1)
        m.rows[0][0] = p1.one() / (p1.x() - p1.one())
        assert not space.contains(m)


class TestFamilySections:
    """Frozen values for the rank-2 first-order family [[1, t y/x], [0, 1]]."""

    def test_global_end_dimension(self, ecov):
        assert family_end_h0(upper_family(ecov)).dim == 6

    def test_restriction_not_surjective(self, ecov):
        res = res_surjective(upper_family(ecov), 1, 0)
        assert not res.surjective
        assert res.target.dim == 4
        assert res.image.dim == 2
        assert res.cokernel_dim == 2

    def test_image_membership(self, ell, ecov):
        res = res_surjective(upper_family(ecov), 1, 0)
        ident = {i: FamilyMatrix.identity(ell, 2, 1, 0) for i in (0, 1)}
        assert res.in_image(ident)
        e01 = FMatrix.zero(ell, 2)
        e01.rows[0][1] = ell.one()
        nilp = {i: FamilyMatrix.constant(e01, 1, 0) for i in (0, 1)}
        assert res.in_image(nilp)
        lower = FMatrix.diagonal(ell, [ell.zero(), ell.one()])
        proj = {i: FamilyMatrix.constant(lower, 1, 0) for i in (0, 1)}
        assert not res.in_image(proj)

    def test_cokernel_witness_is_the_projector(self, ell, ecov):
        res = res_surjective(upper_family(ecov), 1, 0)
        lower = FMatrix.diagonal(ell, [ell.zero(), ell.one()])
        assert res.witness is not None
        for idx in (0, 1):
            assert res.witness[idx].constant_part() == lower

    def test_twisted_restriction_same_shape(self, ecov):
        # with the Omega^1(D) twist (empty divisor) the picture is identical
        res = res_surjective(upper_family(ecov), 1, 0, profile={})
        assert (res.source.dim, res.target.dim, res.image.dim) == (6, 4, 2)

    def test_trivial_family_is_free(self, p1, pcov):
        fb = bundle_family(line_bundle(pcov, 0), 1, 1)
        assert family_end_h0(fb).dim == 2          # constants x {1, t}
        assert res_surjective(fb, 1, 0).surjective

    def test_three_chart_sections(self, p1):
        Z, W = p1.point("Z", 0), p1.point("W", 1)
        cov = Covering(p1, [[p1.infinity()], [Z], [W]], [Z, W, p1.infinity()])
        ident = FMatrix.identity(p1, 1)
        b = Bundle(cov, 1, {(0, 1): ident, (0, 2): ident, (1, 2): ident})
        assert family_end_h0(bundle_family(b, 1, 1)).dim == 2


class TestFamilyAtiyah:
    def test_flagship_splits_with_honest_witness(self, ecov):
        fb = upper_family(ecov)
        at = family_atiyah(fb)
        assert at.vanishes
        assert witness_splits(fb, at)
        # the base is trivial with the exterior derivative as connection
        assert at.witness[0].constant_part().is_zero()
        assert at.witness[1].constant_part().is_zero()

    def test_flagship_cocycle_entry(self, ell, ecov):
        # dG G^-1 has a single first-order entry: the dx-coefficient of
        # d(y/x), namely y (x^2 - 2) / (2 x^2 (x - 1) (x - 2)).
        at = family_atiyah(upper_family(ecov))
        entry = at.cocycle[(0, 1)].coeff((1,)).rows[0][1]
        x, y = ell.x(), ell.y()
        one = ell.one()
        two = one + one
        expected = y * (x * x - two) / (two * x * x * (x - one) * (x - two))
        assert entry == expected
        assert ell.exterior_d(y / x).w == expected

    def test_trivial_line_bundle_splits_at_level_zero(self, pcov):
        fb = bundle_family(line_bundle(pcov, 0), 0, 0)
        at = family_atiyah(fb)
        assert at.vanishes and at.solve_level == 0
        assert at.witness[0].is_zero() and at.witness[1].is_zero()

    def test_twisting_line_bundles_obstructed(self, pcov):
        for n in (1, 2, -1):
            fb = bundle_family(line_bundle(pcov, n), 0, 0)
            at = family_atiyah(fb)
            assert not at.vanishes
            assert at.pairing is not None
            assert at.pairing.terms[()] == n       # Res_0 of n dz/z

    def test_log_profile_restores_splitting(self, p1, pcov):
        fb = bundle_family(line_bundle(pcov, 1), 0, 0)
        at = family_atiyah(fb, profile={p1.infinity(): 1})
        assert at.vanishes
        assert witness_splits(fb, at)

    def test_elliptic_degree_two_certificate(self, ell, ecov):
        g = FMatrix.zero(ell, 1)
        g.rows[0][0] = ell.x()
        fb = FamilyBundle(ecov, 1, 0, 0,
                          {(0, 1): FamilyMatrix.constant(g, 0, 0)})
        at = family_atiyah(fb)
        assert not at.vanishes
        # the pairing against the constant section is Res_O(dx/x) = 2,
        # because x has a double zero at the two-torsion point O
        assert at.pairing.terms[()] == 2

    def test_gauged_family_still_splits(self, ell, ecov):
        fb = upper_family(ecov)
        h0 = FMatrix.identity(ell, 2)
        h0.rows[0][1] = ell.x()
        h0f = FamilyMatrix.constant(h0, 1, 1)
        new_g = h0f.inverse() * fb.transition(0, 1)
        gauged = FamilyBundle(ecov, 2, 1, 1, {(0, 1): new_g})
        at = family_atiyah(gauged)
        assert at.vanishes
        assert witness_splits(gauged, at)


class TestBaseExtraction:
    def test_base_bundle_and_cocycle(self, ell, ecov):
        fb = upper_family(ecov)
        base = fb.base_bundle()
        validate_bundle(base).raise_if_failed()
        assert bundle_degree(base) == 0
        assert all(m.is_zero() for m in atiyah_cocycle(base).values())
