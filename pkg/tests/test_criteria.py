import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tailkit.criteria import (
    CriteriaError,
    SupportClass,
    affine_support_classification,
    cv_condition,
    fixed_point,
    full_verdict,
    goldie_sufficient,
    invariant_halfline_check,
    letac_constants,
    letac_positivity,
    maxzero_positivity,
)
from tailkit.measure import Atom, AtomicMeasure, ParametricDriver, validate


def m(*entries, label=""):
    return AtomicMeasure(tuple(Atom(*e) for e in entries), label=label)


COUNTEREXAMPLE = m((3.0, 1.0, -1.0, 0.2), (0.5, -1.0, 0.0, 0.8))
HALFLINE_UP = m((2.0, -1.0, None, 1 / 3), (0.5, 1.0, None, 2 / 3))
BOUNDED_ABOVE = m((2.0, -2.0, None, 1 / 3), (0.5, -1.0, None, 2 / 3))
DEGENERATE = m((2.0, -1.0, None, 1 / 3), (0.5, 0.5, None, 2 / 3))


class TestFixedPoint:
    def test_simple_values(self):
        assert fixed_point(0.5, 1.0).value == 2.0
        assert fixed_point(2.0, -1.0).value == 1.0
        assert fixed_point(3.0, 1.0).value == -0.5

    def test_identity_and_shift_rejected(self):
        with pytest.raises(CriteriaError, match="identity"):
            fixed_point(1.0, 0.0)
        with pytest.raises(CriteriaError, match="shift"):
            fixed_point(1.0, 2.0)

    @given(
        a=st.floats(0.01, 100.0).filter(lambda a: abs(a - 1.0) > 1e-6),
        b=st.floats(-100.0, 100.0),
    )
    def test_fixed_point_equation(self, a, b):
        x = fixed_point(a, b).value
        assert abs(a * x + b - x) <= 1e-9 * (1.0 + abs(x))


class TestSupport:
    def test_halfline_up(self):
        # x_exp = 1 < x_con = 2: escape upward
        s = affine_support_classification(HALFLINE_UP)
        assert s.upward is SupportClass.HALF_LINE_UP
        assert s.unbounded_up is True

    def test_bounded_above(self):
        # x_exp = 2 > x_con = -2: no upward escape
        s = affine_support_classification(BOUNDED_ABOVE)
        assert s.upward is SupportClass.BOUNDED_ABOVE
        assert s.unbounded_up is False
        assert s.unbounded_down is True

    def test_positive_shift_atom(self):
        s = affine_support_classification(
            m((1.0, 1.0, None, 0.25), (0.5, 0.0, None, 0.75))
        )
        assert s.upward is SupportClass.UNBOUNDED_VIA_A1_BPOS
        assert s.unbounded_up is True

    def test_all_contracting_indeterminate(self):
        s = affine_support_classification(
            m((0.5, 1.0, None, 0.5), (0.25, -1.0, None, 0.5))
        )
        assert s.upward is SupportClass.INDETERMINATE
        assert s.unbounded_up is None

    def test_whole_line_candidate(self):
        # unbounded both ways: x_exp = 0 sits between the contracting
        # fixed points -4 and 4
        s = affine_support_classification(
            m((2.0, 0.0, None, 0.2), (0.5, 2.0, None, 0.4), (0.5, -2.0, None, 0.4))
        )
        assert s.combined is SupportClass.WHOLE_LINE_CANDIDATE

    def test_mirror_symmetry(self):
        s = affine_support_classification(HALFLINE_UP)
        s_neg = affine_support_classification(HALFLINE_UP.negate_b())
        assert s.unbounded_up == s_neg.unbounded_down
        assert s.unbounded_down == s_neg.unbounded_up

    def test_degenerate_rejected(self):
        with pytest.raises(CriteriaError, match="degenerate"):
            affine_support_classification(DEGENERATE)


class TestLetac:
    def test_counterexample_constants(self):
        consts = letac_constants(COUNTEREXAMPLE)
        assert consts.n1 == -1.0  # max(3*(-1)+1, 0.5*0-1) = max(-2, -1)
        assert consts.n2 == -2.0  # fixed point of (1/2, -1)
        assert consts.n3 == -0.5  # fixed point of (3, 1)
        assert consts.n == -1.0

    def test_counterexample_not_positive(self):
        v = letac_positivity(COUNTEREXAMPLE)
        assert not v.positive
        assert "n3" in v.explanation

    def test_lower_threshold_restores_positivity(self):
        # moving c of the expanding atom far down pushes n1 below n3... the
        # other direction: raise c so a*c + b exceeds n3
        meas = m((3.0, 1.0, 0.0, 0.2), (0.5, -1.0, 0.0, 0.8))
        consts = letac_constants(meas)
        assert consts.n1 == 1.0
        assert letac_positivity(meas).positive

    def test_positive_shift_escape(self):
        meas = m((1.0, 1.0, 0.0, 0.2), (0.5, -1.0, 0.0, 0.8))
        v = letac_positivity(meas)
        assert v.positive
        assert "positive shift" in v.explanation

    def test_no_expansion_means_bounded(self):
        meas = m((0.5, 1.0, 0.0, 0.5), (0.25, 2.0, 0.0, 0.5))
        assert not letac_positivity(meas).positive

    def test_needs_thresholds(self):
        with pytest.raises(CriteriaError, match="threshold"):
            letac_constants(HALFLINE_UP)

    def test_invariant_halfline_at_n(self):
        consts = letac_constants(COUNTEREXAMPLE)
        # (-inf, n] really is invariant for the counterexample
        assert invariant_halfline_check(COUNTEREXAMPLE, consts.n) <= 0.0


class TestMaxZero:
    def test_expanding_positive_shift(self):
        v = maxzero_positivity(m((2.0, 1.0, None, 0.2), (0.5, -1.0, None, 0.8)))
        assert v.positive

    def test_crossed_fixed_points(self):
        # x_exp = 1 < x_con = 2 though both b < 0 on the expanding atom
        v = maxzero_positivity(m((2.0, -1.0, None, 1 / 3), (0.5, 1.0, None, 2 / 3)))
        assert v.positive

    def test_clamped_to_zero(self):
        # all maps push down at positive x and the clamp absorbs: X = 0
        v = maxzero_positivity(m((2.0, -1.0, None, 1 / 3), (0.5, -1.0, None, 2 / 3)))
        assert not v.positive


class TestGoldie:
    def test_counterexample_infeasible(self):
        # interval would need c >= -1/2 (expanding) and c <= -2 (contracting)
        res = goldie_sufficient(COUNTEREXAMPLE)
        assert not res.met
        assert res.interval is None

    def test_feasible_example(self):
        meas = m((3.0, 1.0, 0.0, 0.2), (0.5, 0.0, 0.0, 0.8))
        res = goldie_sufficient(meas)
        assert res.met
        lo, hi = res.interval
        assert lo == -0.5 and hi == 0.0
        assert lo <= res.witness_c <= hi

    def test_negative_shift_blocks(self):
        res = goldie_sufficient(m((1.0, -1.0, 0.0, 0.5), (0.5, 0.0, 0.0, 0.5)))
        assert not res.met

    def test_implies_positivity(self):
        # soundness on a specific awkward mixed-sign measure
        meas = m((4.0, -2.0, 1.0, 0.1), (0.25, 1.0, 0.0, 0.9))
        res = goldie_sufficient(meas)
        if res.met:
            assert letac_positivity(meas).positive


class TestCv:
    def test_counterexample_flags_despite_zero_constant(self):
        assert cv_condition(COUNTEREXAMPLE)
        assert not letac_positivity(COUNTEREXAMPLE).positive

    def test_no_expanding_atom(self):
        assert not cv_condition(m((0.5, 1.0, 1.0, 0.5), (0.9, 1.0, 1.0, 0.5)))

    def test_second_clause(self):
        assert cv_condition(m((2.0, 0.0, 1.0, 0.5), (0.5, -1.0, -1.0, 0.5)))
        assert not cv_condition(m((2.0, 0.0, -1.0, 0.5), (0.5, -1.0, -1.0, 0.5)))


class TestFullVerdict:
    def test_degenerate_short_circuits(self):
        v = full_verdict(DEGENERATE)
        assert v.degenerate
        assert v.fixed_point_value == pytest.approx(1.0, abs=1e-12)
        assert v.alpha is None

    def test_counterexample_verdict(self):
        v = full_verdict(COUNTEREXAMPLE, family="letac")
        assert not v.degenerate
        assert v.alpha == pytest.approx(1.0, abs=1e-9)
        assert v.letac.n3 == -0.5
        assert v.cl_positive is False
        assert v.cv_flag is True
        assert v.goldie is not None and not v.goldie.met
        assert v.consistent

    def test_affine_halfline(self):
        v = full_verdict(HALFLINE_UP)
        assert v.c_plus_positive is True
        assert v.support_class is SupportClass.HALF_LINE_UP
        assert v.letac is None and v.cv_flag is None

    def test_maxzero_family(self):
        v = full_verdict(m((2.0, 1.0, None, 0.2), (0.5, -1.0, None, 0.8)),
                         family="maxzero")
        assert v.cm_positive is True

    def test_not_contracting_noted(self):
        v = full_verdict(m((2.0, 1.0, None, 0.7), (0.5, -1.0, None, 0.3)))
        assert v.alpha is None
        assert v.alpha_note

    def test_parametric_rejected(self):
        with pytest.raises(CriteriaError, match="atomic"):
            full_verdict(ParametricDriver("uniform", {
                "a_lo": 0.1, "a_hi": 1.5, "b_lo": -1.0, "b_hi": 1.0}))

    def test_arithmetic_warning_propagates(self):
        v = full_verdict(m((2.0, 1.0, None, 0.25), (0.5, -1.0, None, 0.75)))
        assert any("lattice" in w or "arithmetic" in w for w in v.warnings)


def random_letac_measures(draw):
    """Measures with a threshold on each atom, E log A < 0, and at least
    one expanding and one contracting atom."""
    n = draw(st.integers(2, 4))
    raw = [
        (
            draw(st.floats(0.05, 5.0).filter(lambda a: abs(a - 1.0) > 1e-3)),
            draw(st.floats(-3.0, 3.0)),
            draw(st.floats(-3.0, 3.0)),
            draw(st.floats(0.05, 1.0)),
        )
        for _ in range(n)
    ]
    total = sum(w for *_, w in raw)
    atoms = tuple(Atom(a, b, c, w / total) for a, b, c, w in raw)
    return AtomicMeasure(atoms)


@st.composite
def letac_measures(draw):
    return random_letac_measures(draw)


@given(letac_measures())
@settings(max_examples=300, deadline=None)
def test_goldie_soundness(meas):
    """Whenever the sufficient condition fires on a contracting system, the
    exact criterion must agree the tail constant is positive."""
    moments = validate(meas)
    if moments.mean_log_a >= -1e-3:
        return
    if not any(t.a > 1.0 for t in meas.atoms):
        return
    res = goldie_sufficient(meas)
    if res.met:
        assert letac_positivity(meas).positive


@given(letac_measures())
@settings(max_examples=300, deadline=None)
def test_letac_constants_bracket_n1(meas):
    """n always dominates n1, and positivity is monotone in the verdict's
    own constants."""
    consts = letac_constants(meas)
    assert consts.n >= consts.n1
    v = letac_positivity(meas)
    if not validate(meas).has_a1_bpos:
        assert v.positive == (consts.n3 < consts.n)


@given(st.floats(0.05, 5.0).filter(lambda a: abs(a - 1.0) > 1e-3),
       st.floats(-3.0, 3.0))
def test_invariance_of_halfline_above_fixed_point(a, b):
    """For a single contracting atom, (-inf, N] is invariant iff N >= the
    fixed point; and never invariant below it."""
    if a >= 1.0:
        return
    fp = fixed_point(a, b).value
    assert invariant_halfline_check(m((a, b)), fp + 1.0) <= 0.0
    assert invariant_halfline_check(m((a, b)), fp - 1.0) > 0.0


def test_counterexample_log_moment():
    moments = validate(COUNTEREXAMPLE)
    expected = 0.2 * math.log(3.0) - 0.8 * math.log(2.0)
    assert moments.mean_log_a == pytest.approx(expected, abs=1e-15)
    assert moments.mean_log_a < 0.0
