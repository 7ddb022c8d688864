"""Closed-form positivity criteria for the tail constants of affine-type
recursions over atomic driving measures.

All checks reduce to finite scans of the support: fixed points b/(1-a),
the threshold constants N1/N2/N3, and sign conditions on atoms.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

from .cramer import NoPositiveRoot, NotContracting, solve_alpha
from .measure import (
    ATOL,
    RTOL,
    AtomicMeasure,
    ParametricDriver,
    TailkitError,
    arithmeticity_warning,
    degeneracy_check,
    validate,
)


class CriteriaError(TailkitError):
    pass


@dataclass(frozen=True)
class FixedPoint:
    value: float
    a: float
    b: float


def _is_one(a: float) -> bool:
    return abs(a - 1.0) <= ATOL


def fixed_point(a: float, b: float) -> FixedPoint:
    """The unique x with a*x + b = x, defined for a != 1."""
    if _is_one(a):
        if abs(b) <= ATOL:
            raise CriteriaError("a = 1, b = 0: the identity map fixes every point")
        raise CriteriaError(f"a = 1, b = {b:g}: a pure shift has no fixed point")
    value = b / (1.0 - a)
    assert abs(a * value + b - value) <= ATOL + RTOL * abs(value)
    return FixedPoint(value=value, a=a, b=b)


class SupportClass(enum.Enum):
    HALF_LINE_UP = "half-line-up"
    HALF_LINE_DOWN = "half-line-down"
    WHOLE_LINE_CANDIDATE = "whole-line-candidate"
    BOUNDED_ABOVE = "bounded-above"
    UNBOUNDED_VIA_A1_BPOS = "unbounded-via-a1-bpos"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class SupportClassification:
    upward: SupportClass
    downward: SupportClass
    combined: SupportClass

    @property
    def unbounded_up(self) -> Optional[bool]:
        return _unbounded(self.upward)

    @property
    def unbounded_down(self) -> Optional[bool]:
        return _unbounded(self.downward)


def _unbounded(cls: SupportClass) -> Optional[bool]:
    if cls in (
        SupportClass.HALF_LINE_UP,
        SupportClass.HALF_LINE_DOWN,
        SupportClass.UNBOUNDED_VIA_A1_BPOS,
    ):
        return True
    if cls is SupportClass.BOUNDED_ABOVE:
        return False
    return None


def _classify_up(measure: AtomicMeasure) -> SupportClass:
    atoms = measure.sorted_atoms()
    if any(_is_one(t.a) and t.b > 0.0 for t in atoms):
        return SupportClass.UNBOUNDED_VIA_A1_BPOS
    expanding = [t for t in atoms if t.a > 1.0 and not _is_one(t.a)]
    contracting = [t for t in atoms if t.a < 1.0 and not _is_one(t.a)]
    if not expanding or not contracting:
        return SupportClass.INDETERMINATE
    x_exp = [fixed_point(t.a, t.b).value for t in expanding]
    x_con = [fixed_point(t.a, t.b).value for t in contracting]
    if min(x_exp) < max(x_con):
        return SupportClass.HALF_LINE_UP
    return SupportClass.BOUNDED_ABOVE


def affine_support_classification(measure: AtomicMeasure) -> SupportClassification:
    """Decide (un)boundedness of the stationary support at both ends.

    Upward: unbounded when some atom is a positive shift (a=1, b>0), or when
    an expanding and a contracting atom have their fixed points ordered
    x_expanding < x_contracting; bounded above when no such pair exists and
    no positive shift is present. The downward side is the mirrored check on
    (a, -b). When the support lemma's hypotheses fail we refuse to guess.
    """
    if degeneracy_check(measure):
        raise CriteriaError(
            "degenerate measure: support is the single common fixed point"
        )
    up = _classify_up(measure)
    down_raw = _classify_up(measure.negate_b())
    if down_raw is SupportClass.HALF_LINE_UP:
        down = SupportClass.HALF_LINE_DOWN
    else:
        down = down_raw
    u, d = _unbounded(up), _unbounded(down_raw)
    if u and d:
        combined = SupportClass.WHOLE_LINE_CANDIDATE
    elif u:
        combined = up
    elif d is True and u is False:
        combined = SupportClass.HALF_LINE_DOWN
    elif u is False:
        combined = SupportClass.BOUNDED_ABOVE
    else:
        combined = SupportClass.INDETERMINATE
    return SupportClassification(upward=up, downward=down, combined=combined)


@dataclass(frozen=True)
class LetacConstants:
    """Support constants of the threshold recursion
    x -> max(a*x + b, a*c + b).

    n1 = max over atoms of a*c + b; n2 = largest contracting fixed point
    (-inf if no atom contracts); n3 = smallest expanding fixed point (+inf
    if no atom expands); n = max(n1, n2). Atoms with a = 1 enter only n1.
    """

    n1: float
    n2: float
    n3: float

    @property
    def n(self) -> float:
        return max(self.n1, self.n2)


def letac_constants(measure: AtomicMeasure) -> LetacConstants:
    if not measure.has_c:
        raise CriteriaError("threshold constants need atoms with a threshold c")
    atoms = measure.sorted_atoms()
    n1 = max(t.a * t.c + t.b for t in atoms)
    con = [fixed_point(t.a, t.b).value for t in atoms if t.a < 1.0 and not _is_one(t.a)]
    exp = [fixed_point(t.a, t.b).value for t in atoms if t.a > 1.0 and not _is_one(t.a)]
    n2 = max(con) if con else -math.inf
    n3 = min(exp) if exp else math.inf
    return LetacConstants(n1=n1, n2=n2, n3=n3)


@dataclass(frozen=True)
class PositivityVerdict:
    positive: bool
    explanation: str


def letac_positivity(measure: AtomicMeasure) -> PositivityVerdict:
    """Is the upper tail constant of the threshold recursion positive?

    True when some atom is a positive shift (a=1, b>0); otherwise true
    exactly when n3 < max(n1, n2): an expanding fixed point sits strictly
    below the reachable level n, so iterating that atom escapes upward.
    """
    moments = validate(measure)
    consts = letac_constants(measure)
    preamble = ""
    if moments.mean_log_a >= 0.0:
        preamble = f"warning: E log A = {moments.mean_log_a:.6g} >= 0; "
    if moments.has_a1_bpos:
        witness = next(
            t for t in measure.sorted_atoms() if _is_one(t.a) and t.b > 0.0
        )
        return PositivityVerdict(
            True,
            preamble
            + f"atom (a={witness.a:g}, b={witness.b:g}) is a positive shift: "
            "support unbounded above",
        )
    n = consts.n
    if consts.n3 < n:
        return PositivityVerdict(
            True,
            preamble
            + f"n3 = {consts.n3:g} < n = max(n1={consts.n1:g}, n2={consts.n2:g}) "
            f"= {n:g}: support unbounded above",
        )
    return PositivityVerdict(
        False,
        preamble
        + f"n3 = {consts.n3:g} >= n = {n:g}: support contained in (-inf, {n:g}]",
    )


def maxzero_positivity(measure: AtomicMeasure) -> PositivityVerdict:
    """Positivity of the tail constant for x -> max(a*x + b, 0).

    The clamp at zero plays the role of threshold level n1 = 0; positivity
    holds iff n3 < n2 or some atom has a > 1 and b > 0.
    """
    atoms = measure.sorted_atoms()
    con = [fixed_point(t.a, t.b).value for t in atoms if t.a < 1.0 and not _is_one(t.a)]
    exp = [fixed_point(t.a, t.b).value for t in atoms if t.a > 1.0 and not _is_one(t.a)]
    n2 = max(con) if con else -math.inf
    n3 = min(exp) if exp else math.inf
    witness = next((t for t in atoms if t.a > 1.0 and t.b > 0.0), None)
    if witness is not None:
        return PositivityVerdict(
            True, f"atom (a={witness.a:g}, b={witness.b:g}) has a > 1 and b > 0"
        )
    if n3 < n2:
        return PositivityVerdict(True, f"n3 = {n3:g} < n2 = {n2:g}")
    return PositivityVerdict(False, f"n3 = {n3:g} >= n2 = {n2:g} and no a>1,b>0 atom")


@dataclass(frozen=True)
class GoldieResult:
    """Feasibility of the classical sufficient condition: a level c with
    b - c(1-a) >= 0 on every atom, plus a strict-inequality witness."""

    interval: Optional[tuple[float, float]]
    met: bool
    witness_c: Optional[float] = None


def goldie_sufficient(measure: AtomicMeasure) -> GoldieResult:
    """Scan the (piecewise-linear in c) constraints exactly.

    Contracting atoms force c <= b/(1-a), expanding ones force
    c >= b/(1-a), shifts (a=1) force b >= 0. Inside the feasible interval
    the strict conditions are piecewise constant, so checking endpoints,
    midpoint and the atoms' own thresholds is exact.
    """
    if not measure.has_c:
        raise CriteriaError("the sufficient condition needs atoms with a threshold c")
    atoms = measure.sorted_atoms()
    lo, hi = -math.inf, math.inf
    for t in atoms:
        if _is_one(t.a):
            if t.b < 0.0:
                return GoldieResult(interval=None, met=False)
            continue
        fp = t.b / (1.0 - t.a)
        if t.a < 1.0:
            hi = min(hi, fp)
        else:
            lo = max(lo, fp)
    if lo > hi:
        return GoldieResult(interval=None, met=False)

    candidates: list[float] = []
    finite_lo = lo if math.isfinite(lo) else hi - 1.0 if math.isfinite(hi) else -1.0
    finite_hi = hi if math.isfinite(hi) else lo + 1.0 if math.isfinite(lo) else 1.0
    candidates += [finite_lo, finite_hi, 0.5 * (finite_lo + finite_hi)]
    for t in atoms:
        if not _is_one(t.a):
            fp = t.b / (1.0 - t.a)
            candidates += [fp - ATOL, fp + ATOL]
        candidates += [t.c - ATOL, t.c + ATOL]
    for c in candidates:
        if not (lo <= c <= hi):
            continue
        strict = any(t.b - c * (1.0 - t.a) > 0.0 for t in atoms) or any(
            t.a * (t.c - c) > 0.0 for t in atoms
        )
        if strict:
            return GoldieResult(interval=(lo, hi), met=True, witness_c=c)
    return GoldieResult(interval=(lo, hi), met=False)


def cv_condition(measure: AtomicMeasure) -> bool:
    """The two-clause atom-sign condition: some atom with a > 1, b > 0, or
    some atom with a > 1, b >= 0, c > 0. Sufficiency of the first clause
    alone fails (see the two-atom counterexample in the tests)."""
    if not measure.has_c:
        raise CriteriaError("this condition needs atoms with a threshold c")
    return any(
        (t.a > 1.0 and t.b > 0.0) or (t.a > 1.0 and t.b >= 0.0 and t.c > 0.0)
        for t in measure.atoms
    )


def invariant_halfline_check(measure: AtomicMeasure, n_level: float) -> float:
    """max over atoms of a*N + b - N; <= 0 certifies (-inf, N] is invariant
    under every affine part of the support."""
    if not math.isfinite(n_level):
        raise CriteriaError("invariance check needs a finite level N")
    return max(t.a * n_level + t.b - n_level for t in measure.atoms)


@dataclass(frozen=True)
class CriteriaVerdict:
    degenerate: bool
    fixed_point_value: Optional[float] = None
    alpha: Optional[float] = None
    alpha_note: Optional[str] = None
    support: Optional[SupportClassification] = None
    c_plus_positive: Optional[bool] = None
    c_minus_positive: Optional[bool] = None
    letac: Optional[LetacConstants] = None
    cl_positive: Optional[bool] = None
    cl_explanation: Optional[str] = None
    cm_positive: Optional[bool] = None
    goldie: Optional[GoldieResult] = None
    cv_flag: Optional[bool] = None
    consistent: bool = True
    warnings: tuple[str, ...] = ()

    @property
    def support_class(self) -> Optional[SupportClass]:
        return self.support.combined if self.support else None


def full_verdict(measure: AtomicMeasure, family: str = "affine") -> CriteriaVerdict:
    """Run every criterion applicable to the family and cross-check them.

    Verdicts are data: inapplicable or undecidable fields stay None rather
    than raising.
    """
    if isinstance(measure, ParametricDriver):
        raise CriteriaError("analytic criteria operate on atomic measures only")
    warns = []
    w = arithmeticity_warning(measure)
    if w:
        warns.append(w)

    if degeneracy_check(measure):
        from .measure import common_fixed_point

        return CriteriaVerdict(
            degenerate=True,
            fixed_point_value=common_fixed_point(measure),
            warnings=tuple(warns),
        )

    alpha = None
    alpha_note = None
    try:
        alpha = solve_alpha(measure.drop_c() if measure.has_c else measure).alpha
    except (NoPositiveRoot, NotContracting) as exc:
        alpha_note = str(exc)

    support = None
    c_plus = None
    c_minus = None
    try:
        support = affine_support_classification(measure)
        c_plus = support.unbounded_up
        c_minus = support.unbounded_down
    except CriteriaError:
        pass

    letac = cl_pos = cl_expl = goldie = cv = None
    cm_pos = None
    consistent = True
    if measure.has_c:
        letac = letac_constants(measure)
        verdict = letac_positivity(measure)
        cl_pos, cl_expl = verdict.positive, verdict.explanation
        goldie = goldie_sufficient(measure)
        cv = cv_condition(measure)
        # The theorem's two escape routes must agree with each other and
        # with the sufficient condition where both speak.
        if cl_pos and not validate(measure).has_a1_bpos:
            consistent = consistent and (letac.n3 < letac.n2 or letac.n3 < letac.n1)
        if goldie.met and not cl_pos:
            consistent = False
    if family == "maxzero":
        cm_pos = maxzero_positivity(
            measure.drop_c() if measure.has_c else measure
        ).positive

    return CriteriaVerdict(
        degenerate=False,
        alpha=alpha,
        alpha_note=alpha_note,
        support=support,
        c_plus_positive=c_plus,
        c_minus_positive=c_minus,
        letac=letac,
        cl_positive=cl_pos,
        cl_explanation=cl_expl,
        cm_positive=cm_pos,
        goldie=goldie,
        cv_flag=cv,
        consistent=consistent,
        warnings=tuple(warns),
    )
