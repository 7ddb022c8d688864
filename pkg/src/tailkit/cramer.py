"""Tail exponent: solve E A^s = 1 over an atomic measure.

The moment function phi(s) = sum w_i a_i^s is log-convex with phi(0) = 1 and
slope E log A at 0. When E log A < 0 and some atom expands (a > 1), phi dips
below 1 and then diverges, so there is exactly one positive root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .measure import AtomicMeasure, ParametricDriver, TailkitError, validate

RESIDUAL_TOL = 1e-12
# Keep a_i^s representable even outside the log-domain evaluation path.
_EXP_CAP = 700.0


class NoPositiveRoot(TailkitError):
    """phi is nonincreasing: no atom expands, no positive root exists."""


class NotContracting(TailkitError):
    """E log A >= 0: the recursion has no stationary regime."""


class MomentFunction:
    """phi(s) = sum w_i a_i^s, evaluated in the log domain."""

    def __init__(self, measure: AtomicMeasure):
        atoms = measure.sorted_atoms()
        self.measure = measure
        self._log_a = [math.log(t.a) for t in atoms]
        self._log_w = [math.log(t.weight) for t in atoms]

    def log_phi(self, s: float) -> float:
        exponents = [s * la + lw for la, lw in zip(self._log_a, self._log_w)]
        m = max(exponents)
        return m + math.log(math.fsum(math.exp(e - m) for e in exponents))

    def __call__(self, s: float) -> float:
        return math.exp(self.log_phi(s))

    def dlog_phi(self, s: float) -> float:
        """(log phi)'(s) = phi'(s)/phi(s), stable for large s."""
        exponents = [s * la + lw for la, lw in zip(self._log_a, self._log_w)]
        m = max(exponents)
        den = math.fsum(math.exp(e - m) for e in exponents)
        num = math.fsum(
            math.exp(e - m) * la for e, la in zip(exponents, self._log_a)
        )
        return num / den

    def prime(self, s: float) -> float:
        """phi'(s) = sum w_i a_i^s log a_i."""
        return self.dlog_phi(s) * self(s)


@dataclass(frozen=True)
class CramerRoot:
    alpha: float
    residual: float
    bracket: tuple[float, float]


def solve_alpha(measure: AtomicMeasure) -> CramerRoot:
    """Unique alpha > 0 with phi(alpha) = 1, to residual <= 1e-12.

    Geometric bracket expansion from s = 1, bisection on log phi, then a
    short Newton polish. Raises NotContracting when E log A >= 0 and
    NoPositiveRoot when no atom has a > 1.
    """
    if isinstance(measure, ParametricDriver):
        raise TailkitError("exponent solving operates on atomic measures only")
    moments = validate(measure)
    if moments.mean_log_a >= 0.0:
        raise NotContracting(f"E log A = {moments.mean_log_a:.6g} >= 0")
    if not moments.has_expanding_atom:
        raise NoPositiveRoot("no atom has a > 1, phi(s) never returns to 1")

    phi = MomentFunction(measure)
    max_log_a = max(math.log(t.a) for t in measure.atoms if t.a > 1.0)
    s_cap = _EXP_CAP / max_log_a

    lo, hi = 0.0, 1.0
    while phi.log_phi(hi) < 0.0:
        lo = hi
        hi *= 2.0
        if hi > s_cap:
            hi = s_cap
            if phi.log_phi(hi) < 0.0:
                raise TailkitError(
                    "root lies beyond the representable range of a^s"
                )
            break

    # Bisection on g = log phi (same sign pattern as phi - 1).
    for _ in range(200):
        if hi - lo <= 1e-13 * (1.0 + hi):
            break
        mid = 0.5 * (lo + hi)
        if phi.log_phi(mid) < 0.0:
            lo = mid
        else:
            hi = mid

    root = 0.5 * (lo + hi)
    for _ in range(10):
        g = phi.log_phi(root)
        if abs(math.expm1(g)) <= RESIDUAL_TOL:
            break
        step = g / phi.dlog_phi(root)
        candidate = root - step
        if not (lo <= candidate <= hi):
            candidate = 0.5 * (lo + hi)
        if phi.log_phi(candidate) < 0.0:
            lo = candidate
        else:
            hi = candidate
        root = candidate

    residual = abs(phi(root) - 1.0)
    if residual > RESIDUAL_TOL:
        raise TailkitError(
            f"root polish failed: |phi(alpha)-1| = {residual:.3e} > {RESIDUAL_TOL}"
        )
    return CramerRoot(alpha=root, residual=residual, bracket=(lo, hi))


@dataclass(frozen=True)
class MomentRatioReport:
    """Large-s moment ratio diagnostic for the sandwich-type theorems.

    For an atomic measure E A^s is finite for every s, so the finite-horizon
    branch never applies; the large-s limit of (E|B|^s / E A^s)^(1/s) is
    max|b| / max a.
    """

    s_inf: float
    limit_value: float
    condition_met: bool
    s_inf_finite_case_applicable: bool = False


def moment_ratio_conditions(measure: AtomicMeasure) -> MomentRatioReport:
    if isinstance(measure, ParametricDriver):
        raise TailkitError("moment-ratio conditions operate on atomic measures only")
    max_a = max(t.a for t in measure.atoms)
    max_abs_b = max(abs(t.b) for t in measure.atoms)
    limit = max_abs_b / max_a
    return MomentRatioReport(
        s_inf=math.inf,
        limit_value=limit,
        condition_met=math.isfinite(limit),
    )
