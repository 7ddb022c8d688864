"""Finitely-supported driving measures and their log-moment diagnostics.

A driving measure is the law of the random coefficients (A, B) of an affine
map x -> Ax + B, or of the triple (A, B, C) for recursions that also need a
threshold. Atomic measures carry exact weights and admit exact criteria;
parametric families are simulation-only.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

# Absolute / relative comparison tolerances for atom arithmetic.
ATOL = 1e-12
RTOL = 1e-9

# Weight sums further than this from 1 are treated as typos, not round-off.
WEIGHT_SUM_TOL = 1e-12


class TailkitError(Exception):
    """Base class for all library errors."""


class MeasureError(TailkitError):
    """Structurally invalid driving measure."""


@dataclass(frozen=True)
class Atom:
    """One support point (a, b[, c]) with its probability weight."""

    a: float
    b: float
    c: Optional[float] = None
    weight: float = 1.0

    def __post_init__(self) -> None:
        if not (self.a > 0.0) or not math.isfinite(self.a):
            raise MeasureError(f"atom multiplier must be finite and > 0, got a={self.a}")
        if not math.isfinite(self.b):
            raise MeasureError(f"atom shift must be finite, got b={self.b}")
        if self.c is not None and not math.isfinite(self.c):
            raise MeasureError(f"atom threshold must be finite, got c={self.c}")
        if not (self.weight > 0.0) or not math.isfinite(self.weight):
            raise MeasureError(f"atom weight must be finite and > 0, got w={self.weight}")

    def sort_key(self) -> tuple:
        c = self.c if self.c is not None else -math.inf
        return (self.a, self.b, c, self.weight)


@dataclass(frozen=True)
class AtomicMeasure:
    """Nonempty finite collection of atoms with weights summing to 1.

    Weights within 1e-12 of summing to one are renormalized on
    construction; larger deviations are rejected.
    """

    atoms: tuple[Atom, ...]
    label: str = ""

    def __post_init__(self) -> None:
        if not self.atoms:
            raise MeasureError("measure needs at least one atom")
        atoms = tuple(self.atoms)
        has_c = [atom.c is not None for atom in atoms]
        if any(has_c) and not all(has_c):
            raise MeasureError("threshold c must be present on all atoms or none")
        total = math.fsum(atom.weight for atom in atoms)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise MeasureError(f"atom weights sum to {total!r}, expected 1")
        if total != 1.0:
            atoms = tuple(
                Atom(atom.a, atom.b, atom.c, atom.weight / total) for atom in atoms
            )
        object.__setattr__(self, "atoms", atoms)

    @property
    def has_c(self) -> bool:
        return self.atoms[0].c is not None

    def sorted_atoms(self) -> tuple[Atom, ...]:
        """Atoms in canonical (a, b, c, weight) order.

        All reductions over atoms run in this order so results do not depend
        on how the measure was written down.
        """
        return tuple(sorted(self.atoms, key=Atom.sort_key))

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(a, b, c, weight) as float arrays in canonical order; c is 0-filled
        when absent."""
        atoms = self.sorted_atoms()
        a = np.array([t.a for t in atoms])
        b = np.array([t.b for t in atoms])
        c = np.array([t.c if t.c is not None else 0.0 for t in atoms])
        w = np.array([t.weight for t in atoms])
        return a, b, c, w

    def drop_c(self) -> "AtomicMeasure":
        return AtomicMeasure(
            tuple(Atom(t.a, t.b, None, t.weight) for t in self.atoms), self.label
        )

    def negate_b(self) -> "AtomicMeasure":
        """Mirror image (a, -b): the driver of the recursion for -X."""
        return AtomicMeasure(
            tuple(Atom(t.a, -t.b, t.c, t.weight) for t in self.atoms), self.label
        )

    def scale_b(self, lam: float) -> "AtomicMeasure":
        return AtomicMeasure(
            tuple(Atom(t.a, lam * t.b, t.c, t.weight) for t in self.atoms), self.label
        )


@dataclass(frozen=True)
class LogMoments:
    """Exact log-moment diagnostics of an atomic measure."""

    mean_log_a: float
    mean_log_plus_abs_b: float
    has_expanding_atom: bool
    has_a1_bpos: bool


def validate(measure: AtomicMeasure) -> LogMoments:
    """Compute E log A, E log+|B| and the structural flags exactly.

    Summation runs over atoms sorted canonically, so permuting the input
    atoms cannot change the result in the last bit.
    """
    atoms = measure.sorted_atoms()
    mean_log_a = math.fsum(t.weight * math.log(t.a) for t in atoms)
    mean_log_plus_abs_b = math.fsum(
        t.weight * math.log(abs(t.b)) for t in atoms if abs(t.b) > 1.0
    )
    has_expanding = any(t.a > 1.0 for t in atoms)
    has_a1_bpos = any(abs(t.a - 1.0) <= ATOL and t.b > 0.0 for t in atoms)
    return LogMoments(mean_log_a, mean_log_plus_abs_b, has_expanding, has_a1_bpos)


def degeneracy_check(measure: AtomicMeasure) -> bool:
    """True iff every atom map fixes one common point x*.

    Atoms with a = 1 must then have b = 0; all others must share the fixed
    point b/(1-a). A degenerate measure has a point-mass stationary law.
    """
    x_star: Optional[float] = None
    for t in measure.sorted_atoms():
        if abs(t.a - 1.0) <= ATOL:
            if abs(t.b) > ATOL:
                return False
            continue
        fp = t.b / (1.0 - t.a)
        if x_star is None:
            x_star = fp
        elif abs(fp - x_star) > ATOL + RTOL * abs(x_star):
            return False
    if x_star is not None:
        worst = max(
            abs(t.a * x_star + t.b - x_star) for t in measure.atoms
        )
        if worst > RTOL * (1.0 + abs(x_star)):
            return False
    return True


def common_fixed_point(measure: AtomicMeasure) -> Optional[float]:
    """The shared fixed point of a degenerate measure, or None.

    For an all-identity measure every point is fixed; 0.0 is returned.
    """
    if not degeneracy_check(measure):
        return None
    for t in measure.sorted_atoms():
        if abs(t.a - 1.0) > ATOL:
            return t.b / (1.0 - t.a)
    return 0.0


# Ratios of log-multipliers are called rational when a continued-fraction
# convergent with denominator <= this bound lands within ARITH_TOL.
_ARITH_MAX_DEN = 64
_ARITH_TOL = 1e-9


def arithmeticity_warning(measure: AtomicMeasure) -> Optional[str]:
    """Warn when the log-multipliers appear to lie on a lattice d*Z.

    Returns a message (never raises): the theorems assume a non-arithmetic
    law of log A, but an arithmetic measure is still simulable. A measure
    with a single distinct multiplier always warns; atoms with a = 1
    contribute log a = 0 and sit on every lattice.
    """
    logs = sorted({math.log(t.a) for t in measure.atoms if abs(t.a - 1.0) > ATOL})
    if not logs:
        return "all multipliers equal 1: log A is the zero lattice"
    base = max(abs(la) for la in logs)
    ratios = []
    for la in logs:
        r = la / base
        frac = Fraction(r).limit_denominator(_ARITH_MAX_DEN)
        if abs(r - float(frac)) > _ARITH_TOL:
            return None
        ratios.append(frac)
    if len(logs) == 1:
        return f"single multiplier value: log A lies on the lattice ({base:.6g})*Z"
    den = math.lcm(*(f.denominator for f in ratios))
    return (
        "log-multipliers appear to lie on a common lattice "
        f"({base / den:.6g})*Z; tail limits may oscillate"
    )


@dataclass(frozen=True)
class ParametricDriver:
    """Continuous driver family, for simulation only.

    Supported families:
      - ``lognormal_normal``: A ~ LogNormal(mu, sigma), B ~ Normal(loc, scale)
      - ``uniform``: A ~ Uniform(a_lo, a_hi), B ~ Uniform(b_lo, b_hi)

    Analytic criteria refuse parametric drivers; only drawing and the exact
    mean of log A are exposed.
    """

    family: str
    params: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self) -> None:
        p = self.params
        if self.family == "lognormal_normal":
            if p.get("sigma", 1.0) <= 0 or p.get("scale", 1.0) < 0:
                raise MeasureError("lognormal_normal needs sigma > 0 and scale >= 0")
        elif self.family == "uniform":
            a_lo, a_hi = p.get("a_lo", 0.5), p.get("a_hi", 1.5)
            if not (0 < a_lo <= a_hi):
                raise MeasureError("uniform needs 0 < a_lo <= a_hi")
            if p.get("b_lo", -1.0) > p.get("b_hi", 1.0):
                raise MeasureError("uniform needs b_lo <= b_hi")
        else:
            raise MeasureError(f"unknown parametric family {self.family!r}")

    @property
    def has_c(self) -> bool:
        return False

    def mean_log_a(self) -> float:
        p = self.params
        if self.family == "lognormal_normal":
            return p.get("mu", -1.0)
        a_lo, a_hi = p.get("a_lo", 0.5), p.get("a_hi", 1.5)
        if a_lo == a_hi:
            return math.log(a_lo)
        # integral of log over [a_lo, a_hi] / width
        width = a_hi - a_lo
        return (a_hi * math.log(a_hi) - a_lo * math.log(a_lo) - width) / width

    def draw(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        p = self.params
        if self.family == "lognormal_normal":
            a = rng.lognormal(p.get("mu", -1.0), p.get("sigma", 1.0), size=n)
            b = rng.normal(p.get("loc", 0.0), p.get("scale", 1.0), size=n)
        else:
            a = rng.uniform(p.get("a_lo", 0.5), p.get("a_hi", 1.5), size=n)
            b = rng.uniform(p.get("b_lo", -1.0), p.get("b_hi", 1.0), size=n)
        return a, b


def load_measure(path: str | Path):
    """Read a measure file (TOML: label + [[atoms]] tables or [parametric]).

    Returns an AtomicMeasure or a ParametricDriver.
    """
    raw = Path(path).read_bytes()
    try:
        doc = _toml.loads(raw.decode("utf-8"))
    except (_toml.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise MeasureError(f"cannot parse measure file {path}: {exc}") from exc
    return parse_measure(doc, default_label=Path(path).stem)


def parse_measure(doc: dict, default_label: str = ""):
    label = str(doc.get("label", default_label))
    if "parametric" in doc:
        spec = doc["parametric"]
        if not isinstance(spec, dict) or "family" not in spec:
            raise MeasureError("[parametric] needs a 'family' key")
        return ParametricDriver(
            family=str(spec["family"]),
            params=dict(spec.get("params", {})),
            label=label,
        )
    if "atoms" not in doc:
        raise MeasureError("measure file needs 'atoms' tables or a [parametric] section")
    atoms = []
    for i, entry in enumerate(doc["atoms"]):
        if not isinstance(entry, dict) or "a" not in entry or "b" not in entry:
            raise MeasureError(f"atom #{i} needs at least keys 'a' and 'b'")
        try:
            atoms.append(
                Atom(
                    a=float(entry["a"]),
                    b=float(entry["b"]),
                    c=float(entry["c"]) if "c" in entry else None,
                    weight=float(entry.get("w", entry.get("weight", 1.0))),
                )
            )
        except (TypeError, ValueError) as exc:
            raise MeasureError(f"atom #{i}: {exc}") from exc
    return AtomicMeasure(tuple(atoms), label=label)
