"""Built-in acceptance suite: exact closed-form checks plus desk-scale Monte
Carlo property checks, runnable via the CLI (`tailkit verify`) or pytest.

Each criterion returns (passed, detail). Thresholds are pinned here and are
imported by the experiment pipeline for its agreement summary.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cramer import MomentFunction, solve_alpha
from .criteria import (
    SupportClass,
    affine_support_classification,
    cv_condition,
    goldie_sufficient,
    letac_constants,
    letac_positivity,
)
from .engine import (
    SimConfig,
    get_family,
    iterate_forward,
    pathwise_domination_check,
    sample_perpetuity,
    sample_stationary,
    sample_sup_pi,
    _block_rng,
)
from .measure import Atom, AtomicMeasure
from .tailstats import hill_estimator, ks_distance, tail_constant

# Agreement thresholds (also used by the experiment pipeline).
FLATNESS_MAX = 3.0
MIN_GRID_FRACTION = 0.01
KS_MAX = 0.01
HILL_BAND = (0.85, 1.15)

SEED = 20260826


def _measure(entries, label=""):
    return AtomicMeasure(tuple(Atom(*e) for e in entries), label=label)


# The two-atom threshold measure for which the single-clause sign condition
# wrongly predicts a positive upper tail constant.
COUNTEREXAMPLE = _measure(
    [(3.0, 1.0, -1.0, 0.2), (0.5, -1.0, 0.0, 0.8)], label="two-atom-counterexample"
)
ALPHA1_HALF = _measure([(2.0, 0.0, None, 1 / 3), (0.5, 0.0, None, 2 / 3)])
ALPHA1_FIFTH = _measure([(3.0, 0.0, None, 0.2), (0.5, 0.0, None, 0.8)])
AFFINE_POSITIVE = _measure(
    [(2.0, -1.0, None, 1 / 3), (0.5, 1.0, None, 2 / 3)], label="halfline-up"
)
DEGENERATE = _measure(
    [(2.0, -1.0, None, 1 / 3), (0.5, 0.5, None, 2 / 3)], label="point-mass-at-1"
)


def criterion_1_cramer_closed_forms():
    """alpha = 1 closed forms, residual <= 1e-12, under 1 ms per solve."""
    details = []
    ok = True
    for measure in (ALPHA1_HALF, ALPHA1_FIFTH):
        solve_alpha(measure)  # warm-up outside the timer
        best = math.inf
        for _ in range(5):
            t0 = time.perf_counter()
            root = solve_alpha(measure)
            best = min(best, time.perf_counter() - t0)
        good = abs(root.alpha - 1.0) <= 1e-9 and root.residual <= 1e-12 and best < 1e-3
        ok &= good
        details.append(
            f"alpha={root.alpha!r} residual={root.residual:.2e} time={best * 1e3:.3f}ms"
        )
    return ok, "; ".join(details)


def criterion_2_counterexample_analytic():
    """Exact threshold constants (-1, -2, -1/2); tail constant not positive
    although the single-clause sign condition fires."""
    consts = letac_constants(COUNTEREXAMPLE)
    cl = letac_positivity(COUNTEREXAMPLE)
    cv = cv_condition(COUNTEREXAMPLE)
    ok = (
        consts.n1 == -1.0
        and consts.n2 == -2.0
        and consts.n3 == -0.5
        and cl.positive is False
        and cv is True
    )
    return ok, (
        f"n1={consts.n1} n2={consts.n2} n3={consts.n3} "
        f"cl_positive={cl.positive} cv={cv}"
    )


def criterion_3_counterexample_empirical():
    """1e6 stationary threshold-recursion samples all sit at or below -1."""
    config = SimConfig(n_samples=10**6, chains=16, seed=SEED)
    t0 = time.perf_counter()
    batch = sample_stationary(get_family("letac"), COUNTEREXAMPLE, config)
    elapsed = time.perf_counter() - t0
    top = float(np.max(batch.values))
    ok = top <= -1.0 + 1e-12 and elapsed < 60.0
    return ok, f"max sample={top!r} elapsed={elapsed:.1f}s"


def criterion_4_affine_positive_tail():
    """Half-line-up affine measure: flat tail-constant grid over a decade,
    positive lower bound, Hill estimate near 1."""
    support = affine_support_classification(AFFINE_POSITIVE)
    root = solve_alpha(AFFINE_POSITIVE)
    config = SimConfig(n_samples=10**6, chains=16, seed=SEED)
    t0 = time.perf_counter()
    batch = sample_stationary(get_family("affine"), AFFINE_POSITIVE, config)
    pos = batch.values[batch.values > 0.0]
    t_lo, t_hi = np.quantile(pos, [0.90, 0.999])
    grid, flatness = tail_constant(batch.values, root.alpha, t_lo, t_hi)
    vals = [v for _, v in grid]
    alpha_hill, se = hill_estimator(batch.values, k=1000)
    elapsed = time.perf_counter() - t0
    ok = (
        support.combined is SupportClass.HALF_LINE_UP
        and t_hi / t_lo >= 10.0
        and flatness <= FLATNESS_MAX
        and min(vals) >= MIN_GRID_FRACTION * max(vals)
        and HILL_BAND[0] <= alpha_hill <= HILL_BAND[1]
        and elapsed < 120.0
    )
    return ok, (
        f"support={support.combined.value} decade={t_hi / t_lo:.1f} "
        f"flatness={flatness:.3f} hill={alpha_hill:.4f}+-{se:.4f} "
        f"elapsed={elapsed:.1f}s"
    )


def criterion_5_forward_backward_ks():
    """Forward chains and truncated perpetuities target the same law."""
    fwd = sample_stationary(
        get_family("affine"),
        AFFINE_POSITIVE,
        SimConfig(n_samples=10**5, chains=16, seed=SEED),
    )
    bwd = sample_perpetuity(
        AFFINE_POSITIVE, SimConfig(n_samples=10**5, chains=16, seed=SEED + 1)
    )
    stat = ks_distance(fwd.values, bwd.values)
    ok = stat <= KS_MAX
    return ok, f"KS={stat:.5f} (threshold {KS_MAX})"


def criterion_6_sup_pi_tail():
    """Running-maximum draws show a flat, strictly positive t * CCDF grid."""
    batch = sample_sup_pi(
        ALPHA1_FIFTH, SimConfig(n_samples=10**6, chains=16, seed=SEED)
    )
    grid, flatness = tail_constant(batch.values, 1.0, 10.0, 1000.0)
    vals = [v for _, v in grid]
    ok = flatness <= FLATNESS_MAX and min(vals) > 0.0
    return ok, f"flatness={flatness:.3f} min={min(vals):.4f} max={max(vals):.4f}"


def criterion_7_pathwise_domination():
    """Coupled recursions never fall below their declared affine minorant."""
    v_letac = pathwise_domination_check(
        get_family("letac"), COUNTEREXAMPLE, n_paths=1000, n_steps=1000, seed=SEED
    )
    v_maxzero = pathwise_domination_check(
        get_family("maxzero"), COUNTEREXAMPLE, n_paths=1000, n_steps=1000, seed=SEED
    )
    v_affine = pathwise_domination_check(
        get_family("affine"), COUNTEREXAMPLE, n_paths=1000, n_steps=1000, seed=SEED
    )
    ok = v_letac <= 1e-12 and v_maxzero <= 1e-12 and v_affine == 0.0
    return ok, f"letac={v_letac!r} maxzero={v_maxzero!r} affine={v_affine!r}"


def criterion_8_degeneracy_and_equivariance():
    """Degenerate measure collapses to its fixed point; scaling every shift
    by 7 scales affine paths by 7 to within 4 ulp."""
    batch = sample_stationary(
        get_family("affine"), DEGENERATE, SimConfig(n_samples=10**5, chains=16, seed=SEED)
    )
    worst = float(np.max(np.abs(batch.values - 1.0)))

    lam = 7.0
    family = get_family("affine")
    _, traj = iterate_forward(
        family, AFFINE_POSITIVE, x0=0.3, n=2000, rng=_block_rng(SEED, 0), record=True
    )
    _, traj_scaled = iterate_forward(
        family,
        AFFINE_POSITIVE.scale_b(lam),
        x0=lam * 0.3,
        n=2000,
        rng=_block_rng(SEED, 0),
        record=True,
    )
    ulps = [
        abs(lam * x - y) / np.spacing(max(abs(lam * x), abs(y), 1e-300))
        for x, y in zip(traj, traj_scaled)
    ]
    max_ulp = max(ulps)
    ok = worst <= 1e-9 and max_ulp <= 4.0
    return ok, f"degenerate max|x-1|={worst:.2e}; equivariance max ulp={max_ulp:.2f}"


def _random_threshold_measures(rng, count):
    """Valid threshold measures with E log A < 0 and an expanding atom."""
    out = []
    while len(out) < count:
        k = int(rng.integers(2, 5))
        a = np.exp(rng.uniform(-1.5, 0.9, size=k))
        b = rng.uniform(-2.0, 2.0, size=k)
        c = rng.uniform(-2.0, 2.0, size=k)
        w = rng.dirichlet(np.ones(k))
        if np.any(w <= 1e-6):
            continue
        if float(np.dot(w, np.log(a))) >= -1e-3 or not np.any(a > 1.0):
            continue
        out.append(
            _measure([(a[i], b[i], c[i], w[i]) for i in range(k)])
        )
    return out


def criterion_9_property_suites():
    """Grid log-convexity, Hill scale-invariance, the sufficient-condition
    implication over 1e3 random measures, weight invariance, and worker-count
    reproducibility."""
    rng = np.random.default_rng(SEED)
    failures = []

    # Log-convexity of the moment function on s in {0, 0.1, ..., 4}.
    for measure in _random_threshold_measures(rng, 100):
        phi = MomentFunction(measure.drop_c())
        s_grid = [0.1 * i for i in range(41)]
        for s, t in zip(s_grid, s_grid[2:]):
            m = 0.5 * (s + t)
            if phi(m) ** 2 > phi(s) * phi(t) * (1.0 + 1e-12):
                failures.append(f"log-convexity broken at s={s:.1f}")
                break
        if failures:
            break

    # Hill scale invariance.
    samples = rng.pareto(2.0, size=20_000) + 1.0
    a1, _ = hill_estimator(samples, k=200)
    a2, _ = hill_estimator(samples * 137.5, k=200)
    if abs(a1 - a2) > 1e-12 * max(1.0, abs(a1)):
        failures.append(f"hill scale invariance: {a1!r} vs {a2!r}")

    # Sufficient condition implies a positive tail constant.
    for measure in _random_threshold_measures(rng, 1000):
        if goldie_sufficient(measure).met and not letac_positivity(measure).positive:
            failures.append(f"sufficient-condition violation on {measure.atoms}")
            break

    # Threshold constants depend on the support only.
    consts = letac_constants(COUNTEREXAMPLE)
    reweighted = _measure([(3.0, 1.0, -1.0, 0.7), (0.5, -1.0, 0.0, 0.3)])
    if letac_constants(reweighted) != consts:
        failures.append("threshold constants changed under reweighting")

    # Identical batches for 1 and 4 workers.
    config = SimConfig(n_samples=20_000, chains=8, seed=SEED)
    b1 = sample_stationary(get_family("affine"), AFFINE_POSITIVE, config, n_workers=1)
    b4 = sample_stationary(get_family("affine"), AFFINE_POSITIVE, config, n_workers=4)
    if not np.array_equal(b1.values, b4.values):
        failures.append("1-worker and 4-worker batches differ")

    return (not failures), ("; ".join(failures) if failures else "all property suites pass")


@dataclass(frozen=True)
class Criterion:
    number: int
    name: str
    run: Callable[[], tuple[bool, str]]


CRITERIA: tuple[Criterion, ...] = (
    Criterion(1, "cramer-closed-forms", criterion_1_cramer_closed_forms),
    Criterion(2, "counterexample-analytic", criterion_2_counterexample_analytic),
    Criterion(3, "counterexample-empirical", criterion_3_counterexample_empirical),
    Criterion(4, "affine-positive-tail", criterion_4_affine_positive_tail),
    Criterion(5, "forward-backward-ks", criterion_5_forward_backward_ks),
    Criterion(6, "sup-pi-tail", criterion_6_sup_pi_tail),
    Criterion(7, "pathwise-domination", criterion_7_pathwise_domination),
    Criterion(8, "degeneracy-and-equivariance", criterion_8_degeneracy_and_equivariance),
    Criterion(9, "property-suites", criterion_9_property_suites),
)


def run_all(echo=print) -> bool:
    all_ok = True
    for crit in CRITERIA:
        passed, detail = crit.run()
        all_ok &= passed
        status = "PASS" if passed else "FAIL"
        echo(f"[{status}] criterion {crit.number} {crit.name}: {detail}")
    return all_ok
