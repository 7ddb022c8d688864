"""Empirical tail diagnostics: CCDF, Hill index, tail-constant grid, log-log
slope, and the two-sample KS distance.

Everything operates on plain 1-d sample arrays. Left tails are handled by
negating the samples, so there is a single code path.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .measure import TailkitError


class TailStatsError(TailkitError):
    pass


@dataclass(frozen=True)
class TailReport:
    """Empirical summary of one tail of a sample batch."""

    alpha_hill: float
    hill_se: float
    k_used: int
    ccdf: list[tuple[float, float]]
    c_grid: list[tuple[float, float]]
    loglog_slope: float
    flatness_ratio: float
    side: str = "right"
    notes: tuple[str, ...] = ()


def _as_array(samples) -> np.ndarray:
    arr = np.asarray(samples, dtype=float).ravel()
    if arr.size == 0:
        raise TailStatsError("empty sample array")
    return arr


def empirical_ccdf(samples, grid: Sequence[float]) -> list[tuple[float, float]]:
    """Exact fractions P[X > t] at each grid point; grid strictly increasing."""
    arr = np.sort(_as_array(samples))
    grid = list(grid)
    if not grid:
        raise TailStatsError("empty grid")
    if any(t2 <= t1 for t1, t2 in zip(grid, grid[1:])):
        raise TailStatsError("grid must be strictly increasing")
    n = arr.size
    counts = n - np.searchsorted(arr, np.asarray(grid, dtype=float), side="right")
    return [(float(t), float(c) / n) for t, c in zip(grid, counts)]


def hill_estimator(samples, k: Optional[int] = None) -> tuple[float, float]:
    """Hill tail-index estimate over the top k order statistics.

    alpha_hat = k / sum log(X_(i) / X_(k+1)) for the k largest positive
    samples; standard error alpha_hat/sqrt(k). Default k = floor(sqrt(n))
    over the positive part.
    """
    arr = _as_array(samples)
    pos = np.sort(arr[arr > 0.0])[::-1]
    if pos.size == 0:
        raise TailStatsError("no positive samples")
    if k is None:
        k = int(math.floor(math.sqrt(pos.size)))
    if k < 1:
        raise TailStatsError("k must be >= 1")
    if pos.size < k + 1:
        raise TailStatsError(
            f"need at least k+1={k + 1} positive samples, have {pos.size}"
        )
    denom = float(np.sum(np.log(pos[:k] / pos[k])))
    if denom <= 0.0:
        raise TailStatsError("degenerate top order statistics (all ties)")
    alpha = k / denom
    return alpha, alpha / math.sqrt(k)


def geometric_grid(t_lo: float, t_hi: float, n_grid: int) -> np.ndarray:
    if not (0.0 < t_lo < t_hi):
        raise TailStatsError("need 0 < t_lo < t_hi")
    if n_grid < 2:
        raise TailStatsError("need n_grid >= 2")
    return np.geomspace(t_lo, t_hi, n_grid)


def tail_constant(
    samples,
    alpha: float,
    t_lo: float,
    t_hi: float,
    n_grid: int = 25,
) -> tuple[list[tuple[float, float]], float]:
    """t^alpha * CCDF(t) on a geometric grid, plus its max/min ratio.

    A flatness ratio near 1 is consistent with a power-law tail of exponent
    alpha; a strictly positive minimum supports a tail lower bound.
    """
    if alpha <= 0.0:
        raise TailStatsError("alpha must be positive")
    arr = _as_array(samples)
    grid = geometric_grid(t_lo, t_hi, n_grid)
    if int(np.sum(arr > t_hi)) < 100:
        warnings.warn(
            f"fewer than 100 samples exceed t_hi={t_hi:g}; "
            "tail-constant grid is noisy",
            stacklevel=2,
        )
    ccdf = empirical_ccdf(arr, grid)
    values = []
    for t, p in ccdf:
        if p == 0.0:
            usable = [u for u, q in ccdf if q > 0.0]
            top = max(usable) if usable else None
            raise TailStatsError(
                f"empirical CCDF vanishes at t={t:g}"
                + (f"; largest usable t is {top:g}" if top else "")
            )
        values.append((t, t**alpha * p))
    vals = [v for _, v in values]
    return values, max(vals) / min(vals)


def ks_distance(samples_a, samples_b) -> float:
    """Sup-norm distance of the two empirical CDFs (merge over sorted data)."""
    a = np.sort(_as_array(samples_a))
    b = np.sort(_as_array(samples_b))
    merged = np.concatenate([a, b])
    merged.sort(kind="mergesort")
    cdf_a = np.searchsorted(a, merged, side="right") / a.size
    cdf_b = np.searchsorted(b, merged, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def loglog_slope(samples, q_lo: float = 0.9, q_hi: float = 0.999) -> float:
    """Least-squares slope of log CCDF against log t across a quantile band
    of the positive samples; close to -alpha for a power-law tail."""
    if not (0.0 < q_lo < q_hi < 1.0):
        raise TailStatsError("need 0 < q_lo < q_hi < 1")
    arr = _as_array(samples)
    pos = np.sort(arr[arr > 0.0])
    if pos.size < 10:
        raise TailStatsError("need at least 10 positive samples")
    n = pos.size
    lo = int(math.floor(q_lo * n))
    hi = int(math.ceil(q_hi * n))
    ts = np.unique(pos[lo:hi])
    ts = ts[ts > 0.0]
    if ts.size < 10:
        raise TailStatsError("fewer than 10 grid points in the quantile band")
    ccdf = (n - np.searchsorted(pos, ts, side="right")) / n
    keep = ccdf > 0.0
    ts, ccdf = ts[keep], ccdf[keep]
    if ts.size < 10:
        raise TailStatsError("fewer than 10 usable points in the quantile band")
    slope = np.polyfit(np.log(ts), np.log(ccdf), 1)[0]
    return float(slope)


def auto_t_range(samples) -> tuple[float, float]:
    """Default tail-constant range: [q90, q99.9] of the positive samples."""
    arr = _as_array(samples)
    pos = arr[arr > 0.0]
    if pos.size < 100:
        raise TailStatsError("too few positive samples for an automatic t-range")
    lo, hi = np.quantile(pos, [0.90, 0.999])
    if not (0.0 < lo < hi):
        raise TailStatsError("degenerate automatic t-range")
    return float(lo), float(hi)


def build_tail_report(
    samples,
    side: str = "right",
    k: Optional[int] = None,
    t_range: Optional[tuple[float, float]] = None,
    n_grid: int = 25,
    alpha: Optional[float] = None,
) -> TailReport:
    """Full one-sided tail summary; alpha defaults to the Hill estimate."""
    arr = _as_array(samples)
    if side == "left":
        arr = -arr
    elif side != "right":
        raise TailStatsError("side must be 'right' or 'left'")
    notes = []
    alpha_hill, se = hill_estimator(arr, k=k)
    k_used = k if k is not None else int(math.floor(math.sqrt(np.sum(arr > 0.0))))
    if alpha is None:
        alpha = alpha_hill
        notes.append("tail-constant grid uses the Hill estimate")
    if t_range is None:
        t_range = auto_t_range(arr)
        notes.append("automatic t-range [q90, q99.9]")
    grid_vals, flat = tail_constant(arr, alpha, t_range[0], t_range[1], n_grid)
    ccdf = empirical_ccdf(arr, geometric_grid(t_range[0], t_range[1], n_grid))
    slope = loglog_slope(arr)
    return TailReport(
        alpha_hill=alpha_hill,
        hill_se=se,
        k_used=k_used,
        ccdf=ccdf,
        c_grid=grid_vals,
        loglog_slope=slope,
        flatness_ratio=flat,
        side=side,
        notes=tuple(notes),
    )
