"""End-to-end experiment pipeline: criteria, simulation, tail analysis, and a
combined report comparing analytic verdicts with empirical diagnostics.

Reports are plain files (text, CSV, one JSON record). Nothing in a report
depends on wall-clock time, so a rerun with the same config and seed is
byte-identical.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from . import __version__
from .criteria import CriteriaVerdict, full_verdict
from .engine import (
    SampleBatch,
    SimConfig,
    get_family,
    sample_perpetuity,
    sample_stationary,
    sample_sup_pi,
)
from .measure import AtomicMeasure, TailkitError, load_measure
from .tailstats import (
    TailReport,
    TailStatsError,
    build_tail_report,
    empirical_ccdf,
    geometric_grid,
    ks_distance,
    tail_constant,
)

# Empirical-vs-analytic agreement thresholds live with the acceptance suite.
from .acceptance import FLATNESS_MAX, MIN_GRID_FRACTION

# Derived stream seeds: the backward and running-maximum batches must not
# share atom streams with the forward batch.
_BACKWARD_SEED_OFFSET = 1
_SUPPI_SEED_OFFSET = 2

SUP_PI_T_RANGE = (10.0, 1000.0)


class StageError(TailkitError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class ExperimentConfig:
    measure_path: str
    family: str = "affine"
    sim: SimConfig = field(default_factory=SimConfig)
    hill_k: Optional[int] = None
    t_range: Optional[tuple[float, float]] = None  # None = [q90, q99.9]
    output_dir: Optional[str] = None
    formats: tuple[str, ...] = ("text", "json")
    n_workers: int = 1


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    verdict: CriteriaVerdict
    moment_warnings: tuple[str, ...] = ()
    tail_right: Optional[TailReport] = None
    tail_left: Optional[TailReport] = None
    skips: dict = field(default_factory=dict)
    ks_forward_backward: Optional[float] = None
    sup_pi_grid: Optional[list[tuple[float, float]]] = None
    sup_pi_flatness: Optional[float] = None
    agreement: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    batch: Optional[SampleBatch] = None
    sup_pi_batch: Optional[SampleBatch] = None


def _right_tail_skip_reason(verdict: CriteriaVerdict, family: str) -> Optional[str]:
    if family == "letac" and verdict.cl_positive is False and verdict.letac:
        n = verdict.letac.n
        if math.isfinite(n):
            return f"support bounded above at {n:g}"
    if verdict.support and verdict.support.unbounded_up is False:
        return "support bounded above"
    return None


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Execute criteria -> simulate -> tail analysis -> cross-checks.

    Any stage failure aborts with the stage name; files written by earlier
    stages are left in place.
    """
    try:
        measure = load_measure(config.measure_path)
    except (TailkitError, OSError) as exc:
        raise StageError("load", exc) from exc

    family = get_family(config.family)
    try:
        verdict = full_verdict(measure, family=config.family)
    except TailkitError as exc:
        raise StageError("criteria", exc) from exc

    report = ExperimentReport(
        config=config,
        verdict=verdict,
        moment_warnings=verdict.warnings,
        provenance={
            "tool_version": __version__,
            "seed": config.sim.seed,
            "config_digest": config.sim.digest(),
            "backward_seed": config.sim.seed + _BACKWARD_SEED_OFFSET,
            "sup_pi_seed": config.sim.seed + _SUPPI_SEED_OFFSET,
        },
    )
    if verdict.degenerate:
        report.skips["all"] = (
            f"degenerate measure: stationary law is the point mass at "
            f"{verdict.fixed_point_value:g}"
        )
        _finish(report, config)
        return report

    try:
        batch = sample_stationary(family, measure, config.sim, config.n_workers)
    except TailkitError as exc:
        raise StageError("simulate", exc) from exc
    report.batch = batch
    report.provenance["batch_digest"] = batch.digest()
    report.provenance["coupling_gap"] = batch.coupling_gap

    alpha = verdict.alpha
    skip_right = _right_tail_skip_reason(verdict, config.family)
    try:
        if skip_right:
            report.skips["right"] = skip_right
        else:
            report.tail_right = build_tail_report(
                batch.values,
                side="right",
                k=config.hill_k,
                t_range=config.t_range,
                alpha=alpha,
            )
        try:
            report.tail_left = build_tail_report(
                batch.values,
                side="left",
                k=config.hill_k,
                t_range=None,
                alpha=alpha,
            )
        except TailStatsError as exc:
            report.skips["left"] = str(exc)
        if not skip_right and report.tail_right is None:
            report.skips.setdefault("right", "tail analysis failed")
    except TailStatsError as exc:
        report.skips.setdefault("right", str(exc))

    if config.family == "affine":
        try:
            backward = sample_perpetuity(
                measure,
                replace(config.sim, seed=config.sim.seed + _BACKWARD_SEED_OFFSET),
                config.n_workers,
            )
            report.ks_forward_backward = ks_distance(batch.values, backward.values)
        except TailkitError as exc:
            report.skips["backward"] = str(exc)

    if isinstance(measure, AtomicMeasure):
        try:
            sup_batch = sample_sup_pi(
                measure,
                replace(config.sim, seed=config.sim.seed + _SUPPI_SEED_OFFSET),
                config.n_workers,
            )
            report.sup_pi_batch = sup_batch
            if alpha is not None:
                grid, flat = tail_constant(
                    sup_batch.values, alpha, *SUP_PI_T_RANGE
                )
                report.sup_pi_grid = grid
                report.sup_pi_flatness = flat
        except (TailkitError, TailStatsError) as exc:
            report.skips["sup_pi"] = str(exc)

    report.agreement = _agreement_summary(report)
    _finish(report, config)
    return report


def _agreement_summary(report: ExperimentReport) -> dict:
    """Per tail side: does the empirical diagnostic point the same way as the
    analytic verdict? Disagreements are flagged, never resolved."""
    out = {}
    verdict = report.verdict
    for side, tail in (("right", report.tail_right), ("left", report.tail_left)):
        if side == "right":
            if verdict.cl_positive is not None:
                claim = verdict.cl_positive
            else:
                claim = verdict.c_plus_positive
        else:
            # The two-sided support lemma speaks about the affine recursion
            # only; other families get no analytic left-tail claim.
            claim = (
                verdict.c_minus_positive
                if report.config.family == "affine"
                else None
            )
        if tail is None:
            if claim is False and side in report.skips:
                out[side] = {"analytic": claim, "empirical": None, "agree": True,
                             "note": report.skips[side]}
            else:
                out[side] = {"analytic": claim, "empirical": None, "agree": None}
            continue
        empirical = (
            tail.flatness_ratio <= FLATNESS_MAX
            and min(v for _, v in tail.c_grid)
            >= MIN_GRID_FRACTION * max(v for _, v in tail.c_grid)
        )
        agree = None if claim is None else (claim == empirical)
        out[side] = {"analytic": claim, "empirical": empirical, "agree": agree}
    return out


def _finish(report: ExperimentReport, config: ExperimentConfig) -> None:
    if config.output_dir is None:
        return
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if "text" in config.formats:
        (out / "report.txt").write_text(render_text(report))
    if "json" in config.formats:
        (out / "report.json").write_text(render_json(report))
    emit_plotdata(report, out)


def _tail_dict(tail: Optional[TailReport]) -> Optional[dict]:
    if tail is None:
        return None
    return {
        "alpha_hill": tail.alpha_hill,
        "hill_se": tail.hill_se,
        "k_used": tail.k_used,
        "loglog_slope": tail.loglog_slope,
        "flatness_ratio": tail.flatness_ratio,
        "notes": list(tail.notes),
    }


def render_json(report: ExperimentReport) -> str:
    verdict = report.verdict
    doc = {
        "family": report.config.family,
        "measure": report.config.measure_path,
        "degenerate": verdict.degenerate,
        "alpha": verdict.alpha,
        "alpha_note": verdict.alpha_note,
        "support_class": verdict.support_class.value if verdict.support_class else None,
        "letac_constants": dataclasses.asdict(verdict.letac) if verdict.letac else None,
        "cl_positive": verdict.cl_positive,
        "cm_positive": verdict.cm_positive,
        "cv_flag": verdict.cv_flag,
        "goldie_met": verdict.goldie.met if verdict.goldie else None,
        "consistent": verdict.consistent,
        "warnings": list(report.moment_warnings),
        "tail_right": _tail_dict(report.tail_right),
        "tail_left": _tail_dict(report.tail_left),
        "ks_forward_backward": report.ks_forward_backward,
        "sup_pi_flatness": report.sup_pi_flatness,
        "skips": report.skips,
        "agreement": report.agreement,
        "provenance": report.provenance,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def render_text(report: ExperimentReport) -> str:
    verdict = report.verdict
    lines = [
        f"experiment: {report.config.measure_path} [{report.config.family}]",
        f"degenerate: {verdict.degenerate}",
    ]
    if verdict.degenerate:
        lines.append(f"fixed point: {verdict.fixed_point_value!r}")
    if verdict.alpha is not None:
        lines.append(f"alpha: {verdict.alpha!r}")
    elif verdict.alpha_note:
        lines.append(f"alpha: n/a ({verdict.alpha_note})")
    if verdict.support_class:
        lines.append(f"support: {verdict.support_class.value}")
    if verdict.letac:
        c = verdict.letac
        lines.append(f"letac constants: n1={c.n1!r} n2={c.n2!r} n3={c.n3!r} n={c.n!r}")
        lines.append(f"cl_positive: {verdict.cl_positive} ({verdict.cl_explanation})")
        lines.append(f"cv condition: {verdict.cv_flag}")
        lines.append(f"goldie sufficient: {verdict.goldie.met}")
    if verdict.cm_positive is not None:
        lines.append(f"cm_positive: {verdict.cm_positive}")
    for warning in report.moment_warnings:
        lines.append(f"warning: {warning}")
    for tail, name in ((report.tail_right, "right"), (report.tail_left, "left")):
        if tail is None:
            reason = report.skips.get(name, "not computed")
            lines.append(f"{name} tail: skipped ({reason})")
        else:
            lines.append(
                f"{name} tail: hill={tail.alpha_hill!r} se={tail.hill_se!r} "
                f"k={tail.k_used} slope={tail.loglog_slope!r} "
                f"flatness={tail.flatness_ratio!r}"
            )
    if report.ks_forward_backward is not None:
        lines.append(f"forward/backward KS: {report.ks_forward_backward!r}")
    if report.sup_pi_flatness is not None:
        lines.append(f"sup-pi tail flatness: {report.sup_pi_flatness!r}")
    for side, entry in sorted(report.agreement.items()):
        lines.append(
            f"agreement[{side}]: analytic={entry['analytic']} "
            f"empirical={entry['empirical']} agree={entry['agree']}"
        )
    for key, value in sorted(report.provenance.items()):
        lines.append(f"provenance.{key}: {value}")
    return "\n".join(lines) + "\n"


def emit_plotdata(report: ExperimentReport, directory: str | Path) -> list[Path]:
    """Write ccdf.csv / tail_constant.csv / sup_pi_tail.csv for external
    plotting; a manifest records any skipped product."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    manifest = {"written": [], "skipped": dict(report.skips)}

    ccdf_rows = []
    const_rows = []
    for side, tail in (("right", report.tail_right), ("left", report.tail_left)):
        if tail is None:
            continue
        ccdf_rows += [(side, t, p) for t, p in tail.ccdf]
        const_rows += [(side, t, v) for t, v in tail.c_grid]
    if ccdf_rows:
        path = directory / "ccdf.csv"
        _write_csv(path, "side,t,ccdf", ccdf_rows)
        written.append(path)
    if const_rows:
        path = directory / "tail_constant.csv"
        _write_csv(path, "side,t,t_pow_alpha_ccdf", const_rows)
        written.append(path)
    if report.sup_pi_batch is not None:
        path = directory / "sup_pi_tail.csv"
        grid = geometric_grid(*SUP_PI_T_RANGE, 25)
        ccdf = empirical_ccdf(report.sup_pi_batch.values, grid)
        if report.sup_pi_grid is not None:
            const = dict(report.sup_pi_grid)
            rows = [(t, p, const.get(t, "")) for t, p in ccdf]
        else:
            rows = [(t, p, "") for t, p in ccdf]
        _write_csv(path, "t,ccdf,t_pow_alpha_ccdf", rows)
        written.append(path)
    manifest["written"] = [p.name for p in written]
    (directory / "plot_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    return written


def _write_csv(path: Path, header: str, rows) -> None:
    with path.open("w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(repr(x) if isinstance(x, float) else str(x) for x in row))
            fh.write("\n")
