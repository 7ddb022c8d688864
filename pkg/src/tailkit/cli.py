"""Command-line interface.

Exit codes: 0 success, 1 usage or parse error, 2 stage failure. Verdict
content (positive or not, degenerate or not) never affects the exit code.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path
from typing import Optional

import click

from . import __version__
from .cramer import moment_ratio_conditions, solve_alpha
from .criteria import full_verdict
from .engine import (
    SimConfig,
    get_family,
    load_samples,
    sample_stationary,
    save_batch,
)
from .experiment import (
    ExperimentConfig,
    StageError,
    render_json,
    render_text,
    run_experiment,
)
from .measure import (
    AtomicMeasure,
    MeasureError,
    TailkitError,
    arithmeticity_warning,
    load_measure,
)
from .tailstats import build_tail_report


@click.group()
@click.version_option(version=__version__, prog_name="tailkit")
@click.option("--seed", type=int, default=0, show_default=True, help="Base RNG seed.")
@click.option("--threads", type=int, default=1, show_default=True, help="Worker count.")
@click.option("--output", type=click.Path(), default=None, help="Output file or directory.")
@click.option(
    "--format",
    "fmt",
    type=click.Choice(["text", "json-lines"]),
    default="text",
    show_default=True,
)
@click.pass_context
def cli(ctx, seed: int, threads: int, output: Optional[str], fmt: str) -> None:
    ctx.obj = {"seed": seed, "threads": threads, "output": output, "fmt": fmt}


def _emit(ctx, human_lines: list[str], record: dict) -> None:
    if ctx.obj["fmt"] == "json-lines":
        click.echo(json.dumps(record, sort_keys=True))
    else:
        for line in human_lines:
            click.echo(line)


@cli.command("solve-alpha")
@click.argument("measure_file", type=click.Path(exists=True))
@click.pass_context
def solve_alpha_cmd(ctx, measure_file: str) -> None:
    """Solve E A^alpha = 1 for the tail exponent of MEASURE_FILE."""
    measure = load_measure(measure_file)
    if not isinstance(measure, AtomicMeasure):
        raise MeasureError("solve-alpha needs an atomic measure")
    warning = arithmeticity_warning(measure)
    root = solve_alpha(measure)
    ratios = moment_ratio_conditions(measure)
    lines = [
        f"{'alpha':<12} {root.alpha!r}",
        f"{'residual':<12} {root.residual:.3e}",
        f"{'bracket':<12} [{root.bracket[0]!r}, {root.bracket[1]!r}]",
        f"{'moment-ratio':<12} {ratios.limit_value!r} (finite: {ratios.condition_met})",
    ]
    if warning:
        lines.append(f"{'warning':<12} {warning}")
    _emit(
        ctx,
        lines,
        {
            "alpha": root.alpha,
            "residual": root.residual,
            "bracket": list(root.bracket),
            "moment_ratio_limit": ratios.limit_value,
            "warnings": [warning] if warning else [],
        },
    )


@cli.command("simulate")
@click.argument("measure_file", type=click.Path(exists=True))
@click.option("--family", default="affine", show_default=True)
@click.option("--samples", type=int, default=10_000, show_default=True)
@click.option("--burn-in", type=int, default=None, help="Override the default burn-in.")
@click.option("--chains", type=int, default=16, show_default=True)
@click.option(
    "--output-format",
    type=click.Choice(["text", "binary"]),
    default="text",
    show_default=True,
)
@click.pass_context
def simulate_cmd(ctx, measure_file, family, samples, burn_in, chains, output_format):
    """Draw stationary-law samples and write them to --output (or stdout)."""
    measure = load_measure(measure_file)
    config = SimConfig(
        n_samples=samples, burn_in=burn_in, chains=chains, seed=ctx.obj["seed"]
    )
    batch = sample_stationary(
        get_family(family), measure, config, n_workers=ctx.obj["threads"]
    )
    out = ctx.obj["output"]
    if out is None:
        for v in batch.values:
            click.echo(repr(float(v)))
    else:
        save_batch(out, batch, fmt=output_format)
        click.echo(
            f"wrote {len(batch.values)} samples to {out} "
            f"(burn_in={batch.burn_in_used}, digest={batch.digest()}, "
            f"coupling_gap={batch.coupling_gap:.3e})",
            err=True,
        )


@cli.command("tail")
@click.argument("sample_file", type=click.Path(exists=True))
@click.option("--k", type=int, default=None, help="Hill order statistics (default sqrt(n)).")
@click.option("--t-lo", type=float, default=None)
@click.option("--t-hi", type=float, default=None)
@click.option("--side", type=click.Choice(["right", "left"]), default="right")
@click.pass_context
def tail_cmd(ctx, sample_file, k, t_lo, t_hi, side):
    """Tail report (Hill index, tail-constant grid, log-log slope) for a
    sample file; CSV goes to --output if given."""
    samples = load_samples(sample_file)
    t_range = (t_lo, t_hi) if t_lo is not None and t_hi is not None else None
    report = build_tail_report(samples, side=side, k=k, t_range=t_range)
    lines = [
        f"{'side':<16} {report.side}",
        f"{'hill alpha':<16} {report.alpha_hill!r} +- {report.hill_se!r} (k={report.k_used})",
        f"{'loglog slope':<16} {report.loglog_slope!r}",
        f"{'flatness ratio':<16} {report.flatness_ratio!r}",
    ]
    for note in report.notes:
        lines.append(f"{'note':<16} {note}")
    record = {
        "side": report.side,
        "alpha_hill": report.alpha_hill,
        "hill_se": report.hill_se,
        "k_used": report.k_used,
        "loglog_slope": report.loglog_slope,
        "flatness_ratio": report.flatness_ratio,
        "notes": list(report.notes),
    }
    _emit(ctx, lines, record)
    out = ctx.obj["output"]
    if out is not None:
        const = dict(report.c_grid)
        with Path(out).open("w") as fh:
            fh.write("t,ccdf,t_pow_alpha_ccdf\n")
            for t, p in report.ccdf:
                fh.write(f"{t!r},{p!r},{const.get(t, '')!r}\n")


@cli.command("criteria")
@click.argument("measure_file", type=click.Path(exists=True))
@click.option("--family", default="affine", show_default=True)
@click.pass_context
def criteria_cmd(ctx, measure_file, family):
    """Analytic verdict for MEASURE_FILE; always exits 0 (verdicts are data)."""
    measure = load_measure(measure_file)
    get_family(family)
    verdict = full_verdict(measure, family=family)
    lines = [f"{'degenerate':<14} {verdict.degenerate}"]
    if verdict.degenerate:
        lines.append(f"{'fixed point':<14} {verdict.fixed_point_value!r}")
    if verdict.alpha is not None:
        lines.append(f"{'alpha':<14} {verdict.alpha!r}")
    elif verdict.alpha_note:
        lines.append(f"{'alpha':<14} n/a ({verdict.alpha_note})")
    if verdict.support_class is not None:
        lines.append(f"{'support':<14} {verdict.support_class.value}")
        lines.append(f"{'C+ positive':<14} {verdict.c_plus_positive}")
        lines.append(f"{'C- positive':<14} {verdict.c_minus_positive}")
    if verdict.letac is not None:
        c = verdict.letac
        lines.append(f"{'N1/N2/N3/N':<14} {c.n1!r} / {c.n2!r} / {c.n3!r} / {c.n!r}")
        lines.append(f"{'CL positive':<14} {verdict.cl_positive} ({verdict.cl_explanation})")
        lines.append(f"{'CV condition':<14} {verdict.cv_flag}")
        lines.append(f"{'Goldie':<14} {verdict.goldie.met} interval={verdict.goldie.interval}")
    if verdict.cm_positive is not None:
        lines.append(f"{'CM positive':<14} {verdict.cm_positive}")
    for warning in verdict.warnings:
        lines.append(f"{'warning':<14} {warning}")
    lines.append(f"{'consistent':<14} {verdict.consistent}")
    record = {
        "degenerate": verdict.degenerate,
        "fixed_point": verdict.fixed_point_value,
        "alpha": verdict.alpha,
        "alpha_note": verdict.alpha_note,
        "support_class": verdict.support_class.value if verdict.support_class else None,
        "c_plus_positive": verdict.c_plus_positive,
        "c_minus_positive": verdict.c_minus_positive,
        "letac": dataclasses.asdict(verdict.letac) if verdict.letac else None,
        "cl_positive": verdict.cl_positive,
        "cm_positive": verdict.cm_positive,
        "cv_flag": verdict.cv_flag,
        "goldie_met": verdict.goldie.met if verdict.goldie else None,
        "warnings": list(verdict.warnings),
        "consistent": verdict.consistent,
    }
    _emit(ctx, lines, record)


@cli.command("experiment")
@click.argument("measure_file", type=click.Path(exists=True))
@click.option("--family", default="affine", show_default=True)
@click.option("--samples", type=int, default=100_000, show_default=True)
@click.option("--burn-in", type=int, default=None)
@click.option("--chains", type=int, default=16, show_default=True)
@click.option("--k", type=int, default=None, help="Hill order statistics.")
@click.option("--t-lo", type=float, default=None)
@click.option("--t-hi", type=float, default=None)
@click.pass_context
def experiment_cmd(ctx, measure_file, family, samples, burn_in, chains, k, t_lo, t_hi):
    """Full pipeline: criteria, simulation, tail analysis, combined report."""
    t_range = (t_lo, t_hi) if t_lo is not None and t_hi is not None else None
    config = ExperimentConfig(
        measure_path=measure_file,
        family=family,
        sim=SimConfig(
            n_samples=samples, burn_in=burn_in, chains=chains, seed=ctx.obj["seed"]
        ),
        hill_k=k,
        t_range=t_range,
        output_dir=ctx.obj["output"],
        n_workers=ctx.obj["threads"],
    )
    report = run_experiment(config)
    if ctx.obj["fmt"] == "json-lines":
        click.echo(json.dumps(json.loads(render_json(report)), sort_keys=True))
    else:
        click.echo(render_text(report), nl=False)


@cli.command("verify")
@click.pass_context
def verify_cmd(ctx):
    """Run the built-in acceptance suite (several minutes)."""
    from .acceptance import run_all

    ok = run_all(echo=click.echo)
    if not ok:
        raise StageError("verify", TailkitError("acceptance criteria failed"))
    click.echo("all acceptance criteria pass")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except MeasureError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except StageError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except TailkitError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
