"""``shearlab`` command line.

Exit codes: 0 every check passed, 1 a check failed, 2 configuration error,
3 numerical guard (tail overflow, band overflow, bracketing failure).
"""
from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from . import io
from .diagnostics import (InsufficientData, Verdict, extract_rate, fit_log_norm, format_report,
                          ratio_growth_check, stagnation_check)
from .experiments import PRESETS, ConfigError, RunResult, run_preset
from .mixer import BandOverflow, BracketFailure, IntermediateBoundViolation
from .pulsed import closed_form_check
from .viscous import TailOverflow

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_GUARD = 0, 1, 2, 3

log = logging.getLogger("shearlab")


def _overrides(pairs: tuple[str, ...], config_file: Path | None) -> dict[str, str]:
    out: dict[str, str] = {}
    try:
        if config_file is not None:
            out.update(io.parse_kv(config_file.read_text()))
        for p in pairs:
            out.update(io.parse_kv(p))
    except io.ParseError as exc:
        raise ConfigError(str(exc)) from exc
    return out


def _write_outputs(res: RunResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "norms.csv").write_text(io.dumps_csv(res.series))
    (out / "verdicts.txt").write_text(format_report(res.verdicts))
    (out / "plot.svg").write_text(io.series_svg(res.series))
    io.save_checkpoint(res.checkpoint, out / "checkpoint.txt")
    for name, text in res.extra_files.items():
        (out / name).write_text(text)


def _report(res: RunResult) -> int:
    for v in res.verdicts:
        click.echo(v.line())
    failed = [v for v in res.verdicts if not v.ok]
    for v in failed:
        click.echo(f"CHECK-FAILED {v.name} {v.detail}".rstrip(), err=True)
    return EXIT_OK if not failed else EXIT_CHECK


def _guarded(func):
    """Run ``func`` and map known exceptions onto exit codes."""
    try:
        return func()
    except ConfigError as exc:
        click.echo(f"CONFIG-ERROR {exc}", err=True)
        return EXIT_CONFIG
    except (TailOverflow, BandOverflow, BracketFailure) as exc:
        click.echo(f"NUMERICAL-GUARD {type(exc).__name__} {exc}", err=True)
        return EXIT_GUARD
    except IntermediateBoundViolation as exc:
        click.echo(f"CHECK-FAILED intermediate-bound {exc}", err=True)
        return EXIT_CHECK


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool) -> None:
    """Shear-flow mixing and dissipation laboratory."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--preset", required=True, type=click.Choice(list(PRESETS)))
@click.option("--set", "sets", multiple=True, metavar="KEY=VALUE", help="Override a setting.")
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="key=value file applied before --set.")
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path))
def run(preset: str, sets: tuple[str, ...], config_file: Path | None, out: Path) -> None:
    """Run a preset and write norms.csv, verdicts.txt, plot.svg and a checkpoint."""
    def go():
        res = run_preset(preset, _overrides(sets, config_file))
        _write_outputs(res, out)
        log.info("wrote %s", out)
        return _report(res)

    sys.exit(_guarded(go))


@main.command()
@click.option("--ckpt", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--set", "sets", multiple=True, metavar="KEY=VALUE", help="Override a setting.")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path),
              help="Output directory (default: the checkpoint's directory).")
def resume(ckpt: Path, sets: tuple[str, ...], out: Path | None) -> None:
    """Continue a run from a checkpoint, recomputing all verdicts."""
    def go():
        try:
            state = io.load_checkpoint(ckpt)
        except (io.ParseError, io.SchemaMismatch) as exc:
            raise ConfigError(f"{ckpt}: {exc}") from exc
        if state.experiment not in PRESETS:
            raise ConfigError(f"checkpoint names unknown preset {state.experiment!r}")
        if state.series is None:
            raise ConfigError("checkpoint carries no norm series")
        overrides = dict(state.config)
        overrides.update(_overrides(sets, None))
        res = run_preset(state.experiment, overrides, start=state)
        _write_outputs(res, out or ckpt.parent)
        return _report(res)

    sys.exit(_guarded(go))


CHECKS = ("exponential", "super-exponential", "stagnation", "ratio-growth",
          "pulsed-closed-form", "rate")


@main.command()
@click.option("--csv", "csv_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--check", "check", required=True, type=click.Choice(CHECKS))
@click.option("--mu", type=float, default=1.0, show_default=True, help="For ratio-growth.")
@click.option("--u-inf", type=float, default=1.0, show_default=True, help="For ratio-growth.")
def verify(csv_path: Path, check: str, mu: float, u_inf: float) -> None:
    """Re-run one check on a stored norms.csv."""
    def go():
        try:
            series = io.read_csv(csv_path)
        except io.ParseError as exc:
            raise ConfigError(f"{csv_path}: {exc}") from exc
        try:
            verdict = _verify(series, check, mu, u_inf)
        except InsufficientData as exc:
            raise ConfigError(f"{check}: {exc}") from exc
        click.echo(verdict.line())
        if not verdict.ok:
            click.echo(f"CHECK-FAILED {verdict.name} {verdict.detail}".rstrip(), err=True)
            return EXIT_CHECK
        return EXIT_OK

    sys.exit(_guarded(go))


def _verify(series, check: str, mu: float, u_inf: float) -> Verdict:
    if check in ("exponential", "super-exponential"):
        fit = fit_log_norm(series)
        want = check.replace("-", "_")
        return Verdict(check, fit.classification == want,
                       f"{fit.classification} slope={fit.slope:.6g} curvature={fit.curvature:.3g}")
    if check == "stagnation":
        inf, ok = stagnation_check(series)
        return Verdict(check, ok, f"inf={inf:.6g}")
    if check == "ratio-growth":
        ok, growth = ratio_growth_check(series, mu, u_inf)
        return Verdict(check, ok, f"growth={growth:.6g}")
    if check == "pulsed-closed-form":
        err = max(abs(r.log_l2 - closed_form_check(int(round(r.t)))[0]) for r in series.rows)
        return Verdict(check, err <= 1e-12, f"log_err={err:.3g}")
    rate = extract_rate(series)
    return Verdict(check, rate > 0, f"c2={rate:.8g}")


if __name__ == "__main__":  # pragma: no cover
    main()
