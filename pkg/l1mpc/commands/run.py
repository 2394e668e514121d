# l1mpc/commands/run.py
import logging
from pathlib import Path
from typing import Optional

import click

from l1mpc.commands import handle_errors
from l1mpc.configs import env, section
from l1mpc.exceptions import ConfigurationError
from l1mpc.schemas.bench import Scenario, Suite
from l1mpc.services import bench_service, suite_service
from l1mpc.utils.io import load_document, write_json

logger = logging.getLogger(__name__)

BENCH_CONFIG = section("bench")


def default_output_dir() -> str:
    return env.get("L1MPC_OUTPUT_DIR") or BENCH_CONFIG.get("output_dir", "runs")


def default_jobs() -> int:
    value = env.get("L1MPC_JOBS") or BENCH_CONFIG.get("jobs", 1)
    try:
        return max(1, int(value))
    except (TypeError, ValueError):
        raise ConfigurationError(f"L1MPC_JOBS must be an integer, got '{value}'")


def _run_scenario(path: Path, out: Optional[Path], seed: Optional[int]) -> int:
    scenario = load_document(path, Scenario)
    if seed is not None:
        scenario = scenario.model_copy(update={"seed": seed})
    result = bench_service.run_scenario(scenario)
    out = out or Path(default_output_dir())
    csv_path = bench_service.write_series_csv(result.series, out / f"{result.key}.csv")
    write_json(
        out / f"{result.key}.json",
        {
            "scenario": scenario.model_dump(mode="json"),
            "summary": result.summary_row(),
            "max_estimation_error": result.max_estimation_error,
            "runtime": result.runtime,
        },
    )
    click.echo(f"{result.key}: status={result.status} e={result.avg_error:.6f} m -> {csv_path}")
    if not result.ok:
        click.echo(f"error: {result.detail}", err=True)
        return 3
    return 0


def _run_suite(path: Path, out: Path, jobs: int, seed: Optional[int]) -> int:
    suite = load_document(path, Suite)
    report = suite_service.run_suite(suite, out_dir=out, jobs=jobs, seed=seed)
    if not report.summary.empty:
        click.echo(
            report.summary[["key", "status", "avg_error"]].to_string(index=False)
        )
    for outcome in report.assertions:
        click.echo(f"[{'PASS' if outcome.passed else 'FAIL'}] {outcome.kind}: {outcome.detail}")
    click.echo(f"{len(report.results)} scenarios, results in {out}")
    return report.exit_code


@click.command("run")
@click.option("--suite", "suite_path", type=click.Path(path_type=Path), help="Suite JSON document.")
@click.option("--scenario", "scenario_path", type=click.Path(path_type=Path), help="Scenario JSON document.")
@click.option("--out", type=click.Path(path_type=Path), help="Output directory.")
@click.option("--jobs", type=int, default=None, help="Worker processes for a suite.")
@click.option("--seed", type=int, default=None, help="Replaces every scenario seed.")
@handle_errors
def run(suite_path, scenario_path, out, jobs, seed):
    """Run a suite grid or a single scenario."""
    if (suite_path is None) == (scenario_path is None):
        raise ConfigurationError("give exactly one of --suite or --scenario")
    if scenario_path is not None:
        code = _run_scenario(scenario_path, out, seed)
    else:
        if out is None:
            raise ConfigurationError("--out is required with --suite")
        code = _run_suite(suite_path, out, jobs or default_jobs(), seed)
    raise SystemExit(code)
