# l1mpc/services/suite_service.py
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from l1mpc.configs import configs
from l1mpc.exceptions import ConfigurationError
from l1mpc.models.bench import ScenarioResult
from l1mpc.schemas.bench import (
    MaxErrorAssertion,
    RankingAssertion,
    Scenario,
    SecondDifferenceAssertion,
    Suite,
    WindRatioAssertion,
)
from l1mpc.services import bench_service, tuning_service
from l1mpc.services.tuning_service import TuningResult
from l1mpc.utils.io import write_json

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = [
    "key",
    "stack",
    "trajectory",
    "wind",
    "seed",
    "status",
    "samples",
    "avg_error",
    "rms_x",
    "rms_y",
    "rms_z",
    "max_second_difference",
    "ideal_rms",
    "detail",
]


class AssertionOutcome(BaseModel):
    kind: str
    passed: bool
    detail: str
    values: Dict[str, Optional[float]] = Field(default_factory=dict)


class SuiteReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: str
    results: List[ScenarioResult]
    summary: pd.DataFrame
    assertions: List[AssertionOutcome] = Field(default_factory=list)
    tuning: Dict[str, TuningResult] = Field(default_factory=dict)

    @property
    def failed_cells(self) -> List[str]:
        return [r.key for r in self.results if not r.ok]

    @property
    def assertions_passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    @property
    def exit_code(self) -> int:
        if self.failed_cells:
            return 3
        if not self.assertions_passed:
            return 1
        return 0


# --- Cell table ---
def _cell_errors(results: List[ScenarioResult]) -> Dict[tuple, float]:
    """Mean e over seeds per (stack, trajectory, wind); failed runs count as missing."""
    cells: Dict[tuple, List[float]] = {}
    for r in results:
        if r.ok:
            cells.setdefault((r.stack, r.trajectory, r.wind_name), []).append(r.avg_error)
    return {k: math.fsum(v) / len(v) for k, v in cells.items()}


def _trajectories(results, wanted):
    present = sorted({r.trajectory for r in results})
    return wanted if wanted is not None else present


def _check_ranking(a: RankingAssertion, results) -> AssertionOutcome:
    cells = _cell_errors(results)
    values, problems = {}, []
    for t in _trajectories(results, a.trajectories):
        better = cells.get((a.better, t, a.wind))
        if better is None:
            problems.append(f"missing {a.better} on trajectory {t}")
            continue
        values[f"{a.better}/traj{t}"] = better
        for stack in a.worse:
            worse = cells.get((stack, t, a.wind))
            if worse is None:
                problems.append(f"missing {stack} on trajectory {t}")
                continue
            values[f"{stack}/traj{t}"] = worse
            if not better <= (1.0 - a.margin) * worse:
                problems.append(
                    f"trajectory {t}: {a.better} {better:.4f} not {a.margin:.0%} below {stack} {worse:.4f}"
                )
    passed = not problems and bool(values)
    detail = "; ".join(problems) if problems else f"{a.better} ranks first on every trajectory"
    return AssertionOutcome(kind=a.kind, passed=passed, detail=detail or "no cells", values=values)


def _check_wind_ratio(a: WindRatioAssertion, results) -> AssertionOutcome:
    cells = _cell_errors(results)
    deltas = {a.stack: [], a.reference: []}
    problems = []
    for t in _trajectories(results, a.trajectories):
        for stack in deltas:
            windy = cells.get((stack, t, a.wind))
            calm = cells.get((stack, t, a.baseline_wind))
            if windy is None or calm is None:
                problems.append(f"missing {stack} cells on trajectory {t}")
                continue
            deltas[stack].append(windy - calm)
    if problems or not deltas[a.stack] or not deltas[a.reference]:
        return AssertionOutcome(kind=a.kind, passed=False, detail="; ".join(problems) or "no cells")
    mean_stack = float(np.mean(deltas[a.stack]))
    mean_reference = float(np.mean(deltas[a.reference]))
    passed = mean_stack <= a.max_ratio * mean_reference
    return AssertionOutcome(
        kind=a.kind,
        passed=passed,
        detail=(
            f"mean wind increase {a.stack} {mean_stack:.4f} vs "
            f"{a.max_ratio} x {a.reference} {mean_reference:.4f}"
        ),
        values={f"{a.stack}_delta": mean_stack, f"{a.reference}_delta": mean_reference},
    )


def _check_second_difference(a: SecondDifferenceAssertion, results) -> AssertionOutcome:
    excess = {
        r.key: r.second_difference_excess
        for r in results
        if r.second_difference_excess is not None and r.r_max is not None and math.isfinite(r.r_max)
    }
    worst = max(excess.values()) if excess else None
    passed = worst is None or worst <= a.tolerance
    detail = (
        "no constrained predictive cells"
        if worst is None
        else f"largest second-difference excess {worst:.3g} over {len(excess)} cells"
    )
    return AssertionOutcome(kind=a.kind, passed=passed, detail=detail, values={"worst_excess": worst})


def _check_max_error(a: MaxErrorAssertion, results) -> AssertionOutcome:
    selected = [
        r
        for r in results
        if r.stack == a.stack
        and (a.wind is None or r.wind_name == a.wind)
        and (a.trajectories is None or r.trajectory in a.trajectories)
    ]
    if not selected:
        return AssertionOutcome(kind=a.kind, passed=False, detail=f"no cells for {a.stack}")
    failed = [r.key for r in selected if not r.ok]
    worst = max((r.avg_error for r in selected if r.ok), default=math.nan)
    passed = not failed and worst <= a.max_error
    return AssertionOutcome(
        kind=a.kind,
        passed=passed,
        detail=f"{a.stack}: worst e {worst:.4f} m (limit {a.max_error})"
        + (f", failed cells {failed}" if failed else ""),
        values={"worst": worst},
    )


CHECKS = {
    "ranking": _check_ranking,
    "wind_ratio": _check_wind_ratio,
    "second_difference_bound": _check_second_difference,
    "max_error": _check_max_error,
}


def evaluate_assertions(suite: Suite, results: List[ScenarioResult]) -> List[AssertionOutcome]:
    outcomes = []
    for assertion in suite.assertions:
        outcome = CHECKS[assertion.kind](assertion, results)
        level = logging.INFO if outcome.passed else logging.WARNING
        logger.log(level, f"assertion {assertion.kind}: {'pass' if outcome.passed else 'FAIL'} ({outcome.detail})")
        outcomes.append(outcome)
    return outcomes


# --- Execution ---
def run_cells(scenarios: List[Scenario], jobs: int = 1) -> List[ScenarioResult]:
    """Runs every scenario; results come back sorted by scenario key."""
    if jobs > 1 and len(scenarios) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            results = list(executor.map(bench_service.run_scenario, scenarios))
    else:
        results = [bench_service.run_scenario(sc) for sc in scenarios]
    return sorted(results, key=lambda r: r.key)


def summary_frame(results: List[ScenarioResult]) -> pd.DataFrame:
    return pd.DataFrame([r.summary_row() for r in results], columns=SUMMARY_COLUMNS)


def write_outputs(
    report: SuiteReport, suite: Suite, scenarios: List[Scenario], out_dir: Union[str, Path]
) -> Path:
    out = Path(out_dir)
    (out / "scenarios").mkdir(parents=True, exist_ok=True)
    for result in report.results:
        bench_service.write_series_csv(result.series, out / "scenarios" / f"{result.key}.csv")
    report.summary.to_csv(out / "summary.csv", index=False)
    write_json(
        out / "assertions.json",
        {
            "suite": report.name,
            "passed": report.assertions_passed,
            "failed_cells": report.failed_cells,
            "assertions": [a.model_dump() for a in report.assertions],
        },
    )
    write_json(
        out / "suite_header.json",
        {
            "app": configs.get("app", {}),
            "suite": suite.model_dump(mode="json"),
            "tuning": {stack: t.model_dump(mode="json") for stack, t in report.tuning.items()},
            "scenarios": {sc.key: sc.model_dump(mode="json") for sc in scenarios},
            "diagnostics": {
                r.key: {
                    "runtime": r.runtime,
                    "max_estimation_error": r.max_estimation_error,
                    "projection_saturations": r.projection_saturations,
                    "clamped_commands": r.clamped_commands,
                    "qp_iterations": r.qp_iterations,
                    "identification_residual": r.identification_residual,
                }
                for r in report.results
            },
        },
    )
    return out


def tune_suite(suite: Suite) -> Dict[str, TuningResult]:
    """Frozen parameters for every grid stack the suite tunes instead of pinning."""
    tuned = {}
    for stack in suite.tuned_stacks:
        logger.info(f"suite '{suite.name}': tuning {stack} on trajectory {suite.tuning.trajectory}")
        tuned[stack] = tuning_service.tune_frozen(stack, suite.tuning, base=suite.stack_settings(stack))
        logger.info(f"suite '{suite.name}': {stack} frozen at {tuned[stack].parameters}")
    return tuned


def run_suite(
    suite: Suite,
    out_dir: Optional[Union[str, Path]] = None,
    jobs: int = 1,
    seed: Optional[int] = None,
) -> SuiteReport:
    """
    Tunes the stacks the suite asks for, expands the grid, runs every cell
    (in worker processes when jobs > 1), evaluates the embedded assertions
    and, with out_dir, writes per-scenario CSVs, summary.csv, assertions.json
    and suite_header.json.
    """
    tuning = tune_suite(suite)
    try:
        scenarios = suite.expand(seed, {stack: t.overrides for stack, t in tuning.items()})
    except ValidationError as e:
        raise ConfigurationError(f"suite '{suite.name}' expands to an invalid scenario: {e}")
    logger.info(f"suite '{suite.name}': {len(scenarios)} scenarios on {jobs} worker(s)")
    results = run_cells(scenarios, jobs)
    report = SuiteReport(
        name=suite.name,
        results=results,
        summary=summary_frame(results),
        assertions=evaluate_assertions(suite, results),
        tuning=tuning,
    )
    if report.failed_cells:
        logger.error(f"suite '{suite.name}': failed cells {report.failed_cells}")
    if out_dir is not None:
        write_outputs(report, suite, scenarios, out_dir)
        logger.info(f"suite '{suite.name}' written to {out_dir}")
    return report
