# l1mpc/commands/tune.py
import json
from pathlib import Path

import click

from l1mpc.commands import handle_errors
from l1mpc.configs import section
from l1mpc.services.tuning_service import STACKS, tune
from l1mpc.utils.io import write_json

TUNING_DEFAULTS = section("tuning")


@click.command("tune")
@click.option("--stack", required=True, type=click.Choice(sorted(STACKS)))
@click.option("--trajectory", type=click.IntRange(1, 5), default=TUNING_DEFAULTS.get("trajectory", 4))
@click.option("--iterations", type=click.IntRange(1), default=TUNING_DEFAULTS.get("iterations", 50))
@click.option("--out", type=click.Path(path_type=Path), default=None, help="Write the result as JSON.")
@handle_errors
def tune_command(stack, trajectory, iterations, out):
    """Coordinate-descent tuning of a feedback-only outer loop, then frozen."""
    result = tune(stack, trajectory=trajectory, iterations=iterations)
    payload = result.model_dump()
    if out is not None:
        write_json(out, payload)
    click.echo(json.dumps(payload["overrides"], indent=2))
    click.echo(f"e: {result.initial_error:.5f} -> {result.avg_error:.5f} m")
