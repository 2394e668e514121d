# l1mpc/commands/norm_condition.py
import json
from pathlib import Path

import click

from l1mpc.commands import handle_errors
from l1mpc.schemas.bench import NormConditionRequest
from l1mpc.services import l1_service, plant_service
from l1mpc.utils.io import load_document


@click.command("check-norm-condition")
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path))
@handle_errors
def check_norm_condition_command(config_path):
    """Evaluate ‖G‖·L < 1 for the configured L1 layer on the linearized plant.

    Exits 1 when the condition does not hold.
    """
    request = load_document(config_path, NormConditionRequest)
    plants = [plant_service.linearized_velocity_model(request.plant, axis) for axis in range(3)]
    L, L0 = plant_service.lipschitz_estimate(request.wind, request.plant)
    if request.lipschitz is not None:
        L = request.lipschitz
    report = l1_service.check_norm_condition(plants, request.l1, L)
    payload = report.model_dump()
    payload["lipschitz_L0"] = L0
    click.echo(json.dumps(payload, indent=2))
    raise SystemExit(0 if report.satisfied else 1)
