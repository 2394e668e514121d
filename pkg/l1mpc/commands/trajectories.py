# l1mpc/commands/trajectories.py
import json

import click

from l1mpc.commands import handle_errors
from l1mpc.services.trajectory_service import list_trajectories


@click.command("list-trajectories")
@click.option("--json", "as_json", is_flag=True, help="Emit JSON instead of a table.")
@handle_errors
def list_trajectories_command(as_json):
    """List the five built-in trajectories with their default parameters."""
    listing = list_trajectories()
    if as_json:
        click.echo(json.dumps(listing, indent=2))
        return
    for item in listing:
        click.echo(
            f"{item['id']}  {item['name']:<15} {item['duration']:>7.2f} s  "
            f"{item['samples']:>6} samples  max {item['max_speed']:.3f} m/s  {item['description']}"
        )
