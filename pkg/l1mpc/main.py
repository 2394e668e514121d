# l1mpc/main.py
import logging

import click

from l1mpc.commands.norm_condition import check_norm_condition_command
from l1mpc.commands.run import run
from l1mpc.commands.trajectories import list_trajectories_command
from l1mpc.commands.tune import tune_command
from l1mpc.configs import configs
from l1mpc.utils.logs import setup_logging

logger = logging.getLogger(__name__)


@click.group()
@click.option("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR.")
@click.option("--log-json", is_flag=True, default=False, help="Structured JSON log lines.")
@click.version_option(configs.get("app", {}).get("version"), prog_name="l1mpc")
def cli(log_level, log_json):
    """L1 adaptive + model predictive control workbench."""
    try:
        setup_logging(log_level, True if log_json else None)
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="--log-level")


cli.add_command(run)
cli.add_command(list_trajectories_command)
cli.add_command(check_norm_condition_command)
cli.add_command(tune_command)


def main():
    cli()


if __name__ == "__main__":
    main()
