# l1mpc/commands/__init__.py
import functools
import logging

import click

from l1mpc.exceptions import L1MpcError

logger = logging.getLogger(__name__)


def handle_errors(command):
    """Maps an escaping L1MpcError onto its exit code after printing the detail."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except L1MpcError as e:
            logger.debug("command failed", exc_info=True)
            click.echo(f"error: {e.detail}", err=True)
            raise SystemExit(e.exit_code)

    return wrapper
