# l1mpc/utils/logs.py
import logging
from typing import Optional

from pythonjsonlogger.json import JsonFormatter

from l1mpc.configs import env, env_flag, section

LOGGING_CONFIG = section("logging")
DEFAULT_FORMAT = LOGGING_CONFIG.get(
    "format", "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)


def resolve_level(level: Optional[str] = None) -> int:
    """CLI option, then L1MPC_LOG_LEVEL, then configs.yaml."""
    name = level or env.get("L1MPC_LOG_LEVEL") or LOGGING_CONFIG.get("level", "INFO")
    value = logging.getLevelName(str(name).upper())
    if not isinstance(value, int):
        raise ValueError(f"unknown log level '{name}'")
    return value


def setup_logging(level: Optional[str] = None, json_format: Optional[bool] = None) -> None:
    """Configures the root logger once per process; later calls replace the handler."""
    if json_format is None:
        json_format = env_flag("L1MPC_LOG_JSON", bool(LOGGING_CONFIG.get("json", False)))
    handler = logging.StreamHandler()
    if json_format:
        handler.setFormatter(JsonFormatter(DEFAULT_FORMAT))
    else:
        handler.setFormatter(logging.Formatter(DEFAULT_FORMAT))
    root = logging.getLogger()
    for existing in list(root.handlers):
        root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel(resolve_level(level))
