import yaml
import os
import re
import logging
from pathlib import Path
from dotenv import dotenv_values
from typing import Any, Union

logger = logging.getLogger(__name__)

ENV_KEYS = [
    "L1MPC_LOG_LEVEL",
    "L1MPC_LOG_JSON",
    "L1MPC_OUTPUT_DIR",
    "L1MPC_JOBS",
]

CONFIGS_DIR = Path(__file__).resolve().parent
PROJECT_ROOT = CONFIGS_DIR.parent
REPO_ROOT = PROJECT_ROOT.parent

_PLACEHOLDER = re.compile(r"\$\{(\w+)\}")


def _load_yaml_file(filepath: Union[str, Path]) -> dict:
    if not os.path.exists(filepath):
        logger.warning(f"configuration file '{filepath}' not found, using empty defaults")
        return {}
    try:
        with open(filepath, "r") as f:
            return yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        logger.error(f"Error loading YAML file '{filepath}': {e}")
        return {}


def _load_env() -> dict:
    """
    .env at the repository root wins, then a .env in the directory named by
    ENV_FILE_DIR. Keys the file leaves unset fall back to the process
    environment; only ENV_KEYS are read from it.
    """
    candidates = [REPO_ROOT / ".env"]
    if os.environ.get("ENV_FILE_DIR"):
        candidates.append(Path(os.environ["ENV_FILE_DIR"]) / ".env")
    loaded = {}
    for path in candidates:
        if path.exists():
            loaded = dict(dotenv_values(path))
            break
    else:
        logger.debug(f".env not found in {[str(p) for p in candidates]}")
    for key in ENV_KEYS:
        if loaded.get(key) is None:
            loaded[key] = os.environ.get(key)
    return loaded


def _resolve_placeholders(data: Any, original_data: dict) -> Any:
    """
    Replaces `${key}` with the top-level value of `key`. A string that is
    exactly one placeholder takes the referenced value with its type.
    """
    if isinstance(data, dict):
        return {k: _resolve_placeholders(v, original_data) for k, v in data.items()}
    if isinstance(data, list):
        return [_resolve_placeholders(item, original_data) for item in data]
    if isinstance(data, str):
        whole = _PLACEHOLDER.fullmatch(data)
        if whole and whole.group(1) in original_data:
            return original_data[whole.group(1)]
        return _PLACEHOLDER.sub(lambda m: str(original_data.get(m.group(1))), data)
    return data


def _replace_paths(data: Any) -> Any:
    if isinstance(data, dict):
        return {k: _replace_paths(v) for k, v in data.items()}
    if isinstance(data, list):
        return [_replace_paths(item) for item in data]
    if isinstance(data, str):
        return data.replace("<ROOT_PATH>", str(PROJECT_ROOT))
    return data


def section(name: str) -> dict:
    """Returns a top-level block of configs.yaml, empty if absent."""
    return dict(configs.get(name) or {})


def env_flag(key: str, default: bool = False) -> bool:
    value = env.get(key)
    if value is None or value == "":
        return default
    return str(value).strip().lower() in ("1", "true", "yes", "on")


env = _load_env()
_raw = _replace_paths(_load_yaml_file(CONFIGS_DIR / "configs.yaml"))
configs = _resolve_placeholders(_raw, _raw)
