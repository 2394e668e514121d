# l1mpc/utils/io.py
import json
import logging
from pathlib import Path
from typing import Any, Type, TypeVar, Union

import numpy as np
from pydantic import BaseModel, ValidationError

from l1mpc.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

Model = TypeVar("Model", bound=BaseModel)


def _default(value: Any):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def write_json(path: Union[str, Path], payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True, default=_default)
        f.write("\n")
    return path


def load_document(path: Union[str, Path], model: Type[Model]) -> Model:
    """Reads a JSON document into `model`; every failure becomes a ConfigurationError."""
    path = Path(path)
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigurationError(f"configuration file '{path}' not found")
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"malformed JSON in '{path}': {e}")
    return validate(model, data, source=str(path))


def validate(model: Type[Model], data: Any, source: str = "document") -> Model:
    try:
        return model.model_validate(data)
    except ValidationError as e:
        messages = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()
        )
        logger.debug(f"validation of {source} failed: {e}")
        raise ConfigurationError(f"invalid {model.__name__} in {source}: {messages}")
