# tests/conftest.py
import numpy as np
import pytest

from l1mpc.schemas.bench import Scenario, TrajectoryParams
from l1mpc.schemas.plant import PlantParams


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: closed-loop runs that take seconds to minutes")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def short_params() -> TrajectoryParams:
    """Trajectories trimmed so a closed-loop run stays around a second of wall time."""
    return TrajectoryParams(
        hover_duration=0.5,
        hold_duration=0.2,
        ramp_duration=1.0,
        line={"end": [0.6, 0.4, 1.3], "duration": 3.0},
        circle={"radius": 0.5, "period": 4.0, "laps": 1},
        lissajous={"amplitude_x": 0.5, "amplitude_y": 0.25, "period": 4.0, "laps": 1},
        spiral={"radius": 0.4, "period": 3.0, "laps": 1, "climb": 0.3},
        squircle={"radius": 0.4, "period": 4.0, "laps": 1},
    )


@pytest.fixture
def exact_plant() -> PlantParams:
    """Vehicle whose truth matches its nominal parameters."""
    return PlantParams(mass_error_factor=1.0, drag_error_factor=1.0)


@pytest.fixture
def make_scenario(short_params):
    def factory(outer: str = "mpc", inner: str = "l1", trajectory: int = 1, **overrides) -> Scenario:
        data = dict(
            outer=outer,
            inner=inner,
            trajectory=trajectory,
            trajectory_params=short_params,
        )
        data.update(overrides)
        return Scenario(**data)

    return factory
