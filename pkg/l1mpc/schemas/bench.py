# l1mpc/schemas/bench.py
import math
from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from l1mpc.configs import section
from l1mpc.schemas.controllers import (
    IdentificationConfig,
    L1Config,
    LqrConfig,
    MpcConfig,
    PidConfig,
)
from l1mpc.schemas.plant import PlantParams, WindModel

BENCH_DEFAULTS = section("bench")
TRAJECTORY_DEFAULTS = section("trajectories")
TUNING_DEFAULTS = section("tuning")

OUTER_KINDS = ("pid", "lqr", "mpc", "none")
INNER_KINDS = ("l1", "pid")


def _shape(name: str) -> dict:
    return dict(TRAJECTORY_DEFAULTS.get(name) or {})


# --- Trajectories ---
class LineParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    end: Tuple[float, float, float] = tuple(_shape("line")["end"])
    duration: float = Field(default=_shape("line")["duration"], gt=0)


class CircleParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    radius: float = Field(default=_shape("circle")["radius"], gt=0)
    period: float = Field(default=_shape("circle")["period"], gt=0)
    laps: int = Field(default=_shape("circle")["laps"], ge=1)


class LissajousParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    amplitude_x: float = Field(default=_shape("lissajous")["amplitude_x"], gt=0)
    amplitude_y: float = Field(default=_shape("lissajous")["amplitude_y"], gt=0)
    period: float = Field(default=_shape("lissajous")["period"], gt=0)
    laps: int = Field(default=_shape("lissajous")["laps"], ge=1)


class SpiralParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    radius: float = Field(default=_shape("spiral")["radius"], gt=0)
    period: float = Field(default=_shape("spiral")["period"], gt=0)
    laps: int = Field(default=_shape("spiral")["laps"], ge=1)
    climb: float = _shape("spiral")["climb"]


class SquircleParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    radius: float = Field(default=_shape("squircle")["radius"], gt=0)
    period: float = Field(default=_shape("squircle")["period"], gt=0)
    laps: int = Field(default=_shape("squircle")["laps"], ge=1)


class TrajectoryParams(BaseModel):
    """
    Shared timing plus one parameter block per shape. Every trajectory hovers
    at `hover_point`, moves, then holds its final waypoint.
    """

    model_config = ConfigDict(extra="forbid", validate_default=True)

    hover_point: Tuple[float, float, float] = tuple(TRAJECTORY_DEFAULTS["hover_point"])
    hover_duration: float = Field(default=TRAJECTORY_DEFAULTS["hover_duration"], ge=0)
    hold_duration: float = Field(default=TRAJECTORY_DEFAULTS["hold_duration"], ge=0)
    ramp_duration: float = Field(default=TRAJECTORY_DEFAULTS["ramp_duration"], gt=0)
    sample_period: float = Field(default=TRAJECTORY_DEFAULTS["sample_period"], gt=0)
    max_speed: float = Field(default=BENCH_DEFAULTS["max_speed"], gt=0)
    line: LineParams = Field(default_factory=LineParams)
    circle: CircleParams = Field(default_factory=CircleParams)
    lissajous: LissajousParams = Field(default_factory=LissajousParams)
    spiral: SpiralParams = Field(default_factory=SpiralParams)
    squircle: SquircleParams = Field(default_factory=SquircleParams)


# --- Scenario ---
class Scenario(BaseModel):
    """
    One closed-loop run: outer controller × inner controller × trajectory ×
    wind × seed, with every module configuration embedded.
    """

    model_config = ConfigDict(extra="forbid", validate_default=True)

    outer: Literal["pid", "lqr", "mpc", "none"]
    inner: Literal["l1", "pid"]
    trajectory: int = Field(ge=1, le=5)
    wind: WindModel = Field(default_factory=WindModel)
    wind_name: str = "off"
    seed: int = BENCH_DEFAULTS["seed"]
    sample_period: float = Field(default=BENCH_DEFAULTS["sample_period"], gt=0)
    l1: L1Config = Field(default_factory=L1Config)
    mpc: MpcConfig = Field(default_factory=MpcConfig)
    pid_outer: PidConfig = Field(default_factory=PidConfig)
    pid_inner: PidConfig = Field(default_factory=PidConfig.inner_defaults)
    lqr: LqrConfig = Field(default_factory=LqrConfig)
    identification: IdentificationConfig = Field(default_factory=IdentificationConfig)
    plant: PlantParams = Field(default_factory=PlantParams)
    trajectory_params: TrajectoryParams = Field(default_factory=TrajectoryParams)

    @field_validator("pid_inner", mode="before")
    @classmethod
    def _inner_defaults(cls, value):
        # partial documents fill in from the inner-loop defaults, not the outer ones
        if isinstance(value, dict):
            return PidConfig.inner_defaults(**value)
        return value

    @field_validator("wind_name")
    @classmethod
    def _label(cls, value):
        if not value or any(c in value for c in "/\\ _"):
            raise ValueError("wind_name must be non-empty without spaces, slashes or underscores")
        return value

    @model_validator(mode="after")
    def _check(self):
        ts = self.sample_period
        periods = {
            "l1": self.l1.sample_period,
            "pid_outer": self.pid_outer.sample_period,
            "pid_inner": self.pid_inner.sample_period,
            "lqr": self.lqr.sample_period,
            "trajectory_params": self.trajectory_params.sample_period,
        }
        for name, value in periods.items():
            if not math.isclose(value, ts, rel_tol=1e-9):
                raise ValueError(f"{name}.sample_period {value} differs from sample_period {ts}")
        if not _is_multiple(ts, self.plant.dt):
            raise ValueError(f"sample_period {ts} is not a multiple of plant.dt {self.plant.dt}")
        if self.outer == "mpc" and not _is_multiple(self.mpc.sample_period, ts):
            raise ValueError(
                f"mpc.sample_period {self.mpc.sample_period} is not a multiple of {ts}"
            )
        if self.l1.axes != 3 or self.pid_outer.axes != 3 or self.pid_inner.axes != 3:
            raise ValueError("bench controllers run on three axes")
        if self.inner == "l1" and not all(self.l1.extended):
            raise ValueError("inner l1 layer tracks positions: every outer_gains entry must be > 0")
        if self.inner == "pid" and self.outer == "lqr" and self.identification.order != 2:
            raise ValueError("lqr over the pid inner loop needs a second-order identified model")
        return self

    @property
    def stack(self) -> str:
        return f"{self.outer}-{self.inner}"

    @property
    def key(self) -> str:
        return f"{self.stack}__traj{self.trajectory}__{self.wind_name}__seed{self.seed}"

    @property
    def mpc_decimation(self) -> int:
        return int(round(self.mpc.sample_period / self.sample_period))


def _is_multiple(value: float, base: float) -> bool:
    ratio = value / base
    return round(ratio) >= 1 and math.isclose(ratio, round(ratio), rel_tol=1e-9)


# --- Suite assertions ---
class RankingAssertion(BaseModel):
    """e(better) ≤ (1 - margin)·e(worse) on every listed trajectory."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["ranking"] = "ranking"
    better: str = "mpc-l1"
    worse: List[str] = Field(default_factory=lambda: ["pid-l1", "lqr-l1"])
    margin: float = Field(default=0.15, ge=0, lt=1)
    wind: str = "off"
    trajectories: Optional[List[int]] = None


class WindRatioAssertion(BaseModel):
    """mean Δe_wind(stack) ≤ max_ratio · mean Δe_wind(reference) over trajectories."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["wind_ratio"] = "wind_ratio"
    stack: str = "mpc-l1"
    reference: str = "mpc-pid"
    wind: str = "gust"
    baseline_wind: str = "off"
    max_ratio: float = Field(default=0.5, gt=0)
    trajectories: Optional[List[int]] = None


class SecondDifferenceAssertion(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["second_difference_bound"] = "second_difference_bound"
    tolerance: float = Field(default=1e-9, ge=0)


class MaxErrorAssertion(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["max_error"] = "max_error"
    stack: str
    max_error: float = Field(gt=0)
    wind: Optional[str] = None
    trajectories: Optional[List[int]] = None


SuiteAssertion = Annotated[
    Union[RankingAssertion, WindRatioAssertion, SecondDifferenceAssertion, MaxErrorAssertion],
    Field(discriminator="kind"),
]


# --- Suite ---
def merge_settings(base: dict, *updates: Optional[dict]) -> dict:
    """Nested merge of scenario settings; later updates win key by key."""
    merged = dict(base)
    for update in updates:
        for key, value in (update or {}).items():
            if isinstance(value, dict) and isinstance(merged.get(key), dict):
                merged[key] = merge_settings(merged[key], value)
            else:
                merged[key] = value
    return merged


class SuiteTuning(BaseModel):
    """
    Outer-loop parameters tuned by coordinate descent on one trajectory without
    wind, then frozen for every cell of the stack.
    """

    model_config = ConfigDict(extra="forbid", validate_default=True)

    stacks: List[Literal["pid-l1", "lqr-l1"]] = Field(default_factory=lambda: ["pid-l1", "lqr-l1"])
    trajectory: int = Field(default=TUNING_DEFAULTS.get("trajectory", 4), ge=1, le=5)
    iterations: int = Field(default=TUNING_DEFAULTS.get("iterations", 50), ge=1)
    initial_step: float = Field(default=TUNING_DEFAULTS.get("initial_step", 0.25), gt=0, lt=1)
    cache_dir: Optional[str] = TUNING_DEFAULTS.get("cache_dir")


class Suite(BaseModel):
    """
    Grid of stacks × trajectories × winds × seeds, plus explicit scenarios.
    `defaults` is merged into every generated scenario, then the stack's
    entry of `stack_overrides`, before validation.
    """

    model_config = ConfigDict(extra="forbid", validate_default=True)

    name: str = "suite"
    stacks: List[str] = Field(default_factory=list)
    trajectories: List[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5])
    winds: Dict[str, WindModel] = Field(default_factory=lambda: {"off": WindModel(kind="off")})
    seeds: List[int] = Field(default_factory=lambda: [BENCH_DEFAULTS["seed"]])
    defaults: dict = Field(default_factory=dict)
    stack_overrides: Dict[str, dict] = Field(default_factory=dict)
    tuning: Optional[SuiteTuning] = None
    scenarios: List[Scenario] = Field(default_factory=list)
    assertions: List[SuiteAssertion] = Field(default_factory=list)

    @field_validator("stacks")
    @classmethod
    def _stacks(cls, value):
        for stack in value:
            parse_stack(stack)
        return value

    @field_validator("stack_overrides")
    @classmethod
    def _override_stacks(cls, value):
        for stack in value:
            parse_stack(stack)
        return value

    @field_validator("trajectories")
    @classmethod
    def _trajectory_ids(cls, value):
        if any(t not in range(1, 6) for t in value):
            raise ValueError("trajectory ids must lie in 1..5")
        return value

    @model_validator(mode="after")
    def _grid_is_valid(self):
        try:
            self.expand()
        except ValidationError as e:
            messages = "; ".join(
                f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()
            )
            raise ValueError(f"defaults give an invalid scenario: {messages}")
        return self

    @property
    def tuned_stacks(self) -> List[str]:
        """Stacks of the grid whose parameters come from tuning rather than stack_overrides."""
        if self.tuning is None:
            return []
        return [s for s in self.tuning.stacks if s in self.stacks and s not in self.stack_overrides]

    def stack_settings(self, stack: str, tuned: Optional[Dict[str, dict]] = None) -> dict:
        return merge_settings(self.defaults, self.stack_overrides.get(stack), (tuned or {}).get(stack))

    def expand(self, seed: Optional[int] = None, tuned: Optional[Dict[str, dict]] = None) -> List[Scenario]:
        """
        Materialized scenario list sorted by key; `seed` replaces the seed list
        and `tuned` maps a stack to tuned overrides applied last.
        """
        seeds = [seed] if seed is not None else self.seeds
        generated = []
        for stack in self.stacks:
            outer, inner = parse_stack(stack)
            settings = self.stack_settings(stack, tuned)
            for trajectory in self.trajectories:
                for wind_name, wind in self.winds.items():
                    for s in seeds:
                        data = dict(settings)
                        data.update(
                            outer=outer,
                            inner=inner,
                            trajectory=trajectory,
                            wind=wind.model_dump(),
                            wind_name=wind_name,
                            seed=s,
                        )
                        generated.append(Scenario(**data))
        explicit = [
            sc.model_copy(update={"seed": seed}) if seed is not None else sc
            for sc in self.scenarios
        ]
        by_key = {sc.key: sc for sc in generated + explicit}
        return [by_key[k] for k in sorted(by_key)]


def parse_stack(stack: str) -> Tuple[str, str]:
    """'mpc-l1' -> ('mpc', 'l1')."""
    parts = stack.lower().split("-")
    if len(parts) != 2 or parts[0] not in OUTER_KINDS or parts[1] not in INNER_KINDS:
        raise ValueError(
            f"unknown controller stack '{stack}', expected <{'|'.join(OUTER_KINDS)}>-<{'|'.join(INNER_KINDS)}>"
        )
    return parts[0], parts[1]


# --- Norm-condition request ---
class NormConditionRequest(BaseModel):
    """
    Input of check-norm-condition. The plant enters through its linearized
    per-axis velocity models; `lipschitz` overrides the estimate derived
    from drag and wind.
    """

    model_config = ConfigDict(extra="forbid", validate_default=True)

    l1: L1Config = Field(default_factory=L1Config)
    plant: PlantParams = Field(default_factory=PlantParams)
    wind: WindModel = Field(default_factory=WindModel)
    lipschitz: Optional[float] = Field(default=None, ge=0)
