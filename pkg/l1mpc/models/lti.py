# l1mpc/models/lti.py
from typing import Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from l1mpc.exceptions import LtiError

ArrayLike = Union[np.ndarray, Sequence, float]


def _matrix(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float, ndmin=2, copy=True)
    if arr.ndim != 2:
        raise LtiError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise LtiError(f"{name} has non-finite entries")
    arr.flags.writeable = False
    return arr


def _polynomial(value, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.array(value, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise LtiError(f"{name} must be a non-empty coefficient vector")
    if not np.all(np.isfinite(arr)):
        raise LtiError(f"{name} has non-finite coefficients")
    nonzero = np.flatnonzero(arr)
    arr = arr[nonzero[0]:] if nonzero.size else np.zeros(1)
    arr.flags.writeable = False
    return arr


class FirstOrderTF(BaseModel):
    """dc_gain * pole / (s + pole): the shape of every reference model and filter."""

    model_config = ConfigDict(frozen=True)

    pole: float = Field(gt=0)
    dc_gain: float = 1.0


class TransferFunction(BaseModel):
    """
    SISO rational function num(s)/den(s), coefficients in descending powers.

    Arithmetic returns new unreduced functions; call `minreal` to cancel
    common roots.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    num: np.ndarray
    den: np.ndarray

    @field_validator("num", "den", mode="before")
    @classmethod
    def _coerce(cls, value, info):
        return _polynomial(value, info.field_name)

    @model_validator(mode="after")
    def _check_denominator(self):
        if not np.any(self.den):
            raise LtiError("denominator is identically zero")
        return self

    @classmethod
    def constant(cls, gain: float) -> "TransferFunction":
        return cls(num=[gain], den=[1.0])

    @classmethod
    def first_order(cls, tf: FirstOrderTF) -> "TransferFunction":
        return cls(num=[tf.dc_gain * tf.pole], den=[1.0, tf.pole])

    @staticmethod
    def _lift(other) -> "TransferFunction":
        if isinstance(other, TransferFunction):
            return other
        return TransferFunction.constant(float(other))

    def __mul__(self, other):
        other = self._lift(other)
        return TransferFunction(
            num=np.polymul(self.num, other.num), den=np.polymul(self.den, other.den)
        )

    __rmul__ = __mul__

    def __add__(self, other):
        other = self._lift(other)
        num = np.polyadd(np.polymul(self.num, other.den), np.polymul(other.num, self.den))
        return TransferFunction(num=num, den=np.polymul(self.den, other.den))

    __radd__ = __add__

    def __neg__(self):
        return TransferFunction(num=-self.num, den=self.den)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) + (-self)

    def __truediv__(self, other):
        other = self._lift(other)
        if not np.any(other.num):
            raise LtiError("division by the zero transfer function")
        return TransferFunction(
            num=np.polymul(self.num, other.den), den=np.polymul(self.den, other.num)
        )

    @property
    def order(self) -> int:
        return len(self.den) - 1

    @property
    def is_proper(self) -> bool:
        return len(self.num) <= len(self.den)

    def poles(self) -> np.ndarray:
        return np.roots(self.den)

    def zeros(self) -> np.ndarray:
        return np.roots(self.num)

    def evaluate(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=complex)
        return np.polyval(self.num, s) / np.polyval(self.den, s)

    def dc_gain(self) -> float:
        return float(np.real(self.evaluate(0.0)))

    def minreal(self, tol: float = 1e-7) -> "TransferFunction":
        """Cancels numerator/denominator roots closer than tol (relative)."""
        zeros = list(self.zeros())
        poles = list(self.poles())
        kept_zeros = []
        for z in zeros:
            scale = max(1.0, abs(z))
            match = next(
                (i for i, p in enumerate(poles) if abs(p - z) <= tol * scale), None
            )
            if match is None:
                kept_zeros.append(z)
            else:
                poles.pop(match)
        gain = self.num[0] / self.den[0]
        num = gain * np.real_if_close(np.poly(kept_zeros), tol=1e6) if kept_zeros else np.array([gain])
        den = np.real_if_close(np.poly(poles), tol=1e6) if poles else np.array([1.0])
        return TransferFunction(num=np.real(num), den=np.real(den))


class LtiSystem(BaseModel):
    """
    State-space (a, b, c, d). `dt is None` means continuous time; otherwise the
    system is discrete with sample period dt.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    dt: Optional[float] = None

    @model_validator(mode="before")
    @classmethod
    def _coerce(cls, data):
        if not isinstance(data, dict):
            return data
        data = dict(data)
        for key in ("a", "b", "c", "d"):
            if key in data:
                data[key] = _matrix(data[key], key)
        return data

    @model_validator(mode="after")
    def _check_dimensions(self):
        n = self.a.shape[0]
        if self.a.shape != (n, n):
            raise LtiError(f"state matrix must be square, got {self.a.shape}")
        if self.b.shape[0] != n:
            raise LtiError(f"input matrix has {self.b.shape[0]} rows, expected {n}")
        if self.c.shape[1] != n:
            raise LtiError(f"output matrix has {self.c.shape[1]} columns, expected {n}")
        if self.d.shape != (self.c.shape[0], self.b.shape[1]):
            raise LtiError(
                f"feedthrough shape {self.d.shape} inconsistent with "
                f"({self.c.shape[0]}, {self.b.shape[1]})"
            )
        if self.dt is not None and not (np.isfinite(self.dt) and self.dt > 0):
            raise LtiError("discrete sample period must be positive and finite")
        return self

    @classmethod
    def static(cls, gain: ArrayLike, dt: Optional[float] = None) -> "LtiSystem":
        d = np.array(gain, dtype=float, ndmin=2)
        p, m = d.shape
        return cls(a=np.zeros((0, 0)), b=np.zeros((0, m)), c=np.zeros((p, 0)), d=d, dt=dt)

    @property
    def order(self) -> int:
        return self.a.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.b.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.c.shape[0]

    @property
    def is_discrete(self) -> bool:
        return self.dt is not None


class LtiRunner:
    """
    Online executor of a discrete LtiSystem. Single owner; state is private.

    step(u) advances x(k+1) = A x(k) + B u(k) and returns C x(k+1) + D u(k).
    """

    def __init__(self, system: LtiSystem, state: Optional[ArrayLike] = None):
        if not system.is_discrete:
            raise LtiError("LtiRunner requires a discrete-time system")
        self.system = system
        if state is None:
            self._state = np.zeros(system.order)
        else:
            state = np.array(state, dtype=float).reshape(-1)
            if state.shape != (system.order,):
                raise LtiError(
                    f"state has dimension {state.size}, system order is {system.order}"
                )
            self._state = state

    @property
    def state(self) -> np.ndarray:
        return self._state.copy()

    def reset(self, state: Optional[ArrayLike] = None) -> None:
        self._state = (
            np.zeros(self.system.order)
            if state is None
            else np.array(state, dtype=float).reshape(self.system.order)
        )

    def output(self, u: ArrayLike) -> np.ndarray:
        u = np.array(u, dtype=float).reshape(-1)
        return self.system.c @ self._state + self.system.d @ u

    def step(self, u: ArrayLike) -> np.ndarray:
        u = np.array(u, dtype=float).reshape(-1)
        if u.shape != (self.system.n_inputs,):
            raise LtiError(
                f"input has dimension {u.size}, system expects {self.system.n_inputs}"
            )
        if not np.all(np.isfinite(u)):
            raise LtiError("non-finite input")
        self._state = self.system.a @ self._state + self.system.b @ u
        return self.system.c @ self._state + self.system.d @ u


class L1NormResult(BaseModel):
    """‖G‖_L1 with the pieces it was assembled from."""

    value: float
    quadrature: float
    tail_bound: float
    horizon: float
    step: float
    horizon_sufficient: bool

    def __float__(self) -> float:
        return self.value
