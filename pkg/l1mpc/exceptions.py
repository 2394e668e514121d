# l1mpc/exceptions.py
from typing import Any, Optional


class L1MpcError(Exception):
    """Base error. `exit_code` is what the CLI returns when it escapes a command."""

    exit_code = 3

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


# --- Configuration / input errors (exit 2) ---
class ConfigurationError(L1MpcError):
    exit_code = 2


class LtiError(L1MpcError):
    """Rejected LTI input: non-finite entries, inconsistent dimensions, wrong domain."""

    exit_code = 2


# --- Runtime failures (exit 3) ---
class UnstableSystemError(L1MpcError):
    def __init__(self, detail: str = "L1 norm undefined", poles: Optional[Any] = None):
        super().__init__(detail)
        self.poles = poles


class IllPosedFeedbackError(L1MpcError):
    pass


class InfeasibleProblemError(L1MpcError):
    def __init__(self, detail: str = "infeasible", violation: float = float("nan")):
        super().__init__(detail)
        self.violation = violation


class IterationLimitError(L1MpcError):
    def __init__(self, detail: str, best: Any = None):
        super().__init__(detail)
        self.best = best


class ConvergenceError(L1MpcError):
    pass


class NonConvexProblemError(L1MpcError):
    """QP Hessian is not positive definite."""

    pass


class IdentificationError(L1MpcError):
    def __init__(self, detail: str, diagnostics: Optional[dict] = None):
        super().__init__(detail)
        self.diagnostics = diagnostics or {}


class SimulationAbort(L1MpcError):
    def __init__(self, detail: str, trace: Optional[list] = None):
        super().__init__(detail)
        self.trace = trace or []


class MetricError(L1MpcError):
    pass


# --- Acceptance (exit 1) ---
class AcceptanceFailure(L1MpcError):
    exit_code = 1
