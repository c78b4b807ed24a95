"""
Exception hierarchy for the Population Model Checker
"""
from typing import Any, Optional, Sequence


class PopulationCheckerError(Exception):
    """Base class for all errors raised by the checker."""


class DslSyntaxError(PopulationCheckerError):
    """Syntax error in a model or property file."""

    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class ModelValidationError(PopulationCheckerError):
    """A population model violates one of its structural invariants."""


class UsageError(PopulationCheckerError, ValueError):
    """A request that names an unknown state or method, or lacks a required option."""


class UnknownPropertyError(UsageError):
    """The property file defines no property of the requested name."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown property '{name}'")


class DensityDependenceError(PopulationCheckerError):
    """A transition rate is not density dependent."""

    def __init__(self, transition: str, disagreement: float):
        self.transition = transition
        self.disagreement = disagreement
        super().__init__(
            f"transition '{transition}' is not density dependent "
            f"(relative disagreement {disagreement:.3e})"
        )


class UnsupportedRateError(PopulationCheckerError):
    """A rate expression cannot be handled by the moment engine."""

    def __init__(self, transition: str, reason: str = "rate is not polynomial"):
        self.transition = transition
        super().__init__(f"transition '{transition}': {reason}")


class DeterminismError(PopulationCheckerError):
    """Two edges of a 1gDTA can be enabled at the same time."""

    def __init__(self, edges: Sequence[Any], witness: dict):
        self.edges = tuple(edges)
        self.witness = witness
        shown = "; ".join(str(e) for e in self.edges)
        super().__init__(f"non-deterministic edges [{shown}] with witness {witness}")


class UnknownActionError(PopulationCheckerError):
    """A path uses an action outside the automaton's alphabet."""

    def __init__(self, action: str):
        self.action = action
        super().__init__(f"unknown action '{action}'")


class StiffnessError(PopulationCheckerError):
    """Step size underflow in the explicit integrator."""

    def __init__(self, t_fail: float, step: float):
        self.t_fail = t_fail
        self.step = step
        super().__init__(f"step size underflow (h={step:.3e}) at t={t_fail:.6g}")


class NumericalFailureError(PopulationCheckerError):
    """Numerical computation failed after all recovery attempts."""


class MomentFeasibilityError(PopulationCheckerError):
    """The given moments cannot belong to any distribution on the support."""


class MaxEntConvergenceError(PopulationCheckerError):
    """The dual optimization of the maximum entropy problem did not converge."""

    def __init__(self, iterations: int, gradient_norm: float):
        self.iterations = iterations
        self.gradient_norm = gradient_norm
        super().__init__(
            f"max-entropy optimization did not converge after {iterations} "
            f"iterations (|grad|={gradient_norm:.3e})"
        )


class StateSpaceLimitError(PopulationCheckerError):
    """Reachable state space exceeds the configured cap."""

    def __init__(self, size: int, cap: int):
        self.size = size
        self.cap = cap
        super().__init__(f"reachable state space exceeds cap ({size} > {cap})")


class GlobalCheckError(PopulationCheckerError):
    """Failure while evaluating one atom of a global property."""

    def __init__(self, path: str, cause: Optional[BaseException] = None):
        self.path = path
        self.cause = cause
        super().__init__(f"at {path}: {cause}")
