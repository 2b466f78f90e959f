"""Exception hierarchy shared by all engines.

The CLI maps these onto process exit codes, so every engine raises one of
these rather than a bare ``ValueError``.
"""
from __future__ import annotations


class SynthwaveError(Exception):
    """Base class for toolkit errors."""

    exit_code = 4


class InputError(SynthwaveError, ValueError):
    """Bad user input: malformed structure, out-of-domain parameter."""

    exit_code = 2


class StructuralError(InputError):
    """A leg or term references a mode that is not registered."""


class DomainError(InputError):
    """A numeric argument lies outside its allowed domain."""


class SynthesisError(InputError):
    """Virtual-mode contraction is impossible (dangling legs, too few vertices)."""


class SingularityError(InputError):
    """A zero elimination denominator was supplied."""


class NormalizationError(InputError):
    """A correlation cannot be normalized because a photon number vanishes."""


class SetupError(InputError):
    """An experimental setup fails validation (e.g. unresolved Franson peaks)."""


class UndefinedCARError(InputError):
    """Accidental estimate is zero, so CAR is undefined (not infinite)."""


class ScenarioError(InputError):
    """Scenario file problem, optionally located by line/column or key path."""

    def __init__(self, message: str, *, line: int | None = None,
                 column: int | None = None, key: str | None = None):
        self.line = line
        self.column = column
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class NumericalError(SynthwaveError):
    exit_code = 3


class ThresholdError(NumericalError):
    """System is at or above parametric threshold; no stable steady state."""

    def __init__(self, message: str, gain_ratio: float):
        self.gain_ratio = float(gain_ratio)
        super().__init__(f"{message} (gain ratio {self.gain_ratio:.4g})")


class ConvergenceError(NumericalError):
    """An iterative solver did not reach its tolerance."""

    def __init__(self, message: str, residual: float | None = None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (last residual {residual:.3e})"
        super().__init__(message)
