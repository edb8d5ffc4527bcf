"""Exception hierarchy shared across the solver modules.

The CLI maps these onto exit codes: configuration problems (2), numerical
failures (3), violated well-posedness hypotheses (4).
"""


class FracsourceError(Exception):
    """Base class for all package errors."""


class ConfigError(FracsourceError):
    """Malformed or inconsistent run configuration."""


class HypothesisError(FracsourceError):
    """A well-posedness hypothesis on the problem data is violated.

    Carries the name of the violated condition and the measured value so
    error messages and reports can state what was checked.
    """

    def __init__(self, condition: str, measured=None, detail: str = ""):
        self.condition = condition
        self.measured = measured
        msg = f"hypothesis violated: {condition}"
        if measured is not None:
            msg += f" (measured {measured!r})"
        if detail:
            msg += f" -- {detail}"
        super().__init__(msg)


class CompatibilityError(HypothesisError):
    """Observed data incompatible with the initial state at t=0."""


class NumericsError(FracsourceError):
    """A numerical procedure failed to reach its accuracy or converge."""
