"""Exception hierarchy."""


class AntselError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(AntselError, ValueError):
    """An argument lies outside the domain of an operation."""


class ContractError(AntselError, RuntimeError):
    """A caller-side precondition was not met (e.g. fitness not evaluated)."""


class EnumerationCapError(DomainError):
    """Exhaustive search refused because the search space exceeds the cap."""

    def __init__(self, evaluations, cap):
        self.evaluations = evaluations
        self.cap = cap
        super().__init__(
            f"exhaustive search needs {evaluations} evaluations, "
            f"above the enumeration cap of {cap}"
        )


class QuadratureError(AntselError, ArithmeticError):
    """Numerical integration failed to reach the requested tolerance."""


class ConfigError(AntselError):
    """Invalid experiment configuration."""
