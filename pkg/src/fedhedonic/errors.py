"""Exception types shared across the package."""


class CapacityError(ValueError):
    """Raised when a request exceeds an exhaustive-enumeration cap."""


class ContractError(ValueError):
    """Raised when an operation is called outside its precondition."""


class DomainError(ValueError):
    """Raised when a numeric argument is outside a function's domain."""


class ScenarioError(RuntimeError):
    """Raised when a scenario cannot be generated or loaded."""


class LpSolverError(RuntimeError):
    """Raised when the simplex solver cannot make progress."""
