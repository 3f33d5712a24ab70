"""Exception types shared across the package."""


class CapsuleWardrobeError(Exception):
    """Base class for all package errors."""


class ValidationError(CapsuleWardrobeError, ValueError):
    """Raised when inputs violate a documented precondition."""


class CatalogError(ValidationError):
    """Raised for malformed catalog files or inconsistent garment data."""


class BudgetExceededError(CapsuleWardrobeError):
    """Raised when an exhaustive enumeration would exceed the configured budget.

    Carries the enumeration size that the request would have required.
    """

    def __init__(self, message, required=None, budget=None):
        super().__init__(message)
        self.required = required
        self.budget = budget
