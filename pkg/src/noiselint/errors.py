"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid input data or configuration. The CLI maps this to exit code 2."""
