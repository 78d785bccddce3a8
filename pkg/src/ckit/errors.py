"""Exception types shared across the package."""


class ContractViolationError(ValueError):
    """A caller broke a documented precondition (dimension or parameter)."""


class RecipeViolationError(ValueError):
    """A solver schedule violates the conditions its guarantee needs."""


class ConfigurationError(ValueError):
    """An experiment configuration is invalid.

    ``field`` carries the dotted path of the offending entry when known.
    """

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
