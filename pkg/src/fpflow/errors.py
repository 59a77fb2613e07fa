"""Exception types shared across the solver."""


class GridMismatchError(ValueError):
    """Two fields that must live on the same grid do not."""


class NumericsError(RuntimeError):
    """A non-finite value appeared during a numerical operation."""


class ConvergenceError(RuntimeError):
    """An iterative solve failed to reach its tolerance."""

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class ConfigError(ValueError):
    """A run configuration failed validation."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
