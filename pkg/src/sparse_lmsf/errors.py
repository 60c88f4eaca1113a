"""Exception types raised across the package."""


class InvalidSpecError(ValueError):
    """A channel, noise or experiment description violates its invariants."""


class ConfigError(ValueError):
    """An estimator or CLI configuration value is out of range.

    ``field`` names the offending parameter so callers can report it.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class DimensionError(ValueError):
    """Vector lengths that must agree do not."""


class UndefinedSparsenessError(ValueError):
    """Sparseness is undefined for the all-zero vector."""


class DivergenceError(ArithmeticError):
    """An adaptive filter produced a non-finite tap value."""

    def __init__(self, iteration, label=None):
        who = f"{label} " if label else ""
        super().__init__(f"{who}estimate diverged at iteration {iteration}")
        self.iteration = iteration
        self.label = label


class EmptyTraceError(RuntimeError):
    """Every Monte-Carlo run diverged for an algorithm, leaving nothing to average."""

    def __init__(self, label):
        super().__init__(f"all runs diverged for {label}; no MSE trace to report")
        self.label = label
