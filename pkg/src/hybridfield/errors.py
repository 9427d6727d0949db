"""Exception types shared across modules (CLI maps them to exit codes)."""


class ConfigError(ValueError):
    """Invalid configuration file or parameter combination."""


class NumericalError(RuntimeError):
    """Numerical breakdown inside a solver or estimator."""
