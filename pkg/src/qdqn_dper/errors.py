"""Exception hierarchy shared by all modules."""


class QdqnError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(QdqnError, ValueError):
    """A configuration value is outside its allowed range."""


class NumericError(QdqnError, ArithmeticError):
    """A non-finite value reached a place that requires finite numbers."""


class StateError(QdqnError, RuntimeError):
    """An operation was invoked on an object in the wrong state."""


class TrainingError(QdqnError, RuntimeError):
    """A worker failed during training.

    ``partial`` carries whatever report could be assembled before the abort.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
