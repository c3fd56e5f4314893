"""Exception types shared across hrlab."""


class HRLabError(Exception):
    """Base class for all hrlab errors."""


class ValidationError(HRLabError, ValueError):
    """An input violates a documented invariant."""


class BasisError(ValidationError):
    """The requested basis cannot be represented on the configured grid."""


class BlowUpError(HRLabError, ArithmeticError):
    """Non-finite or runaway state during time integration.

    The continuous system is dissipative, so this always points at a time
    step that is too large, never at the model itself.
    """

    def __init__(self, message, last_time=None, last_norm=None):
        super().__init__(message)
        self.last_time = last_time
        self.last_norm = last_norm
