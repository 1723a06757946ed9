"""Exception hierarchy shared by every module.

The CLI maps these onto stable exit codes, so new errors should subclass one
of the four categories below rather than ``Exception`` directly.
"""


class DishError(Exception):
    """Base class; ``category`` is the machine-readable tag."""

    category = "internal"


class InputError(DishError, ValueError):
    category = "input"


class ConfigError(InputError):
    """Invalid or inconsistent configuration values."""


class ContractError(DishError, ValueError):
    """A caller broke an operation's precondition."""

    category = "input"


class ShapeError(ContractError):
    def __init__(self, op, *shapes, detail=""):
        self.op = op
        self.shapes = tuple(tuple(s) for s in shapes)
        msg = f"{op}: incompatible shapes " + " vs ".join(str(s) for s in self.shapes)
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class InsufficientLengthError(InputError):
    def __init__(self, T, L, H):
        self.T, self.L, self.H = T, L, H
        super().__init__(f"series of length T={T} cannot hold one window with L={L}, H={H}")


class NumericError(DishError, ArithmeticError):
    category = "numeric"


class TrainingDiverged(NumericError):
    """Raised when the training loss turns nonfinite.

    ``checkpoint`` holds the last parameter snapshot that produced a finite
    validation score; the model has already been restored to it.
    """

    def __init__(self, message, checkpoint=None, history=None):
        super().__init__(message)
        self.checkpoint = checkpoint
        self.history = history or []
