"""Exception hierarchy.

Every error carries an ``exit_code`` used by the CLI: 1 for input validation
problems, 2 for failures that happen while running a valid request.
"""


class CorePruneError(Exception):
    exit_code = 2

    def to_dict(self):
        return {"error": type(self).__name__, "message": str(self)}


class ValidationError(CorePruneError, ValueError):
    exit_code = 1


class InvalidParameter(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class ParseError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class LayerTypeMismatch(ValidationError):
    pass


class IndexOutOfRange(ValidationError, IndexError):
    pass


class BudgetExceedsWidth(ValidationError):
    pass


class InvalidActivation(ValidationError):
    pass


class InvalidSubset(ValidationError):
    pass


class Unsupported(ValidationError):
    pass


class ZeroSensitivity(CorePruneError):
    pass


class DegenerateSet(CorePruneError):
    pass


class NonConvergent(CorePruneError):
    pass


class LayerError(CorePruneError):
    """Wraps a per-layer failure raised inside ``prune_network``."""

    def __init__(self, layer_index, cause):
        super().__init__(f"layer {layer_index}: {type(cause).__name__}: {cause}")
        self.layer_index = layer_index
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 2)

    def to_dict(self):
        return {
            "error": type(self.cause).__name__,
            "layer": self.layer_index,
            "message": str(self.cause),
        }
