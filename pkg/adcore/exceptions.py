class NumericError(Exception):
    """Base class for failures raised by the numeric core."""


class ShapeError(NumericError, ValueError):
    def __init__(self, primitive, *shapes, detail=None):
        self.primitive = primitive
        self.shapes = tuple(tuple(s) for s in shapes)
        rendered = " vs ".join(str(s) for s in self.shapes)
        message = f"{primitive}: incompatible shapes {rendered}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class NonFiniteError(NumericError):
    def __init__(self, where, step=None):
        self.where = where
        self.step = step
        suffix = f" at step {step}" if step is not None else ""
        super().__init__(f"non-finite value produced by {where}{suffix}")


class DegenerateGradientError(NumericError):
    def __init__(self, iteration, norm_sq):
        self.iteration = iteration
        self.norm_sq = norm_sq
        super().__init__(
            f"fast projection aborted at iteration {iteration}: "
            f"squared gradient norm {norm_sq:.3e} below threshold"
        )


class InternalGraphError(NumericError):
    """Raised when the recorded graph is malformed (e.g. a cycle)."""
