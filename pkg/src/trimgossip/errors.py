"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid user-supplied parameter (bad topology spec, trim level, config...)."""


class GenerationError(RuntimeError):
    """Random-graph generation failed within its retry budget."""


class NumericalError(RuntimeError):
    """An eigensolver or other numerical routine failed to converge."""


class CompositionError(TypeError):
    """Protocols composed in an unsupported way (e.g. a ranker without rank output)."""


class TiesError(ValueError):
    """Operation requires tie-free observations."""


class ParseError(ValueError):
    """Malformed input file; carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
