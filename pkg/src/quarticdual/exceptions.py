class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class NumericalFailure(ArithmeticError):
    """A numerical kernel failed (e.g. eigensolver non-convergence)."""

    def __init__(self, message, norm=None):
        if norm is not None:
            message = f"{message} (||M||_F = {norm:.6g})"
        super().__init__(message)
        self.norm = norm


class SingularSystemError(NumericalFailure):
    """The reduced Newton system could not be solved."""


class GenerationError(RuntimeError):
    """Random instance generation failed."""

    def __init__(self, message, seed=None):
        if seed is not None:
            message = f"{message} (seed={seed})"
        super().__init__(message)
        self.seed = seed


class FormatError(ValueError):
    """Malformed input file."""

    def __init__(self, message, line=None, column=None):
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)
        self.line = line
        self.column = column
