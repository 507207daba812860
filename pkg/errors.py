# errors.py
#
# Exception hierarchy shared by all modules. Input problems map to exit code 2,
# solver problems to exit code 3 (see main.py).

from __future__ import annotations

import numpy as np


class GraphLearnError(Exception):
    """Base class for every domain error raised by this project."""


# --- input family (exit code 2) ---


class InputError(GraphLearnError):
    pass


class InvalidEdgeError(InputError):
    def __init__(self, i: int, j: int, p: int):
        super().__init__(f"invalid edge ({i}, {j}) for p={p}: need 1 <= j < i <= p")
        self.i, self.j, self.p = i, j, p


class SymmetryError(InputError):
    pass


class DomainError(InputError):
    pass


class IngestionError(InputError):
    """Malformed or inconsistent input file."""

    def __init__(self, message: str, path: str | None = None):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class GraphParseError(IngestionError):
    def __init__(self, message: str, path: str | None = None, line: int | None = None,
                 column: int | None = None):
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message, path=path)
        self.line, self.column = line, column


class LabelMismatchError(IngestionError):
    pass


class DegenerateMetadataError(InputError):
    pass


# --- solver family (exit code 3) ---


class SolverError(GraphLearnError):
    pass


class NotPositiveDefiniteError(SolverError):
    """L(w) + J failed the Cholesky factorization (graph not connected)."""

    def __init__(self, message: str, w: np.ndarray | None = None):
        super().__init__(message)
        self.w = None if w is None else np.array(w, copy=True)


class InfeasibleUpdateError(SolverError):
    def __init__(self, edge: int, a: float, c: float, rhs: float):
        super().__init__(
            f"no positive root for edge {edge}: a={a!r}, C={c!r}, rhs={rhs!r} "
            "(degenerate covariance, duplicated nodes?)"
        )
        self.edge = edge


class GenerationError(SolverError):
    pass


class UndefinedModularityError(SolverError):
    pass


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, InputError):
        return 2
    if isinstance(exc, SolverError):
        return 3
    return 1
