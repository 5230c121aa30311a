from __future__ import annotations
from typing import Optional, Sequence


class SpecregError(Exception):
    """Base class for every error raised by specreg."""


class GraphFormatError(SpecregError, ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ConfigError(SpecregError, ValueError):
    pass


class SolverError(SpecregError, RuntimeError):
    pass


class SingularDegreeError(SolverError):
    def __init__(self, zero_nodes: Sequence[int]):
        self.zero_nodes = list(zero_nodes)
        head = ", ".join(str(i) for i in self.zero_nodes[:10])
        more = "" if len(self.zero_nodes) <= 10 else f" (+{len(self.zero_nodes) - 10} more)"
        super().__init__(
            f"degree matrix is singular: {len(self.zero_nodes)} node(s) with zero degree [{head}{more}]; "
            "use alpha > 0 or allow_isolated=True"
        )


class ConvergenceError(SolverError):
    def __init__(self, message: str, residuals: Sequence[float] = (), iterations: int = 0):
        self.residuals = list(residuals)
        self.iterations = iterations
        worst = max(self.residuals) if self.residuals else float("nan")
        super().__init__(f"{message} after {iterations} iterations (worst residual {worst:.3e})")


class TheoryError(SpecregError, ValueError):
    pass
