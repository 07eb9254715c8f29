"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations

from dataclasses import dataclass


class ExanteError(Exception):
    """Base class; ``module`` names the pipeline stage that raised."""

    module = "exante"


@dataclass(frozen=True)
class Violation:
    """One failed model check found while validating a game."""

    kind: str
    message: str
    # action id / infoset id / json pointer the violation is about, if any
    subject: str | None = None

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


class ValidationError(ExanteError):
    module = "game_core"

    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))

    @property
    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}


class PlanExplosion(ExanteError):
    module = "game_core"


class StateExplosion(ExanteError):
    module = "verifier"


class DistributionSum(ExanteError):
    module = "game_core"


class LpError(ExanteError):
    module = "lp_engine"


class DenseCapExceeded(LpError):
    pass


class NumericalFailure(LpError):
    pass


class OracleInconsistent(LpError):
    pass


class IterationLimit(LpError):
    pass


class ReconstructionResidual(ExanteError):
    module = "reconstruction"


class InfeasiblePath(ExanteError):
    module = "ea_solver"


class RowSumViolation(ExanteError):
    module = "ea_solver"


class MalformedScheme(ExanteError):
    module = "verifier"


class InputError(ExanteError):
    """Unparseable or structurally broken input file."""

    module = "cli"

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
