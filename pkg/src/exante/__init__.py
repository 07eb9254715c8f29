"""Optimal ex ante persuasive signaling in sequential games with one or two receivers."""

from .errors import ExanteError
from .game import RawGame, ValidatedGame, build_sequences, validate
from .solver import EaSolution, SignalingScheme, solve_opt_ea
from .verifier import MatrixInstance, check_ex_ante, check_ex_interim, export_matrix_form

__all__ = [
    "EaSolution",
    "ExanteError",
    "MatrixInstance",
    "RawGame",
    "SignalingScheme",
    "ValidatedGame",
    "build_sequences",
    "check_ex_ante",
    "check_ex_interim",
    "export_matrix_form",
    "solve_opt_ea",
    "validate",
]
