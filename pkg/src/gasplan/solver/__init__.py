"""LP / MILP solving: dual simplex, branch and bound, MPS interchange."""

from .bnb import BnbConfig, MipSolution, model_to_lp, solve_mip
from .lp import Basis, LpProblem, LpResult, solve_lp
from .model import MipModel
from .mps import SolutionImportError, export_mps, import_solution, mps_text, write_solution

__all__ = [
    "Basis",
    "BnbConfig",
    "LpProblem",
    "LpResult",
    "MipModel",
    "MipSolution",
    "SolutionImportError",
    "export_mps",
    "import_solution",
    "model_to_lp",
    "mps_text",
    "solve_lp",
    "solve_mip",
    "write_solution",
]
