"""Design-space exploration: encoding, surrogates, acquisition and baselines."""

from .engine import DseHistory, Method, Objective, propose_next, run_dse, sobol_init
from .pareto import ParetoArchive, ehvi, hypervolume
from .space import DesignSpace, FeasibilityFilter

__all__ = [
    "DesignSpace",
    "DseHistory",
    "FeasibilityFilter",
    "Method",
    "Objective",
    "ParetoArchive",
    "ehvi",
    "hypervolume",
    "propose_next",
    "run_dse",
    "sobol_init",
]
