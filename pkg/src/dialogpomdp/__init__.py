"""POMDP toolkit for spoken-dialogue management."""

from .dialogue import DialogueParams, build_dialogue_model, find_equivalent_states
from .kernels import BACKEND
from .model import PomdpModel, VectorSet, belief_update, tiger85, value_of
from .policy import SimConfig, make_policy, simulate
from .solvers import GridConfig, SolverConfig, solve

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "DialogueParams", "GridConfig", "PomdpModel", "SimConfig", "SolverConfig",
    "VectorSet", "belief_update", "build_dialogue_model", "find_equivalent_states",
    "make_policy", "simulate", "solve", "tiger85", "value_of",
]
