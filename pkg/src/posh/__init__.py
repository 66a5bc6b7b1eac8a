"""Online multi-chain GP trajectory optimization with homotopy switching."""

from posh.gp_model import SupportState, GpModelParams
from posh.environment import Obstacle, GridSpec, SignedDistanceField, WorldState
from posh.factor_graph import Factor, FactorKind, Graph, VariableId
from posh.graph_builder import BuilderParams, build_chains, interconnect, build_graph
from posh.optimizer import LmParams, optimize
from posh.homotopy import HSignature, signature
from posh.planner import PlannerState, PlanningFailure, plan_step

__all__ = [
    "SupportState",
    "GpModelParams",
    "Obstacle",
    "GridSpec",
    "SignedDistanceField",
    "WorldState",
    "Factor",
    "FactorKind",
    "Graph",
    "VariableId",
    "BuilderParams",
    "build_chains",
    "interconnect",
    "build_graph",
    "LmParams",
    "optimize",
    "HSignature",
    "signature",
    "PlannerState",
    "PlanningFailure",
    "plan_step",
]

__version__ = "0.1.0"
