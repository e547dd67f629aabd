"""Trickle-down Markov chains on trees and grids, with exact kernels and boundary tools."""
from .graph_substrate import BinaryTree, Grid2D, HarrisUlam
from .routing_chains import (
    BernoulliWalk,
    CatalanUrn,
    CrpBlocks,
    DirichletUrn,
    MallowsUrn,
    QBinomialUrn,
    RoutingState,
    SingleTrailHalf,
    catalan_number,
    gaussian_binomial,
)
from .trickle_engine import TrickleState, Tree, VertexStreams, replay, simulate, state_to_tree, step, tree_to_state

__version__ = "0.1.0"

__all__ = [
    "BinaryTree",
    "Grid2D",
    "HarrisUlam",
    "BernoulliWalk",
    "CatalanUrn",
    "CrpBlocks",
    "DirichletUrn",
    "MallowsUrn",
    "QBinomialUrn",
    "RoutingState",
    "SingleTrailHalf",
    "catalan_number",
    "gaussian_binomial",
    "TrickleState",
    "Tree",
    "VertexStreams",
    "replay",
    "simulate",
    "state_to_tree",
    "step",
    "tree_to_state",
]
