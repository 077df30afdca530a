"""Box-cover transition graphs, chain recurrent sets and combinatorial Lyapunov layers."""

from energyforge.chain_recurrence.analysis import (
    ChainAnalysis,
    ChainWitness,
    analyze_chains,
    chain_components,
    chain_recurrent_boxes,
    chain_witness,
    combinatorial_lyapunov,
    screen_flow,
)
from energyforge.chain_recurrence.cover import BoxCover, make_cover
from energyforge.chain_recurrence.graph import TransitionGraph, build_transition_graph

__all__ = [
    "BoxCover",
    "ChainAnalysis",
    "ChainWitness",
    "TransitionGraph",
    "analyze_chains",
    "build_transition_graph",
    "chain_components",
    "chain_recurrent_boxes",
    "chain_witness",
    "combinatorial_lyapunov",
    "make_cover",
    "screen_flow",
]
