from .graph import BalancingConfig, EdgeType, TasteGraph, VertexId, VertexType
from .store import Snapshot, load_snapshot, save_snapshot
from .walk import (PersonalizationWeights, WalkParams, extend_list, personalize,
                   recommend, rwr_steady_state)

__all__ = [
    "BalancingConfig", "EdgeType", "TasteGraph", "VertexId", "VertexType",
    "Snapshot", "load_snapshot", "save_snapshot",
    "PersonalizationWeights", "WalkParams", "extend_list", "personalize",
    "recommend", "rwr_steady_state",
]
