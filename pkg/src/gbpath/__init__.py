"""Publish a private path through a known network as a layered graph."""

from gbpath.errors import GBPathError, UnusableMap
from gbpath.graph import Network, RelationMatrix, VertexId, generate_map
from gbpath.harness import ExperimentConfig, run_experiment
from gbpath.publish import LayeredGraph, Publication, check_rules, publish, publish_full
from gbpath.recover import Reconstruction, adversary_infer, participant_edge_status, reconstruct_path, withhold

__all__ = [
    "ExperimentConfig",
    "GBPathError",
    "LayeredGraph",
    "Network",
    "Publication",
    "Reconstruction",
    "RelationMatrix",
    "UnusableMap",
    "VertexId",
    "adversary_infer",
    "check_rules",
    "generate_map",
    "participant_edge_status",
    "publish",
    "publish_full",
    "reconstruct_path",
    "run_experiment",
    "withhold",
]

__version__ = "0.1.0"
