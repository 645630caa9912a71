"""Simplicial-complex node models built on a bidirectional selective state-space scan.

A graph is clique-lifted into a simplicial complex, every node gets a short
sequence of rank-wise aggregates of the cells it belongs to, and a pair of
selective scans (forward and reversed) turns each sequence into a node update.
"""
from .batching import SubComplexBatch, iter_batches, per_rank_prune, sample_subcomplex
from .complex import (
    NodeIncidence,
    SimplicialComplex,
    boundary_matrix,
    build_complex,
    incidence_matrix,
    incident_cells,
    node_incidence,
)
from .datasets import DatasetBundle, generate_synthetic, load_graph_dataset, write_graph_dataset
from .errors import (
    CheckpointError,
    CheckpointVersionError,
    CliqueSizeError,
    ComplexError,
    ConfigError,
    CorruptCheckpointError,
    DatasetFormatError,
    NumericError,
    ShapeError,
    TopoMambaError,
)
from .lifting import FeaturedGraph, FeatureStore, clique_lift, feature_lift
from .model import ModelConfig, TopoMambaModel, forward, load_checkpoint, save_checkpoint
from .sequencer import aggregate_rank, build_sequences
from .ssm import GruParams, MambaBlockParams, SsmLayerParams, gru_scan, mamba_block, selective_scan
from .training import TrainConfig, evaluate, run_experiment, split_dataset, train_model

__all__ = [
    "SubComplexBatch",
    "iter_batches",
    "per_rank_prune",
    "sample_subcomplex",
    "NodeIncidence",
    "SimplicialComplex",
    "boundary_matrix",
    "build_complex",
    "incidence_matrix",
    "incident_cells",
    "node_incidence",
    "DatasetBundle",
    "generate_synthetic",
    "load_graph_dataset",
    "write_graph_dataset",
    "CheckpointError",
    "CheckpointVersionError",
    "CliqueSizeError",
    "ComplexError",
    "ConfigError",
    "CorruptCheckpointError",
    "DatasetFormatError",
    "NumericError",
    "ShapeError",
    "TopoMambaError",
    "FeaturedGraph",
    "FeatureStore",
    "clique_lift",
    "feature_lift",
    "ModelConfig",
    "TopoMambaModel",
    "forward",
    "load_checkpoint",
    "save_checkpoint",
    "aggregate_rank",
    "build_sequences",
    "GruParams",
    "MambaBlockParams",
    "SsmLayerParams",
    "gru_scan",
    "mamba_block",
    "selective_scan",
    "TrainConfig",
    "evaluate",
    "run_experiment",
    "split_dataset",
    "train_model",
]

__version__ = "0.1.0"
