"""Compositional (additive-recurrence) and skip-gram node embeddings from random walks,
with an evaluation battery for pathway coherence, analogies, hub geometry and drift."""

from .analysis import EvalConfig, EvalReport, evaluate
from .embed_core import EmbeddingModel, load_model, mobius_add, save_model
from .graph_io import Graph, PathwaySet, load_groups, parse_edge_list
from .synth import PlantedSpec, generate_planted, planted_scorecard
from .trainers import TrainConfig, train_deepwalk, train_event2vec
from .walks import WalkCorpus, generate_walks

__version__ = "0.1.0"

__all__ = [
    "EmbeddingModel", "EvalConfig", "EvalReport", "Graph", "PathwaySet", "PlantedSpec",
    "TrainConfig", "WalkCorpus", "evaluate", "generate_planted", "generate_walks",
    "load_groups", "load_model", "mobius_add", "parse_edge_list", "planted_scorecard",
    "save_model", "train_deepwalk", "train_event2vec",
]
