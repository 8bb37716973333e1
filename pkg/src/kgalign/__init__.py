"""Hybrid factual/structural entity alignment between two knowledge graphs."""
from .cotrain import CotrainConfig, MatchResult, run_cotraining, run_hybea
from .encoder import VectorTable, encode, load_vectors
from .errors import DatasetFormatError, KGAlignError, ParseError, ReferentialError, TrainingError
from .factual import FactualConfig, train_factual
from .kg import KnowledgeGraph, SeedAlignment, graph_stats, load_openea_dataset, split_seed
from .matching import MatchPair, best_match, csls_adjust, hungarian_assign, reciprocity_filter
from .metrics import evaluate, heterogeneity_report, hits_at_k, mrr
from .simmat import SimilarityMatrix
from .structural import StructuralConfig, make_structural_model, train_structural

__version__ = "0.1.0"

__all__ = [
    "CotrainConfig",
    "DatasetFormatError",
    "FactualConfig",
    "KGAlignError",
    "KnowledgeGraph",
    "MatchPair",
    "MatchResult",
    "ParseError",
    "ReferentialError",
    "SeedAlignment",
    "SimilarityMatrix",
    "StructuralConfig",
    "TrainingError",
    "VectorTable",
    "best_match",
    "csls_adjust",
    "encode",
    "evaluate",
    "graph_stats",
    "heterogeneity_report",
    "hits_at_k",
    "hungarian_assign",
    "load_openea_dataset",
    "load_vectors",
    "make_structural_model",
    "mrr",
    "reciprocity_filter",
    "run_cotraining",
    "run_hybea",
    "split_seed",
    "train_factual",
    "train_structural",
]
