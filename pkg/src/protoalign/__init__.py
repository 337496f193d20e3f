"""Prototype-aligned video embeddings for imbalanced activity retrieval."""

from .autodiff import (
    AdamState,
    Parameter,
    Tensor,
    adam_step,
    distance_softmax,
    euclidean,
    grad_check,
    l2_normalize,
    matmul,
    nll_from_probs,
)
from .errors import ProtoalignError
from .estimator import VideoEmbedder
from .features import FeatureSequence, average_pool, read_features, slice_interval, write_features
from .heads import Classifier, EmbeddingHead, classify, embed_video
from .index import GalleryIndex, RankedList, build_index, generate_proposals, multi_query, segment_clips, tiou
from .manifest import DISTRACTOR, Manifest, load_manifest, sample_novel_train, save_manifest, split_classes
from .metrics import MetricsReport, average_precision, evaluate_run, harmonic, mean_ap
from .semantic import SemanticBank, SemanticMLP, load_semantic_bank, semantic_map, semantic_probs
from .synthetic import SyntheticSpec, generate_synthetic
from .visual import GAParams, VisualBank, bank_update, global_align, scatteredness, visual_probs

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "Classifier",
    "DISTRACTOR",
    "EmbeddingHead",
    "FeatureSequence",
    "GalleryIndex",
    "GAParams",
    "Manifest",
    "MetricsReport",
    "Parameter",
    "ProtoalignError",
    "RankedList",
    "SemanticBank",
    "SemanticMLP",
    "SyntheticSpec",
    "Tensor",
    "VideoEmbedder",
    "VisualBank",
    "adam_step",
    "average_pool",
    "average_precision",
    "bank_update",
    "build_index",
    "classify",
    "distance_softmax",
    "embed_video",
    "euclidean",
    "evaluate_run",
    "generate_proposals",
    "generate_synthetic",
    "global_align",
    "grad_check",
    "harmonic",
    "l2_normalize",
    "load_manifest",
    "load_semantic_bank",
    "matmul",
    "mean_ap",
    "multi_query",
    "nll_from_probs",
    "read_features",
    "sample_novel_train",
    "save_manifest",
    "scatteredness",
    "segment_clips",
    "semantic_map",
    "semantic_probs",
    "slice_interval",
    "split_classes",
    "tiou",
    "visual_probs",
    "write_features",
]
