"""Offline extractor: frame features and semantic banks for the retrieval engine."""

from .backbone import FrameEncoder
from .embeddings import METHOD_DIMS, OOVError, embed_names, make_provider
from .extract import export_semantic_bank, extract_tree, extract_video
from .formats import write_bank_file, write_feature_file
from .video import DecodeError, ExtractionConfig, crop_and_resize, sample_frames

__version__ = "0.1.0"

__all__ = [
    "DecodeError",
    "ExtractionConfig",
    "FrameEncoder",
    "METHOD_DIMS",
    "OOVError",
    "crop_and_resize",
    "embed_names",
    "export_semantic_bank",
    "extract_tree",
    "extract_video",
    "make_provider",
    "sample_frames",
    "write_bank_file",
    "write_feature_file",
]
