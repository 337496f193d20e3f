"""Top-level extraction operations tying decoding, backbone and formats."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from .backbone import FrameEncoder
from .embeddings import embed_names, make_provider
from .formats import write_bank_file, write_feature_file
from .video import DecodeError, ExtractionConfig, crop_and_resize, sample_frames

log = logging.getLogger("vsextract")


def extract_video(video_path, out_path, config: ExtractionConfig, encoder: FrameEncoder | None = None) -> bool:
    """Decode, sample, crop and encode one video into a VSF1 file.

    Returns False (and logs) when the video cannot be decoded; raises for
    anything else.
    """
    encoder = encoder or FrameEncoder(config.backbone, config.weights_path, config.seed)
    try:
        frames, _ = sample_frames(video_path, config.fps)
    except DecodeError as exc:
        log.warning("skipping %s: %s", video_path, exc)
        return False
    rng = np.random.default_rng(config.seed) if config.random_crop else None
    cropped = crop_and_resize(frames, config.crop_size, config.random_crop, rng)
    features = encoder.encode(cropped)
    write_feature_file(out_path, features, fps=config.fps, t0=0.0)
    return True


def extract_tree(manifest_path, videos_root, out_root, config: ExtractionConfig) -> dict:
    """Extract every manifest video found under `videos_root`.

    Video files are matched as <videos_root>/<video_id>.<ext>. Returns
    {"written": n, "skipped": [ids]}.
    """
    doc = json.loads(Path(manifest_path).read_text("utf-8"))
    encoder = FrameEncoder(config.backbone, config.weights_path, config.seed)
    videos_root = Path(videos_root)
    out_root = Path(out_root)
    written, skipped = 0, []
    for video in doc["videos"]:
        video_id = video["id"]
        source = _find_video(videos_root, video_id)
        if source is None:
            log.warning("skipping %s: no video file under %s", video_id, videos_root)
            skipped.append(video_id)
            continue
        target = out_root / video.get("feature_file", f"features/{video_id}.vsf")
        if extract_video(source, target, config, encoder):
            written += 1
        else:
            skipped.append(video_id)
    return {"written": written, "skipped": skipped}


def _find_video(root: Path, video_id: str):
    for ext in (".mp4", ".avi", ".mkv", ".webm", ".mov"):
        candidate = root / f"{video_id}{ext}"
        if candidate.exists():
            return candidate
    return None


def export_semantic_bank(manifest_path, method: str, out_path, vectors_path=None) -> int:
    """Embed every manifest class name (in id order) into a VSB1 file."""
    doc = json.loads(Path(manifest_path).read_text("utf-8"))
    classes = sorted(doc["classes"], key=lambda c: c["id"])
    names = [c["name"] for c in classes]
    provider = make_provider(method, vectors_path)
    vectors = embed_names(names, provider)
    write_bank_file(out_path, names, vectors)
    return vectors.shape[1]
