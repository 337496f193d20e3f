"""Synthetic imbalanced dataset generator for desk-scale experiments.

Each class is an isotropic Gaussian cluster around a random unit-norm
center; every video gets its own latent offset from the center, and every
frame adds noise around the video latent. Distractor videos are drawn
from a broad background distribution instead. Noise directions are scaled
by 1/sqrt(D) so the knobs read as offsets relative to the unit centers.

The generator also writes a semantic bank: a fixed random projection of
each class center into word-embedding space plus noise, so semantic
vectors carry the same inter-class structure a real word embedding would.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng
from .errors import ValidationError
from .features import FeatureSequence, write_features, write_semantic_bank_file
from .manifest import ClassInfo, Manifest, VideoRecord, save_manifest, validate_manifest


@dataclass(frozen=True)
class SyntheticSpec:
    n_base: int = 20
    n_novel: int = 20
    dim: int = 64
    base_train: int = 60
    novel_train: int = 5
    val_per_class: int = 0
    test_per_class: int = 12
    n_distractors: int = 60
    fps: float = 3.0
    duration_range: tuple[float, float] = (6.0, 14.0)
    activity_cover: tuple[float, float] = (0.65, 1.0)
    cluster_spread: float = 0.45  # video latent offset from the class center
    frame_noise: float = 0.45  # per-frame offset from the video latent
    background_scale: float = 1.0
    min_center_angle_deg: float = 25.0
    semantic_dim: int = 32
    semantic_noise: float = 0.25
    n_parents: int | None = 8
    n_grandparents: int | None = 3
    seed: int = 0


def _unit(vec: np.ndarray) -> np.ndarray:
    return vec / np.linalg.norm(vec)


def _sample_centers(k: int, dim: int, min_angle_deg: float, gen) -> np.ndarray:
    min_cos = np.cos(np.deg2rad(min_angle_deg))
    centers: list[np.ndarray] = []
    attempts = 0
    while len(centers) < k:
        attempts += 1
        if attempts > 1000 * k:
            raise ValidationError(
                f"cannot place {k} centers at min angle {min_angle_deg} deg in {dim}-d"
            )
        c = _unit(gen.standard_normal(dim))
        if all(np.dot(c, other) < min_cos for other in centers):
            centers.append(c)
    return np.stack(centers)


def _noise(gen, dim: int) -> np.ndarray:
    return gen.standard_normal(dim) / np.sqrt(dim)


def generate_synthetic(spec: SyntheticSpec, out_dir) -> tuple[Path, Path]:
    """Write manifest, feature files and semantic bank under `out_dir`.

    Returns (manifest path, semantic bank path). Identical specs produce
    byte-identical trees.
    """
    if spec.dim < 2:
        raise ValidationError(f"dim must be >= 2, got {spec.dim}")
    for name in ("base_train", "novel_train", "test_per_class"):
        if getattr(spec, name) < 1:
            raise ValidationError(f"{name} must be >= 1")
    if spec.n_base < 1 or spec.n_novel < 0:
        raise ValidationError("need at least one base class")

    out_dir = Path(out_dir)
    feat_dir = out_dir / "features"
    feat_dir.mkdir(parents=True, exist_ok=True)

    k = spec.n_base + spec.n_novel
    centers = _sample_centers(k, spec.dim, spec.min_center_angle_deg, rng.stream(spec.seed, "centers"))

    classes = []
    for class_id in range(k):
        parent = class_id % spec.n_parents if spec.n_parents else None
        grandparent = parent % spec.n_grandparents if spec.n_grandparents and parent is not None else None
        classes.append(
            ClassInfo(
                class_id=class_id,
                name=f"activity_{class_id:03d}",
                tier="base" if class_id < spec.n_base else "novel",
                parent=parent,
                grandparent=grandparent,
            )
        )

    videos: list[VideoRecord] = []

    def emit(video_id: str, class_id: int | None, split: str, center: np.ndarray | None):
        gen = rng.stream(spec.seed, "video", video_id)
        duration = float(gen.uniform(*spec.duration_range))
        n_frames = max(int(round(duration * spec.fps)), 1)
        if class_id is None:
            latent = spec.background_scale * _noise(gen, spec.dim)
            start, end = 0.0, duration
        else:
            latent = center + spec.cluster_spread * _noise(gen, spec.dim)
            cover = float(gen.uniform(*spec.activity_cover))
            length = max(cover * duration, 2.0 / spec.fps)
            start = float(gen.uniform(0.0, duration - length)) if duration > length else 0.0
            end = min(start + length, duration)
        background = spec.background_scale * _noise(gen, spec.dim)
        frames = np.empty((n_frames, spec.dim), dtype=np.float64)
        for i in range(n_frames):
            t = i / spec.fps
            if class_id is None:
                anchor = latent
            else:
                anchor = latent if start <= t < end else background
            frames[i] = anchor + spec.frame_noise * _noise(gen, spec.dim)
        seq = FeatureSequence(video_id, frames.astype(np.float32), fps=spec.fps, t0=0.0)
        rel = f"features/{video_id}.vsf"
        write_features(seq, out_dir / rel)
        videos.append(
            VideoRecord(
                video_id=video_id,
                class_id=class_id,
                split=split,
                duration_s=duration,
                activity=(start, end),
                feature_file=rel,
            )
        )

    for class_id in range(k):
        tier_train = spec.base_train if class_id < spec.n_base else spec.novel_train
        for i in range(tier_train):
            emit(f"c{class_id:03d}_train{i:03d}", class_id, "train", centers[class_id])
        for i in range(spec.val_per_class):
            emit(f"c{class_id:03d}_val{i:03d}", class_id, "validation", centers[class_id])
        for i in range(spec.test_per_class):
            emit(f"c{class_id:03d}_test{i:03d}", class_id, "test", centers[class_id])
    for i in range(spec.n_distractors):
        emit(f"distractor_{i:03d}", None, "test", None)

    manifest = validate_manifest(Manifest(version=1, classes=classes, videos=videos))
    manifest_path = out_dir / "manifest.json"
    save_manifest(manifest, manifest_path)

    sem_gen = rng.stream(spec.seed, "semantic")
    projection = sem_gen.standard_normal((spec.semantic_dim, spec.dim)) / np.sqrt(spec.dim)
    bank = np.empty((k, spec.semantic_dim), dtype=np.float64)
    for class_id in range(k):
        vec = projection @ centers[class_id] + spec.semantic_noise * _noise(sem_gen, spec.semantic_dim)
        bank[class_id] = _unit(vec)
    bank_path = out_dir / "semantic_bank.vsb"
    write_semantic_bank_file([c.name for c in classes], bank.astype(np.float32), bank_path)

    return manifest_path, bank_path
