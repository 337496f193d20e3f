"""Video decoding and frame sampling via OpenCV."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

log = logging.getLogger("vsextract")


class DecodeError(Exception):
    """The file could not be opened or yielded no frames."""


@dataclass(frozen=True)
class ExtractionConfig:
    fps: float = 3.0
    crop_size: int = 112
    backbone: str = "resnet18"
    weights_path: str | None = None
    random_crop: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        if self.crop_size < 8:
            raise ValueError(f"crop_size too small: {self.crop_size}")


def sample_frames(path, target_fps: float) -> tuple[np.ndarray, float]:
    """Decode `path` and return RGB frames sampled at `target_fps`.

    Returns (frames (T, H, W, 3) uint8, source duration estimate).
    Sampling picks the source frame nearest to each target timestamp
    i / target_fps.
    """
    path = Path(path)
    cap = cv2.VideoCapture(str(path))
    if not cap.isOpened():
        raise DecodeError(f"cannot open {path}")
    src_fps = cap.get(cv2.CAP_PROP_FPS) or 0.0
    if src_fps <= 0:
        src_fps = target_fps  # containers without fps metadata: take frames as-is
    wanted_interval = src_fps / target_fps
    frames = []
    next_target = 0.0
    index = 0
    while True:
        ok, frame = cap.read()
        if not ok:
            break
        if index + 1e-9 >= next_target:
            frames.append(cv2.cvtColor(frame, cv2.COLOR_BGR2RGB))
            next_target += wanted_interval
        index += 1
    cap.release()
    if not frames:
        raise DecodeError(f"no decodable frames in {path}")
    duration = index / src_fps
    return np.stack(frames), duration


def crop_and_resize(frames: np.ndarray, size: int, random_crop: bool = False, rng=None) -> np.ndarray:
    """Square-crop every frame (center by default) and resize to size x size."""
    n, h, w, _ = frames.shape
    side = min(h, w)
    out = np.empty((n, size, size, 3), dtype=np.uint8)
    for i in range(n):
        if random_crop:
            top = int(rng.integers(0, h - side + 1)) if h > side else 0
            left = int(rng.integers(0, w - side + 1)) if w > side else 0
        else:
            top, left = (h - side) // 2, (w - side) // 2
        crop = frames[i, top : top + side, left : left + side]
        out[i] = cv2.resize(crop, (size, size), interpolation=cv2.INTER_AREA)
    return out
