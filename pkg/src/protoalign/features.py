"""Frame-feature sequences and their binary file formats.

Two little-endian formats cross the extractor/engine boundary:

* feature file: magic ``VSF1``, version u32=1, D u32, T u32, fps f32,
  t0 f32, then T*D float32 row-major.
* semantic bank file: magic ``VSB1``, version u32=1, K u32, W u32, then
  K length-prefixed UTF-8 class names (u32 length each), then K*W float32.

Frame timestamps are implicit: frame i sits at t0 + i / fps.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateIntervalError, DimensionError, FormatError, ValidationError

FEATURE_MAGIC = b"VSF1"
BANK_MAGIC = b"VSB1"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class FeatureSequence:
    """Per-video T x D frozen frame features with implicit timestamps."""

    video_id: str
    frames: np.ndarray  # (T, D) float32
    fps: float
    t0: float = 0.0

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float32)
        if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
            raise ValidationError(f"{self.video_id}: frames must be a nonempty T x D matrix")
        if not np.all(np.isfinite(frames)):
            raise ValidationError(f"{self.video_id}: non-finite feature values")
        if self.fps <= 0:
            raise ValidationError(f"{self.video_id}: fps must be positive")
        object.__setattr__(self, "frames", frames)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    def timestamps(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_frames) / self.fps


def _read_exact(f, n: int, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated {what} at byte {f.tell() - len(buf)}")
    return buf


def write_features(seq: FeatureSequence, path) -> None:
    path = Path(path)
    with open(path, "wb") as f:
        f.write(FEATURE_MAGIC)
        f.write(struct.pack("<IIIff", FORMAT_VERSION, seq.dim, seq.n_frames, seq.fps, seq.t0))
        f.write(np.ascontiguousarray(seq.frames, dtype="<f4").tobytes())


def read_features(path, video_id: str | None = None) -> FeatureSequence:
    path = Path(path)
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "magic")
        if magic != FEATURE_MAGIC:
            raise FormatError(f"bad magic {magic!r} at byte 0, expected {FEATURE_MAGIC!r}")
        version, dim, n_frames, fps, t0 = struct.unpack("<IIIff", _read_exact(f, 20, "header"))
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported feature file version {version} at byte 4")
        payload = _read_exact(f, 4 * dim * n_frames, "feature payload")
        extra = f.read(1)
        if extra:
            raise FormatError(f"trailing bytes at byte {f.tell() - 1}")
    frames = np.frombuffer(payload, dtype="<f4").reshape(n_frames, dim)
    return FeatureSequence(video_id or path.stem, frames.copy(), fps=fps, t0=t0)


def write_semantic_bank_file(names, vectors: np.ndarray, path) -> None:
    vectors = np.asarray(vectors, dtype=np.float32)
    names = list(names)
    if vectors.ndim != 2 or vectors.shape[0] != len(names):
        raise DimensionError(f"need one vector per name: {vectors.shape} vs {len(names)} names")
    with open(path, "wb") as f:
        f.write(BANK_MAGIC)
        f.write(struct.pack("<III", FORMAT_VERSION, len(names), vectors.shape[1]))
        for name in names:
            raw = name.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
        f.write(np.ascontiguousarray(vectors, dtype="<f4").tobytes())


def read_semantic_bank_file(path) -> tuple[list[str], np.ndarray]:
    """Read a VSB1 file; returns (class names, K x W float32 matrix)."""
    path = Path(path)
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "magic")
        if magic != BANK_MAGIC:
            raise FormatError(f"bad magic {magic!r} at byte 0, expected {BANK_MAGIC!r}")
        version, k, w = struct.unpack("<III", _read_exact(f, 12, "header"))
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported bank file version {version} at byte 4")
        names = []
        for _ in range(k):
            (length,) = struct.unpack("<I", _read_exact(f, 4, "name length"))
            names.append(_read_exact(f, length, "class name").decode("utf-8"))
        payload = _read_exact(f, 4 * k * w, "bank payload")
        extra = f.read(1)
        if extra:
            raise FormatError(f"trailing bytes at byte {f.tell() - 1}")
    vectors = np.frombuffer(payload, dtype="<f4").reshape(k, w)
    return names, vectors.copy()


def average_pool(frames: np.ndarray) -> np.ndarray:
    """Arithmetic mean over the time axis of a T x D matrix."""
    frames = np.asarray(frames)
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise DimensionError("average_pool expects a nonempty T x D matrix")
    return frames.mean(axis=0)


def slice_interval(seq: FeatureSequence, start_s: float, end_s: float) -> FeatureSequence:
    """Frames whose timestamp t0 + i/fps lies in [start_s, end_s)."""
    if not 0 <= start_s < end_s:
        raise ValidationError(f"bad interval [{start_s}, {end_s})")
    ts = seq.timestamps()
    mask = (ts >= start_s) & (ts < end_s)
    if not mask.any():
        raise DegenerateIntervalError(
            f"{seq.video_id}: interval [{start_s}, {end_s}) selects no frames"
        )
    idx = np.nonzero(mask)[0]
    return FeatureSequence(seq.video_id, seq.frames[idx].copy(), fps=seq.fps, t0=float(ts[idx[0]]))
