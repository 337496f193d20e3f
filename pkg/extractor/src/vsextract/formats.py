"""Writers for the engine's binary input formats.

Little-endian. Feature file: magic ``VSF1``, version u32=1, D u32, T u32,
fps f32, t0 f32, then T*D float32 row-major. Semantic bank: magic
``VSB1``, version u32=1, K u32, W u32, K length-prefixed UTF-8 names,
then K*W float32. These definitions are the contract with the retrieval
engine; they are duplicated here on purpose so the extractor stays
independent of it.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

FEATURE_MAGIC = b"VSF1"
BANK_MAGIC = b"VSB1"
VERSION = 1


def write_feature_file(path, frames: np.ndarray, fps: float, t0: float = 0.0) -> None:
    frames = np.ascontiguousarray(frames, dtype="<f4")
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise ValueError("frames must be a nonempty T x D matrix")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(FEATURE_MAGIC)
        f.write(struct.pack("<IIIff", VERSION, frames.shape[1], frames.shape[0], fps, t0))
        f.write(frames.tobytes())


def write_bank_file(path, names, vectors: np.ndarray) -> None:
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    names = list(names)
    if vectors.ndim != 2 or vectors.shape[0] != len(names):
        raise ValueError("need one vector per class name")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(BANK_MAGIC)
        f.write(struct.pack("<III", VERSION, len(names), vectors.shape[1]))
        for name in names:
            raw = name.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
        f.write(vectors.tobytes())
