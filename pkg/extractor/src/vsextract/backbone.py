"""Frozen convolutional backbone for per-frame features.

ResNet-18's penultimate layer (512-d global average pool) is the default.
Weights come from a local state-dict file when given; otherwise the
architecture is initialized from a fixed seed so feature extraction stays
deterministic, with a warning that retrieval quality needs real
pretrained weights.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import torch
from torch import nn
from torchvision.models import resnet18

log = logging.getLogger("vsextract")

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

BACKBONES = {"resnet18": (resnet18, 512)}


class FrameEncoder:
    """Maps uint8 RGB frames (N, H, W, 3) to pooled backbone features."""

    def __init__(self, name: str = "resnet18", weights_path: str | None = None, seed: int = 0):
        if name not in BACKBONES:
            raise ValueError(f"unknown backbone {name!r}; choose from {sorted(BACKBONES)}")
        factory, self.dim = BACKBONES[name]
        torch.manual_seed(seed)
        model = factory(weights=None)
        if weights_path is not None:
            state = torch.load(Path(weights_path), map_location="cpu", weights_only=True)
            model.load_state_dict(state)
            log.info("loaded %s weights from %s", name, weights_path)
        else:
            log.warning(
                "no weights file given: using a seed-%d random %s; features are "
                "deterministic but not semantically pretrained", seed, name,
            )
        # everything up to (and including) the global average pool
        self.trunk = nn.Sequential(*list(model.children())[:-1]).eval()
        for p in self.trunk.parameters():
            p.requires_grad_(False)
        self.mean = torch.tensor(IMAGENET_MEAN).view(1, 3, 1, 1)
        self.std = torch.tensor(IMAGENET_STD).view(1, 3, 1, 1)

    @torch.no_grad()
    def encode(self, frames: np.ndarray, batch_size: int = 32) -> np.ndarray:
        """frames: (N, H, W, 3) uint8 RGB -> (N, dim) float32."""
        if frames.ndim != 4 or frames.shape[-1] != 3:
            raise ValueError(f"expected (N, H, W, 3) RGB frames, got {frames.shape}")
        out = []
        for start in range(0, len(frames), batch_size):
            chunk = frames[start : start + batch_size]
            x = torch.from_numpy(chunk.astype(np.float32) / 255.0).permute(0, 3, 1, 2)
            x = (x - self.mean) / self.std
            feats = self.trunk(x).flatten(1)
            out.append(feats.numpy().astype(np.float32))
        return np.concatenate(out) if out else np.zeros((0, self.dim), dtype=np.float32)
