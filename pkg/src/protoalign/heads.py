"""Trainable embedding head and linear classifier.

The head maps each frame feature through a small MLP; the video embedding
is the temporal mean of the per-frame outputs. The classifier is a
bias-free linear projection onto class logits followed by a softmax.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .errors import DimensionError, ParameterError
from .features import FeatureSequence


class EmbeddingHead:
    """Stack of linear layers with rectified-linear units in between."""

    def __init__(self, weights: list[Parameter], biases: list[Parameter]):
        if len(weights) != len(biases) or not weights:
            raise ParameterError("head needs matching, nonempty weight/bias lists")
        self.weights = weights
        self.biases = biases

    @classmethod
    def create(cls, input_dim: int, embed_dim: int, depth: int, rng, prefix: str = "embedding"):
        """Fan-in-scaled uniform init; `depth` linear layers ending at embed_dim."""
        if depth < 1:
            raise ParameterError(f"depth must be >= 1, got {depth}")
        dims = [input_dim] + [embed_dim] * depth
        weights, biases = [], []
        for i, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
            weights.append(Parameter(ad.uniform_init((d_in, d_out), d_in, rng), f"{prefix}/w{i}"))
            biases.append(Parameter(ad.uniform_init((d_out,), d_in, rng), f"{prefix}/b{i}"))
        return cls(weights, biases)

    @property
    def input_dim(self) -> int:
        return self.weights[0].data.shape[0]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].data.shape[1]

    def forward(self, x) -> Tensor:
        """Apply the MLP to a frame matrix (rowwise) or a single vector."""
        out = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out = ad.add(ad.matmul(out, w), b)
            if i < last:
                out = ad.relu(out)
        return out

    def parameters(self) -> list[Parameter]:
        return [*self.weights, *self.biases]


class Classifier:
    """Bias-free K x C projection onto class logits."""

    def __init__(self, weight: Parameter):
        self.weight = weight

    @classmethod
    def create(cls, n_classes: int, embed_dim: int, rng, name: str = "classifier/w"):
        return cls(Parameter(ad.uniform_init((n_classes, embed_dim), embed_dim, rng), name))

    @property
    def n_classes(self) -> int:
        return self.weight.data.shape[0]

    def parameters(self) -> list[Parameter]:
        return [self.weight]


def embed_video(seq: FeatureSequence | np.ndarray, head: EmbeddingHead) -> Tensor:
    """Per-frame head outputs averaged over time: the video embedding z."""
    frames = seq.frames if isinstance(seq, FeatureSequence) else np.asarray(seq)
    if frames.ndim != 2 or frames.shape[1] != head.input_dim:
        raise DimensionError(
            f"frames {frames.shape} do not match head input dim {head.input_dim}"
        )
    return ad.mean_axis0(head.forward(frames.astype(np.float64)))


def classify(z, classifier: Classifier, tau_cls: float = 1.0) -> Tensor:
    """Softmax class probabilities p(y | z) from the linear logits."""
    if tau_cls <= 0:
        raise ParameterError(f"tau_cls must be positive, got {tau_cls}")
    logits = ad.matmul(classifier.weight, z)
    if tau_cls != 1.0:
        logits = ad.scale(logits, 1.0 / tau_cls)
    return ad.softmax(logits)
