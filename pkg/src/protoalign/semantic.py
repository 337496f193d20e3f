"""Fixed semantic bank of class-name embeddings and the mapping MLP.

The bank is loaded once from a VSB1 file, permuted into manifest class-id
order and frozen. A multilayer perceptron maps video embeddings into the
word-embedding space; only its final layer depends on the embedding
method's dimensionality.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .errors import DimensionError, ParameterError, ValidationError
from .features import read_semantic_bank_file

DEFAULT_HIDDEN = (512, 640, 768, 896)


class SemanticBank:
    """K x W frozen matrix of class-name embeddings, manifest-ordered."""

    def __init__(self, vectors: np.ndarray, names: list[str], normalized: bool):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(names):
            raise ValidationError("semantic bank needs one row per class name")
        self.rows = vectors
        self.rows.setflags(write=False)
        self.names = list(names)
        self.normalized = normalized

    @property
    def n_classes(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


def align_semantic_bank(names, vectors: np.ndarray, manifest, normalize: bool = True) -> SemanticBank:
    """Order bank rows by manifest class ids; optionally unit-normalize rows."""
    by_name = {name: i for i, name in enumerate(names)}
    if len(by_name) != len(names):
        raise ValidationError("semantic bank contains duplicate class names")
    missing = [c.name for c in manifest.classes if c.name not in by_name]
    if missing:
        raise ValidationError(f"semantic bank is missing classes: {', '.join(sorted(missing))}")
    vectors = np.asarray(vectors, dtype=np.float64)
    ordered = np.stack([vectors[by_name[c.name]] for c in manifest.classes])
    if normalize:
        norms = np.linalg.norm(ordered, axis=1, keepdims=True)
        if np.any(norms <= ad.EPS_NORM):
            raise ValidationError("semantic bank has a zero row; cannot normalize")
        ordered = ordered / norms
    return SemanticBank(ordered, [c.name for c in manifest.classes], normalized=normalize)


def load_semantic_bank(path, manifest, normalize: bool = True) -> SemanticBank:
    names, vectors = read_semantic_bank_file(path)
    return align_semantic_bank(names, vectors, manifest, normalize=normalize)


class SemanticMLP:
    """MLP g(.) from embedding space into word-embedding space."""

    def __init__(self, weights: list[Parameter], biases: list[Parameter]):
        self.weights = weights
        self.biases = biases

    @classmethod
    def create(
        cls,
        input_dim: int,
        output_dim: int,
        rng,
        hidden=DEFAULT_HIDDEN,
        prefix: str = "semantic",
    ):
        """Hidden widths default to the 512-640-768-896 ladder; biases start at zero."""
        if any(h < 1 for h in hidden):
            raise ParameterError("hidden widths must be positive")
        dims = [input_dim, *hidden, output_dim]
        weights, biases = [], []
        for i, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
            weights.append(Parameter(ad.uniform_init((d_in, d_out), d_in, rng), f"{prefix}/w{i}"))
            biases.append(Parameter(np.zeros(d_out), f"{prefix}/b{i}"))
        return cls(weights, biases)

    @property
    def output_dim(self) -> int:
        return self.weights[-1].data.shape[1]

    def parameters(self) -> list[Parameter]:
        return [*self.weights, *self.biases]


def semantic_map(z, mlp: SemanticMLP) -> Tensor:
    """g(z): the video embedding mapped into word-embedding space."""
    out = z
    last = len(mlp.weights) - 1
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        out = ad.add(ad.matmul(out, w), b)
        if i < last:
            out = ad.relu(out)
    return out


def semantic_probs(gz, bank: SemanticBank, tau: float) -> Tensor:
    """Distance softmax of g(z) against every semantic bank row."""
    gz_dim = gz.data.shape[0] if isinstance(gz, Tensor) else np.asarray(gz).shape[0]
    if gz_dim != bank.dim:
        raise DimensionError(f"g(z) has dim {gz_dim}, bank has dim {bank.dim}")
    return ad.distance_softmax(ad.row_distances(gz, bank.rows), tau)
