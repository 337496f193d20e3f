"""Word-embedding providers for semantic bank export.

Each method carries its published dimensionality: word2vec, GloVe and
fasttext are 300-d, ELMo 1024-d. A provider resolves one token to one
vector; multi-word class names are embedded as the unweighted mean of
their token vectors.

Two provider flavours exist. `FileVectors` reads the standard text format
("token v1 v2 ... vN" per line) covering word2vec/GloVe/fasttext exports
and per-word ELMo vectors precomputed offline (layer-averaged). When no
vectors file is supplied, `HashVectors` generates deterministic unit
vectors from a hash of the token: dimensionally faithful and fully
reproducible, but carrying no semantics; it exists so pipelines can run
end to end without the real embedding files.
"""

from __future__ import annotations

import hashlib
import logging
import re
from pathlib import Path

import numpy as np

log = logging.getLogger("vsextract")

METHOD_DIMS = {"word2vec": 300, "glove": 300, "fasttext": 300, "elmo": 1024}


class OOVError(Exception):
    """One or more tokens are missing from the vector vocabulary."""

    def __init__(self, tokens):
        self.tokens = sorted(set(tokens))
        super().__init__(f"out-of-vocabulary tokens: {', '.join(self.tokens)}")


def tokenize(name: str) -> list[str]:
    tokens = re.findall(r"[a-z0-9]+", name.lower())
    if not tokens:
        raise ValueError(f"class name {name!r} yields no tokens")
    return tokens


class FileVectors:
    """Text-format vector table, one 'token v1 ... vN' line per token."""

    def __init__(self, path, expected_dim: int):
        self.vectors: dict[str, np.ndarray] = {}
        path = Path(path)
        with open(path, "r", encoding="utf-8") as f:
            for line_no, line in enumerate(f, start=1):
                parts = line.rstrip("\n").split(" ")
                if line_no == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                    continue  # word2vec-style header line "count dim"
                token, values = parts[0], parts[1:]
                if not values:
                    continue
                vec = np.asarray(values, dtype=np.float32)
                if vec.shape[0] != expected_dim:
                    raise ValueError(
                        f"{path}:{line_no}: vector has {vec.shape[0]} dims, expected {expected_dim}"
                    )
                self.vectors[token] = vec
        if not self.vectors:
            raise ValueError(f"{path}: no vectors parsed")
        self.dim = expected_dim

    def lookup(self, token: str) -> np.ndarray | None:
        return self.vectors.get(token)


class HashVectors:
    """Deterministic unit vectors from token hashes (offline stand-in)."""

    def __init__(self, dim: int):
        self.dim = dim

    def lookup(self, token: str) -> np.ndarray:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        gen = np.random.Generator(np.random.Philox(int.from_bytes(digest, "little")))
        vec = gen.standard_normal(self.dim)
        return (vec / np.linalg.norm(vec)).astype(np.float32)


def make_provider(method: str, vectors_path=None):
    method = method.lower()
    if method not in METHOD_DIMS:
        raise ValueError(f"unknown embedding method {method!r}; choose from {sorted(METHOD_DIMS)}")
    dim = METHOD_DIMS[method]
    if vectors_path is not None:
        return FileVectors(vectors_path, dim)
    log.warning(
        "no vectors file for %s: emitting deterministic hash vectors at the "
        "method's %d dims (no real semantics)", method, dim,
    )
    return HashVectors(dim)


def embed_names(names, provider) -> np.ndarray:
    """One row per class name: the mean of its token vectors."""
    rows, missing = [], []
    for name in names:
        token_vectors = []
        for token in tokenize(name):
            vec = provider.lookup(token)
            if vec is None:
                missing.append(token)
            else:
                token_vectors.append(vec)
        if not missing:
            rows.append(np.mean(token_vectors, axis=0))
    if missing:
        raise OOVError(missing)
    return np.stack(rows).astype(np.float32)
