"""Model state container and the binary checkpoint format.

A checkpoint is little-endian: magic ``VSCK``, version u32=1, a
length-prefixed JSON config blob, a section count u32, then one section
per named tensor: length-prefixed name, rank u32, dims u32 each, float32
payload. Section names are slash-prefixed by component (``embedding/``,
``classifier/``, ``ga/``, ``semantic/``, ``visual_bank/``).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng as rng_mod
from .autodiff import Parameter
from .errors import FormatError, ParameterError, ValidationError
from .heads import Classifier, EmbeddingHead
from .semantic import DEFAULT_HIDDEN, SemanticBank, SemanticMLP
from .visual import GAParams, VisualBank

CHECKPOINT_MAGIC = b"VSCK"
CHECKPOINT_VERSION = 1

OBJECTIVES = ("full", "baseline", "triplet", "margin")


@dataclass
class ModelState:
    """Everything the objectives need: heads, banks and loss weights."""

    head: EmbeddingHead
    classifier: Classifier
    visual_bank: VisualBank
    ga: GAParams | None = None
    mlp: SemanticMLP | None = None
    semantic_bank: SemanticBank | None = None
    margin_beta: Parameter | None = None
    objective: str = "full"
    tau: float = 0.1
    tau_cls: float = 1.0
    lambda_visual: float = 1.0
    lambda_semantic: float = 1.0
    margin: float = 0.2

    @property
    def uses_visual(self) -> bool:
        return self.objective == "full" and self.lambda_visual > 0

    @property
    def uses_semantic(self) -> bool:
        return self.objective == "full" and self.lambda_semantic > 0

    def trainable_parameters(self) -> list[Parameter]:
        params = list(self.head.parameters())
        if self.objective in ("full", "baseline"):
            params += self.classifier.parameters()
        if self.uses_visual:
            params += self.ga.parameters()
        if self.uses_semantic:
            params += self.mlp.parameters()
        if self.objective == "margin":
            params.append(self.margin_beta)
        return params

    def all_parameters(self) -> list[Parameter]:
        params = list(self.head.parameters()) + self.classifier.parameters()
        if self.ga is not None:
            params += self.ga.parameters()
        if self.mlp is not None:
            params += self.mlp.parameters()
        if self.margin_beta is not None:
            params.append(self.margin_beta)
        return params

    def snap_float32(self) -> None:
        """Round every tensor through float32, the checkpoint precision."""
        for p in self.all_parameters():
            p.data = p.data.astype(np.float32).astype(np.float64)
        self.visual_bank.rows = self.visual_bank.rows.astype(np.float32).astype(np.float64)


def create_model(
    input_dim: int,
    n_classes: int,
    seed: int,
    embed_dim: int = 512,
    head_depth: int = 2,
    reduced_dim: int | None = None,
    semantic_hidden=DEFAULT_HIDDEN,
    semantic_bank: SemanticBank | None = None,
    objective: str = "full",
    tau: float = 0.1,
    tau_cls: float = 1.0,
    lambda_visual: float = 1.0,
    lambda_semantic: float = 1.0,
    bank_alpha: float = 0.9,
    margin: float = 0.2,
    beta_init: float = 1.2,
) -> ModelState:
    """Initialize all components from independent seeded streams.

    Each component draws from its own stream, so e.g. a baseline run and
    a full run share bit-identical head initializations.
    """
    if objective not in OBJECTIVES:
        raise ParameterError(f"objective must be one of {OBJECTIVES}, got {objective!r}")
    head = EmbeddingHead.create(input_dim, embed_dim, head_depth, rng_mod.stream(seed, "init", "embedding"))
    classifier = Classifier.create(n_classes, embed_dim, rng_mod.stream(seed, "init", "classifier"))
    bank = VisualBank(n_classes, embed_dim, alpha=bank_alpha)
    model = ModelState(
        head=head,
        classifier=classifier,
        visual_bank=bank,
        objective=objective,
        tau=tau,
        tau_cls=tau_cls,
        lambda_visual=lambda_visual,
        lambda_semantic=lambda_semantic,
        margin=margin,
    )
    if model.uses_visual:
        model.ga = GAParams.create(embed_dim, rng_mod.stream(seed, "init", "ga"), reduced_dim)
    if model.uses_semantic:
        if semantic_bank is None:
            raise ValidationError("objective 'full' with lambda_semantic > 0 needs a semantic bank")
        if semantic_bank.n_classes != n_classes:
            raise ValidationError(
                f"semantic bank has {semantic_bank.n_classes} classes, expected {n_classes}"
            )
        model.semantic_bank = semantic_bank
        model.mlp = SemanticMLP.create(
            embed_dim, semantic_bank.dim, rng_mod.stream(seed, "init", "semantic"), hidden=semantic_hidden
        )
    if objective == "margin":
        model.margin_beta = Parameter(np.asarray(beta_init, dtype=np.float64), "margin/beta")
    return model


# ---------------------------------------------------------------------------
# checkpoint I/O
# ---------------------------------------------------------------------------


def _write_block(f, raw: bytes) -> None:
    f.write(struct.pack("<I", len(raw)))
    f.write(raw)


def _read_block(f, what: str) -> bytes:
    header = f.read(4)
    if len(header) != 4:
        raise FormatError(f"truncated {what} length at byte {f.tell() - len(header)}")
    (length,) = struct.unpack("<I", header)
    raw = f.read(length)
    if len(raw) != length:
        raise FormatError(f"truncated {what} at byte {f.tell() - len(raw)}")
    return raw


def save_checkpoint(path, sections: dict[str, np.ndarray], config: dict) -> None:
    """Write named float32 tensors plus a JSON config blob."""
    path = Path(path)
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", CHECKPOINT_VERSION))
        _write_block(f, json.dumps(config, sort_keys=True).encode("utf-8"))
        names = sorted(sections)
        f.write(struct.pack("<I", len(names)))
        for name in names:
            tensor = np.asarray(sections[name], dtype="<f4")
            _write_block(f, name.encode("utf-8"))
            f.write(struct.pack("<I", tensor.ndim))
            for d in tensor.shape:
                f.write(struct.pack("<I", d))
            f.write(np.ascontiguousarray(tensor).tobytes())


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise FormatError(f"bad magic {magic!r} at byte 0, expected {CHECKPOINT_MAGIC!r}")
        (version,) = struct.unpack("<I", f.read(4))
        if version != CHECKPOINT_VERSION:
            raise FormatError(f"unsupported checkpoint version {version} at byte 4")
        config = json.loads(_read_block(f, "config").decode("utf-8"))
        (n_sections,) = struct.unpack("<I", f.read(4))
        sections: dict[str, np.ndarray] = {}
        for _ in range(n_sections):
            name = _read_block(f, "section name").decode("utf-8")
            rank_raw = f.read(4)
            if len(rank_raw) != 4:
                raise FormatError(f"truncated section rank at byte {f.tell() - len(rank_raw)}")
            (rank,) = struct.unpack("<I", rank_raw)
            dims = []
            for _ in range(rank):
                (d,) = struct.unpack("<I", f.read(4))
                dims.append(d)
            count = int(np.prod(dims)) if dims else 1
            payload = f.read(4 * count)
            if len(payload) != 4 * count:
                raise FormatError(f"truncated section {name!r} at byte {f.tell() - len(payload)}")
            sections[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
        extra = f.read(1)
        if extra:
            raise FormatError(f"trailing bytes at byte {f.tell() - 1}")
    return sections, config


def model_sections(model: ModelState) -> dict[str, np.ndarray]:
    sections = {p.name: p.data for p in model.all_parameters()}
    sections["visual_bank/v"] = model.visual_bank.rows
    return sections


def restore_model(sections: dict[str, np.ndarray], config: dict) -> ModelState:
    """Rebuild a ModelState from checkpoint sections and its config echo."""
    dims = config["dims"]
    model = create_model(
        input_dim=dims["input_dim"],
        n_classes=dims["n_classes"],
        seed=config.get("seed", 0),
        embed_dim=dims["embed_dim"],
        head_depth=dims["head_depth"],
        reduced_dim=dims.get("reduced_dim"),
        semantic_hidden=tuple(dims.get("semantic_hidden") or DEFAULT_HIDDEN),
        semantic_bank=_bank_stub(sections, config) if _needs_semantic(config) else None,
        objective=config["objective"],
        tau=config["tau"],
        tau_cls=config.get("tau_cls", 1.0),
        lambda_visual=config["lambda_visual"],
        lambda_semantic=config["lambda_semantic"],
        bank_alpha=config["bank_alpha"],
        margin=config.get("margin", 0.2),
        beta_init=config.get("beta_init", 1.2),
    )
    for p in model.all_parameters():
        if p.name not in sections:
            raise ValidationError(f"checkpoint is missing section {p.name!r}")
        stored = sections[p.name]
        if tuple(stored.shape) != tuple(p.data.shape):
            raise ValidationError(
                f"section {p.name!r} has shape {stored.shape}, expected {p.data.shape}"
            )
        p.data = stored.astype(np.float64)
    model.visual_bank.load_rows(sections["visual_bank/v"].astype(np.float64))
    return model


def _needs_semantic(config) -> bool:
    return config["objective"] == "full" and config["lambda_semantic"] > 0


def _bank_stub(sections, config) -> SemanticBank:
    # The frozen semantic bank is input data, not checkpoint state; a
    # restored model only needs its dimensions to rebuild the MLP.
    dims = config["dims"]
    k, w = dims["n_classes"], dims["semantic_dim"]
    stub = np.zeros((k, w))
    stub[:, 0] = 1.0
    return SemanticBank(stub, [f"class_{i}" for i in range(k)], normalized=True)
