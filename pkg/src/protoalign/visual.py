"""Visual prototype bank, attention alignment and its probability head.

The bank keeps one exponentially-averaged, unit-norm prototype row per
class. It starts at zero and is a buffer, not a parameter: no gradient
ever flows through its rows. The alignment operator is a single-head
scaled dot-product attention over the bank rows with a residual
connection; its output projection starts at zero so the operator is
exactly the identity at initialization.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import EPS_NORM, Parameter, Tensor
from .errors import DegenerateInputError, DiagnosticError, ParameterError, ValidationError


class VisualBank:
    """K x C EMA prototype matrix, zero until a class is first seen."""

    def __init__(self, n_classes: int, dim: int, alpha: float = 0.9):
        if not 0 < alpha <= 1:
            raise ParameterError(f"alpha must lie in (0, 1], got {alpha}")
        if n_classes < 1 or dim < 1:
            raise ParameterError("bank needs at least one class and one dimension")
        self.alpha = float(alpha)
        self.rows = np.zeros((n_classes, dim), dtype=np.float64)
        self.updated = np.zeros(n_classes, dtype=bool)

    @property
    def n_classes(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    @property
    def warmed_up(self) -> bool:
        return bool(self.updated.all())

    def load_rows(self, rows: np.ndarray) -> None:
        rows = np.asarray(rows, dtype=np.float64)
        if rows.shape != self.rows.shape:
            raise ValidationError(f"bank rows {rows.shape} do not match {self.rows.shape}")
        self.rows = rows.copy()
        self.updated = np.linalg.norm(rows, axis=1) > 0


def bank_update(bank: VisualBank, class_id: int, z: np.ndarray) -> VisualBank:
    """EMA-update one prototype row with the (normalized) embedding z.

    V_y <- alpha * z/||z|| + (1 - alpha) * V_y, then renormalized. All
    other rows are untouched; z is treated as a constant.
    """
    if not 0 <= class_id < bank.n_classes:
        raise ValidationError(f"class {class_id} out of range")
    z = np.asarray(z, dtype=np.float64)
    norm = np.linalg.norm(z)
    if norm <= EPS_NORM:
        raise DegenerateInputError(f"bank update with near-zero embedding (norm {norm:.3e})")
    mixed = bank.alpha * (z / norm) + (1.0 - bank.alpha) * bank.rows[class_id]
    bank.rows[class_id] = mixed / np.linalg.norm(mixed)
    bank.updated[class_id] = True
    return bank


class GAParams:
    """Projections of the global alignment attention operator."""

    def __init__(self, w_q: Parameter, w_k: Parameter, w_v: Parameter, w_o: Parameter):
        self.w_q, self.w_k, self.w_v, self.w_o = w_q, w_k, w_v, w_o

    @classmethod
    def create(cls, dim: int, rng, reduced_dim: int | None = None, prefix: str = "ga"):
        reduced = reduced_dim or max(dim // 2, 1)
        return cls(
            Parameter(ad.uniform_init((dim, reduced), dim, rng), f"{prefix}/w_q"),
            Parameter(ad.uniform_init((dim, reduced), dim, rng), f"{prefix}/w_k"),
            Parameter(ad.uniform_init((dim, reduced), dim, rng), f"{prefix}/w_v"),
            Parameter(np.zeros((reduced, dim)), f"{prefix}/w_o"),
        )

    @property
    def reduced_dim(self) -> int:
        return self.w_q.data.shape[1]

    def parameters(self) -> list[Parameter]:
        return [self.w_q, self.w_k, self.w_v, self.w_o]


def global_align(z, bank: VisualBank, params: GAParams) -> Tensor:
    """Aligned embedding z* = z + softmax(q k^T / sqrt(C')) (V W_v) W_o.

    Queries come from z, keys and values from the bank rows, which are
    constants here (stop-gradient).
    """
    rows = bank.rows
    q = ad.matmul(z, params.w_q)
    keys = ad.matmul(rows, params.w_k)
    values = ad.matmul(rows, params.w_v)
    scores = ad.scale(ad.matmul(keys, q), 1.0 / np.sqrt(params.reduced_dim))
    attn = ad.softmax(scores)
    mixed = ad.matmul(ad.matmul(attn, values), params.w_o)
    return ad.add(z, mixed)


def visual_probs(z_star, bank: VisualBank, tau: float) -> Tensor:
    """Distance softmax of z* against every bank row."""
    return ad.distance_softmax(ad.row_distances(z_star, bank.rows), tau)


def scatteredness(bank: VisualBank, class_ids) -> float:
    """Mean pairwise Euclidean distance between the chosen prototypes."""
    class_ids = list(class_ids)
    if len(class_ids) < 2:
        raise DiagnosticError("scatteredness needs at least two classes")
    for c in class_ids:
        if not bank.updated[c]:
            raise DiagnosticError(f"class {c} has never been updated in the bank")
    rows = bank.rows[class_ids]
    total, count = 0.0, 0
    for i in range(len(rows)):
        diffs = rows[i + 1 :] - rows[i]
        total += float(np.linalg.norm(diffs, axis=1).sum())
        count += len(diffs)
    return total / count
