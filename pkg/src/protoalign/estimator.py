"""Scikit-learn style estimator wrapping the training loop.

`VideoEmbedder.fit` consumes frame-feature sequences plus class labels
and learns the embedding head together with the alignment modules;
`transform` maps sequences to video-level embeddings for indexing. All
hyperparameters mirror the constructor arguments, so the estimator
composes with sklearn tooling (`get_params`, `set_params`, cloning).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import rng as rng_mod
from .autodiff import AdamState, adam_step, zero_grads
from .errors import ParameterError, TrainingError, ValidationError
from .features import FeatureSequence
from .model import (
    create_model,
    load_checkpoint,
    model_sections,
    restore_model,
    save_checkpoint,
)
from .objectives import (
    LossBreakdown,
    batch_objective,
    embed_frames,
    margin_batch_objective,
    triplet_batch_objective,
)
from .semantic import DEFAULT_HIDDEN
from .visual import bank_update

_CONFIG_PARAMS = (
    "embed_dim",
    "head_depth",
    "reduced_dim",
    "semantic_hidden",
    "objective",
    "tau",
    "tau_cls",
    "lambda_visual",
    "lambda_semantic",
    "bank_alpha",
    "learning_rate",
    "lr_drop_at",
    "lr_drop_factor",
    "weight_decay",
    "batch_size",
    "n_iters",
    "margin",
    "beta_init",
    "max_frames",
    "seed",
)


def _as_frames(x, what: str = "sequence") -> np.ndarray:
    frames = x.frames if isinstance(x, FeatureSequence) else np.asarray(x)
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise ValidationError(f"{what} must be a nonempty T x D frame matrix")
    if not np.all(np.isfinite(frames)):
        raise ValidationError(f"{what} contains non-finite values")
    return frames


def _cap_frames(frames: np.ndarray, max_frames: int | None) -> np.ndarray:
    if max_frames is None or frames.shape[0] <= max_frames:
        return frames
    t = frames.shape[0]
    idx = np.floor(np.arange(max_frames) * t / max_frames).astype(int)
    return frames[idx]


class VideoEmbedder(TransformerMixin, BaseEstimator):
    """Learns balanced video embeddings from an imbalanced training set.

    Parameters follow the training setup: `objective` selects the loss
    ("full" three-term alignment, classification-only "baseline", or the
    metric-learning "triplet"/"margin" baselines); `lambda_visual` /
    `lambda_semantic` weight the alignment terms, so objective="full"
    with `lambda_semantic=0` is the visual-only ablation.
    """

    def __init__(
        self,
        embed_dim: int = 512,
        head_depth: int = 2,
        reduced_dim: int | None = None,
        semantic_hidden: tuple = DEFAULT_HIDDEN,
        objective: str = "full",
        tau: float = 0.1,
        tau_cls: float = 1.0,
        lambda_visual: float = 1.0,
        lambda_semantic: float = 1.0,
        bank_alpha: float = 0.9,
        learning_rate: float = 1e-4,
        lr_drop_at: float = 0.5,
        lr_drop_factor: float = 0.1,
        weight_decay: float = 1e-5,
        batch_size: int = 16,
        n_iters: int = 2000,
        margin: float = 0.2,
        beta_init: float = 1.2,
        n_classes: int | None = None,
        max_frames: int | None = None,
        seed: int = 0,
    ):
        self.embed_dim = embed_dim
        self.head_depth = head_depth
        self.reduced_dim = reduced_dim
        self.semantic_hidden = semantic_hidden
        self.objective = objective
        self.tau = tau
        self.tau_cls = tau_cls
        self.lambda_visual = lambda_visual
        self.lambda_semantic = lambda_semantic
        self.bank_alpha = bank_alpha
        self.learning_rate = learning_rate
        self.lr_drop_at = lr_drop_at
        self.lr_drop_factor = lr_drop_factor
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.n_iters = n_iters
        self.margin = margin
        self.beta_init = beta_init
        self.n_classes = n_classes
        self.max_frames = max_frames
        self.seed = seed

    # -- training ----------------------------------------------------------

    def fit(self, X, y, semantic_bank=None):
        """Train on sequences X with integer class labels y.

        `semantic_bank` (a SemanticBank) is required when the full
        objective has a positive semantic weight.
        """
        y = np.asarray(y, dtype=np.int64)
        if len(X) == 0 or len(X) != len(y):
            raise ValidationError(f"need matching X and y, got {len(X)} vs {len(y)}")
        if self.batch_size < 1 or self.n_iters < 0:
            raise ParameterError("batch_size must be >= 1 and n_iters >= 0")
        frames = [_cap_frames(_as_frames(x, f"X[{i}]"), self.max_frames) for i, x in enumerate(X)]
        dim = frames[0].shape[1]
        for i, fr in enumerate(frames):
            if fr.shape[1] != dim:
                raise ValidationError(f"X[{i}] has dim {fr.shape[1]}, expected {dim}")
        n_classes = self.n_classes or int(y.max()) + 1
        if y.min() < 0 or y.max() >= n_classes:
            raise ValidationError(f"labels must lie in [0, {n_classes})")

        model = create_model(
            input_dim=dim,
            n_classes=n_classes,
            seed=self.seed,
            embed_dim=self.embed_dim,
            head_depth=self.head_depth,
            reduced_dim=self.reduced_dim,
            semantic_hidden=tuple(self.semantic_hidden),
            semantic_bank=semantic_bank,
            objective=self.objective,
            tau=self.tau,
            tau_cls=self.tau_cls,
            lambda_visual=self.lambda_visual,
            lambda_semantic=self.lambda_semantic,
            bank_alpha=self.bank_alpha,
            margin=self.margin,
            beta_init=self.beta_init,
        )
        params = model.trainable_parameters()
        state = AdamState(lr=self.learning_rate, weight_decay=self.weight_decay)
        by_class: dict[int, list[int]] = {}
        for i, label in enumerate(y):
            by_class.setdefault(int(label), []).append(i)
        class_ids = sorted(by_class)

        history: list[LossBreakdown] = []
        drop_iter = int(self.lr_drop_at * self.n_iters)
        for it in range(self.n_iters):
            gen = rng_mod.stream(self.seed, "batch", it)
            zero_grads(params)
            if self.objective in ("full", "baseline"):
                idx = gen.choice(len(frames), size=min(self.batch_size, len(frames)), replace=False)
                batch = [(frames[i], int(y[i])) for i in idx]
                touched = list(batch)
                loss, breakdown = batch_objective(batch, model)
            elif self.objective == "triplet":
                batch, touched = self._sample_triplets(gen, frames, y, by_class, class_ids)
                loss, breakdown = triplet_batch_objective(batch, model)
            else:
                batch, touched = self._sample_pairs(gen, frames, y, by_class, class_ids)
                loss, breakdown = margin_batch_objective(batch, model)
            if not np.isfinite(breakdown.total):
                raise TrainingError(f"non-finite loss at iteration {it}")
            loss.backward()
            state.lr = self.learning_rate * (self.lr_drop_factor if it >= drop_iter else 1.0)
            adam_step(params, state)
            for item_frames, label in touched:
                bank_update(model.visual_bank, label, embed_frames(item_frames, model))
            history.append(breakdown)

        model.snap_float32()
        self.model_ = model
        self.loss_history_ = history
        self.n_iter_ = self.n_iters
        self.n_features_in_ = dim
        self.n_classes_ = n_classes
        self.classes_ = np.arange(n_classes)
        return self

    def _sample_triplets(self, gen, frames, y, by_class, class_ids):
        triplets, touched = [], []
        for _ in range(self.batch_size):
            ca, cb = gen.choice(len(class_ids), size=2, replace=False)
            pos_pool = by_class[class_ids[ca]]
            neg_pool = by_class[class_ids[cb]]
            if len(pos_pool) >= 2:
                a, p = (pos_pool[int(i)] for i in gen.choice(len(pos_pool), size=2, replace=False))
            else:
                a = p = pos_pool[0]
            n = neg_pool[int(gen.integers(len(neg_pool)))]
            triplets.append((frames[a], frames[p], frames[n]))
            touched.extend(((frames[a], int(y[a])), (frames[p], int(y[p])), (frames[n], int(y[n]))))
        return triplets, touched

    def _sample_pairs(self, gen, frames, y, by_class, class_ids):
        pairs, touched = [], []
        for j in range(self.batch_size):
            if j % 2 == 0:
                c = class_ids[int(gen.integers(len(class_ids)))]
                pool = by_class[c]
                if len(pool) >= 2:
                    a, b = (pool[int(i)] for i in gen.choice(len(pool), size=2, replace=False))
                else:
                    a = b = pool[0]
                pairs.append((frames[a], frames[b], True))
            else:
                ca, cb = gen.choice(len(class_ids), size=2, replace=False)
                a = by_class[class_ids[ca]][int(gen.integers(len(by_class[class_ids[ca]])))]
                b = by_class[class_ids[cb]][int(gen.integers(len(by_class[class_ids[cb]])))]
                pairs.append((frames[a], frames[b], False))
            touched.extend(((frames[a], int(y[a])), (frames[b], int(y[b]))))
        return pairs, touched

    # -- inference ---------------------------------------------------------

    def transform(self, X) -> np.ndarray:
        """Video-level embeddings z, one row per input sequence."""
        self._check_fitted()
        rows = [
            embed_frames(_cap_frames(_as_frames(x, f"X[{i}]"), self.max_frames), self.model_)
            for i, x in enumerate(X)
        ]
        return np.stack(rows) if rows else np.zeros((0, self.embed_dim))

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise ValidationError("estimator is not fitted; call fit() or load() first")

    # -- persistence -------------------------------------------------------

    def save(self, path) -> None:
        self._check_fitted()
        model = self.model_
        config = {k: getattr(self, k) for k in _CONFIG_PARAMS}
        config["semantic_hidden"] = list(config["semantic_hidden"])
        config["dims"] = {
            "input_dim": self.n_features_in_,
            "n_classes": self.n_classes_,
            "embed_dim": self.embed_dim,
            "head_depth": self.head_depth,
            "reduced_dim": self.reduced_dim,
            "semantic_hidden": list(self.semantic_hidden),
            "semantic_dim": model.semantic_bank.dim if model.semantic_bank is not None else None,
        }
        config["iteration"] = self.n_iter_
        save_checkpoint(path, model_sections(model), config)

    @classmethod
    def load(cls, path) -> "VideoEmbedder":
        sections, config = load_checkpoint(path)
        est = cls(
            **{
                k: (tuple(config[k]) if k == "semantic_hidden" else config[k])
                for k in _CONFIG_PARAMS
                if k in config
            }
        )
        est.model_ = restore_model(sections, config)
        est.n_iter_ = config.get("iteration", 0)
        est.n_features_in_ = config["dims"]["input_dim"]
        est.n_classes_ = config["dims"]["n_classes"]
        est.classes_ = np.arange(est.n_classes_)
        return est
