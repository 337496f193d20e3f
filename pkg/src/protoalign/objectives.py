"""Training objectives: the three-term alignment loss and metric baselines.

The main objective averages, over a batch, the classification negative
log-likelihood plus weighted visual- and semantic-alignment NLL terms.
While any visual bank row is still zero (warm-up), the visual term is
skipped for the whole batch: distances to unseeded prototypes are
meaningless.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ValidationError
from .heads import classify, embed_video
from .model import ModelState
from .semantic import semantic_map, semantic_probs
from .visual import global_align, visual_probs


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    cls: float = 0.0
    visual: float = 0.0
    semantic: float = 0.0


def batch_objective(batch, model: ModelState) -> tuple[Tensor, LossBreakdown]:
    """Mean three-term loss over (frames, label) pairs; no backward call."""
    if not batch:
        raise ValidationError("batch must be nonempty")
    include_visual = model.uses_visual and model.visual_bank.warmed_up
    cls_terms, vis_terms, sem_terms = [], [], []
    for frames, label in batch:
        z = embed_video(frames, model.head)
        cls_terms.append(ad.nll_from_probs(classify(z, model.classifier, model.tau_cls), label))
        if include_visual:
            z_star = global_align(z, model.visual_bank, model.ga)
            vis_terms.append(ad.nll_from_probs(visual_probs(z_star, model.visual_bank, model.tau), label))
        if model.uses_semantic:
            gz = semantic_map(z, model.mlp)
            sem_terms.append(ad.nll_from_probs(semantic_probs(gz, model.semantic_bank, model.tau), label))

    cls_mean = ad.mean_scalars(cls_terms)
    total = cls_mean
    vis_value = sem_value = 0.0
    if vis_terms:
        vis_mean = ad.mean_scalars(vis_terms)
        vis_value = vis_mean.item()
        total = ad.add(total, ad.scale(vis_mean, model.lambda_visual))
    if sem_terms:
        sem_mean = ad.mean_scalars(sem_terms)
        sem_value = sem_mean.item()
        total = ad.add(total, ad.scale(sem_mean, model.lambda_semantic))
    return total, LossBreakdown(total.item(), cls_mean.item(), vis_value, sem_value)


def total_loss(batch, model: ModelState) -> LossBreakdown:
    """Backpropagate the batch objective into all trainable parameters."""
    loss, breakdown = batch_objective(batch, model)
    loss.backward()
    return breakdown


def triplet_loss(anchor, positive, negative, margin: float = 0.2) -> Tensor:
    """Hinge on squared distances: max(0, d(a,p)^2 - d(a,n)^2 + margin)."""
    gap = ad.sub(ad.squared_distance(anchor, positive), ad.squared_distance(anchor, negative))
    return ad.relu(ad.add_const(gap, margin))


def margin_loss(distance, is_positive: bool, beta, margin: float = 0.2) -> Tensor:
    """max(0, margin + y * (d - beta)) with y = +1 for positive pairs.

    `beta` is a learnable scalar boundary shared across pairs.
    """
    y = 1.0 if is_positive else -1.0
    return ad.relu(ad.add_const(ad.scale(ad.sub(distance, beta), y), margin))


def triplet_batch_objective(triplets, model: ModelState) -> tuple[Tensor, LossBreakdown]:
    """Mean triplet hinge over (anchor, positive, negative) frame triples."""
    terms = []
    for a_frames, p_frames, n_frames in triplets:
        a = embed_video(a_frames, model.head)
        p = embed_video(p_frames, model.head)
        n = embed_video(n_frames, model.head)
        terms.append(triplet_loss(a, p, n, model.margin))
    loss = ad.mean_scalars(terms)
    return loss, LossBreakdown(loss.item())


def margin_batch_objective(pairs, model: ModelState) -> tuple[Tensor, LossBreakdown]:
    """Mean margin loss over (frames_a, frames_b, is_positive) pairs."""
    terms = []
    for a_frames, b_frames, is_positive in pairs:
        a = embed_video(a_frames, model.head)
        b = embed_video(b_frames, model.head)
        d = ad.euclidean(a, b)
        terms.append(margin_loss(d, is_positive, model.margin_beta, model.margin))
    loss = ad.mean_scalars(terms)
    return loss, LossBreakdown(loss.item())


def embed_frames(frames: np.ndarray, model: ModelState) -> np.ndarray:
    """Forward-only video embedding (no graph kept by the caller)."""
    return embed_video(frames, model.head).data
