"""Named experiment presets.

The "reference" training preset keeps the full-scale schedule (16k
iterations, lr 1e-4 dropping to 1e-5 at 8k, batch 16, the deep semantic
MLP); "desk" scales everything down to minutes on a laptop CPU while
preserving the qualitative behaviour, and is what the standard synthetic
benchmark uses.
"""

from __future__ import annotations

from .semantic import DEFAULT_HIDDEN
from .synthetic import SyntheticSpec

TRAIN_PRESETS: dict[str, dict] = {
    "reference": {
        "embed_dim": 512,
        "head_depth": 2,
        "semantic_hidden": DEFAULT_HIDDEN,
        "tau": 0.1,
        "lambda_visual": 1.0,
        "lambda_semantic": 1.0,
        "bank_alpha": 0.9,
        "learning_rate": 1e-4,
        "lr_drop_at": 0.5,
        "lr_drop_factor": 0.1,
        "weight_decay": 1e-5,
        "batch_size": 16,
        "n_iters": 16000,
    },
    "desk": {
        "embed_dim": 64,
        "head_depth": 2,
        "semantic_hidden": (128,),
        "tau": 0.1,
        "lambda_visual": 1.0,
        "lambda_semantic": 1.0,
        "bank_alpha": 0.9,
        "learning_rate": 1e-3,
        "lr_drop_at": 0.5,
        "lr_drop_factor": 0.1,
        "weight_decay": 1e-5,
        "batch_size": 16,
        "n_iters": 2000,
    },
}

# The standard synthetic imbalanced benchmark: 20 base classes with 60
# training videos each against 20 novel classes with 5, in 64 dimensions,
# hard enough that a plain classification embedding visibly neglects the
# novel tier.
BENCHMARK_DATA = SyntheticSpec(
    n_base=20,
    n_novel=20,
    dim=64,
    base_train=60,
    novel_train=5,
    test_per_class=12,
    n_distractors=60,
    cluster_spread=1.0,
    frame_noise=1.0,
    semantic_dim=32,
    seed=11,
)

BENCHMARK_TRAIN = TRAIN_PRESETS["desk"]


def train_params(preset: str, **overrides) -> dict:
    if preset not in TRAIN_PRESETS:
        raise KeyError(f"unknown preset {preset!r}; choose from {sorted(TRAIN_PRESETS)}")
    params = dict(TRAIN_PRESETS[preset])
    params.update(overrides)
    return params
