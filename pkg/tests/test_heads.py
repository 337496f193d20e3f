"""Embedding head and classifier behaviour."""

import numpy as np
import pytest

from protoalign import autodiff as ad
from protoalign import rng as rng_mod
from protoalign.errors import DimensionError, ParameterError
from protoalign.features import FeatureSequence
from protoalign.heads import Classifier, EmbeddingHead, classify, embed_video


def identity_head(dim):
    w = ad.Parameter(np.eye(dim), "embedding/w0")
    b = ad.Parameter(np.zeros(dim), "embedding/b0")
    return EmbeddingHead([w], [b])


def test_identity_head_pools_frames():
    z = embed_video(np.array([[1.0, 3.0], [3.0, 5.0]]), identity_head(2))
    np.testing.assert_allclose(z.data, [2.0, 4.0])


def test_single_frame_is_head_output():
    head = EmbeddingHead.create(3, 4, depth=2, rng=rng_mod.stream(0, "head"))
    frame = np.array([[0.5, -1.0, 2.0]])
    z = embed_video(frame, head)
    direct = head.forward(frame)
    np.testing.assert_allclose(z.data, direct.data[0])


def test_embed_dimension_mismatch():
    head = identity_head(2)
    with pytest.raises(DimensionError):
        embed_video(np.ones((3, 5)), head)


def test_embed_accepts_feature_sequence():
    seq = FeatureSequence("v", np.ones((4, 2), dtype=np.float32), fps=3.0)
    z = embed_video(seq, identity_head(2))
    np.testing.assert_allclose(z.data, [1.0, 1.0])


def test_embed_gradient_matches_finite_difference():
    gen = rng_mod.stream(3, "test")
    head = EmbeddingHead.create(4, 3, depth=2, rng=gen)
    frames = gen.standard_normal((5, 4))

    def loss_fn():
        return ad.nll_from_probs(ad.softmax(embed_video(frames, head)), 1)

    assert ad.grad_check(loss_fn, head.parameters()) < 1e-4


def test_embed_is_permutation_invariant():
    gen = rng_mod.stream(4, "test")
    head = EmbeddingHead.create(4, 3, depth=2, rng=gen)
    frames = gen.standard_normal((6, 4))
    shuffled = frames[gen.permutation(6)]
    np.testing.assert_allclose(
        embed_video(frames, head).data, embed_video(shuffled, head).data, atol=1e-12
    )


def test_linear_head_pool_order_commutes():
    # with a single linear layer, embedding then pooling equals pooling
    # then embedding: guards the per-frame-then-average order
    gen = rng_mod.stream(5, "test")
    head = EmbeddingHead.create(4, 3, depth=1, rng=gen)
    frames = gen.standard_normal((7, 4))
    embed_then_pool = embed_video(frames, head).data
    pool_then_embed = head.forward(frames.mean(axis=0)).data
    np.testing.assert_allclose(embed_then_pool, pool_then_embed, atol=1e-6)


def test_classify_uniform_for_zero_weights():
    clf = Classifier(ad.Parameter(np.zeros((5, 3)), "classifier/w"))
    p = classify(ad.Tensor(np.array([1.0, -2.0, 0.5])), clf)
    np.testing.assert_allclose(p.data, [0.2] * 5)
    assert abs(p.data.sum() - 1) < 1e-6


def test_classify_strong_logits():
    w = np.array([[10.0, 0.0], [-10.0, 0.0]])
    clf = Classifier(ad.Parameter(w, "classifier/w"))
    p = classify(ad.Tensor(np.array([1.0, 0.0])), clf)
    assert p.data[0] > 0.99


def test_classify_temperature_preserves_argmax():
    gen = rng_mod.stream(6, "test")
    clf = Classifier.create(4, 3, rng=gen)
    z = ad.Tensor(gen.standard_normal(3))
    base = np.argmax(classify(z, clf, tau_cls=1.0).data)
    for tau_cls in (0.1, 0.5, 2.0, 10.0):
        assert np.argmax(classify(z, clf, tau_cls=tau_cls).data) == base


def test_classify_distribution_for_random_inputs():
    gen = rng_mod.stream(7, "test")
    clf = Classifier.create(6, 4, rng=gen)
    for _ in range(10):
        p = classify(ad.Tensor(gen.standard_normal(4) * 100), clf).data
        assert abs(p.sum() - 1) < 1e-6


def test_head_depth_validation():
    with pytest.raises(ParameterError):
        EmbeddingHead.create(3, 4, depth=0, rng=rng_mod.stream(0, "x"))
