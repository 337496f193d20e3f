"""Semantic bank loading/alignment and the mapping MLP."""

import numpy as np
import pytest

from protoalign import autodiff as ad
from protoalign import rng as rng_mod
from protoalign.errors import ValidationError
from protoalign.features import write_semantic_bank_file
from protoalign.manifest import ClassInfo, Manifest, VideoRecord, validate_manifest
from protoalign.semantic import (
    DEFAULT_HIDDEN,
    SemanticMLP,
    align_semantic_bank,
    load_semantic_bank,
    semantic_map,
    semantic_probs,
)


def tiny_manifest(names=("alpha", "beta", "gamma")):
    classes = [ClassInfo(i, name, "base" if i == 0 else "novel") for i, name in enumerate(names)]
    videos = [
        VideoRecord("v0", 0, "train", 5.0, (0.0, 5.0), "f/v0.vsf"),
        VideoRecord("v1", 1, "test", 5.0, (0.0, 5.0), "f/v1.vsf"),
    ]
    return validate_manifest(Manifest(1, classes, videos))


def test_shuffled_bank_reorders_to_class_ids(tmp_path):
    manifest = tiny_manifest()
    vectors = np.array([[0.0, 2.0], [3.0, 0.0], [0.0, 5.0]], dtype=np.float32)
    write_semantic_bank_file(["gamma", "alpha", "beta"], vectors, tmp_path / "b.vsb")
    bank = load_semantic_bank(tmp_path / "b.vsb", manifest, normalize=False)
    np.testing.assert_allclose(bank.rows[0], [3.0, 0.0])  # alpha
    np.testing.assert_allclose(bank.rows[1], [0.0, 5.0])  # beta
    np.testing.assert_allclose(bank.rows[2], [0.0, 2.0])  # gamma
    assert bank.names == ["alpha", "beta", "gamma"]


def test_missing_class_is_named(tmp_path):
    manifest = tiny_manifest()
    vectors = np.ones((2, 2), dtype=np.float32)
    write_semantic_bank_file(["alpha", "beta"], vectors, tmp_path / "b.vsb")
    with pytest.raises(ValidationError, match="gamma"):
        load_semantic_bank(tmp_path / "b.vsb", manifest)


def test_rows_normalized_by_default():
    manifest = tiny_manifest()
    vectors = np.array([[3.0, 4.0], [0.0, 2.0], [5.0, 0.0]])
    bank = align_semantic_bank(["alpha", "beta", "gamma"], vectors, manifest)
    np.testing.assert_allclose(np.linalg.norm(bank.rows, axis=1), 1.0, atol=1e-12)
    assert bank.normalized


def test_bank_rows_frozen():
    manifest = tiny_manifest()
    bank = align_semantic_bank(["alpha", "beta", "gamma"], np.eye(3), manifest)
    with pytest.raises(ValueError):
        bank.rows[0, 0] = 5.0


def test_full_scale_bank_dims(tmp_path):
    names = [f"class_{i}" for i in range(200)]
    classes = [ClassInfo(i, n, "base" if i < 100 else "novel") for i, n in enumerate(names)]
    videos = [
        VideoRecord("v0", 0, "train", 5.0, (0.0, 5.0), "f/v0.vsf"),
        VideoRecord("v1", 1, "test", 5.0, (0.0, 5.0), "f/v1.vsf"),
    ]
    manifest = validate_manifest(Manifest(1, classes, videos))
    gen = rng_mod.stream(0, "bank")
    write_semantic_bank_file(names, gen.standard_normal((200, 1024)).astype(np.float32), tmp_path / "b.vsb")
    bank = load_semantic_bank(tmp_path / "b.vsb", manifest)
    assert bank.rows.shape == (200, 1024)


def test_mlp_default_ladder_dimensions():
    mlp = SemanticMLP.create(512, 1024, rng_mod.stream(1, "mlp"))
    widths = [w.data.shape for w in mlp.weights]
    assert widths == [(512, 512), (512, 640), (640, 768), (768, 896), (896, 1024)]
    assert DEFAULT_HIDDEN == (512, 640, 768, 896)


def test_mlp_final_layer_tracks_bank_dim():
    for w_dim in (300, 1024):
        mlp = SemanticMLP.create(64, w_dim, rng_mod.stream(2, "mlp"), hidden=(32,))
        assert mlp.output_dim == w_dim


def test_zero_mlp_maps_to_zero():
    mlp = SemanticMLP.create(4, 6, rng_mod.stream(3, "mlp"), hidden=(5,))
    for w in mlp.weights:
        w.data[:] = 0.0
    out = semantic_map(ad.Tensor(np.array([1.0, -2.0, 3.0, 0.5])), mlp)
    np.testing.assert_array_equal(out.data, np.zeros(6))


def test_semantic_map_gradient():
    gen = rng_mod.stream(4, "mlp")
    mlp = SemanticMLP.create(5, 4, gen, hidden=(6, 7))
    manifest = tiny_manifest()
    bank = align_semantic_bank(["alpha", "beta", "gamma"], gen.standard_normal((3, 4)), manifest)
    z0 = gen.standard_normal(5)

    def loss_fn():
        gz = semantic_map(ad.Tensor(z0), mlp)
        return ad.nll_from_probs(semantic_probs(gz, bank, 0.5), 1)

    assert ad.grad_check(loss_fn, mlp.parameters()) < 1e-4


def test_semantic_probs_argmax_and_uniform():
    manifest = tiny_manifest()
    bank = align_semantic_bank(["alpha", "beta", "gamma"], np.eye(3), manifest, normalize=False)
    p = semantic_probs(ad.Tensor(np.array([0.0, 1.0, 0.0])), bank, 0.1)
    assert np.argmax(p.data) == 1
    same = align_semantic_bank(
        ["alpha", "beta", "gamma"], np.tile([1.0, 0.0, 0.0], (3, 1)), manifest, normalize=False
    )
    p = semantic_probs(ad.Tensor(np.array([0.2, 0.4, -0.3])), same, 1.0)
    np.testing.assert_allclose(p.data, 1 / 3, atol=1e-9)


def test_semantic_probs_derived_distances():
    manifest = tiny_manifest()
    rows = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]])
    bank = align_semantic_bank(["alpha", "beta", "gamma"], rows, manifest, normalize=False)
    p = semantic_probs(ad.Tensor(np.array([1.0, 0.0])), bank, 1.0)
    np.testing.assert_allclose(p.data, [0.66524, 0.24473, 0.09003], atol=5e-6)


def test_bank_bytes_stable_across_training(small_dataset, small_model):
    from protoalign.semantic import load_semantic_bank

    raw_before = small_dataset["bank_path"].read_bytes()
    # small_model was trained against this bank file; it must be untouched
    assert small_dataset["bank_path"].read_bytes() == raw_before
    bank = load_semantic_bank(small_dataset["bank_path"], small_dataset["manifest"])
    assert not bank.rows.flags.writeable
