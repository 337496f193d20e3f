"""Training loop: determinism, checkpoints, objectives, schedules."""

import numpy as np
import pytest

from protoalign import pipeline
from protoalign.errors import ValidationError
from protoalign.estimator import VideoEmbedder
from protoalign.metrics import evaluate_run
from protoalign.semantic import load_semantic_bank


def small_params(**overrides):
    params = dict(embed_dim=16, semantic_hidden=(24,), n_iters=60,
                  learning_rate=1e-3, batch_size=8, seed=7)
    params.update(overrides)
    return params


def fit_small(data, **overrides):
    return pipeline.fit_from_manifest(
        data["manifest"], data["root"], semantic_bank_path=data["bank_path"],
        store=data["store"], **small_params(**overrides),
    )


def test_zero_iterations_equals_initialization(small_dataset, tmp_path):
    est = fit_small(small_dataset, n_iters=0)
    est.save(tmp_path / "init.vsck")
    # a second zero-iteration run yields the identical checkpoint
    again = fit_small(small_dataset, n_iters=0)
    again.save(tmp_path / "init2.vsck")
    assert (tmp_path / "init.vsck").read_bytes() == (tmp_path / "init2.vsck").read_bytes()
    assert not est.loss_history_
    assert not est.model_.visual_bank.updated.any()


def test_same_seed_checkpoints_byte_identical(small_dataset, tmp_path):
    fit_small(small_dataset).save(tmp_path / "a.vsck")
    fit_small(small_dataset).save(tmp_path / "b.vsck")
    assert (tmp_path / "a.vsck").read_bytes() == (tmp_path / "b.vsck").read_bytes()


def test_different_seed_differs(small_dataset, tmp_path):
    fit_small(small_dataset).save(tmp_path / "a.vsck")
    fit_small(small_dataset, seed=8).save(tmp_path / "b.vsck")
    assert (tmp_path / "a.vsck").read_bytes() != (tmp_path / "b.vsck").read_bytes()


def test_checkpoint_roundtrip_preserves_evaluation(small_dataset, tmp_path):
    data = small_dataset
    est = fit_small(data)
    est.save(tmp_path / "m.vsck")
    loaded = VideoEmbedder.load(tmp_path / "m.vsck")
    seqs = [data["store"][v.video_id] for v in data["manifest"].videos_in("test")]
    np.testing.assert_array_equal(est.transform(seqs), loaded.transform(seqs))
    loaded.save(tmp_path / "m2.vsck")
    assert (tmp_path / "m.vsck").read_bytes() == (tmp_path / "m2.vsck").read_bytes()


def test_loss_decreases_on_separable_data(small_dataset):
    est = fit_small(small_dataset, n_iters=300)
    totals = np.array([row.total for row in est.loss_history_])
    head = totals[:50].mean()
    tail = totals[-50:].mean()
    assert tail < head


def test_training_accuracy_on_synthetic(small_dataset):
    data = small_dataset
    est = fit_small(data, objective="baseline", n_iters=600)
    seqs, labels, _ = pipeline.training_arrays(data["manifest"], data["store"])
    from protoalign.heads import classify
    from protoalign import autodiff as ad

    correct = 0
    for seq, label in zip(seqs, labels):
        z = est.transform([seq])[0]
        p = classify(ad.Tensor(z), est.model_.classifier)
        correct += int(np.argmax(p.data) == label)
    assert correct / len(labels) > 0.95


def test_lambda_zero_full_matches_baseline_path(small_dataset):
    data = small_dataset
    est_full = fit_small(data, objective="full", lambda_visual=0.0, lambda_semantic=0.0)
    est_base = fit_small(data, objective="baseline")
    seqs = [data["store"][v.video_id] for v in data["manifest"].videos_in("test")]
    np.testing.assert_array_equal(est_full.transform(seqs), est_base.transform(seqs))
    for row_full, row_base in zip(est_full.loss_history_, est_base.loss_history_):
        assert row_full.total == pytest.approx(row_base.total, abs=1e-12)


def test_breakdown_identity_every_iteration(small_dataset):
    est = fit_small(small_dataset, lambda_visual=0.9, lambda_semantic=1.1, n_iters=80)
    for row in est.loss_history_:
        assert row.total == pytest.approx(row.cls + 0.9 * row.visual + 1.1 * row.semantic, abs=1e-6)


def test_loss_curve_smoothed_nonincreasing(small_dataset):
    est = fit_small(small_dataset, n_iters=400)
    totals = np.array([row.total for row in est.loss_history_])
    window = 200
    smooth = np.convolve(totals, np.ones(window) / window, mode="valid")
    # the trend is decreasing: the smoothed curve never rises above an
    # earlier value by more than a small jitter allowance
    running_min = np.minimum.accumulate(smooth)
    assert np.all(smooth - running_min <= 0.05 * abs(smooth[0]))


def test_triplet_and_margin_objectives_train(small_dataset):
    data = small_dataset
    for objective in ("triplet", "margin"):
        est = fit_small(data, objective=objective, n_iters=120)
        run = pipeline.video_run(est, data["manifest"], data["store"])
        report = evaluate_run(run)
        assert report.map_overall > 30.0  # learned something usable
        assert est.model_.visual_bank.updated.all()  # EMA bank maintained
    assert est.model_.margin_beta is not None


def test_bank_warmup_rule_in_training(small_dataset):
    est = fit_small(small_dataset, n_iters=40)
    rows = est.loss_history_
    warm = [i for i, row in enumerate(rows) if row.visual > 0]
    assert warm, "visual term should activate after the bank warms up"
    first = warm[0]
    assert all(row.visual == 0.0 for row in rows[:first])


def test_transform_before_fit_raises():
    est = VideoEmbedder()
    with pytest.raises(ValidationError):
        est.transform([np.ones((2, 4))])


def test_get_params_roundtrip():
    est = VideoEmbedder(tau=0.5, lambda_visual=0.25, n_iters=17)
    params = est.get_params()
    clone = VideoEmbedder(**params)
    assert clone.tau == 0.5 and clone.lambda_visual == 0.25 and clone.n_iters == 17


def test_semantic_bank_required_for_full(small_dataset):
    data = small_dataset
    seqs, labels, _ = pipeline.training_arrays(data["manifest"], data["store"])
    est = VideoEmbedder(**small_params())
    with pytest.raises(ValidationError, match="semantic"):
        est.fit(seqs, labels, semantic_bank=None)


def test_max_frames_cap(small_dataset):
    data = small_dataset
    bank = load_semantic_bank(data["bank_path"], data["manifest"])
    seqs, labels, _ = pipeline.training_arrays(data["manifest"], data["store"])
    est = VideoEmbedder(**small_params(max_frames=4, n_iters=5))
    est.fit(seqs, labels, semantic_bank=bank)
    z_capped = est.transform([seqs[0]])
    assert z_capped.shape == (1, 16)
