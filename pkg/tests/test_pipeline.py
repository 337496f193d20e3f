"""End-to-end plumbing: runs, exports and the CSV recompute path."""

import csv

import numpy as np
import pytest

from helpers import recompute_map_from_csv

from protoalign import pipeline
from protoalign.metrics import evaluate_run


def test_video_run_structure(small_dataset, small_model):
    data = small_dataset
    run = pipeline.video_run(small_model, data["manifest"], data["store"])
    test_videos = data["manifest"].videos_in("test")
    assert len(run.ranked) == len(test_videos)
    gallery_size = len(data["manifest"].videos_in("test", include_distractors=True))
    for ranked in run.ranked:
        assert len(ranked.ids) == gallery_size - 1  # itself excluded
        assert ranked.query_id not in ranked.ids


def test_video_run_distractors_in_gallery_not_queries(small_dataset, small_model):
    data = small_dataset
    run = pipeline.video_run(small_model, data["manifest"], data["store"])
    distractor_ids = {v.video_id for v in data["manifest"].videos if v.is_distractor}
    assert distractor_ids, "fixture should include distractors"
    assert not distractor_ids & set(run.queries)
    assert distractor_ids <= set(run.gallery_items)
    for gid in distractor_ids:
        assert run.gallery_items[gid]["class_id"] is None


def test_multi_query_groups(small_dataset, small_model):
    data = small_dataset
    run = pipeline.video_run(small_model, data["manifest"], data["store"], queries_per=2, seed=0)
    # 4 test videos per class, groups of 2 -> 2 groups per class
    per_class = {}
    for q in run.queries.values():
        per_class[q.class_id] = per_class.get(q.class_id, 0) + 1
    assert all(v == 2 for v in per_class.values())
    for ranked in run.ranked:
        assert len(ranked.ids) == len(run.gallery_items) - 2  # both members excluded


def test_clip_run_contains_negative_clips(small_dataset, small_model):
    data = small_dataset
    run = pipeline.clip_run(small_model, data["manifest"], data["store"], clip_len_s=4.0)
    classes = [item["class_id"] for item in run.gallery_items.values()]
    assert None in classes  # background or distractor clips
    assert any(c is not None for c in classes)
    for qid in run.queries:
        assert run.gallery_items[qid]["class_id"] is not None


def test_moment_run_self_video_excluded(small_dataset, small_model):
    data = small_dataset
    run = pipeline.moment_run(small_model, data["manifest"], data["store"], clip_len_s=4.0, max_moment=4)
    for ranked in run.ranked:
        video = ranked.query_id
        assert all(not gid.startswith(f"{video}:") for gid in ranked.ids)


def test_moment_items_carry_hit_flags(small_dataset, small_model):
    data = small_dataset
    run = pipeline.moment_run(small_model, data["manifest"], data["store"], clip_len_s=4.0, max_moment=4)
    hits = [item["hit"] for item in run.gallery_items.values()]
    assert any(hits) and not all(hits)


def test_rankings_csv_recompute_identity(small_dataset, small_model, tmp_path):
    data = small_dataset
    run = pipeline.video_run(small_model, data["manifest"], data["store"])
    report = evaluate_run(run)
    path = tmp_path / "rankings.csv"
    pipeline.write_rankings_csv(run, path)
    recomputed = recompute_map_from_csv(path, data["manifest"])
    assert recomputed["base"] == pytest.approx(report.map_base, abs=1e-9)
    assert recomputed["novel"] == pytest.approx(report.map_novel, abs=1e-9)
    assert recomputed["overall"] == pytest.approx(report.map_overall, abs=1e-9)


def test_rankings_csv_format(small_dataset, small_model, tmp_path):
    data = small_dataset
    run = pipeline.video_run(small_model, data["manifest"], data["store"])
    path = tmp_path / "rankings.csv"
    pipeline.write_rankings_csv(run, path)
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    assert set(rows[0]) == {"query_id", "rank", "gallery_id", "distance", "relevant"}
    first_query = rows[0]["query_id"]
    block = [r for r in rows if r["query_id"] == first_query]
    dists = [float(r["distance"]) for r in block]
    assert dists == sorted(dists)
    assert [int(r["rank"]) for r in block] == list(range(1, len(block) + 1))


def test_loss_csv_format(small_model, tmp_path):
    path = tmp_path / "loss.csv"
    pipeline.write_loss_csv(small_model.loss_history_, path)
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    assert set(rows[0]) == {"iter", "total", "cls", "visual", "semantic"}
    assert len(rows) == len(small_model.loss_history_)
    for row in rows:
        total = float(row["total"])
        parts = float(row["cls"]) + float(row["visual"]) + float(row["semantic"])
        assert total == pytest.approx(parts, abs=1e-6)


def test_activity_sequence_slices(small_dataset):
    data = small_dataset
    record = next(v for v in data["manifest"].videos_in("test") if v.activity[1] - v.activity[0] < v.duration_s - 0.5)
    seq = pipeline.activity_sequence(record, data["store"])
    full = data["store"][record.video_id]
    assert seq.n_frames < full.n_frames
