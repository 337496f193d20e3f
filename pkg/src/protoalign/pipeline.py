"""End-to-end plumbing: manifest + features -> model -> runs -> reports.

These helpers tie the estimator, index and metrics layers together for
the CLI and for experiment scripts. Video-level retrieval embeds the
activity interval of each record (the trimmed segment); clip and moment
retrieval work over the full extent.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from . import rng as rng_mod
from .errors import DegenerateIntervalError, ValidationError
from .estimator import VideoEmbedder
from .features import FeatureSequence, average_pool, read_features, slice_interval
from .index import GalleryIndex, RankedList, generate_proposals, moment_search, multi_query, segment_clips, tiou
from .manifest import Manifest, VideoRecord, sample_novel_train
from .metrics import QueryInfo, RetrievalRun
from .semantic import load_semantic_bank


def load_feature_store(manifest: Manifest, root) -> dict[str, FeatureSequence]:
    """Read every referenced feature file, keyed by video id."""
    root = Path(root)
    store = {}
    for video in manifest.videos:
        seq = read_features(root / video.feature_file, video_id=video.video_id)
        store[video.video_id] = seq
    return store


def activity_sequence(record: VideoRecord, store) -> FeatureSequence:
    """The trimmed segment: features sliced to the activity interval."""
    seq = store[record.video_id]
    if record.is_distractor:
        return seq
    start, end = record.activity
    try:
        return slice_interval(seq, start, end)
    except DegenerateIntervalError:
        return seq  # degenerate annotation: fall back to the full video


def training_arrays(manifest: Manifest, store, shots: int | None = None, seed: int = 0):
    """(sequences, labels) for the train split, optionally shot-limited."""
    used = sample_novel_train(manifest, shots, seed) if shots is not None else manifest
    records = used.videos_in("train")
    seqs = [activity_sequence(r, store) for r in records]
    labels = np.array([r.class_id for r in records], dtype=np.int64)
    return seqs, labels, used


def fit_from_manifest(
    manifest: Manifest,
    feature_root,
    semantic_bank_path=None,
    shots: int | None = None,
    store=None,
    **estimator_params,
) -> VideoEmbedder:
    """Train a VideoEmbedder against a manifest tree."""
    store = store if store is not None else load_feature_store(manifest, feature_root)
    seqs, labels, _ = training_arrays(manifest, store, shots=shots, seed=estimator_params.get("seed", 0))
    est = VideoEmbedder(n_classes=manifest.n_classes, **estimator_params)
    bank = None
    if est.objective == "full" and est.lambda_semantic > 0:
        if semantic_bank_path is None:
            raise ValidationError("the full objective needs --semantic-bank")
        bank = load_semantic_bank(semantic_bank_path, manifest)
    return est.fit(seqs, labels, semantic_bank=bank)


# -- gallery construction ----------------------------------------------------


def video_index(est: VideoEmbedder, manifest: Manifest, store, split: str = "test") -> GalleryIndex:
    records = manifest.videos_in(split, include_distractors=True)
    seqs = [activity_sequence(r, store) for r in records]
    embeddings = est.transform(seqs)
    items = [
        {"class_id": r.class_id, "video_id": r.video_id, "duration_s": r.duration_s}
        for r in records
    ]
    return GalleryIndex([r.video_id for r in records], embeddings, kind="video", items=items)


def clip_index(
    est: VideoEmbedder, manifest: Manifest, store, clip_len_s: float, split: str = "test"
) -> GalleryIndex:
    ids, seqs, items = [], [], []
    for record in manifest.videos_in(split, include_distractors=True):
        seq = store[record.video_id]
        for i, ((start, end), positive) in enumerate(segment_clips(record, clip_len_s)):
            try:
                clip_seq = slice_interval(seq, start, end)
            except DegenerateIntervalError:
                continue
            ids.append(f"{record.video_id}:c{i:03d}")
            seqs.append(clip_seq)
            items.append(
                {
                    "class_id": record.class_id if positive else None,
                    "video_id": record.video_id,
                    "interval": [start, end],
                }
            )
    if not ids:
        raise ValidationError(f"no clips of length {clip_len_s}s in split {split!r}")
    return GalleryIndex(ids, est.transform(seqs), kind="clip", items=items)


def moment_index(
    est: VideoEmbedder,
    manifest: Manifest,
    store,
    clip_len_s: float = 5.0,
    max_moment: int = 26,
    split: str = "test",
) -> GalleryIndex:
    """Embed every temporal proposal: pooled clip features through the head."""
    ids, pooled_rows, items = [], [], []
    for record in manifest.videos_in(split, include_distractors=True):
        seq = store[record.video_id]
        clips = segment_clips(record, clip_len_s)
        clip_means = []
        for (start, end), _ in clips:
            try:
                clip_means.append(average_pool(slice_interval(seq, start, end).frames))
            except DegenerateIntervalError:
                clip_means.append(None)
        usable = [m for m in clip_means if m is not None]
        if not usable:
            continue
        for start_clip, end_clip in generate_proposals(len(clips), max_moment):
            span = [m for m in clip_means[start_clip : end_clip + 1] if m is not None]
            if not span:
                continue
            interval = (clips[start_clip][0][0], clips[end_clip][0][1])
            hit = (not record.is_distractor) and tiou(interval, record.activity) > 0.5
            ids.append(f"{record.video_id}:p{start_clip:03d}-{end_clip:03d}")
            pooled_rows.append(np.mean(span, axis=0))
            items.append(
                {
                    "class_id": record.class_id,
                    "video_id": record.video_id,
                    "interval": list(interval),
                    "hit": bool(hit),
                }
            )
    if not ids:
        raise ValidationError(f"no proposals at clip length {clip_len_s}s in split {split!r}")
    embeddings = est.transform([row[None, :] for row in pooled_rows])
    return GalleryIndex(ids, embeddings, kind="moment", items=items)


# -- runs ---------------------------------------------------------------------


def _query_records(manifest: Manifest, split: str = "test"):
    return manifest.videos_in(split)  # distractors are never queries


def video_run(
    est: VideoEmbedder,
    manifest: Manifest,
    store,
    split: str = "test",
    queries_per: int = 1,
    seed: int = 0,
    config: dict | None = None,
) -> RetrievalRun:
    """Video retrieval: every non-distractor test video queries the rest.

    With `queries_per` > 1, same-class queries are grouped (seeded,
    disjoint) and their embeddings averaged before retrieval.
    """
    index = video_index(est, manifest, store, split)
    records = _query_records(manifest, split)
    embeddings = {r.video_id: index.vector(r.video_id) for r in records}
    tier = {c.class_id: c.tier for c in manifest.classes}
    ranked: list[RankedList] = []
    queries: dict[str, QueryInfo] = {}
    if queries_per < 1:
        raise ValidationError(f"queries_per must be >= 1, got {queries_per}")
    if queries_per == 1:
        for r in records:
            ranked.append(index.search(embeddings[r.video_id], query_id=r.video_id))
            queries[r.video_id] = QueryInfo(r.video_id, r.class_id, tier[r.class_id], r.duration_s)
    else:
        by_class: dict[int, list[VideoRecord]] = {}
        for r in records:
            by_class.setdefault(r.class_id, []).append(r)
        for class_id in sorted(by_class):
            group_records = by_class[class_id]
            order = rng_mod.stream(seed, "multiquery", class_id).permutation(len(group_records))
            for g in range(len(group_records) // queries_per):
                members = [group_records[int(i)] for i in order[g * queries_per : (g + 1) * queries_per]]
                qid = f"{members[0].video_id}+{queries_per}"
                ranked.append(
                    multi_query(
                        index,
                        [embeddings[m.video_id] for m in members],
                        query_id=qid,
                        exclude_ids=[m.video_id for m in members],
                    )
                )
                queries[qid] = QueryInfo(qid, class_id, tier[class_id], None)
        if not queries:
            raise ValidationError(
                f"queries_per={queries_per} exceeds every class's test query count"
            )
    gallery_items = {gid: index.items[i] for i, gid in enumerate(index.ids)}
    return RetrievalRun(
        kind="video",
        ranked=ranked,
        queries=queries,
        gallery_items=gallery_items,
        config=dict(config or {}, queries_per=queries_per, split=split),
    )


def clip_run(
    est: VideoEmbedder,
    manifest: Manifest,
    store,
    clip_len_s: float,
    split: str = "test",
    config: dict | None = None,
) -> RetrievalRun:
    """Clip retrieval: every positive clip queries all other clips."""
    index = clip_index(est, manifest, store, clip_len_s, split)
    tier = {c.class_id: c.tier for c in manifest.classes}
    ranked, queries = [], {}
    for i, gid in enumerate(index.ids):
        item = index.items[i]
        if item["class_id"] is None:
            continue
        ranked.append(index.search(index.rows[i], query_id=gid))
        queries[gid] = QueryInfo(gid, item["class_id"], tier[item["class_id"]],
                                 item["interval"][1] - item["interval"][0])
    gallery_items = {gid: index.items[i] for i, gid in enumerate(index.ids)}
    return RetrievalRun(
        kind="clip",
        ranked=ranked,
        queries=queries,
        gallery_items=gallery_items,
        config=dict(config or {}, clip_len_s=clip_len_s, split=split),
    )


def moment_run(
    est: VideoEmbedder,
    manifest: Manifest,
    store,
    clip_len_s: float = 5.0,
    max_moment: int = 26,
    split: str = "test",
    config: dict | None = None,
) -> RetrievalRun:
    """Moment retrieval: trimmed queries rank proposals from other videos."""
    index = moment_index(est, manifest, store, clip_len_s, max_moment, split)
    records = _query_records(manifest, split)
    tier = {c.class_id: c.tier for c in manifest.classes}
    query_embeddings = est.transform([activity_sequence(r, store) for r in records])
    ranked, queries = [], {}
    for r, z in zip(records, query_embeddings):
        ranked.append(moment_search(index, z, query_id=r.video_id, query_video_id=r.video_id))
        queries[r.video_id] = QueryInfo(r.video_id, r.class_id, tier[r.class_id], r.duration_s)
    gallery_items = {gid: index.items[i] for i, gid in enumerate(index.ids)}
    return RetrievalRun(
        kind="moment",
        ranked=ranked,
        queries=queries,
        gallery_items=gallery_items,
        config=dict(config or {}, clip_len_s=clip_len_s, max_moment=max_moment, split=split),
    )


# -- artifacts ----------------------------------------------------------------


def write_rankings_csv(run: RetrievalRun, path) -> None:
    """Export `query_id,rank,gallery_id,distance,relevant` rows."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["query_id", "rank", "gallery_id", "distance", "relevant"])
        for ranked in run.ranked:
            query = run.queries[ranked.query_id]
            for rank, (gid, dist) in enumerate(zip(ranked.ids, ranked.distances), start=1):
                writer.writerow(
                    [ranked.query_id, rank, gid, repr(float(dist)), int(run.relevant(query, gid))]
                )


def write_loss_csv(history, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["iter", "total", "cls", "visual", "semantic"])
        for i, row in enumerate(history):
            writer.writerow([i, repr(row.total), repr(row.cls), repr(row.visual), repr(row.semantic)])
