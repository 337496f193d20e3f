"""Retrieval evaluation: AP/mAP, tier balance, and analysis views.

mAP is the query mean of average precision (not the class mean): every
query contributes equally within its tier. The harmonic mean of the base
and novel mAPs is the balance headline. Rankings are evaluated over the
full gallery; the only top-k cutoff lives in the confusion matrix.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParameterError, ValidationError
from .index import RankedList, generate_proposals, segment_clips, tiou
from .manifest import Manifest

log = logging.getLogger("protoalign")


def average_precision(relevance, n_relevant_total: int) -> float:
    """Mean precision-at-hit over relevant ranks, divided by the universe size.

    Relevant items missing from the ranked list contribute zero.
    """
    if n_relevant_total < 1:
        raise ValidationError("average_precision needs at least one relevant item in the universe")
    rel = np.asarray(relevance, dtype=bool)
    if rel.size == 0:
        return 0.0
    cum = np.cumsum(rel)
    ranks = np.arange(1, rel.size + 1)
    return float(((cum / ranks) * rel).sum() / n_relevant_total)


def harmonic(base: float, novel: float) -> float:
    """Harmonic mean 2bn/(b+n) of the base and novel mAPs."""
    if base <= 0 or novel <= 0:
        raise ValidationError(f"harmonic needs positive inputs, got ({base}, {novel})")
    return 2.0 * base * novel / (base + novel)


@dataclass
class QueryInfo:
    query_id: str
    class_id: int
    tier: str
    duration_s: float | None = None


@dataclass
class RetrievalRun:
    """Ranked lists plus the metadata needed to judge relevance.

    `gallery_items` maps gallery id to {"class_id": int | None,
    "video_id": str, "hit": bool}; items with class None (distractors,
    background clips) are never relevant. For moment galleries, "hit"
    records whether the proposal overlaps its own video's ground truth at
    tIoU > 0.5.
    """

    kind: str
    ranked: list[RankedList]
    queries: dict[str, QueryInfo]
    gallery_items: dict[str, dict]
    config: dict = field(default_factory=dict)

    def relevant(self, query: QueryInfo, gallery_id: str) -> bool:
        item = self.gallery_items[gallery_id]
        return item.get("class_id") == query.class_id and item.get("hit", True)


@dataclass
class MetricsReport:
    """Headline percentages plus per-query/per-class APs (fractions)."""

    map_base: float | None
    map_novel: float | None
    map_overall: float
    harmonic: float | None
    per_class_ap: dict[int, float]
    per_query_ap: dict[str, float]
    skipped_queries: list[str]
    config: dict = field(default_factory=dict)

    def to_json(self, path=None) -> str:
        doc = {
            "map_base": _round2(self.map_base),
            "map_novel": _round2(self.map_novel),
            "map_overall": _round2(self.map_overall),
            "harmonic": _round2(self.harmonic),
            "n_queries": len(self.per_query_ap),
            "skipped_queries": self.skipped_queries,
            "per_class_ap": {str(k): self.per_class_ap[k] for k in sorted(self.per_class_ap)},
            "config": self.config,
        }
        text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text, "utf-8")
        return text

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["query_id", "ap"])
            for query_id in sorted(self.per_query_ap):
                writer.writerow([query_id, repr(self.per_query_ap[query_id])])


def _round2(x):
    return None if x is None else round(x, 2)


def _per_query_ap(run: RetrievalRun, relevance_fn=None):
    aps: dict[str, float] = {}
    skipped: list[str] = []
    relevance_fn = relevance_fn or run.relevant
    for ranked in run.ranked:
        query = run.queries[ranked.query_id]
        rel = [relevance_fn(query, gid) for gid in ranked.ids]
        n_rel = int(np.sum(rel))
        if n_rel == 0:
            skipped.append(ranked.query_id)
            continue
        aps[ranked.query_id] = average_precision(rel, n_rel)
    return aps, skipped


def mean_ap(per_query_ap: dict[str, float], queries: dict[str, QueryInfo]):
    """Query-mean mAP per tier: (base, novel, overall), None for empty tiers."""
    by_tier = {"base": [], "novel": []}
    for qid, ap in per_query_ap.items():
        by_tier[queries[qid].tier].append(ap)
    for tier, values in by_tier.items():
        if not values:
            log.warning("no scored %s-tier queries: tier mAP omitted", tier)
    base = float(np.mean(by_tier["base"])) if by_tier["base"] else None
    novel = float(np.mean(by_tier["novel"])) if by_tier["novel"] else None
    overall = float(np.mean(list(per_query_ap.values()))) if per_query_ap else 0.0
    return base, novel, overall


def evaluate_run(run: RetrievalRun, relevance_fn=None, class_mean: bool = False) -> MetricsReport:
    """Score a run. `class_mean=True` averages per-class APs instead of per-query."""
    aps, skipped = _per_query_ap(run, relevance_fn)
    per_class: dict[int, list[float]] = {}
    for qid, ap in aps.items():
        per_class.setdefault(run.queries[qid].class_id, []).append(ap)
    per_class_ap = {c: float(np.mean(v)) for c, v in per_class.items()}
    if class_mean:
        tiers = {c: next(run.queries[q].tier for q in aps if run.queries[q].class_id == c) for c in per_class_ap}
        base_vals = [ap for c, ap in per_class_ap.items() if tiers[c] == "base"]
        novel_vals = [ap for c, ap in per_class_ap.items() if tiers[c] == "novel"]
        base = float(np.mean(base_vals)) if base_vals else None
        novel = float(np.mean(novel_vals)) if novel_vals else None
        overall = float(np.mean(list(per_class_ap.values()))) if per_class_ap else 0.0
    else:
        base, novel, overall = mean_ap(aps, run.queries)
    h = harmonic(base * 100, novel * 100) if base and novel else None
    return MetricsReport(
        map_base=None if base is None else base * 100,
        map_novel=None if novel is None else novel * 100,
        map_overall=overall * 100,
        harmonic=h,
        per_class_ap=per_class_ap,
        per_query_ap=aps,
        skipped_queries=skipped,
        config=dict(run.config),
    )


def taxonomy_map(run: RetrievalRun, manifest: Manifest, level: int) -> float:
    """Overall mAP with relevance widened to shared taxonomy ancestors.

    Level 2 matches on the parent category, level 1 on the grandparent.
    """
    if level not in (1, 2):
        raise ParameterError(f"level must be 1 or 2, got {level}")
    attr = "grandparent" if level == 1 else "parent"
    ancestors = {c.class_id: getattr(c, attr) for c in manifest.classes}
    if any(a is None for a in ancestors.values()):
        raise ParameterError(f"manifest does not carry level-{level} taxonomy labels")

    def relevance(query: QueryInfo, gallery_id: str) -> bool:
        item = run.gallery_items[gallery_id]
        cls = item.get("class_id")
        if cls is None or not item.get("hit", True):
            return False
        return ancestors[cls] == ancestors[query.class_id]

    aps, _ = _per_query_ap(run, relevance)
    return float(np.mean(list(aps.values()))) * 100 if aps else 0.0


def confusion_matrix(run: RetrievalRun, top_k: int = 100, class_subset=None):
    """Hit counts: entry (gt, pred) counts class-`pred` items in the top-k
    lists of class-`gt` queries. Returns (class ids, matrix)."""
    if top_k < 1:
        raise ParameterError(f"top_k must be >= 1, got {top_k}")
    if class_subset is None:
        class_subset = sorted({q.class_id for q in run.queries.values()})
    classes = list(class_subset)
    pos = {c: i for i, c in enumerate(classes)}
    matrix = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for ranked in run.ranked:
        gt = run.queries[ranked.query_id].class_id
        if gt not in pos:
            continue
        for gid in ranked.ids[:top_k]:
            pred = run.gallery_items[gid].get("class_id")
            if pred in pos:
                matrix[pos[gt], pos[pred]] += 1
    return classes, matrix


def duration_analysis(run: RetrievalRun, bucket_edges) -> dict[tuple[float, float], float]:
    """Mean AP per query-duration bucket; empty buckets are omitted."""
    edges = list(bucket_edges)
    if len(edges) < 2 or any(b <= a for a, b in zip(edges[:-1], edges[1:])):
        raise ParameterError("bucket edges must be strictly increasing with >= 2 entries")
    aps, _ = _per_query_ap(run)
    buckets: dict[tuple[float, float], list[float]] = {}
    for qid, ap in aps.items():
        duration = run.queries[qid].duration_s
        if duration is None:
            continue
        for lo, hi in zip(edges[:-1], edges[1:]):
            if lo <= duration < hi:
                buckets.setdefault((lo, hi), []).append(ap)
                break
    return {span: float(np.mean(v)) for span, v in sorted(buckets.items())}


def per_class_gain(report_a: MetricsReport, report_b: MetricsReport) -> dict[int, float]:
    """Per-class mean-AP difference (a minus b), sorted descending."""
    if set(report_a.per_query_ap) != set(report_b.per_query_ap):
        raise ValidationError("per_class_gain needs identical query sets")
    deltas = {
        c: report_a.per_class_ap[c] - report_b.per_class_ap.get(c, 0.0)
        for c in report_a.per_class_ap
    }
    return dict(sorted(deltas.items(), key=lambda kv: -kv[1]))


def gain_extremes(deltas: dict[int, float], tiers: dict[int, str], n: int = 5):
    """Top/bottom n classes per tier by AP delta (the gain/loss view)."""
    out = {}
    for tier in ("base", "novel"):
        items = [(c, d) for c, d in deltas.items() if tiers.get(c) == tier]
        items.sort(key=lambda kv: -kv[1])
        out[tier] = {"best": items[:n], "worst": items[-n:][::-1]}
    return out


def proposal_recall_sweep(manifest: Manifest, clip_lens, max_lens, split: str = "test"):
    """Fraction of activity intervals hit (tIoU > 0.5) by any proposal.

    Purely temporal: only durations and activity intervals matter. Videos
    too short for a single clip count as misses.
    """
    videos = manifest.videos_in(split)
    if not videos:
        raise ValidationError(f"split {split!r} has no videos to sweep")
    grid: dict[tuple[float, int], float] = {}
    for clip_len in clip_lens:
        clip_sets = [(v, segment_clips(v, clip_len)) for v in videos]
        for max_len in max_lens:
            hits = 0
            for video, clips in clip_sets:
                if not clips:
                    continue
                found = False
                for start, end in generate_proposals(len(clips), max_len):
                    interval = (clips[start][0][0], clips[end][0][1])
                    if tiou(interval, video.activity) > 0.5:
                        found = True
                        break
                hits += found
            grid[(float(clip_len), int(max_len))] = hits / len(videos)
    return grid


def map_at_k_curve(run: RetrievalRun, ks=None) -> dict[str, list[float]]:
    """mAP restricted to the top-k prefix, for k = 1..gallery size.

    The universe count per query stays the full-gallery relevant count, so
    the curve ends at the full mAP.
    """
    sizes = [len(r.ids) for r in run.ranked]
    max_k = max(sizes)
    ks = list(ks) if ks is not None else list(range(1, max_k + 1))
    per_tier: dict[str, list[float]] = {"base": [], "novel": [], "overall": []}
    rels = {}
    for ranked in run.ranked:
        query = run.queries[ranked.query_id]
        rel = np.asarray([run.relevant(query, gid) for gid in ranked.ids], dtype=bool)
        if rel.sum() > 0:
            rels[ranked.query_id] = rel
    for k in ks:
        aps = {"base": [], "novel": [], "overall": []}
        for qid, rel in rels.items():
            ap = average_precision(rel[:k], int(rel.sum()))
            aps[run.queries[qid].tier].append(ap)
            aps["overall"].append(ap)
        for tier in per_tier:
            per_tier[tier].append(float(np.mean(aps[tier])) * 100 if aps[tier] else 0.0)
    per_tier["k"] = ks
    return per_tier
