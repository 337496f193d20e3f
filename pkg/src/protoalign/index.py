"""Exact nearest-neighbor gallery, clip segmentation and moment proposals.

Gallery rows are L2-normalized at build time and searched exhaustively
with Euclidean distance. Ties are broken by ascending gallery id so every
ranking (and therefore every mAP) is deterministic.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import EPS_NORM
from .errors import (
    DegenerateInputError,
    DimensionError,
    FormatError,
    ParameterError,
    ValidationError,
)
from .manifest import VideoRecord

INDEX_MAGIC = b"VSGX"
INDEX_VERSION = 1

KINDS = ("video", "clip", "moment")


@dataclass
class RankedList:
    """Ordered retrieval result for one query."""

    query_id: str
    ids: list[str]
    distances: np.ndarray

    def __post_init__(self):
        self.distances = np.asarray(self.distances, dtype=np.float64)
        if len(self.ids) != self.distances.shape[0]:
            raise ValidationError("ids and distances must have equal length")
        if np.any(np.diff(self.distances) < -1e-12):
            raise ValidationError("distances must be non-decreasing")


class GalleryIndex:
    """Exact search over unit-norm embeddings with id-ordered tie-breaks.

    `items` carries optional per-row metadata (class, source video,
    interval) used by the evaluation layer; `group_of` maps each row to
    the unit of self-exclusion (the source video for clips/moments).
    """

    def __init__(self, ids, embeddings: np.ndarray, kind: str = "video", items: list[dict] | None = None):
        if kind not in KINDS:
            raise ParameterError(f"kind must be one of {KINDS}, got {kind!r}")
        ids = [str(i) for i in ids]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"duplicate gallery ids: {dupes[:5]}")
        embeddings = np.asarray(embeddings, dtype=np.float64)
        if embeddings.ndim != 2 or embeddings.shape[0] != len(ids):
            raise DimensionError(f"need one embedding row per id, got {embeddings.shape}")
        if embeddings.shape[0] == 0:
            raise ValidationError("gallery must be nonempty")
        norms = np.linalg.norm(embeddings, axis=1)
        if np.any(norms <= EPS_NORM):
            bad = [ids[i] for i in np.nonzero(norms <= EPS_NORM)[0][:5]]
            raise DegenerateInputError(f"zero embedding for gallery ids {bad}")
        self.ids = ids
        self.rows = embeddings / norms[:, None]
        self.kind = kind
        self.items = items or [{} for _ in ids]
        if len(self.items) != len(ids):
            raise ValidationError("items metadata must match ids")
        self._row_of = {gid: i for i, gid in enumerate(ids)}
        # rank of each row's id in lexicographic order, for tie-breaking
        self._id_rank = np.empty(len(ids), dtype=np.int64)
        for rank, i in enumerate(sorted(range(len(ids)), key=lambda j: ids[j])):
            self._id_rank[i] = rank

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def group_of(self, row: int) -> str:
        return self.items[row].get("video_id", self.ids[row])

    def vector(self, gallery_id: str) -> np.ndarray:
        """The stored (normalized) embedding row for a gallery id."""
        row = self._row_of.get(gallery_id)
        if row is None:
            raise ValidationError(f"unknown gallery id {gallery_id!r}")
        return self.rows[row]

    # -- search ------------------------------------------------------------

    def _normalize_query(self, query: np.ndarray) -> np.ndarray:
        query = np.asarray(query, dtype=np.float64).reshape(-1)
        if query.shape[0] != self.dim:
            raise DimensionError(f"query dim {query.shape[0]} does not match gallery dim {self.dim}")
        norm = np.linalg.norm(query)
        if norm <= EPS_NORM:
            raise DegenerateInputError(f"degenerate query (norm {norm:.3e})")
        return query / norm

    def search(
        self,
        query: np.ndarray,
        k: int | None = None,
        query_id: str = "query",
        exclude_ids=(),
        exclude_groups=(),
    ) -> RankedList:
        """Exact k nearest rows by Euclidean distance on normalized vectors.

        The query's own id (and any listed exclusion ids or source-video
        groups) never appears in the result.
        """
        q = self._normalize_query(query)
        excluded = set(exclude_ids)
        excluded.add(query_id)
        groups = set(exclude_groups)
        keep = np.ones(len(self.ids), dtype=bool)
        for gid in excluded:
            row = self._row_of.get(gid)
            if row is not None:
                keep[row] = False
        if groups:
            for i in range(len(self.ids)):
                if keep[i] and self.group_of(i) in groups:
                    keep[i] = False
        available = int(keep.sum())
        if k is None:
            k = available
        if not 1 <= k <= available:
            raise ParameterError(f"k={k} outside [1, {available}] available gallery items")
        rows = np.nonzero(keep)[0]
        dists = np.linalg.norm(self.rows[rows] - q, axis=1)
        order = np.lexsort((self._id_rank[rows], dists))[:k]
        chosen = rows[order]
        return RankedList(query_id, [self.ids[i] for i in chosen], dists[order])

    def kneighbors(self, queries: np.ndarray, n_neighbors: int) -> tuple[np.ndarray, np.ndarray]:
        """sklearn-style bulk interface: (distances, indices) per query row."""
        queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        dist_out = np.empty((queries.shape[0], n_neighbors))
        idx_out = np.empty((queries.shape[0], n_neighbors), dtype=np.int64)
        for i, q in enumerate(queries):
            ranked = self.search(q, k=n_neighbors, query_id=f"__kneighbors_{i}__")
            idx_out[i] = [self._row_of[gid] for gid in ranked.ids]
            dist_out[i] = ranked.distances
        return dist_out, idx_out


def build_index(ids, embeddings, kind: str = "video", items=None) -> GalleryIndex:
    return GalleryIndex(ids, embeddings, kind=kind, items=items)


def multi_query(
    index: GalleryIndex,
    queries,
    k: int | None = None,
    query_id: str = "multi-query",
    exclude_ids=(),
    exclude_groups=(),
) -> RankedList:
    """Average the query embeddings, then search with all of them excluded."""
    queries = [np.asarray(q, dtype=np.float64) for q in queries]
    if not queries:
        raise ValidationError("multi_query needs at least one query embedding")
    mean = np.mean(np.stack(queries), axis=0)
    return index.search(
        mean, k=k, query_id=query_id, exclude_ids=exclude_ids, exclude_groups=exclude_groups
    )


# -- temporal structure ------------------------------------------------------


def segment_clips(
    record: VideoRecord, clip_len_s: float, containment: bool = True
) -> list[tuple[tuple[float, float], bool]]:
    """Consecutive non-overlapping clips of fixed length, with positivity.

    The trailing remainder shorter than the clip length is dropped. A clip
    is positive when it lies entirely within the activity interval (or
    merely overlaps it, when `containment` is False). Distractor clips are
    never positive.
    """
    if clip_len_s <= 0:
        raise ParameterError(f"clip length must be positive, got {clip_len_s}")
    n = int(np.floor(record.duration_s / clip_len_s + 1e-9))
    clips = []
    for i in range(n):
        start, end = i * clip_len_s, (i + 1) * clip_len_s
        if record.is_distractor:
            positive = False
        elif containment:
            positive = record.activity[0] <= start + 1e-9 and end <= record.activity[1] + 1e-9
        else:
            positive = tiou((start, end), record.activity) > 0
        clips.append(((start, end), positive))
    return clips


def generate_proposals(n_clips: int, max_len: int) -> list[tuple[int, int]]:
    """Every contiguous clip range of length 1..min(max_len, n_clips).

    Returned as inclusive (start_clip, end_clip) index pairs; the count is
    sum over lengths l of (n_clips - l + 1).
    """
    if n_clips < 1 or max_len < 1:
        raise ParameterError("n_clips and max_len must be >= 1")
    proposals = []
    for length in range(1, min(max_len, n_clips) + 1):
        for start in range(n_clips - length + 1):
            proposals.append((start, start + length - 1))
    return proposals


def tiou(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Temporal intersection over union of two [start, end] intervals."""
    for iv in (a, b):
        if iv[1] <= iv[0]:
            raise ValidationError(f"degenerate interval {iv}")
    inter = max(0.0, min(a[1], b[1]) - max(a[0], b[0]))
    union = (a[1] - a[0]) + (b[1] - b[0]) - inter
    return inter / union


def moment_search(
    index: GalleryIndex, query: np.ndarray, k: int | None = None, query_id: str = "query", query_video_id: str | None = None
) -> RankedList:
    """Rank all videos' moment proposals against a query embedding.

    Proposals originating from the query's own video are excluded.
    """
    if index.kind != "moment":
        raise ParameterError(f"moment_search needs a moment index, got kind {index.kind!r}")
    groups = (query_video_id,) if query_video_id else ()
    return index.search(query, k=k, query_id=query_id, exclude_groups=groups)


# -- persistence --------------------------------------------------------------


def save_index(index: GalleryIndex, path) -> None:
    """Single deterministic binary artifact: JSON header + f32 rows."""
    header = {
        "kind": index.kind,
        "ids": index.ids,
        "items": index.items,
        "dim": index.dim,
    }
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(INDEX_MAGIC)
        f.write(struct.pack("<I", INDEX_VERSION))
        f.write(struct.pack("<I", len(raw)))
        f.write(raw)
        f.write(np.ascontiguousarray(index.rows, dtype="<f4").tobytes())


def load_index(path) -> GalleryIndex:
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != INDEX_MAGIC:
            raise FormatError(f"bad magic {magic!r} at byte 0, expected {INDEX_MAGIC!r}")
        (version,) = struct.unpack("<I", f.read(4))
        if version != INDEX_VERSION:
            raise FormatError(f"unsupported index version {version} at byte 4")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen).decode("utf-8"))
        n, dim = len(header["ids"]), header["dim"]
        payload = f.read(4 * n * dim)
        if len(payload) != 4 * n * dim:
            raise FormatError(f"truncated index payload at byte {f.tell() - len(payload)}")
    rows = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(n, dim)
    return GalleryIndex(header["ids"], rows, kind=header["kind"], items=header["items"])
