"""Dataset manifest: classes, video records, splits and sampling.

The manifest is a single JSON document::

    {"version": 1,
     "classes": [{"id": 0, "name": "cricket", "tier": "base",
                  "parent": 3, "grandparent": 1}, ...],
     "videos":  [{"id": "v000", "class": 0, "split": "train",
                  "duration_s": 12.5, "activity": [1.0, 10.0],
                  "feature_file": "features/v000.vsf"}, ...]}

A video's ``class`` is either a class id or the ``"__distractor__"``
sentinel. Distractors only ever appear in the test gallery: they are
rejected from the train split at validation time, never act as queries
and are never counted relevant.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import rng
from .errors import SamplingError, ValidationError

DISTRACTOR = "__distractor__"
SPLITS = ("train", "validation", "test")
TIERS = ("base", "novel")


@dataclass(frozen=True)
class ClassInfo:
    class_id: int
    name: str
    tier: str
    parent: int | None = None
    grandparent: int | None = None


@dataclass(frozen=True)
class VideoRecord:
    video_id: str
    class_id: int | None  # None marks a distractor
    split: str
    duration_s: float
    activity: tuple[float, float]
    feature_file: str

    @property
    def is_distractor(self) -> bool:
        return self.class_id is None


@dataclass
class Manifest:
    version: int
    classes: list[ClassInfo]
    videos: list[VideoRecord]
    _by_class: dict = field(default_factory=dict, repr=False)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def class_by_id(self, class_id: int) -> ClassInfo:
        return self.classes[class_id]

    def videos_in(self, split: str, include_distractors: bool = False):
        return [
            v
            for v in self.videos
            if v.split == split and (include_distractors or not v.is_distractor)
        ]

    def class_ids(self, tier: str | None = None):
        return [c.class_id for c in self.classes if tier is None or c.tier == tier]


def _fail(record: str, message: str):
    raise ValidationError(f"{record}: {message}")


def validate_manifest(manifest: Manifest) -> Manifest:
    classes, videos = manifest.classes, manifest.videos
    ids = [c.class_id for c in classes]
    if sorted(ids) != list(range(len(classes))):
        raise ValidationError("classes: ids must be dense and unique from 0")
    names = [c.name for c in classes]
    if len(set(names)) != len(names):
        raise ValidationError("classes: names must be unique")
    for c in classes:
        if c.tier not in TIERS:
            _fail(f"class {c.class_id}", f"tier must be one of {TIERS}, got {c.tier!r}")
    seen = set()
    for v in videos:
        rec = f"video {v.video_id!r}"
        if v.video_id in seen:
            _fail(rec, "duplicate video id")
        seen.add(v.video_id)
        if v.split not in SPLITS:
            _fail(rec, f"split must be one of {SPLITS}, got {v.split!r}")
        if v.duration_s <= 0:
            _fail(rec, f"duration_s must be positive, got {v.duration_s}")
        if v.is_distractor:
            if v.split == "train":
                _fail(rec, "distractors may not appear in the train split")
        else:
            if not 0 <= v.class_id < len(classes):
                _fail(rec, f"class {v.class_id} does not resolve")
            start, end = v.activity
            if not (0 <= start < end <= v.duration_s + 1e-9):
                _fail(rec, f"activity [{start}, {end}] must satisfy 0 <= start < end <= duration")
    for split in ("train", "test"):
        if not any(v.split == split for v in videos):
            raise ValidationError(f"split {split!r} has no videos")
    return manifest


def _class_from_json(obj, where: str) -> ClassInfo:
    try:
        return ClassInfo(
            class_id=int(obj["id"]),
            name=str(obj["name"]),
            tier=str(obj["tier"]),
            parent=None if obj.get("parent") is None else int(obj["parent"]),
            grandparent=None if obj.get("grandparent") is None else int(obj["grandparent"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{where}: malformed class entry ({exc})") from exc


def _video_from_json(obj) -> VideoRecord:
    where = f"video {obj.get('id', '<missing id>')!r}"
    try:
        raw_class = obj["class"]
        class_id = None if raw_class == DISTRACTOR else int(raw_class)
        activity = obj["activity"]
        return VideoRecord(
            video_id=str(obj["id"]),
            class_id=class_id,
            split=str(obj["split"]),
            duration_s=float(obj["duration_s"]),
            activity=(float(activity[0]), float(activity[1])),
            feature_file=str(obj["feature_file"]),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ValidationError(f"{where}: malformed video entry ({exc})") from exc


def load_manifest(path) -> Manifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or "classes" not in doc or "videos" not in doc:
        raise ValidationError(f"{path}: manifest must contain 'classes' and 'videos'")
    manifest = Manifest(
        version=int(doc.get("version", 1)),
        classes=[_class_from_json(c, f"class[{i}]") for i, c in enumerate(doc["classes"])],
        videos=[_video_from_json(v) for v in doc["videos"]],
    )
    return validate_manifest(manifest)


def save_manifest(manifest: Manifest, path) -> None:
    doc = {
        "version": manifest.version,
        "classes": [
            {
                "id": c.class_id,
                "name": c.name,
                "tier": c.tier,
                **({"parent": c.parent} if c.parent is not None else {}),
                **({"grandparent": c.grandparent} if c.grandparent is not None else {}),
            }
            for c in manifest.classes
        ],
        "videos": [
            {
                "id": v.video_id,
                "class": DISTRACTOR if v.is_distractor else v.class_id,
                "split": v.split,
                "duration_s": v.duration_s,
                "activity": list(v.activity),
                "feature_file": v.feature_file,
            }
            for v in manifest.videos
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", "utf-8")


def split_classes(n_classes: int, n_base: int, seed: int) -> tuple[list[int], list[int]]:
    """Deterministic disjoint base/novel partition of class ids."""
    if not 0 < n_base < n_classes:
        raise ValidationError(f"n_base must lie strictly between 0 and {n_classes}, got {n_base}")
    perm = rng.stream(seed, "class-split").permutation(n_classes)
    base = sorted(int(i) for i in perm[:n_base])
    novel = sorted(int(i) for i in perm[n_base:])
    return base, novel


def retier(manifest: Manifest, base_ids) -> Manifest:
    """Return a copy of the manifest with the base/novel tiers reassigned."""
    base_set = set(base_ids)
    classes = [
        ClassInfo(
            class_id=c.class_id,
            name=c.name,
            tier="base" if c.class_id in base_set else "novel",
            parent=c.parent,
            grandparent=c.grandparent,
        )
        for c in manifest.classes
    ]
    return validate_manifest(Manifest(manifest.version, classes, list(manifest.videos)))


def sample_novel_train(manifest: Manifest, shots: int, seed: int) -> Manifest:
    """Keep all base-class training videos and `shots` per novel class.

    Novel training videos are drawn without replacement from a per-class
    seeded stream; everything outside the train split passes through.
    """
    if shots < 1:
        raise SamplingError(f"shots must be >= 1, got {shots}")
    novel = set(manifest.class_ids("novel"))
    per_class: dict[int, list[VideoRecord]] = {c: [] for c in novel}
    keep: list[VideoRecord] = []
    for v in manifest.videos:
        if v.split == "train" and not v.is_distractor and v.class_id in novel:
            per_class[v.class_id].append(v)
        else:
            keep.append(v)
    chosen: list[VideoRecord] = []
    for class_id in sorted(per_class):
        pool = per_class[class_id]
        if len(pool) < shots:
            raise SamplingError(
                f"novel class {class_id} has {len(pool)} training videos, need {shots}"
            )
        idx = rng.stream(seed, "novel-shots", class_id).choice(len(pool), size=shots, replace=False)
        chosen.extend(pool[i] for i in sorted(int(i) for i in idx))
    order = {v.video_id: i for i, v in enumerate(manifest.videos)}
    videos = sorted(keep + chosen, key=lambda v: order[v.video_id])
    return validate_manifest(Manifest(manifest.version, list(manifest.classes), videos))


def load_class_split(path=None) -> list[ClassInfo]:
    """Load a class-split config (the shipped activity label split by default)."""
    if path is None:
        text = resources.files("protoalign.data").joinpath("activity_class_split.json").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    doc = json.loads(text)
    classes = [_class_from_json(c, f"class[{i}]") for i, c in enumerate(doc["classes"])]
    ids = [c.class_id for c in classes]
    if sorted(ids) != list(range(len(classes))):
        raise ValidationError("class split: ids must be dense and unique from 0")
    return classes


def training_labels(manifest: Manifest) -> np.ndarray:
    """Class ids of the train split in manifest order (no distractors)."""
    return np.array([v.class_id for v in manifest.videos_in("train")], dtype=np.int64)
