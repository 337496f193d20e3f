"""Command-line interface.

Subcommands cover the whole experiment lifecycle: ``synth`` writes a
synthetic dataset, ``train`` fits a model into a run directory named by
config hash and seed, ``index``/``retrieve``/``eval`` turn a checkpoint
into rankings and metric reports, ``sweep`` aggregates shots/queries/
splits/proposal sweeps and ``plot`` renders the emitted CSVs.

Config precedence: explicit flags > --config file > preset defaults.
Validation failures exit with code 1 and one diagnostic line; I/O
failures exit with code 2.
"""

from __future__ import annotations

import csv
import hashlib
import json
import sys
from dataclasses import fields, replace
from pathlib import Path

import click
import numpy as np

from . import pipeline
from .errors import ProtoalignError, ValidationError
from .estimator import VideoEmbedder
from .index import save_index
from .manifest import load_manifest, retier, split_classes
from .metrics import (
    MetricsReport,
    QueryInfo,
    RetrievalRun,
    evaluate_run,
    map_at_k_curve,
    proposal_recall_sweep,
)
from .presets import TRAIN_PRESETS, train_params
from .synthetic import SyntheticSpec, generate_synthetic

_TRAIN_FLAGS = (
    "objective",
    "tau",
    "lambda_visual",
    "lambda_semantic",
    "bank_alpha",
    "learning_rate",
    "batch_size",
    "n_iters",
    "embed_dim",
    "max_frames",
)


def _merge_config(ctx, config_path, defaults: dict, flag_names) -> dict:
    """defaults < config file < explicitly passed flags."""
    resolved = dict(defaults)
    if config_path:
        try:
            doc = json.loads(Path(config_path).read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {config_path}: not valid JSON ({exc})") from exc
        unknown = set(doc) - set(flag_names) - set(defaults)
        if unknown:
            raise ValidationError(f"config {config_path}: unknown keys {sorted(unknown)}")
        resolved.update(doc)
    for name in flag_names:
        source = ctx.get_parameter_source(name)
        if source is not None and source.name != "DEFAULT":
            value = ctx.params[name]
            if value is not None:
                resolved[name] = value
    return resolved


def _run_dir(out, config: dict, seed: int) -> Path:
    blob = json.dumps({k: config[k] for k in sorted(config)}, sort_keys=True, default=str)
    digest = hashlib.sha256(blob.encode("utf-8")).hexdigest()[:10]
    path = Path(out) / f"{digest}-s{seed}"
    path.mkdir(parents=True, exist_ok=True)
    return path


@click.group()
def cli():
    """Imbalanced activity retrieval: training, indexing and evaluation."""


# -- synth ---------------------------------------------------------------------


@cli.command()
@click.option("--out", required=True, type=click.Path(), help="Output dataset directory.")
@click.option("--config", "config_path", type=click.Path(exists=True), help="JSON spec overrides.")
@click.option("--base-classes", type=int, default=None, help="Number of base classes.")
@click.option("--novel-classes", type=int, default=None, help="Number of novel classes.")
@click.option("--dim", type=int, default=None, help="Feature dimensionality.")
@click.option("--base-train", type=int, default=None, help="Training videos per base class.")
@click.option("--novel-train", type=int, default=None, help="Training videos per novel class.")
@click.option("--test-per-class", type=int, default=None)
@click.option("--distractors", type=int, default=None, help="Distractor videos in the test gallery.")
@click.option("--cluster-spread", type=float, default=None)
@click.option("--frame-noise", type=float, default=None)
@click.option("--semantic-dim", type=int, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_context
def synth(ctx, out, config_path, **_):
    """Generate a synthetic imbalanced dataset (manifest + features + bank)."""
    alias = {
        "base_classes": "n_base",
        "novel_classes": "n_novel",
        "base_train": "base_train",
        "novel_train": "novel_train",
        "test_per_class": "test_per_class",
        "distractors": "n_distractors",
        "dim": "dim",
        "cluster_spread": "cluster_spread",
        "frame_noise": "frame_noise",
        "semantic_dim": "semantic_dim",
        "seed": "seed",
    }
    spec_fields = {f.name for f in fields(SyntheticSpec)}
    merged = _merge_config(ctx, config_path, {}, list(alias))
    overrides = {alias[k]: v for k, v in merged.items() if k in alias}
    unknown = {k: v for k, v in merged.items() if k not in alias and k in spec_fields}
    overrides.update(unknown)
    spec = replace(SyntheticSpec(), **overrides)
    manifest_path, bank_path = generate_synthetic(spec, out)
    click.echo(f"manifest: {manifest_path}")
    click.echo(f"semantic bank: {bank_path}")


# -- train ---------------------------------------------------------------------


@cli.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--features", "features_root", required=True, type=click.Path(exists=True))
@click.option("--semantic-bank", "semantic_bank_path", type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(), help="Parent directory for the run dir.")
@click.option("--config", "config_path", type=click.Path(exists=True), help="JSON flag overrides.")
@click.option("--preset", type=click.Choice(sorted(TRAIN_PRESETS)), default="desk", show_default=True)
@click.option("--objective", type=click.Choice(["full", "baseline", "triplet", "margin"]), default="full", show_default=True)
@click.option("--tau", type=float, default=None, help="Distance softmax temperature.")
@click.option("--lambda-v", "lambda_visual", type=float, default=None, help="Visual loss weight.")
@click.option("--lambda-s", "lambda_semantic", type=float, default=None, help="Semantic loss weight.")
@click.option("--alpha", "bank_alpha", type=float, default=None, help="Visual bank EMA coefficient.")
@click.option("--learning-rate", type=float, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--n-iters", type=int, default=None)
@click.option("--embed-dim", type=int, default=None)
@click.option("--max-frames", type=int, default=None, help="Cap on pooled frames per video.")
@click.option("--shots", type=int, default=None, help="Training videos kept per novel class.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_context
def train(ctx, manifest_path, features_root, semantic_bank_path, out, config_path, preset, shots, seed, **_):
    """Train a model; writes checkpoint.vsck and loss_curve.csv."""
    merged = _merge_config(ctx, config_path, train_params(preset), _TRAIN_FLAGS)
    merged = {k: v for k, v in merged.items() if v is not None}
    manifest = load_manifest(manifest_path)
    run_dir = _run_dir(out, {**merged, "shots": shots, "manifest": str(manifest_path)}, seed)
    est = pipeline.fit_from_manifest(
        manifest,
        features_root,
        semantic_bank_path=semantic_bank_path,
        shots=shots,
        seed=seed,
        **{k: v for k, v in merged.items() if k != "preset"},
    )
    est.save(run_dir / "checkpoint.vsck")
    pipeline.write_loss_csv(est.loss_history_, run_dir / "loss_curve.csv")
    click.echo(f"{run_dir}")


def _mode_run(est, manifest, store, mode, clip_len, max_moment, queries_per, seed):
    if mode == "video":
        return pipeline.video_run(est, manifest, store, queries_per=queries_per, seed=seed)
    if mode == "clip":
        return pipeline.clip_run(est, manifest, store, clip_len_s=clip_len)
    return pipeline.moment_run(est, manifest, store, clip_len_s=clip_len, max_moment=max_moment)


# -- index ---------------------------------------------------------------------


@cli.command("index")
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--features", "features_root", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(), help="Output gallery index file.")
@click.option("--mode", type=click.Choice(["video", "clip", "moment"]), default="video", show_default=True)
@click.option("--split", type=click.Choice(["train", "validation", "test"]), default="test", show_default=True)
@click.option("--clip-len", type=float, default=4.0, show_default=True, help="Clip length in seconds (4/6/8 for clips, 5 for moments).")
@click.option("--max-moment", type=int, default=26, show_default=True, help="Max proposal length in clips.")
def index_cmd(checkpoint, manifest_path, features_root, out, mode, split, clip_len, max_moment):
    """Embed a split and write the gallery index."""
    est = VideoEmbedder.load(checkpoint)
    manifest = load_manifest(manifest_path)
    store = pipeline.load_feature_store(manifest, features_root)
    if mode == "video":
        gallery = pipeline.video_index(est, manifest, store, split)
    elif mode == "clip":
        gallery = pipeline.clip_index(est, manifest, store, clip_len, split)
    else:
        gallery = pipeline.moment_index(est, manifest, store, clip_len, max_moment, split)
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    save_index(gallery, out)
    click.echo(f"{out}: {len(gallery)} items of kind {gallery.kind}")


# -- retrieve --------------------------------------------------------------------


@cli.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--features", "features_root", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(), help="Output rankings CSV.")
@click.option("--mode", type=click.Choice(["video", "clip", "moment"]), default="video", show_default=True)
@click.option("--clip-len", type=float, default=4.0, show_default=True)
@click.option("--max-moment", type=int, default=26, show_default=True)
@click.option("--queries-per-retrieval", "queries_per", type=click.IntRange(1, 5), default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def retrieve(checkpoint, manifest_path, features_root, out, mode, clip_len, max_moment, queries_per, seed):
    """Run retrieval for every query and export the ranked lists."""
    est = VideoEmbedder.load(checkpoint)
    manifest = load_manifest(manifest_path)
    store = pipeline.load_feature_store(manifest, features_root)
    run = _mode_run(est, manifest, store, mode, clip_len, max_moment, queries_per, seed)
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    pipeline.write_rankings_csv(run, out)
    click.echo(f"{out}: {len(run.ranked)} queries")


# -- eval ------------------------------------------------------------------------


def _run_from_rankings(path, manifest) -> RetrievalRun:
    """Rebuild a run from an exported rankings CSV (independent recompute path)."""
    tier = {c.class_id: c.tier for c in manifest.classes}
    by_video = {v.video_id: v for v in manifest.videos}
    per_query: dict[str, list[tuple[str, float, bool]]] = {}
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        required = {"query_id", "rank", "gallery_id", "distance", "relevant"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ValidationError(f"{path}: rankings CSV must carry columns {sorted(required)}")
        for row in reader:
            per_query.setdefault(row["query_id"], []).append(
                (row["gallery_id"], float(row["distance"]), row["relevant"] == "1")
            )
    from .index import RankedList

    ranked, queries, gallery_items, relevant_pairs = [], {}, {}, set()
    for qid, rows in per_query.items():
        ranked.append(RankedList(qid, [r[0] for r in rows], np.array([r[1] for r in rows])))
        video_id = qid.split(":")[0].split("+")[0]
        record = by_video.get(video_id)
        if record is None or record.is_distractor:
            raise ValidationError(f"rankings query {qid!r} does not resolve to a labelled video")
        queries[qid] = QueryInfo(qid, record.class_id, tier[record.class_id], record.duration_s)
        for gid, _, rel in rows:
            gallery_items.setdefault(gid, {"class_id": None})
            if rel:
                relevant_pairs.add((qid, gid))
    run = RetrievalRun(kind="video", ranked=ranked, queries=queries, gallery_items=gallery_items)
    run.relevant = lambda query, gid: (query.query_id, gid) in relevant_pairs  # type: ignore
    return run


@cli.command("eval")
@click.option("--rankings", required=True, type=click.Path(exists=True), help="rankings.csv from retrieve.")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(), help="Output directory for reports.")
@click.option("--map-curve/--no-map-curve", default=False, show_default=True, help="Also write map_curve.csv.")
def eval_cmd(rankings, manifest_path, out, map_curve):
    """Recompute mAP/harmonic from exported rankings and write the report."""
    manifest = load_manifest(manifest_path)
    run = _run_from_rankings(rankings, manifest)
    report = evaluate_run(run)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    report.to_json(out / "report.json")
    report.to_csv(out / "report_per_query.csv")
    if map_curve:
        curve = map_at_k_curve(run)
        with open(out / "map_curve.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["k", "base", "novel", "overall"])
            for i, k in enumerate(curve["k"]):
                writer.writerow([k, curve["base"][i], curve["novel"][i], curve["overall"][i]])
    click.echo(report.to_json().strip())


# -- sweep -----------------------------------------------------------------------


@cli.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--features", "features_root", required=True, type=click.Path(exists=True))
@click.option("--semantic-bank", "semantic_bank_path", type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--kind", type=click.Choice(["shots", "queries", "splits", "proposals"]), required=True)
@click.option("--preset", type=click.Choice(sorted(TRAIN_PRESETS)), default="desk", show_default=True)
@click.option("--objective", type=click.Choice(["full", "baseline", "triplet", "margin"]), default="full", show_default=True)
@click.option("--seeds", default="0,1,2", show_default=True, help="Comma-separated training seeds.")
@click.option("--shots", type=int, default=5, show_default=True, help="Shots for non-shot sweeps.")
@click.option("--n-iters", type=int, default=None)
def sweep(manifest_path, features_root, semantic_bank_path, out, kind, preset, objective, seeds, shots, n_iters):
    """Aggregate a sweep (novel shots, query count, class splits, proposals)."""
    manifest = load_manifest(manifest_path)
    store = pipeline.load_feature_store(manifest, features_root)
    seed_list = [int(s) for s in seeds.split(",") if s.strip()]
    params = train_params(preset, objective=objective)
    if n_iters is not None:
        params["n_iters"] = n_iters
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []

    def fit_eval(man, shots_now, seed, queries_per=1):
        est = pipeline.fit_from_manifest(
            man, features_root, semantic_bank_path=semantic_bank_path,
            shots=shots_now, store=store, seed=seed, **params,
        )
        report = evaluate_run(pipeline.video_run(est, man, store, queries_per=queries_per, seed=seed))
        return est, report

    if kind == "proposals":
        grid = proposal_recall_sweep(manifest, clip_lens=(4.0, 5.0, 6.0, 8.0), max_lens=tuple(range(1, 41)))
        with open(out / "recall_grid.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["clip_len", "max_moment", "recall"])
            for (n, m), recall in sorted(grid.items()):
                writer.writerow([n, m, repr(recall)])
        click.echo(f"{out / 'recall_grid.csv'}: {len(grid)} cells")
        return

    if kind == "shots":
        for shots_now in (1, 2, 3, 4, 5):
            for seed in seed_list:
                _, report = fit_eval(manifest, shots_now, seed)
                rows.append({"shots": shots_now, "seed": seed, **_headline(report)})
    elif kind == "queries":
        for seed in seed_list:
            est, _ = fit_eval(manifest, shots, seed)
            for q in (1, 2, 3, 4, 5):
                report = evaluate_run(pipeline.video_run(est, manifest, store, queries_per=q, seed=seed))
                rows.append({"queries_per": q, "seed": seed, **_headline(report)})
    else:  # splits
        k = manifest.n_classes
        for n_base in (k // 2, int(round(0.6 * k)), int(round(0.4 * k))):
            split_manifest = retier(manifest, split_classes(k, n_base, seed=0)[0])
            for seed in seed_list:
                _, report = fit_eval(split_manifest, shots, seed)
                rows.append({"n_base": n_base, "n_novel": k - n_base, "seed": seed, **_headline(report)})

    fieldnames = list(rows[0].keys())
    with open(out / "sweep.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    click.echo(f"{out / 'sweep.csv'}: {len(rows)} rows")


def _headline(report: MetricsReport) -> dict:
    return {
        "map_base": _fmt(report.map_base),
        "map_novel": _fmt(report.map_novel),
        "harmonic": _fmt(report.harmonic),
        "map_overall": _fmt(report.map_overall),
    }


def _fmt(x):
    return "" if x is None else f"{x:.2f}"


# -- plot ------------------------------------------------------------------------


@cli.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--kind", type=click.Choice(["loss", "map-curve", "sweep", "recall-grid"]), required=True)
@click.option("--out", required=True, type=click.Path(), help="Output image file.")
def plot(input_path, kind, out):
    """Render an emitted CSV (loss curve, mAP curve, sweep, recall grid)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = list(csv.DictReader(open(input_path, newline="")))
    if not rows:
        raise ValidationError(f"{input_path}: no data rows")
    fig, ax = plt.subplots(figsize=(6, 4))
    if kind == "loss":
        iters = [int(r["iter"]) for r in rows]
        for column in ("total", "cls", "visual", "semantic"):
            ax.plot(iters, [float(r[column]) for r in rows], label=column)
        ax.set_yscale("log")
        ax.set_xlabel("iteration")
        ax.set_ylabel("loss")
    elif kind == "map-curve":
        ks = [int(r["k"]) for r in rows]
        for column in ("base", "novel", "overall"):
            ax.plot(ks, [float(r[column]) for r in rows], label=column)
        ax.set_xlabel("rank cutoff k")
        ax.set_ylabel("mAP (%)")
    elif kind == "sweep":
        x_key = next(k for k in ("shots", "queries_per", "n_base") if k in rows[0])
        xs = sorted({int(r[x_key]) for r in rows})
        for column in ("map_base", "map_novel", "harmonic"):
            pts = [
                (x, np.mean(vals))
                for x in xs
                if (vals := [float(r[column]) for r in rows if int(r[x_key]) == x and r[column] != ""])
            ]
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=column)
        ax.set_xlabel(x_key)
        ax.set_ylabel("mAP (%)")
    else:  # recall-grid
        lens = sorted({float(r["clip_len"]) for r in rows})
        for clip_len in lens:
            pts = sorted((int(r["max_moment"]), float(r["recall"])) for r in rows if float(r["clip_len"]) == clip_len)
            ax.plot([p[0] for p in pts], [p[1] for p in pts], label=f"clip {clip_len:g}s")
        ax.set_xlabel("max proposal length (clips)")
        ax.set_ylabel("recall @ tIoU 0.5")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    click.echo(f"{out}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except ProtoalignError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except OSError as exc:
        click.echo(f"io error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
