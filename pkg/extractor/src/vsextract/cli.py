"""Command-line interface for the offline extractor."""

from __future__ import annotations

import logging
import sys

import click

from .extract import ExtractionConfig, export_semantic_bank, extract_tree, extract_video
from .video import DecodeError


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
def cli(verbose):
    """Produce VSF1 frame features and VSB1 semantic banks."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _config(fps, crop, backbone, weights, random_crop, seed) -> ExtractionConfig:
    return ExtractionConfig(
        fps=fps, crop_size=crop, backbone=backbone,
        weights_path=weights, random_crop=random_crop, seed=seed,
    )


@cli.command()
@click.option("--video", required=True, type=click.Path(exists=True), help="Input video file.")
@click.option("--out", required=True, type=click.Path(), help="Output VSF1 file.")
@click.option("--fps", type=float, default=3.0, show_default=True)
@click.option("--crop", type=int, default=112, show_default=True)
@click.option("--backbone", type=click.Choice(["resnet18"]), default="resnet18", show_default=True)
@click.option("--weights", type=click.Path(exists=True), help="Backbone state-dict file.")
@click.option("--random-crop", is_flag=True, help="Random square crop instead of center.")
@click.option("--seed", type=int, default=0, show_default=True)
def video(video, out, fps, crop, backbone, weights, random_crop, seed):
    """Extract one video into a VSF1 feature file."""
    ok = extract_video(video, out, _config(fps, crop, backbone, weights, random_crop, seed))
    if not ok:
        raise click.ClickException(f"{video}: not decodable")
    click.echo(out)


@cli.command()
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--videos", "videos_root", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(), help="Output dataset root.")
@click.option("--fps", type=float, default=3.0, show_default=True)
@click.option("--crop", type=int, default=112, show_default=True)
@click.option("--backbone", type=click.Choice(["resnet18"]), default="resnet18", show_default=True)
@click.option("--weights", type=click.Path(exists=True))
@click.option("--random-crop", is_flag=True)
@click.option("--seed", type=int, default=0, show_default=True)
def tree(manifest, videos_root, out, fps, crop, backbone, weights, random_crop, seed):
    """Extract every manifest video found under --videos."""
    summary = extract_tree(manifest, videos_root, out, _config(fps, crop, backbone, weights, random_crop, seed))
    click.echo(f"written: {summary['written']}, skipped: {len(summary['skipped'])}")


@cli.command()
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--method", type=click.Choice(["word2vec", "glove", "fasttext", "elmo"]), default="elmo", show_default=True)
@click.option("--vectors", type=click.Path(exists=True), help="Pretrained vectors in text format.")
@click.option("--out", required=True, type=click.Path(), help="Output VSB1 file.")
def bank(manifest, method, vectors, out):
    """Export the class-name semantic bank."""
    dim = export_semantic_bank(manifest, method, out, vectors_path=vectors)
    click.echo(f"{out}: W={dim}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except (ValueError, DecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except OSError as exc:
        click.echo(f"io error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
