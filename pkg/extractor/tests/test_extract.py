"""Video extraction: sampling arithmetic, determinism, decode failures."""

import logging

import numpy as np
import pytest

from vsextract import (
    DecodeError,
    ExtractionConfig,
    FrameEncoder,
    crop_and_resize,
    extract_video,
    sample_frames,
)


@pytest.fixture(scope="module")
def encoder():
    return FrameEncoder("resnet18", weights_path=None, seed=0)


def test_sampling_arithmetic(ten_second_video):
    frames, duration = sample_frames(ten_second_video, target_fps=3.0)
    assert frames.shape[0] == 30  # 10 s at 3 fps
    assert duration == pytest.approx(10.0, abs=0.2)
    assert frames.dtype == np.uint8 and frames.shape[-1] == 3


def test_ten_second_video_yields_t30_d512(ten_second_video, tmp_path, encoder):
    out = tmp_path / "clip.vsf"
    ok = extract_video(ten_second_video, out, ExtractionConfig(fps=3.0), encoder=encoder)
    assert ok
    import struct

    raw = out.read_bytes()
    magic, (version, dim, n_frames, fps, t0) = raw[:4], struct.unpack("<IIIff", raw[4:24])
    assert magic == b"VSF1"
    assert (version, dim, n_frames) == (1, 512, 30)
    assert fps == pytest.approx(3.0)
    assert len(raw) == 24 + 4 * dim * n_frames


def test_center_crop_extraction_is_deterministic(ten_second_video, tmp_path, encoder):
    config = ExtractionConfig(fps=3.0)
    extract_video(ten_second_video, tmp_path / "a.vsf", config, encoder=encoder)
    extract_video(ten_second_video, tmp_path / "b.vsf", config, encoder=encoder)
    assert (tmp_path / "a.vsf").read_bytes() == (tmp_path / "b.vsf").read_bytes()


def test_random_crop_differs_from_center(ten_second_video, tmp_path, encoder):
    extract_video(ten_second_video, tmp_path / "center.vsf", ExtractionConfig(fps=1.0), encoder=encoder)
    extract_video(
        ten_second_video, tmp_path / "random.vsf",
        ExtractionConfig(fps=1.0, random_crop=True, seed=3), encoder=encoder,
    )
    assert (tmp_path / "center.vsf").read_bytes() != (tmp_path / "random.vsf").read_bytes()


def test_undecodable_video_is_skipped_with_log(tmp_path, encoder, caplog):
    bogus = tmp_path / "not_a_video.mp4"
    bogus.write_bytes(b"this is not a video container")
    with caplog.at_level(logging.WARNING, logger="vsextract"):
        ok = extract_video(bogus, tmp_path / "out.vsf", ExtractionConfig(), encoder=encoder)
    assert not ok
    assert not (tmp_path / "out.vsf").exists()
    assert any("skipping" in r.message for r in caplog.records)


def test_sample_frames_unopenable(tmp_path):
    with pytest.raises(DecodeError):
        sample_frames(tmp_path / "missing.mp4", 3.0)


def test_crop_and_resize_shapes():
    frames = np.zeros((4, 120, 160, 3), dtype=np.uint8)
    out = crop_and_resize(frames, 112)
    assert out.shape == (4, 112, 112, 3)


def test_crop_center_takes_middle():
    frame = np.zeros((1, 100, 200, 3), dtype=np.uint8)
    frame[0, :, 50:150] = 255  # center 100-px band
    out = crop_and_resize(frame, 50)
    assert out.mean() > 250  # crop landed on the band


def test_encoder_dim_is_published_width(encoder):
    features = encoder.encode(np.zeros((2, 112, 112, 3), dtype=np.uint8))
    assert features.shape == (2, 512)
    assert features.dtype == np.float32


def test_config_validation():
    with pytest.raises(ValueError):
        ExtractionConfig(fps=0.0)
    with pytest.raises(ValueError):
        ExtractionConfig(crop_size=2)
