import json

import cv2
import numpy as np
import pytest


@pytest.fixture(scope="session")
def ten_second_video(tmp_path_factory):
    """A deterministic 10 s, 30 fps MJPG video (moving gradient pattern)."""
    path = tmp_path_factory.mktemp("video") / "clip.avi"
    writer = cv2.VideoWriter(str(path), cv2.VideoWriter_fourcc(*"MJPG"), 30.0, (160, 120))
    assert writer.isOpened()
    ys, xs = np.mgrid[0:120, 0:160]
    for i in range(300):
        base = (xs * 1.3 + ys * 0.7 + i * 5) % 256
        frame = np.stack([base, 255 - base, (base * 2) % 256], axis=-1)
        writer.write(frame.astype(np.uint8))
    writer.release()
    return path


@pytest.fixture(scope="session")
def manifest_file(tmp_path_factory):
    """A minimal engine-schema manifest with multi-word class names."""
    path = tmp_path_factory.mktemp("manifest") / "manifest.json"
    doc = {
        "version": 1,
        "classes": [
            {"id": 0, "name": "playing water polo", "tier": "base"},
            {"id": 1, "name": "knitting", "tier": "base"},
            {"id": 2, "name": "walking the dog", "tier": "novel"},
        ],
        "videos": [
            {"id": "clip", "class": 0, "split": "train", "duration_s": 10.0,
             "activity": [0.0, 10.0], "feature_file": "features/clip.vsf"},
            {"id": "t0", "class": 1, "split": "test", "duration_s": 5.0,
             "activity": [0.0, 5.0], "feature_file": "features/t0.vsf"},
        ],
    }
    path.write_text(json.dumps(doc))
    return path
