# Copyright 2026 The ddkit Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import json
import math
import os
from pathlib import Path

import numpy as np
import pytest

import ddkit

FIXTURES = Path(os.environ.get("DDKIT_FIXTURE_DIR", Path(__file__).resolve().parents[1] / "fixtures"))


def synthetic_rows(root, n=12, subjects=3):
    rng = np.random.default_rng(0)
    rows = []
    for i in range(n):
        label = (i // subjects) % 10
        name = f"img_{i}.png"
        img = rng.integers(0, 256, size=(24, 32, 3), dtype=np.uint8)
        (root / f"c{label}").mkdir(parents=True, exist_ok=True)
        ddkit.write_image(root / f"c{label}" / name, img)
        rows.append((f"p{i % subjects:03d}", label, name, "original"))
    return rows


def test_image_round_trip(tmp_path):
    img = np.random.default_rng(1).integers(0, 256, size=(10, 14, 3), dtype=np.uint8)
    ddkit.write_image(tmp_path / "a.png", img)
    back = ddkit.read_image(tmp_path / "a.png")
    assert back.shape == (10, 14, 3)
    assert np.array_equal(back, img)
    blurred = ddkit.gaussian_blur(img, 1.5)
    assert blurred.shape == img.shape
    assert ddkit.gaussian_blur(np.full((5, 5, 3), 90, np.uint8), 2.0).min() == 90


def test_errors_map_to_python_types(tmp_path):
    with pytest.raises(ddkit.IoError):
        ddkit.read_image(tmp_path / "missing.png")
    with pytest.raises(ddkit.ValidationError):
        ddkit.gaussian_blur(np.zeros((4, 4, 3), np.uint8), 0.0)
    assert issubclass(ddkit.ParseError, ddkit.Error)


def test_hsv_round_trip():
    for rgb in [(0, 0, 0), (255, 255, 255), (10, 200, 57), (250, 30, 99)]:
        assert max(abs(a - b) for a, b in zip(ddkit.hsv_to_rgb(*ddkit.rgb_to_hsv(*rgb)), rgb)) <= 1


def test_detect_and_blur_fixture():
    cascade = ddkit.default_cascade()
    assert (cascade.window_w, cascade.window_h) == (20, 20)
    ann = {a["file"]: a["eyes"] for a in json.loads((FIXTURES / "eyes" / "annotations.json").read_text())}
    img = ddkit.read_image(FIXTURES / "eyes" / "driver_00.png")
    dets = ddkit.detect(img, cascade)
    assert dets, "no detections on driver_00"
    out, status, region = ddkit.blur_face(img, cascade)
    assert status == "eye_found"
    x, y, w, h = region
    outside = np.ones(img.shape[:2], bool)
    outside[y : y + h, x : x + w] = False
    assert np.array_equal(out[outside], img[outside])
    assert np.abs(out[~outside].astype(int) - img[~outside]).mean() > 0
    assert len(ann) == 10


def test_skin_mask_and_segment():
    img = np.zeros((8, 8, 3), np.uint8)
    img[:4] = (220, 150, 120)
    t = ddkit.default_thresholds()
    t["mask_smooth_sigma"] = 0
    mask = ddkit.skin_mask(img, t)
    assert mask.shape == (8, 8) and mask.dtype == bool
    assert mask[:4].all() and not mask[4:].any()
    seg = ddkit.skin_segment(img, t)
    assert np.array_equal(seg[:4], img[:4]) and not seg[4:].any()
    bad = dict(t, rgb={"enabled": True, "channels": [[200, 100], [0, 255], [0, 255]]})
    with pytest.raises(ddkit.ValidationError):
        ddkit.skin_mask(img, bad)


def test_split_and_augment(tmp_path):
    rows = synthetic_rows(tmp_path / "src")
    train, test, subjects = ddkit.split_by_driver(rows, test_drivers=1, seed=42)
    assert len(subjects) == 1
    assert {r[0] for r in test} == set(subjects)
    assert not {r[0] for r in train} & set(subjects)
    assert len(train) + len(test) == len(rows)

    out, report = ddkit.augment(rows, "classical", tmp_path / "out", image_roots=[tmp_path / "src"], seed=1, workers=2)
    assert len(out) == 3 * len(rows)
    assert report["failed"] == 0
    again, _ = ddkit.augment(rows, "classical", tmp_path / "out2", image_roots=[tmp_path / "src"], seed=1, workers=1)
    assert again == out

    full, report = ddkit.augment(
        rows,
        "paper-full",
        tmp_path / "full",
        image_roots=[tmp_path / "src"],
        cascade=ddkit.data_path("haarcascade_eye.xml"),
    )
    assert len(full) == 4 * len(rows)

    ddkit.save_manifest(tmp_path / "m.csv", full)
    assert ddkit.load_manifest(tmp_path / "m.csv") == full
    assert len(ddkit.ensemble([rows, out[:0]], seed=3)) == len(rows)


def test_evaluate_and_cross_entropy():
    truth = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]
    rep = ddkit.evaluate(truth, truth)
    assert rep["accuracy"] == 1.0
    assert rep["micro"]["f1"] == rep["accuracy"]
    assert ddkit.cross_entropy(truth, np.full((10, 10), 0.1)) == pytest.approx(math.log(10), abs=1e-9)
    assert ddkit.cross_entropy(truth, np.eye(10)) == 0.0
    with pytest.raises(ddkit.ValidationError):
        ddkit.evaluate([0, 1], [0])


def test_cli_in_process(tmp_path, capsys):
    rows = synthetic_rows(tmp_path / "src", n=20, subjects=4)
    ddkit.save_manifest(tmp_path / "src" / "m.csv", rows)
    assert ddkit.run_cli(["stats", str(tmp_path / "src" / "m.csv")]) == 0
    assert "median" in capsys.readouterr().out
    assert ddkit.run_cli(["split", str(tmp_path / "src" / "m.csv"), "--test-drivers", "1", "--out", str(tmp_path / "s")]) == 0
    assert (tmp_path / "s" / "train.csv").exists()
    assert ddkit.run_cli(["split", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "s")]) == 2
