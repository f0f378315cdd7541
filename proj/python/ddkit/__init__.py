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

"""Dataset preparation, augmentation and evaluation for distracted-driver images."""

from importlib import resources as _resources
from pathlib import Path as _Path

from ._ddkit import (
    Cascade,
    Error,
    IoError,
    ParseError,
    ValidationError,
    augment,
    blur_face,
    class_stats,
    cross_entropy,
    default_thresholds,
    detect,
    ensemble,
    evaluate,
    gaussian_blur,
    hsv_to_rgb,
    load_cascade,
    load_manifest,
    load_thresholds,
    read_image,
    rgb_to_hsv,
    rotate,
    run_cli,
    save_manifest,
    skin_mask,
    skin_segment,
    split_by_driver,
    write_image,
)

__version__ = "0.1.0"


def data_path(name: str) -> _Path:
    """Path of a bundled data file (haarcascade_eye.xml, default.json)."""
    return _Path(str(_resources.files(__name__).joinpath("data", name)))


def default_cascade() -> Cascade:
    return load_cascade(data_path("haarcascade_eye.xml"))


def main() -> int:
    import sys

    return run_cli(sys.argv[1:])
