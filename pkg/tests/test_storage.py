import os

import numpy as np
import pytest

from app.errors import MissingInputError, ValidationError
from app.storage import (
    load_json,
    load_jsonl,
    load_pgm,
    read_blob,
    save_json,
    save_jsonl,
    save_pgm,
    write_blob,
)


def test_json_is_written_atomically(tmp_path):
    path = str(tmp_path / "state.json")
    save_json(path, {"gender": "female", "scores": [0.1, 0.9]})
    assert load_json(path) == {"gender": "female", "scores": [0.1, 0.9]}
    assert os.listdir(tmp_path) == ["state.json"]


def test_missing_and_malformed_json(tmp_path):
    with pytest.raises(MissingInputError):
        load_json(str(tmp_path / "absent.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{\"open\": ", encoding="utf-8")
    with pytest.raises(ValidationError):
        load_json(str(bad))


def test_jsonl_records(tmp_path):
    path = str(tmp_path / "trace.jsonl")
    save_jsonl(path, [{"iteration": i, "total": 1.0 / (i + 1)} for i in range(3)])
    records = load_jsonl(path)
    assert [r["iteration"] for r in records] == [0, 1, 2]


def test_blob_shape_is_checked(tmp_path):
    path = str(tmp_path / "grid.f4")
    values = np.arange(24, dtype=np.float32).reshape(2, 3, 4)
    write_blob(path, values, "f4")
    assert os.path.getsize(path) == 24 * 4
    assert np.array_equal(read_blob(path, "f4", (2, 3, 4)), values)
    with pytest.raises(ValidationError):
        read_blob(path, "f4", (5, 5))


def test_pgm_labels(tmp_path):
    path = str(tmp_path / "seg.pgm")
    labels = np.array([[0, 1, 2], [255, 4, 5]], dtype=np.uint8)
    save_pgm(path, labels)
    with open(path, "rb") as f:
        assert f.read(2) == b"P5"
    assert np.array_equal(load_pgm(path), labels)


def test_wide_label_arrays_are_written_as_8_bit(tmp_path):
    from PIL import Image

    path = str(tmp_path / "seg.pgm")
    labels = np.array([[0, 3], [255, 1]], dtype=np.int64)
    save_pgm(path, labels)
    with Image.open(path) as img:
        assert img.mode == "L"
    assert np.array_equal(load_pgm(path), labels)


def test_rgb_image_is_not_a_label_map(tmp_path):
    from PIL import Image

    path = str(tmp_path / "color.ppm")
    Image.new("RGB", (4, 4)).save(path, format="PPM")
    with pytest.raises(ValidationError):
        load_pgm(path)
