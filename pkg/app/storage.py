"""File helpers shared by the commands: JSON state, JSONL traces, raw blobs, PGM rasters."""

from __future__ import annotations

import json
import logging
import os
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
from PIL import Image

from app.errors import MissingInputError, ValidationError

logger = logging.getLogger(__name__)


def ensure_dir(path: str) -> str:
    expanded = os.path.expanduser(path)
    os.makedirs(expanded, exist_ok=True)
    return expanded


def require_file(path: str) -> str:
    if not os.path.isfile(path):
        raise MissingInputError(f"missing input file: {path}")
    return path


def load_json(path: str) -> Any:
    require_file(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}: malformed JSON ({e})") from e


def save_json(path: str, obj: Any) -> None:
    """Write through a temp file and rename so readers never see half a file."""
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(obj, f, ensure_ascii=False, indent=2)
        f.write("\n")
    os.replace(tmp, path)


def save_jsonl(path: str, records: Iterable[Mapping[str, Any]]) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False))
            f.write("\n")
    os.replace(tmp, path)


def load_jsonl(path: str) -> list:
    require_file(path)
    with open(path, "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def write_blob(path: str, array: np.ndarray, dtype: str) -> None:
    """Raw little-endian dump, C order."""
    data = np.ascontiguousarray(array, dtype=np.dtype(dtype).newbyteorder("<"))
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(data.tobytes())
    os.replace(tmp, path)


def read_blob(path: str, dtype: str, shape: Sequence[int]) -> np.ndarray:
    require_file(path)
    data = np.fromfile(path, dtype=np.dtype(dtype).newbyteorder("<"))
    expected = int(np.prod(shape))
    if data.size != expected:
        raise ValidationError(f"{path}: expected {expected} values, found {data.size}")
    return data.reshape(tuple(shape)).astype(np.dtype(dtype).newbyteorder("="))


def save_pgm(path: str, labels: np.ndarray) -> None:
    """8-bit binary PGM (P5)."""
    Image.fromarray(np.ascontiguousarray(labels, dtype=np.uint8)).save(path, format="PPM")


def load_pgm(path: str) -> np.ndarray:
    require_file(path)
    with Image.open(path) as img:
        if img.mode != "L":
            raise ValidationError(f"{path}: expected an 8-bit grayscale PGM, got mode {img.mode}")
        return np.array(img, dtype=np.uint8)
