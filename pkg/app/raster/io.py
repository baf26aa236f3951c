"""DPM1 face-index map files.

Layout (little-endian): the 4-byte magic ``DPM1``, uint32 width, uint32
height, then one 20-byte record per pixel in row-major order: int32 face
(-1 for empty), three float32 barycentrics, float32 depth.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from app.errors import ValidationError
from app.models import FaceIndexMap
from app.storage import require_file

MAGIC = b"DPM1"
_HEADER = struct.Struct("<4sII")
_RECORD = np.dtype([("face", "<i4"), ("bary", "<f4", (3,)), ("depth", "<f4")])


def save_face_index_map(path: str, fmap: FaceIndexMap) -> None:
    records = np.empty((fmap.height, fmap.width), dtype=_RECORD)
    records["face"] = fmap.face
    records["bary"] = fmap.bary
    records["depth"] = fmap.depth
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(_HEADER.pack(MAGIC, fmap.width, fmap.height))
        f.write(records.tobytes())
    os.replace(tmp, path)


def load_face_index_map(path: str) -> FaceIndexMap:
    require_file(path)
    with open(path, "rb") as f:
        head = f.read(_HEADER.size)
        body = f.read()
    if len(head) != _HEADER.size:
        raise ValidationError(f"{path}: truncated DPM1 header")
    magic, width, height = _HEADER.unpack(head)
    if magic != MAGIC:
        raise ValidationError(f"{path}: bad magic {magic!r}")
    if len(body) != width * height * _RECORD.itemsize:
        raise ValidationError(f"{path}: expected {width}x{height} records")
    records = np.frombuffer(body, dtype=_RECORD).reshape(height, width)
    return FaceIndexMap(
        face=records["face"].astype(np.int32),
        bary=records["bary"].astype(np.float64),
        depth=records["depth"].astype(np.float64),
    )
