"""Body model files: a JSON manifest plus little-endian sidecar blobs.

Manifest fields (``body.json``)::

    format          "body-model/1"
    gender          male | female | neutral
    vertex_count    N
    face_count      F
    joint_count     24
    shape_dim       10
    joint_names     [24 names]
    joint_parents   [24 ints, -1 for the root]
    blobs           {vertices, faces, weights, regressor, shape_basis} -> file names

Blob layouts: vertices float64 (N, 3); faces uint32 (F, 3); weights float64
(N, 24); regressor float64 (24, N); shape_basis float64 (10, N, 3).
"""

from __future__ import annotations

import logging
import os

from app import constants
from app.body.model import BodyModel
from app.errors import ValidationError
from app.storage import load_json, read_blob, save_json, write_blob

logger = logging.getLogger(__name__)

FORMAT = "body-model/1"
MANIFEST = "body.json"

_BLOBS = {
    "vertices": "body_vertices.f64",
    "faces": "body_faces.u32",
    "weights": "body_weights.f64",
    "regressor": "body_regressor.f64",
    "shape_basis": "body_shape_basis.f64",
}


def save_body_model(model: BodyModel, directory: str) -> str:
    os.makedirs(directory, exist_ok=True)
    write_blob(os.path.join(directory, _BLOBS["vertices"]), model.template_vertices, "f8")
    write_blob(os.path.join(directory, _BLOBS["faces"]), model.faces, "u4")
    write_blob(os.path.join(directory, _BLOBS["weights"]), model.skin_weights, "f8")
    write_blob(os.path.join(directory, _BLOBS["regressor"]), model.joint_regressor, "f8")
    write_blob(os.path.join(directory, _BLOBS["shape_basis"]), model.shape_basis, "f8")
    manifest = {
        "format": FORMAT,
        "gender": model.gender_variant,
        "vertex_count": model.vertex_count,
        "face_count": int(len(model.faces)),
        "joint_count": constants.JOINT_COUNT,
        "shape_dim": constants.SHAPE_DIM,
        "joint_names": list(model.joint_names),
        "joint_parents": list(model.joint_parents),
        "blobs": dict(_BLOBS),
    }
    path = os.path.join(directory, MANIFEST)
    save_json(path, manifest)
    logger.debug("body model written to %s", path)
    return path


def load_body_model(path: str) -> BodyModel:
    """Load from a manifest path or the directory holding ``body.json``."""
    if os.path.isdir(path):
        path = os.path.join(path, MANIFEST)
    manifest = load_json(path)
    if manifest.get("format") != FORMAT:
        raise ValidationError(f"{path}: unsupported body model format {manifest.get('format')!r}")
    base = os.path.dirname(path)
    try:
        n = int(manifest["vertex_count"])
        f = int(manifest["face_count"])
        j = int(manifest["joint_count"])
        k = int(manifest["shape_dim"])
        blobs = manifest["blobs"]
    except (KeyError, TypeError, ValueError) as e:
        raise ValidationError(f"{path}: incomplete body manifest ({e})") from e
    if j != constants.JOINT_COUNT or k != constants.SHAPE_DIM:
        raise ValidationError(f"{path}: expected {constants.JOINT_COUNT} joints and {constants.SHAPE_DIM} shape dims")

    def blob(key: str, dtype: str, shape):
        return read_blob(os.path.join(base, blobs[key]), dtype, shape)

    return BodyModel(
        template_vertices=blob("vertices", "f8", (n, 3)),
        faces=blob("faces", "u4", (f, 3)).astype("int64"),
        joint_parents=tuple(manifest["joint_parents"]),
        joint_regressor=blob("regressor", "f8", (j, n)),
        skin_weights=blob("weights", "f8", (n, j)),
        shape_basis=blob("shape_basis", "f8", (k, n, 3)),
        gender_variant=manifest.get("gender", "neutral"),
        joint_names=tuple(manifest["joint_names"]),
    )
