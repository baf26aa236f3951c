"""Grid field files.

A field is a JSON header plus a float32 little-endian sidecar holding the
samples in x-fastest order (index ``i + nx * (j + ny * k)``)::

    format      "udf-grid/1"
    cloth_type  upper | coat | pants | skirt | shoes
    side        left | right | null
    latent      latent code the field was tabulated for
    origin      [x, y, z]
    cell_size   [dx, dy, dz]
    dims        [nx, ny, nz]
    blob        sidecar file name
"""

from __future__ import annotations

import os
from typing import Optional

import numpy as np

from app.clothfield.backend import GridField
from app.errors import ValidationError
from app.models import ClothType, ScalarGrid
from app.storage import load_json, read_blob, save_json, write_blob

FORMAT = "udf-grid/1"


def field_filename(cloth: ClothType, side: Optional[str]) -> str:
    return f"udf_{cloth.value}{'_' + side if side else ''}.json"


def save_grid_field(path: str, field: GridField) -> str:
    blob = os.path.splitext(os.path.basename(path))[0] + ".f32"
    g = field.grid
    write_blob(os.path.join(os.path.dirname(path), blob), g.samples.transpose(2, 1, 0), "f4")
    save_json(path, {
        "format": FORMAT,
        "cloth_type": field.cloth_type.value,
        "side": field.side,
        "latent": [float(v) for v in field.latent],
        "origin": g.origin.tolist(),
        "cell_size": g.spacing.tolist(),
        "dims": list(g.dims),
        "blob": blob,
    })
    return path


def load_grid_field(path: str) -> GridField:
    header = load_json(path)
    if header.get("format") != FORMAT:
        raise ValidationError(f"{path}: unsupported grid format {header.get('format')!r}")
    try:
        nx, ny, nz = (int(n) for n in header["dims"])
        cloth = ClothType(header["cloth_type"])
        blob = os.path.join(os.path.dirname(path), header["blob"])
        origin, spacing = header["origin"], header["cell_size"]
    except (KeyError, TypeError, ValueError) as e:
        raise ValidationError(f"{path}: incomplete grid header ({e})") from e
    samples = read_blob(blob, "f4", (nz, ny, nx)).transpose(2, 1, 0).astype(np.float64)
    return GridField(
        cloth_type=cloth,
        side=header.get("side"),
        latent=np.asarray(header.get("latent", []), dtype=np.float64),
        grid=ScalarGrid(origin, spacing, samples),
    )
