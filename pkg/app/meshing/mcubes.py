from __future__ import annotations

import logging

import numpy as np
from skimage import measure

from app.errors import ValidationError
from app.models import Mesh, ScalarGrid

logger = logging.getLogger(__name__)


def marching_cubes(grid: ScalarGrid, iso: float) -> Mesh:
    """Iso-surface C = iso in world coordinates; empty when the samples never straddle iso.

    On an unsigned field this is a closed shell around the sheet at distance iso.
    """
    if not iso > 0:
        raise ValidationError("iso level must be positive for an unsigned field")
    samples = grid.samples
    if not samples.min() < iso < samples.max():
        return Mesh.empty()
    volume = np.array(samples, dtype=np.float32)
    verts, faces, _, _ = measure.marching_cubes(
        volume, level=iso, spacing=tuple(float(s) for s in grid.spacing), method="lewiner", allow_degenerate=False
    )
    if len(faces) == 0:
        return Mesh.empty()
    return Mesh(verts.astype(np.float64) + grid.origin, faces.astype(np.int64))
