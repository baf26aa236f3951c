from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from app.errors import ValidationError
from app.models import Camera, Mesh
from app.raster.rasterizer import rasterize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VertexPairs:
    """Face-centroid pairs of two meshes seen at the same pixel (duplicates kept)."""

    recon: np.ndarray  # (K, 3)
    gt: np.ndarray  # (K, 3)
    pixels: np.ndarray  # (K, 2) (x, y)

    def __len__(self) -> int:
        return len(self.recon)

    def to_points_text(self) -> str:
        """``x y z`` per line: all recon points, then all gt points."""
        rows = np.concatenate([self.recon, self.gt])
        return "".join(f"{x:.9f} {y:.9f} {z:.9f}\n" for x, y, z in rows)


def match_vertex_pairs(recon: Mesh, gt: Mesh, camera: Camera, workers: Optional[int] = 1) -> VertexPairs:
    if recon.is_empty or gt.is_empty:
        raise ValidationError("vertex pairing needs two non-empty meshes")
    a = rasterize(recon, camera, workers)
    b = rasterize(gt, camera, workers)
    both = a.covered & b.covered
    rows, cols = np.nonzero(both)
    recon_c = recon.triangles.mean(axis=1)
    gt_c = gt.triangles.mean(axis=1)
    pairs = VertexPairs(
        recon=recon_c[a.face[rows, cols]],
        gt=gt_c[b.face[rows, cols]],
        pixels=np.stack([cols, rows], axis=1),
    )
    logger.debug("matched %d co-covered pixels", len(pairs))
    return pairs
