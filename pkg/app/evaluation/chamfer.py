"""Chamfer distance between meshes after projection-based similarity alignment.

Convention: symmetric mean of vertex-to-nearest-triangle distances in both
directions, reported in millimeters.
"""

from __future__ import annotations

import logging
from typing import Optional, Tuple

import numpy as np

from app.errors import ValidationError
from app.evaluation.alignment import estimate_similarity
from app.evaluation.pairs import VertexPairs, match_vertex_pairs
from app.geometry.proximity import TriangleSoupIndex
from app.models import Camera, Mesh, SimilarityTransform

logger = logging.getLogger(__name__)


def _one_way(src: Mesh, dst: Mesh) -> float:
    return float(np.mean(TriangleSoupIndex(dst.triangles).distance(src.vertices)))


def chamfer_distance(a: Mesh, b: Mesh) -> float:
    if a.is_empty or b.is_empty:
        raise ValidationError("chamfer distance needs two non-empty meshes")
    return 1000.0 * (_one_way(a, b) + _one_way(b, a)) / 2.0


def evaluate_cd(
    recon: Mesh,
    gt: Mesh,
    camera: Camera,
    workers: Optional[int] = 1,
) -> Tuple[float, SimilarityTransform, VertexPairs]:
    pairs = match_vertex_pairs(recon, gt, camera, workers)
    transform = estimate_similarity(pairs.recon, pairs.gt)
    aligned = recon.with_vertices(transform.apply(recon.vertices))
    cd = chamfer_distance(aligned, gt)
    logger.info("CD %.3f mm over %d pixel pairs (scale %.4f)", cd, len(pairs), transform.scale)
    return cd, transform, pairs
