"""Body-cloth correspondence: how often the reconstruction agrees with segmented labels on the body surface."""

from __future__ import annotations

import logging
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from app import constants
from app.body.model import TPoseBody
from app.geometry.proximity import TriangleSoupIndex
from app.models import LABEL_NON_CLOTH, ClothType, Mesh, ObservationSet
from app.supervision.densepose_map import cloth_to_body_map

logger = logging.getLogger(__name__)

BCC_CLASSES: Dict[str, Tuple[ClothType, ...]] = {
    "upper_body": (ClothType.UPPER, ClothType.COAT),
    "lower_body": (ClothType.PANTS, ClothType.SKIRT),
    "non_cloth": (),
}

DEFAULT_BCC_POINTS = 2000


def _mesh_cloth(key: str) -> Optional[ClothType]:
    try:
        return ClothType(key.split("_")[0])
    except ValueError:
        return None


def _distance_to(meshes: List[Mesh], points: np.ndarray) -> np.ndarray:
    tris = [m.triangles for m in meshes if not m.is_empty]
    if not tris or len(points) == 0:
        return np.full(len(points), np.inf)
    return TriangleSoupIndex(np.concatenate(tris)).distance(points)


def evaluate_bcc(
    recon_cloths: Mapping[str, Mesh],
    obs: ObservationSet,
    tpose: TPoseBody,
    n_points: int = DEFAULT_BCC_POINTS,
    seed: int = 0,
    radius: float = constants.BCC_RADIUS,
) -> Tuple[Dict[str, float], float, List[str]]:
    """Per-class proportions, their mean over classes with points, and the classes flagged empty.

    A cloth point is correct when a reconstructed garment of its class lies
    within ``radius``; a non-cloth point is correct when no garment does.
    """
    mapped = cloth_to_body_map(obs, tpose, n_points, seed)
    by_class: Dict[str, List[Mesh]] = {name: [] for name in BCC_CLASSES}
    garments: List[Mesh] = []
    for key, mesh in recon_cloths.items():
        cloth = _mesh_cloth(key)
        if cloth is None:
            continue
        garments.append(mesh)
        for name, members in BCC_CLASSES.items():
            if cloth in members:
                by_class[name].append(mesh)

    scores: Dict[str, float] = {}
    flagged: List[str] = []
    for name, members in BCC_CLASSES.items():
        if members:
            sel = np.isin(mapped.labels, [c.label for c in members])
        else:
            sel = mapped.labels == LABEL_NON_CLOTH
        points = mapped.positions[sel]
        if len(points) == 0:
            flagged.append(name)
            logger.warning("no BCC points for class %s", name)
            continue
        if members:
            correct = _distance_to(by_class[name], points) <= radius
        else:
            correct = ~(_distance_to(garments, points) <= radius)
        scores[name] = float(np.mean(correct))
    average = float(np.mean(list(scores.values()))) if scores else 0.0
    return scores, average, flagged
