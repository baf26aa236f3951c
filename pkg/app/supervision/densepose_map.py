"""Lift segmentation pixels onto the T-pose body through per-pixel DensePose data."""

from __future__ import annotations

import logging
from typing import Dict, Mapping, Optional

import numpy as np

from app import constants
from app.body.model import PART_NAMES, BodyModel, TPoseBody
from app.errors import ValidationError
from app.models import LABEL_BACKGROUND, ClothType, MappedClothPoints, ObservationSet

logger = logging.getLogger(__name__)

# body parts whose visibility decides whether a missing garment counts as absent
CLOTH_PARTS: Dict[ClothType, tuple] = {
    ClothType.UPPER: ("torso", "arm"),
    ClothType.COAT: ("torso", "arm"),
    ClothType.PANTS: ("leg",),
    ClothType.SKIRT: ("leg",),
    ClothType.SHOES: ("foot",),
}


def cloth_to_body_map(
    obs: ObservationSet,
    tpose: TPoseBody,
    n_points: int = constants.N_SAMPLED_POINTS,
    seed: int = 0,
) -> MappedClothPoints:
    if n_points < 1:
        raise ValidationError("n_points must be at least 1")
    face = obs.densepose.face
    if face.size and face.max() >= len(tpose.faces):
        raise ValidationError("densepose map references faces outside the body mesh")

    eligible = np.flatnonzero((face >= 0).ravel() & (obs.segmentation.labels != LABEL_BACKGROUND).ravel())
    if len(eligible) == 0:
        logger.warning("no pixel is both segmented and covered by densepose")
        return MappedClothPoints.empty()

    rng = np.random.default_rng(seed)
    pick = np.sort(rng.choice(len(eligible), size=min(n_points, len(eligible)), replace=False))
    flat = eligible[pick]
    rows, cols = np.divmod(flat, obs.densepose.width)

    faces = face[rows, cols].astype(np.int64)
    bary = obs.densepose.bary[rows, cols]
    positions = np.einsum("nk,nkd->nd", bary, tpose.vertices[tpose.faces[faces]])
    return MappedClothPoints(
        positions=positions,
        labels=obs.segmentation.labels[rows, cols].astype(np.int64),
        pixels=np.stack([cols, rows], axis=1),
        faces=faces,
        barycentrics=bary,
    )


def part_pixel_counts(obs: ObservationSet, model: BodyModel) -> Dict[str, int]:
    covered = obs.densepose.face[obs.densepose.covered]
    parts = model.face_parts()[covered]
    counts = np.bincount(parts, minlength=len(PART_NAMES))
    return {name: int(n) for name, n in zip(PART_NAMES, counts)}


def part_visibility(
    obs: ObservationSet,
    model: BodyModel,
    min_pixels: int = constants.PART_VISIBILITY_MIN_PIXELS,
) -> Dict[ClothType, bool]:
    """A garment's body region is in view when any of its parts has at least ``min_pixels`` covered pixels."""
    counts = part_pixel_counts(obs, model)
    return {cloth: any(counts[p] >= min_pixels for p in parts) for cloth, parts in CLOTH_PARTS.items()}


def existence_labels(obs: ObservationSet, part_visibility: Mapping[ClothType, bool]) -> Dict[ClothType, Optional[bool]]:
    """True when segmented, False when absent but its parts are visible, None (unsupervised) otherwise."""
    out: Dict[ClothType, Optional[bool]] = {}
    for cloth in ClothType:
        if obs.segmentation.contains(cloth):
            out[cloth] = True
        elif part_visibility.get(cloth, False):
            out[cloth] = False
        else:
            out[cloth] = None
    return out
