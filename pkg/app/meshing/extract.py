"""Garment mesh extraction in the canonical T-pose and deformation to the observed pose."""

from __future__ import annotations

import logging
from typing import Dict, Mapping, Optional, Tuple

from app import constants
from app.body.model import TPoseBody
from app.body.skinning import attach_to_body, pose_attached, pose_body
from app.clothfield.backend import Backend, field_keys
from app.meshing.grid import Resolution, sample_field
from app.meshing.mcubes import marching_cubes
from app.models import ClothState, ClothType, Mesh, PoseParams

logger = logging.getLogger(__name__)

BODY_KEY = "body"


def mesh_key(cloth: ClothType, side: Optional[str]) -> str:
    return f"{cloth.value}_{side}" if side else cloth.value


MESH_KEYS = tuple(mesh_key(c, s) for c in ClothType for _, s in field_keys(c))


def extract_cloth_meshes(
    state: ClothState,
    backend: Backend,
    body: TPoseBody,
    resolution: Resolution = constants.DEFAULT_RESOLUTION,
    iso: float = constants.DEFAULT_ISO,
    workers: Optional[int] = 1,
) -> Dict[str, Mesh]:
    """One mesh per garment (shoes split by side) plus the body; ungated garments are empty."""
    gated = set(state.gated())
    out: Dict[str, Mesh] = {}
    for cloth in ClothType:
        for _, side in field_keys(cloth):
            key = mesh_key(cloth, side)
            if cloth not in gated:
                out[key] = Mesh.empty()
                continue
            grid = sample_field(backend, state, cloth, body, resolution=resolution, side=side, workers=workers)
            out[key] = marching_cubes(grid, iso)
            logger.info("%s: %d vertices, %d faces", key, len(out[key].vertices), len(out[key].faces))
    out[BODY_KEY] = Mesh(body.vertices, body.faces)
    return out


def pose_deform(
    tpose: TPoseBody,
    cloth_meshes: Mapping[str, Mesh],
    theta: PoseParams,
) -> Tuple[Mesh, Dict[str, Mesh]]:
    """Pose the body, and move each garment vertex with the skinning of its nearest body vertex."""
    posed_body = pose_body(tpose, theta)
    posed: Dict[str, Mesh] = {}
    for key, mesh in cloth_meshes.items():
        if key == BODY_KEY:
            continue
        if len(mesh.vertices) == 0:
            posed[key] = mesh
            continue
        attachment = mesh.attachment if mesh.attachment is not None else attach_to_body(tpose, mesh.vertices)
        vertices = pose_attached(tpose, mesh.vertices, attachment, theta)
        posed[key] = Mesh(vertices, mesh.faces, attachment)
    return posed_body, posed
