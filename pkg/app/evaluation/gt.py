"""Ground-truth clothed surfaces with body topology."""

from __future__ import annotations

import logging

import numpy as np

from app.body.model import TPoseBody
from app.body.skinning import joint_transforms, skin_points
from app.clothfield.backend import ProceduralBackend
from app.errors import ValidationError
from app.geometry.proximity import TriangleSoupIndex
from app.models import ClothState, ClothType, Mesh, PoseParams

logger = logging.getLogger(__name__)


def register_clothed_body(tpose: TPoseBody, backend: ProceduralBackend, state: ClothState) -> Mesh:
    """T-posed body whose covered vertices sit on the outermost decoded garment.

    Body-carried garments move their covered vertices out to the offset
    surface; a skirt pulls every body vertex inside its covered band onto its
    nearest skirt point.
    """
    vertices = np.array(tpose.vertices)
    lift = np.zeros(len(vertices))
    for cloth in state.gated():
        params = backend.decode(state.latent(cloth))
        for carrier in backend.carriers[cloth]:
            if carrier.body_index is None:
                continue
            covered = carrier.covered_mask(params)
            idx = carrier.body_index[covered]
            thicker = params.thickness > lift[idx]
            idx = idx[thicker]
            lift[idx] = params.thickness
            vertices[idx] = tpose.vertices[idx] + params.thickness * carrier.normals[covered][thicker]

    if ClothType.SKIRT in state.gated():
        surface = backend.surface(ClothType.SKIRT, state.latent(ClothType.SKIRT))
        if len(surface):
            ys = surface[:, :, 1]
            inside = (tpose.vertices[:, 1] <= ys.max()) & (tpose.vertices[:, 1] >= ys.min())
            hull = _skirt_hull_vertices(tpose) & inside
            _, _, closest = TriangleSoupIndex(surface).query(tpose.vertices[hull])
            vertices[hull] = closest
    return Mesh(vertices, tpose.faces)


def _skirt_hull_vertices(tpose: TPoseBody) -> np.ndarray:
    names = tpose.model.joint_names
    hull = [names.index(n) for n in ("pelvis", "spine1", "L_hip", "R_hip", "L_knee", "R_knee", "L_ankle", "R_ankle")]
    return np.isin(np.argmax(tpose.skin_weights, axis=1), hull)


def build_gt_surface(registered: Mesh, tpose: TPoseBody, theta: PoseParams) -> Mesh:
    """Pose a registered clothed mesh with the body's own skinning (shared topology)."""
    if len(registered.vertices) != len(tpose.vertices) or not np.array_equal(registered.faces, tpose.faces):
        raise ValidationError("registered mesh must share the body topology")
    transforms = joint_transforms(tpose.joints, tpose.model.joint_parents, theta)
    return registered.with_vertices(skin_points(registered.vertices, tpose.skin_weights, transforms))
