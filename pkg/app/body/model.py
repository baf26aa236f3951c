from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from app import constants
from app.errors import ConfigError, ValidationError
from app.models import ShapeParams

logger = logging.getLogger(__name__)

JOINT_NAMES: Tuple[str, ...] = (
    "pelvis",
    "L_hip",
    "R_hip",
    "spine1",
    "L_knee",
    "R_knee",
    "spine2",
    "L_ankle",
    "R_ankle",
    "chest",
    "L_toe",
    "R_toe",
    "neck",
    "L_collar",
    "R_collar",
    "head",
    "L_shoulder",
    "R_shoulder",
    "L_elbow",
    "R_elbow",
    "L_wrist",
    "R_wrist",
    "L_hand",
    "R_hand",
)

JOINT_PARENTS: Tuple[int, ...] = (-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21)

GENDER_VARIANTS = ("male", "female", "neutral")

# DensePose-style coarse body parts, indexed by part id
PART_NAMES: Tuple[str, ...] = ("head", "torso", "arm", "hand", "leg", "foot")

_JOINT_PART = {
    "head": ("neck", "head"),
    "torso": ("pelvis", "spine1", "spine2", "chest", "L_collar", "R_collar"),
    "arm": ("L_shoulder", "R_shoulder", "L_elbow", "R_elbow"),
    "hand": ("L_wrist", "R_wrist", "L_hand", "R_hand"),
    "leg": ("L_hip", "R_hip", "L_knee", "R_knee"),
    "foot": ("L_ankle", "R_ankle", "L_toe", "R_toe"),
}

JOINT_PART_IDS: Tuple[int, ...] = tuple(
    next(PART_NAMES.index(part) for part, joints in _JOINT_PART.items() if name in joints) for name in JOINT_NAMES
)


def joint_index(name: str, names: Sequence[str] = JOINT_NAMES) -> int:
    try:
        return list(names).index(name)
    except ValueError:
        raise ConfigError(f"body model has no joint named {name!r}") from None


@dataclass(frozen=True)
class BodyModel:
    template_vertices: np.ndarray  # (N, 3)
    faces: np.ndarray  # (F, 3)
    joint_parents: Tuple[int, ...]
    joint_regressor: np.ndarray  # (24, N), rows are affine combinations
    skin_weights: np.ndarray  # (N, 24)
    shape_basis: np.ndarray  # (10, N, 3)
    gender_variant: str = "neutral"
    joint_names: Tuple[str, ...] = JOINT_NAMES

    def __post_init__(self) -> None:
        verts = np.asarray(self.template_vertices, dtype=np.float64)
        faces = np.asarray(self.faces, dtype=np.int64)
        weights = np.asarray(self.skin_weights, dtype=np.float64)
        regressor = np.asarray(self.joint_regressor, dtype=np.float64)
        basis = np.asarray(self.shape_basis, dtype=np.float64)
        n = len(verts)
        j = constants.JOINT_COUNT

        if verts.ndim != 2 or verts.shape[1] != 3 or not np.all(np.isfinite(verts)):
            raise ValidationError("template vertices must be a finite (N, 3) array")
        if faces.ndim != 2 or faces.shape[1] != 3 or (faces.size and (faces.min() < 0 or faces.max() >= n)):
            raise ValidationError("faces must be (F, 3) indices into the template")
        if len(self.joint_parents) != j or len(self.joint_names) != j:
            raise ValidationError(f"body model needs exactly {j} joints")
        _check_tree(self.joint_parents)
        if weights.shape != (n, j):
            raise ValidationError(f"skin weights must have shape ({n}, {j})")
        if np.any(weights < 0) or np.any(np.abs(weights.sum(axis=1) - 1.0) > 1e-6):
            raise ValidationError("skin weight rows must be non-negative and sum to 1")
        if regressor.shape != (j, n):
            raise ValidationError(f"joint regressor must have shape ({j}, {n})")
        if np.any(np.abs(regressor.sum(axis=1) - 1.0) > 1e-6):
            raise ValidationError("joint regressor rows must be affine combinations (sum to 1)")
        if basis.shape != (constants.SHAPE_DIM, n, 3):
            raise ValidationError(f"shape basis must hold exactly {constants.SHAPE_DIM} directions")
        if self.gender_variant not in GENDER_VARIANTS:
            raise ValidationError(f"gender variant must be one of {GENDER_VARIANTS}")

        for name, arr in (
            ("template_vertices", verts),
            ("faces", faces),
            ("skin_weights", weights),
            ("joint_regressor", regressor),
            ("shape_basis", basis),
        ):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "joint_parents", tuple(int(p) for p in self.joint_parents))
        object.__setattr__(self, "joint_names", tuple(self.joint_names))

    @property
    def vertex_count(self) -> int:
        return len(self.template_vertices)

    def joint(self, name: str) -> int:
        return joint_index(name, self.joint_names)

    def regress_joints(self, vertices: np.ndarray) -> np.ndarray:
        return self.joint_regressor @ vertices

    def face_joints(self) -> np.ndarray:
        """Dominant skinning joint of each face (summed vertex weights, lowest joint on ties)."""
        if len(self.faces) == 0:
            return np.zeros(0, dtype=np.int64)
        return np.argmax(self.skin_weights[self.faces].sum(axis=1), axis=1)

    def face_parts(self) -> np.ndarray:
        return np.asarray(JOINT_PART_IDS, dtype=np.int64)[self.face_joints()]


def _check_tree(parents: Sequence[int]) -> None:
    if parents[0] != -1:
        raise ValidationError("joint 0 (pelvis) must be the root")
    for j, p in enumerate(parents[1:], start=1):
        # parents precede children, which also rules out cycles
        if not 0 <= p < j:
            raise ValidationError(f"joint {j} has invalid parent {p}")


@dataclass(frozen=True)
class TPoseBody:
    model: BodyModel
    vertices: np.ndarray
    joints: np.ndarray
    beta: ShapeParams

    @property
    def faces(self) -> np.ndarray:
        return self.model.faces

    @property
    def skin_weights(self) -> np.ndarray:
        return self.model.skin_weights

    @property
    def z_min(self) -> float:
        return float(self.vertices[:, 2].min())

    @property
    def z_max(self) -> float:
        return float(self.vertices[:, 2].max())

    def joint(self, name: str) -> np.ndarray:
        return self.joints[self.model.joint(name)]

    def named_joints(self) -> Dict[str, np.ndarray]:
        return {name: self.joints[i] for i, name in enumerate(self.model.joint_names)}

    @property
    def triangles(self) -> np.ndarray:
        return self.vertices[self.model.faces]

    def vertex_normals(self) -> np.ndarray:
        return vertex_normals(self.vertices, self.model.faces)


def shape_body(model: BodyModel, beta: Optional[ShapeParams] = None) -> TPoseBody:
    beta = beta if beta is not None else ShapeParams.zeros()
    offsets = np.tensordot(beta.beta, model.shape_basis, axes=(0, 0))
    vertices = model.template_vertices + offsets
    vertices.setflags(write=False)
    joints = model.regress_joints(vertices)
    joints.setflags(write=False)
    return TPoseBody(model=model, vertices=vertices, joints=joints, beta=beta)


def vertex_normals(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Area-weighted unit vertex normals; isolated vertices get a zero normal."""
    tri = vertices[faces]
    face_n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    normals = np.zeros_like(vertices)
    for corner in range(3):
        np.add.at(normals, faces[:, corner], face_n)
    length = np.linalg.norm(normals, axis=1, keepdims=True)
    return np.divide(normals, length, out=np.zeros_like(normals), where=length > 0)
