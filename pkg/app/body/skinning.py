"""Linear blend skinning over the 24-joint hierarchy.

Transforms are kept in delta form: joint j moves a point p to
``p + (R_j - I)(p - J_j) + d_j`` where ``R_j`` is the world rotation and
``d_j`` the displacement of the joint itself. The zero pose is therefore
the identity bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from app.body.model import TPoseBody
from app.geometry.proximity import nearest_vertex
from app.models import Mesh, PoseParams


@dataclass(frozen=True)
class JointTransforms:
    rotations: np.ndarray  # (24, 3, 3) world rotations
    offsets: np.ndarray  # (24, 3) posed joint minus rest joint
    rest_joints: np.ndarray  # (24, 3)

    @property
    def posed_joints(self) -> np.ndarray:
        return self.rest_joints + self.offsets


def joint_transforms(joints: np.ndarray, parents: Sequence[int], theta: PoseParams) -> JointTransforms:
    # Rotation needs a writable buffer; pose arrays are frozen
    local = Rotation.from_rotvec(np.array(theta.theta)).as_matrix()
    n = len(parents)
    rot = np.empty((n, 3, 3))
    off = np.zeros((n, 3))
    eye = np.eye(3)
    rot[0] = local[0]
    for j in range(1, n):
        p = parents[j]
        rot[j] = rot[p] @ local[j]
        off[j] = off[p] + (rot[p] - eye) @ (joints[j] - joints[p])
    return JointTransforms(rotations=rot, offsets=off, rest_joints=np.asarray(joints, dtype=np.float64))


def skin_points(points: np.ndarray, weights: np.ndarray, transforms: JointTransforms) -> np.ndarray:
    """Blend the joint transforms with per-point weight rows (N, 24)."""
    points = np.asarray(points, dtype=np.float64)
    delta_rot = transforms.rotations - np.eye(3)
    # (N, 24, 3): displacement each joint alone would apply to each point
    rel = points[:, None, :] - transforms.rest_joints[None, :, :]
    moved = np.einsum("jab,njb->nja", delta_rot, rel) + transforms.offsets[None, :, :]
    return points + np.einsum("nj,nja->na", weights, moved)


def pose_joints(tpose: TPoseBody, theta: PoseParams) -> np.ndarray:
    return joint_transforms(tpose.joints, tpose.model.joint_parents, theta).posed_joints


def pose_body(tpose: TPoseBody, theta: PoseParams) -> Mesh:
    transforms = joint_transforms(tpose.joints, tpose.model.joint_parents, theta)
    vertices = skin_points(tpose.vertices, tpose.skin_weights, transforms)
    return Mesh(vertices, tpose.faces)


def attach_to_body(tpose: TPoseBody, points: np.ndarray) -> np.ndarray:
    """Nearest T-pose body vertex of each point, lowest index on ties."""
    return nearest_vertex(tpose.vertices, points)


def pose_attached(tpose: TPoseBody, points: np.ndarray, attachment: np.ndarray, theta: PoseParams) -> np.ndarray:
    """Move canonical points with the full blended transform of their attached body vertex."""
    transforms = joint_transforms(tpose.joints, tpose.model.joint_parents, theta)
    return skin_points(points, tpose.skin_weights[attachment], transforms)
