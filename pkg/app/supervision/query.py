"""Per-garment query boxes and query-point selection.

Boxes are written in corner form ``[x_min, y_min, z_min, x_max, y_max, z_max]``
from named joints of the T-posed body. Pants and skirt boxes read their
joints from an A-pose (legs abducted) so that the box also holds slightly
spread legs.
"""

from __future__ import annotations

import logging
from typing import Dict, Optional

import numpy as np
from scipy.spatial import cKDTree

from app import constants
from app.body.model import TPoseBody, joint_index
from app.body.skinning import pose_joints
from app.clothfield.regions import SIDES
from app.errors import ValidationError
from app.models import ClothType, LossWeights, MappedClothPoints, PoseParams, QueryBox, QuerySet

logger = logging.getLogger(__name__)


def a_pose(tpose: TPoseBody, abduction_deg: float = constants.DEFAULT_ABDUCTION_DEG) -> PoseParams:
    a = np.deg2rad(abduction_deg)
    names = tpose.model.joint_names
    theta = PoseParams.zeros()
    theta = theta.with_joint(joint_index("L_hip", names), (0.0, 0.0, a))
    return theta.with_joint(joint_index("R_hip", names), (0.0, 0.0, -a))


def _joints(tpose: TPoseBody, names, posed: Optional[np.ndarray] = None) -> Dict[str, np.ndarray]:
    source = tpose.joints if posed is None else posed
    return {n: source[joint_index(n, tpose.model.joint_names)] for n in names}


def _padded_depth(tpose: TPoseBody):
    zmin, zmax = tpose.z_min, tpose.z_max
    return 1.25 * zmin - 0.25 * zmax, 1.25 * zmax - 0.25 * zmin


def _upper_box(tpose: TPoseBody) -> np.ndarray:
    j = _joints(tpose, ("pelvis", "chest", "L_hand", "R_hand"))
    p, c = j["pelvis"], j["chest"]
    z_lo, z_hi = _padded_depth(tpose)
    return np.array([
        j["R_hand"][0],
        2.0 * p[1] - c[1],
        z_lo,
        j["L_hand"][0],
        3.0 * c[1] - 2.0 * p[1],
        z_hi,
    ])


def _shoe_box(tpose: TPoseBody, side: str) -> np.ndarray:
    prefix = "L_" if side == "left" else "R_"
    j = _joints(tpose, (prefix + "ankle", prefix + "knee", prefix + "toe"))
    a, k, t = j[prefix + "ankle"], j[prefix + "knee"], j[prefix + "toe"]
    zc = 0.5 * a[2] + 0.5 * t[2]
    return np.array([
        a[0] - 0.15,
        1.75 * a[1] - 0.75 * k[1],
        zc - 0.25,
        a[0] + 0.15,
        0.25 * a[1] + 0.75 * k[1],
        zc + 0.25,
    ])


def _lower_box(tpose: TPoseBody, cloth: ClothType, abduction_deg: float) -> np.ndarray:
    posed = pose_joints(tpose, a_pose(tpose, abduction_deg))
    j = _joints(tpose, ("pelvis", "R_ankle"), posed)
    p, ra = j["pelvis"], j["R_ankle"]
    if cloth is ClothType.PANTS:
        x_min, x_max = 2.3 * ra[0] - 1.3 * p[0], 3.3 * p[0] - 2.3 * ra[0]
    else:
        x_min, x_max = 3.0 * ra[0] - 2.0 * p[0], 4.0 * p[0] - 3.0 * ra[0]
    z_lo, z_hi = _padded_depth(tpose)
    return np.array([
        x_min,
        1.1 * ra[1] - 0.1 * p[1],
        z_lo,
        x_max,
        1.1 * p[1] - 0.1 * ra[1],
        z_hi,
    ])


def cloth_query_box(
    tpose: TPoseBody,
    cloth: ClothType,
    side: Optional[str] = None,
    abduction_deg: float = constants.DEFAULT_ABDUCTION_DEG,
) -> QueryBox:
    if cloth in (ClothType.UPPER, ClothType.COAT):
        corners = _upper_box(tpose)
    elif cloth is ClothType.SHOES:
        if side not in SIDES:
            raise ValidationError(f"shoe boxes need a side in {SIDES}, got {side!r}")
        corners = _shoe_box(tpose, side)
    else:
        corners = _lower_box(tpose, cloth, abduction_deg)
    return QueryBox(cloth, corners, side if cloth is ClothType.SHOES else None)


def cloth_query_boxes(tpose: TPoseBody, cloth: ClothType, abduction_deg: float = constants.DEFAULT_ABDUCTION_DEG):
    sides = SIDES if cloth is ClothType.SHOES else (None,)
    return [cloth_query_box(tpose, cloth, s, abduction_deg) for s in sides]


def grid_points(box: QueryBox, resolution: int = constants.QUERY_GRID_RESOLUTION) -> np.ndarray:
    """resolution^3 points spanning the box with both corners included, x slowest."""
    if resolution < 2:
        raise ValidationError("grid resolution must be at least 2")
    t = np.arange(resolution) / (resolution - 1)
    axes = [lo + (hi - lo) * t for lo, hi in zip(box.lo, box.hi)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)


def _nearest_lowest(tree: cKDTree, sources: np.ndarray, points: np.ndarray, dist: np.ndarray) -> np.ndarray:
    """Index of the nearest source per point, lowest index among exact ties."""
    candidates = tree.query_ball_point(points, dist + 1e-12)
    counts = np.fromiter((len(c) for c in candidates), dtype=np.int64, count=len(points))
    owner = np.repeat(np.arange(len(points)), counts)
    idx = np.fromiter((i for c in candidates for i in c), dtype=np.int64, count=int(counts.sum()))
    d = np.linalg.norm(points[owner] - sources[idx], axis=1)
    order = np.lexsort((idx, d, owner))
    first = np.ones(len(order), dtype=bool)
    first[1:] = owner[order][1:] != owner[order][:-1]
    return idx[order[first]]


def select_query_points(
    box: QueryBox,
    mapped: MappedClothPoints,
    tau: float,
    resolution: int = constants.QUERY_GRID_RESOLUTION,
) -> QuerySet:
    if len(mapped) == 0:
        return QuerySet.empty(box.cloth_type)
    if tau < 0:
        raise ValidationError("tau must be non-negative")
    grid = grid_points(box, resolution)
    tree = cKDTree(mapped.positions)
    dist, _ = tree.query(grid, k=1)
    keep = dist <= tau
    points = grid[keep]
    if len(points) == 0:
        return QuerySet.empty(box.cloth_type)
    nearest = _nearest_lowest(tree, mapped.positions, points, dist[keep])
    return QuerySet(box.cloth_type, points, mapped.labels[nearest])


def build_query_sets(
    tpose: TPoseBody,
    mapped: MappedClothPoints,
    weights: Optional[LossWeights] = None,
    resolution: int = constants.QUERY_GRID_RESOLUTION,
    abduction_deg: float = constants.DEFAULT_ABDUCTION_DEG,
) -> Dict[ClothType, QuerySet]:
    """One query set per garment; both shoe boxes feed a single shoes set."""
    weights = weights or LossWeights()
    out: Dict[ClothType, QuerySet] = {}
    for cloth in ClothType:
        tau = weights.tau[cloth.value]
        sets = [select_query_points(b, mapped, tau, resolution) for b in cloth_query_boxes(tpose, cloth, abduction_deg)]
        out[cloth] = QuerySet(
            cloth,
            np.concatenate([s.points for s in sets]),
            np.concatenate([s.labels for s in sets]),
        )
        logger.debug("%s query set: %d points (%d inside)", cloth.value, len(out[cloth]),
                     int(out[cloth].membership.sum()))
    if all(len(s) == 0 for s in out.values()):
        logger.warning("every query set is empty")
    return out
