"""Procedural capsule humanoid used as the default body model.

The body is a union of closed tubes (torso, arms, legs) and capsules (feet,
neck, head) with elliptical cross-sections. The right side is the exact
mirror image of the left side in x.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app import constants
from app.body.model import JOINT_NAMES, JOINT_PARENTS, BodyModel
from app.errors import ValidationError

logger = logging.getLogger(__name__)

_J = {name: i for i, name in enumerate(JOINT_NAMES)}


@dataclass(frozen=True)
class BodySpec:
    """Proportions in meters; pelvis sits at the origin."""

    hip_width: float = 0.09
    hip_drop: float = 0.08
    spine1_height: float = 0.11
    spine2_height: float = 0.22
    chest_height: float = 0.33
    torso_top: float = 0.47
    neck_height: float = 0.52
    head_height: float = 0.62
    head_length: float = 0.12
    thigh_length: float = 0.40
    shin_length: float = 0.40
    ankle_back: float = 0.02
    foot_drop: float = 0.05
    foot_length: float = 0.12
    collar_offset: float = 0.07
    shoulder_offset: float = 0.18
    shoulder_height: float = 0.45
    upper_arm_length: float = 0.28
    forearm_length: float = 0.25
    hand_length: float = 0.09
    torso_half_width: float = 0.15
    torso_half_depth: float = 0.10
    neck_radius: float = 0.05
    head_radius: float = 0.10
    upper_arm_radius: float = 0.05
    forearm_radius: float = 0.04
    hand_radius: float = 0.035
    thigh_radius: float = 0.08
    shin_radius: float = 0.055
    foot_radius: float = 0.04
    ring_segments: int = 16
    rings_per_bone: int = 4

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name in ("ring_segments", "rings_per_bone"):
                continue
            if not value > 0:
                raise ValidationError(f"body dimension {f.name} must be positive, got {value!r}")
        if self.ring_segments < 4:
            raise ValidationError("capsules need at least 4 segments around")
        if self.rings_per_bone < 1:
            raise ValidationError("rings_per_bone must be at least 1")
        heights = (self.spine1_height, self.spine2_height, self.chest_height, self.torso_top)
        if list(heights) != sorted(heights) or self.neck_height >= self.head_height:
            raise ValidationError("spine, chest, neck and head heights must increase upward")

    @classmethod
    def from_dict(cls, obj: Dict) -> "BodySpec":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValidationError(f"unknown body spec keys: {sorted(unknown)}")
        return cls(**obj)

    def to_dict(self) -> Dict:
        return asdict(self)

    def left_joints(self) -> Dict[str, np.ndarray]:
        """Planned joint positions of the center line and the left side."""
        hx, hy = self.hip_width, -self.hip_drop
        knee_y = hy - self.thigh_length
        ankle_y = knee_y - self.shin_length
        sy = self.shoulder_height
        elbow_x = self.shoulder_offset + self.upper_arm_length
        wrist_x = elbow_x + self.forearm_length
        p = {
            "pelvis": (0.0, 0.0, 0.0),
            "spine1": (0.0, self.spine1_height, 0.0),
            "spine2": (0.0, self.spine2_height, 0.0),
            "chest": (0.0, self.chest_height, 0.0),
            "neck": (0.0, self.neck_height, 0.0),
            "head": (0.0, self.head_height, 0.0),
            "L_hip": (hx, hy, 0.0),
            "L_knee": (hx, knee_y, 0.0),
            "L_ankle": (hx, ankle_y, -self.ankle_back),
            "L_toe": (hx, ankle_y - self.foot_drop, self.foot_length - self.ankle_back),
            "L_collar": (self.collar_offset, sy, 0.0),
            "L_shoulder": (self.shoulder_offset, sy, 0.0),
            "L_elbow": (elbow_x, sy, 0.0),
            "L_wrist": (wrist_x, sy, 0.0),
            "L_hand": (wrist_x + self.hand_length, sy, 0.0),
        }
        return {k: np.array(v, dtype=np.float64) for k, v in p.items()}


@dataclass
class _Tube:
    nodes: List[np.ndarray]
    radii: List[Tuple[float, float]]
    seg_joints: List[int]
    ref: np.ndarray
    # joint regressed from the ring at node k
    node_regress: Dict[int, int]


@dataclass
class _Part:
    vertices: np.ndarray
    bases: np.ndarray
    weights: List[Dict[int, float]]
    faces: np.ndarray
    regress: Dict[int, np.ndarray]

    def mirrored(self) -> "_Part":
        flip = np.array([-1.0, 1.0, 1.0])
        return _Part(
            vertices=self.vertices * flip,
            bases=self.bases * flip,
            weights=[{_MIRROR[j]: w for j, w in row.items()} for row in self.weights],
            faces=self.faces[:, [0, 2, 1]],
            regress={_MIRROR[j]: idx for j, idx in self.regress.items()},
        )


_MIRROR = {
    i: _J[("R_" if n.startswith("L_") else "L_") + n[2:]] if n[:2] in ("L_", "R_") else i
    for i, n in enumerate(JOINT_NAMES)
}


class _MeshBuilder:
    def __init__(self, n_around: int, rings_per_bone: int) -> None:
        self.n = n_around
        self.rings_per_bone = rings_per_bone
        self.vertices: List[np.ndarray] = []
        self.bases: List[np.ndarray] = []
        self.weights: List[Dict[int, float]] = []
        self.faces: List[np.ndarray] = []
        self.regress: Dict[int, np.ndarray] = {}
        self.count = 0

    def _ring(self, center, direction, ref, ru, rv) -> np.ndarray:
        u = np.cross(direction, ref)
        u /= np.linalg.norm(u)
        v = np.cross(direction, u)
        phi = 2.0 * np.pi * np.arange(self.n) / self.n
        return center + ru * np.cos(phi)[:, None] * u + rv * np.sin(phi)[:, None] * v

    def _push(self, points: np.ndarray, base: np.ndarray, weights: Dict[int, float]) -> np.ndarray:
        idx = np.arange(self.count, self.count + len(points))
        self.vertices.append(points)
        self.bases.append(np.broadcast_to(base, points.shape).copy())
        self.weights.extend([weights] * len(points))
        self.count += len(points)
        return idx

    def _band(self, a: np.ndarray, b: np.ndarray) -> List[np.ndarray]:
        a_next = np.roll(a, -1)
        b_next = np.roll(b, -1)
        return [np.stack([a, a_next, b_next], axis=1), np.stack([a, b_next, b], axis=1)]

    def _cap(self, ring, center, direction, ref, ru, rv, weights, start: bool) -> List[np.ndarray]:
        r_axis = min(ru, rv)
        sign = -1.0 if start else 1.0
        cap_ring = self._ring(center + sign * 0.6 * r_axis * direction, direction, ref, 0.75 * ru, 0.75 * rv)
        cap = self._push(cap_ring, center, weights)
        pole = int(self._push((center + sign * r_axis * direction)[None, :], center, weights)[0])
        poles = np.full(self.n, pole)
        if start:
            return self._band(cap, ring) + [np.stack([poles, np.roll(cap, -1), cap], axis=1)]
        return self._band(ring, cap) + [np.stack([cap, np.roll(cap, -1), poles], axis=1)]

    def add_tube(self, tube: _Tube) -> None:
        nodes = tube.nodes
        n_seg = len(nodes) - 1
        seg_dirs = [(nodes[s + 1] - nodes[s]) / np.linalg.norm(nodes[s + 1] - nodes[s]) for s in range(n_seg)]
        rings: List[np.ndarray] = []

        for s in range(n_seg):
            for i in range(self.rings_per_bone):
                t = i / self.rings_per_bone
                if i == 0 and s > 0:
                    d = seg_dirs[s - 1] + seg_dirs[s]
                    d /= np.linalg.norm(d)
                else:
                    d = seg_dirs[s]
                center = nodes[s] + t * (nodes[s + 1] - nodes[s])
                ru = (1 - t) * tube.radii[s][0] + t * tube.radii[s + 1][0]
                rv = (1 - t) * tube.radii[s][1] + t * tube.radii[s + 1][1]
                idx = self._push(self._ring(center, d, tube.ref, ru, rv), center, _blend(tube.seg_joints, s, t))
                if i == 0 and s in tube.node_regress:
                    self.regress[tube.node_regress[s]] = idx
                rings.append(idx)
        end = nodes[-1]
        end_weights = {tube.seg_joints[-1]: 1.0}
        idx = self._push(self._ring(end, seg_dirs[-1], tube.ref, *tube.radii[-1]), end, end_weights)
        if n_seg in tube.node_regress:
            self.regress[tube.node_regress[n_seg]] = idx
        rings.append(idx)

        faces: List[np.ndarray] = []
        for a, b in zip(rings[:-1], rings[1:]):
            faces += self._band(a, b)
        faces += self._cap(rings[0], nodes[0], seg_dirs[0], tube.ref, *tube.radii[0],
                           {tube.seg_joints[0]: 1.0}, start=True)
        faces += self._cap(rings[-1], end, seg_dirs[-1], tube.ref, *tube.radii[-1], end_weights, start=False)
        faces = np.concatenate(faces)

        verts = np.concatenate(self.vertices)
        tri = verts[faces]
        volume = np.einsum("ij,ij->i", tri[:, 0], np.cross(tri[:, 1], tri[:, 2])).sum() / 6.0
        if volume < 0:
            faces = faces[:, [0, 2, 1]]
        self.faces.append(faces)

    def part(self) -> _Part:
        return _Part(
            vertices=np.concatenate(self.vertices),
            bases=np.concatenate(self.bases),
            weights=list(self.weights),
            faces=np.concatenate(self.faces),
            regress=dict(self.regress),
        )


def _blend(seg_joints: Sequence[int], s: int, t: float) -> Dict[int, float]:
    """Skinning weights of a ring at parameter t in segment s; 50/50 at interior nodes."""
    own = seg_joints[s]
    w = {own: 1.0}
    if s > 0 and t < 0.5:
        a = 0.5 - t
        w[seg_joints[s - 1]] = w.get(seg_joints[s - 1], 0.0) + a
        w[own] -= a
    if s < len(seg_joints) - 1 and t > 0.5:
        a = t - 0.5
        w[seg_joints[s + 1]] = w.get(seg_joints[s + 1], 0.0) + a
        w[own] -= a
    return w


def _left_tubes(spec: BodySpec, j: Dict[str, np.ndarray]) -> List[_Tube]:
    z_ref = np.array([0.0, 0.0, 1.0])
    y_ref = np.array([0.0, 1.0, 0.0])
    arm = _Tube(
        nodes=[j["L_collar"], j["L_shoulder"], j["L_elbow"], j["L_wrist"], j["L_hand"]],
        radii=[(spec.upper_arm_radius,) * 2, (spec.upper_arm_radius,) * 2, (spec.forearm_radius,) * 2,
               (spec.hand_radius,) * 2, (spec.hand_radius,) * 2],
        seg_joints=[_J["L_collar"], _J["L_shoulder"], _J["L_elbow"], _J["L_wrist"]],
        ref=z_ref,
        node_regress={0: _J["L_collar"], 1: _J["L_shoulder"], 2: _J["L_elbow"], 3: _J["L_wrist"], 4: _J["L_hand"]},
    )
    leg = _Tube(
        nodes=[j["L_hip"], j["L_knee"], j["L_ankle"]],
        radii=[(spec.thigh_radius,) * 2, (spec.shin_radius,) * 2, (spec.shin_radius * 0.8,) * 2],
        seg_joints=[_J["L_hip"], _J["L_knee"]],
        ref=z_ref,
        node_regress={0: _J["L_hip"], 1: _J["L_knee"]},
    )
    foot = _Tube(
        nodes=[j["L_ankle"], j["L_toe"]],
        radii=[(spec.foot_radius,) * 2, (spec.foot_radius,) * 2],
        seg_joints=[_J["L_ankle"]],
        ref=y_ref,
        node_regress={0: _J["L_ankle"], 1: _J["L_toe"]},
    )
    return [arm, leg, foot]


def _center_tubes(spec: BodySpec, j: Dict[str, np.ndarray]) -> List[_Tube]:
    z_ref = np.array([0.0, 0.0, 1.0])
    torso_r = (spec.torso_half_width, spec.torso_half_depth)
    top = np.array([0.0, spec.torso_top, 0.0])
    crown = j["head"] + np.array([0.0, spec.head_length, 0.0])
    return [
        _Tube(
            nodes=[j["pelvis"], j["spine1"], j["spine2"], j["chest"], top],
            radii=[torso_r] * 5,
            seg_joints=[_J["pelvis"], _J["spine1"], _J["spine2"], _J["chest"]],
            ref=z_ref,
            node_regress={0: _J["pelvis"], 1: _J["spine1"], 2: _J["spine2"], 3: _J["chest"]},
        ),
        _Tube(
            nodes=[j["neck"], j["head"]],
            radii=[(spec.neck_radius,) * 2] * 2,
            seg_joints=[_J["neck"]],
            ref=z_ref,
            node_regress={0: _J["neck"]},
        ),
        _Tube(
            nodes=[j["head"], crown],
            radii=[(spec.head_radius,) * 2] * 2,
            seg_joints=[_J["head"]],
            ref=z_ref,
            node_regress={0: _J["head"]},
        ),
    ]


def _build(tubes: Sequence[_Tube], spec: BodySpec) -> _Part:
    builder = _MeshBuilder(spec.ring_segments, spec.rings_per_bone)
    for tube in tubes:
        builder.add_tube(tube)
    return builder.part()


def make_procedural_body(spec: Optional[BodySpec] = None, gender: str = "neutral") -> BodyModel:
    spec = spec if spec is not None else BodySpec()
    joints = spec.left_joints()
    center = _build(_center_tubes(spec, joints), spec)
    left = _build(_left_tubes(spec, joints), spec)
    parts = [center, left, left.mirrored()]

    offsets = np.cumsum([0] + [len(p.vertices) for p in parts[:-1]])
    vertices = np.concatenate([p.vertices for p in parts])
    bases = np.concatenate([p.bases for p in parts])
    faces = np.concatenate([p.faces + o for p, o in zip(parts, offsets)]).astype(np.int64)
    rows = [row for p in parts for row in p.weights]
    n = len(vertices)
    j = constants.JOINT_COUNT

    weights = np.zeros((n, j))
    for v, row in enumerate(rows):
        for joint, value in row.items():
            weights[v, joint] = value
    weights /= weights.sum(axis=1, keepdims=True)

    regressor = np.zeros((j, n))
    for p, o in zip(parts, offsets):
        for joint, ring in p.regress.items():
            regressor[joint, ring + o] = 1.0 / len(ring)
    missing = [JOINT_NAMES[k] for k in range(j) if not regressor[k].any()]
    if missing:
        raise ValidationError(f"procedural body has no ring for joints {missing}")

    basis = np.zeros((constants.SHAPE_DIM, n, 3))
    basis[0, :, 1] = 0.05 * (vertices[:, 1] - joints["pelvis"][1])
    # girth: horizontal offset from the ring center, no vertical component
    radial = vertices - bases
    radial[:, 1] = 0.0
    basis[1] = 0.1 * radial

    logger.debug("procedural body: %d vertices, %d faces", n, len(faces))
    return BodyModel(
        template_vertices=vertices,
        faces=faces,
        joint_parents=JOINT_PARENTS,
        joint_regressor=regressor,
        skin_weights=weights,
        shape_basis=basis,
        gender_variant=gender,
    )
