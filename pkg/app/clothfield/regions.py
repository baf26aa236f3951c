"""Carrier surfaces of the procedural garments.

A carrier is an open triangle mesh (a body submesh, or for skirts a hull band)
with two cut coordinates per vertex. A decoded garment keeps the part of the
carrier where ``max(a1 - s1, a2 - s2) <= 0`` and pushes it outward by the
thickness along the vertex normals.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from app.body.model import TPoseBody, joint_index
from app.clothfield.latent import ClothParams
from app.models import ClothType

logger = logging.getLogger(__name__)

SIDES = ("left", "right")

_TORSO = ("pelvis", "spine1", "spine2", "chest")
_ARM = ("collar", "shoulder", "elbow")
_SKIRT_ROWS = 24
_SKIRT_SEGMENTS = 32
_SKIRT_FLARE = 0.15
_SKIRT_MARGIN = 0.01


@dataclass(frozen=True)
class ClothCarrier:
    cloth_type: ClothType
    side: Optional[str]
    vertices: np.ndarray
    normals: np.ndarray
    faces: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    body_index: Optional[np.ndarray] = None  # source body vertex of each carrier vertex

    def clip_values(self, params: ClothParams) -> np.ndarray:
        s1, s2 = params.coverage
        return np.maximum(self.a1 - s1, self.a2 - s2)

    def offset_vertices(self, params: ClothParams) -> np.ndarray:
        return self.vertices + params.thickness * self.normals

    def covered_mask(self, params: ClothParams) -> np.ndarray:
        return self.clip_values(params) <= 0

    def covered_vertices(self, params: ClothParams) -> np.ndarray:
        """Offset-surface vertices inside the decoded region."""
        return self.offset_vertices(params)[self.covered_mask(params)]

    def surface(self, params: ClothParams) -> np.ndarray:
        """Triangles (K, 3, 3) of the decoded garment surface."""
        if len(self.faces) == 0:
            return np.zeros((0, 3, 3))
        phi = self.clip_values(params)
        return clip_triangles(self.offset_vertices(params)[self.faces], phi[self.faces])


def clip_triangles(tri: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Keep the sub-polygons of each triangle where the linear field phi <= 0.

    One inside vertex leaves a triangle, two inside vertices leave a quad split
    into two triangles. Winding is preserved.
    """
    inside = phi <= 0
    count = inside.sum(axis=1)
    kept = [tri[count == 3]]

    for n_in in (1, 2):
        sel = count == n_in
        if not np.any(sel):
            continue
        t, p, ins = tri[sel], phi[sel], inside[sel]
        # the odd vertex is the lone inside (n_in = 1) or lone outside (n_in = 2) one
        odd = np.argmax(ins if n_in == 1 else ~ins, axis=1)
        order = (odd[:, None] + np.arange(3)[None, :]) % 3
        t = np.take_along_axis(t, order[:, :, None], axis=1)
        p = np.take_along_axis(p, order, axis=1)
        a, b, c = t[:, 0], t[:, 1], t[:, 2]
        pab = _edge_point(a, b, p[:, 0], p[:, 1])
        pac = _edge_point(a, c, p[:, 0], p[:, 2])
        if n_in == 1:
            kept.append(np.stack([a, pab, pac], axis=1))
        else:
            kept.append(np.stack([pab, b, c], axis=1))
            kept.append(np.stack([pab, c, pac], axis=1))
    return np.concatenate(kept) if kept else np.zeros((0, 3, 3))


def _edge_point(x, y, px, py):
    lam = (px / (px - py))[:, None]
    return x + lam * (y - x)


def _chain_arc(points: np.ndarray, chain: Sequence[np.ndarray]) -> np.ndarray:
    """Normalized arc position of each point's projection onto a joint polyline, in [0, 1]."""
    seg_a = np.array(chain[:-1])
    seg_b = np.array(chain[1:])
    seg = seg_b - seg_a
    lengths = np.linalg.norm(seg, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    rel = points[:, None, :] - seg_a[None, :, :]
    t = np.clip(np.einsum("nsk,sk->ns", rel, seg) / lengths**2, 0.0, 1.0)
    nearest = seg_a[None] + t[:, :, None] * seg[None]
    dist = np.linalg.norm(points[:, None, :] - nearest, axis=2)
    s = np.argmin(dist, axis=1)
    rows = np.arange(len(points))
    return (cum[s] + t[rows, s] * lengths[s]) / cum[-1]


def _submesh(tpose: TPoseBody, mask: np.ndarray):
    faces = tpose.faces[np.all(mask[tpose.faces], axis=1)]
    used = np.unique(faces)
    remap = np.full(len(tpose.vertices), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return used, remap[faces]


class _RegionBuilder:
    def __init__(self, tpose: TPoseBody) -> None:
        self.tpose = tpose
        self.normals = tpose.vertex_normals()
        self.dominant = np.argmax(tpose.skin_weights, axis=1)
        self.j = tpose.named_joints()

    def joints_mask(self, names: Sequence[str]) -> np.ndarray:
        ids = [joint_index(n, self.tpose.model.joint_names) for n in names]
        return np.isin(self.dominant, ids)

    def carrier(self, cloth: ClothType, mask: np.ndarray, a1: np.ndarray, a2: np.ndarray,
                side: Optional[str] = None) -> ClothCarrier:
        used, faces = _submesh(self.tpose, mask)
        return ClothCarrier(
            cloth_type=cloth,
            side=side,
            vertices=self.tpose.vertices[used],
            normals=self.normals[used],
            faces=faces,
            a1=a1[used],
            a2=a2[used],
            body_index=used,
        )

    def sleeve_arc(self) -> np.ndarray:
        v = self.tpose.vertices
        a1 = np.zeros(len(v))
        for prefix in ("L_", "R_"):
            mask = self.joints_mask([prefix + n for n in _ARM])
            chain = [self.j[prefix + n] for n in ("shoulder", "elbow", "wrist")]
            a1[mask] = _chain_arc(v[mask], chain)
        return a1

    def leg_arc(self) -> np.ndarray:
        v = self.tpose.vertices
        a1 = np.zeros(len(v))
        for prefix in ("L_", "R_"):
            mask = self.joints_mask([prefix + "hip", prefix + "knee"])
            chain = [self.j[prefix + n] for n in ("hip", "knee", "ankle")]
            a1[mask] = _chain_arc(v[mask], chain)
        return a1

    def upper(self, cloth: ClothType) -> ClothCarrier:
        y = self.tpose.vertices[:, 1]
        yp, yc = self.j["pelvis"][1], self.j["chest"][1]
        mask = self.joints_mask(_TORSO + tuple(p + n for p in ("L_", "R_") for n in _ARM))
        if cloth is ClothType.COAT:
            mask |= self.joints_mask(("L_hip", "R_hip"))
            y_knee = 0.5 * (self.j["L_knee"][1] + self.j["R_knee"][1])
            a2 = (yc - y) / (yc - y_knee)
        else:
            y_bottom = yp - 0.5 * (yc - yp)
            a2 = (yc - y) / (yc - y_bottom)
        return self.carrier(cloth, mask, self.sleeve_arc(), np.clip(a2, 0.0, None))

    def pants(self) -> ClothCarrier:
        y = self.tpose.vertices[:, 1]
        yp, yc = self.j["pelvis"][1], self.j["chest"][1]
        mask = self.joints_mask(("pelvis", "spine1", "L_hip", "R_hip", "L_knee", "R_knee"))
        waist = yp - 0.1
        a2 = np.clip((y - waist) / (yc - waist), 0.0, None)
        return self.carrier(ClothType.PANTS, mask, self.leg_arc(), a2)

    def shoe(self, side: str) -> ClothCarrier:
        prefix = "L_" if side == "left" else "R_"
        y = self.tpose.vertices[:, 1]
        ya, yk = self.j[prefix + "ankle"][1], self.j[prefix + "knee"][1]
        mask = self.joints_mask((prefix + "knee", prefix + "ankle", prefix + "toe"))
        a1 = 4.0 * (y - ya) / (yk - ya)
        return self.carrier(ClothType.SHOES, mask, a1, np.zeros(len(y)), side=side)

    def skirt(self) -> ClothCarrier:
        """Open elliptical band around both legs, from chest height down to the ankles."""
        v = self.tpose.vertices
        pelvis = self.j["pelvis"]
        yp, yc = pelvis[1], self.j["chest"][1]
        ya = 0.5 * (self.j["L_ankle"][1] + self.j["R_ankle"][1])
        hull = self.joints_mask(("pelvis", "spine1", "spine2", "L_hip", "R_hip", "L_knee", "R_knee"))
        rx0 = np.abs(v[hull, 0] - pelvis[0]).max() + _SKIRT_MARGIN
        rz0 = np.abs(v[hull, 2] - pelvis[2]).max() + _SKIRT_MARGIN

        ys = np.linspace(yc, ya, _SKIRT_ROWS + 1)
        drop = np.clip(yp - ys, 0.0, None)
        rx = rx0 + _SKIRT_FLARE * drop
        rz = rz0 + 0.5 * _SKIRT_FLARE * drop
        phi = 2.0 * np.pi * np.arange(_SKIRT_SEGMENTS) / _SKIRT_SEGMENTS
        cos, sin = np.cos(phi), np.sin(phi)

        x = pelvis[0] + rx[:, None] * cos[None, :]
        z = pelvis[2] + rz[:, None] * sin[None, :]
        yy = np.broadcast_to(ys[:, None], x.shape)
        verts = np.stack([x, yy, z], axis=2).reshape(-1, 3)
        normals = np.stack([cos[None, :] / rx[:, None], np.zeros_like(x), sin[None, :] / rz[:, None]], axis=2)
        normals = normals.reshape(-1, 3)
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)

        n = _SKIRT_SEGMENTS
        r, k = np.meshgrid(np.arange(_SKIRT_ROWS), np.arange(n), indexing="ij")
        a = (r * n + k).ravel()
        b = (r * n + (k + 1) % n).ravel()
        c = a + n
        d = b + n
        faces = np.concatenate([np.stack([a, b, d], axis=1), np.stack([a, d, c], axis=1)])

        y_all = verts[:, 1]
        a1 = np.clip((yp - y_all) / (yp - ya), 0.0, None)
        a2 = np.clip((y_all - yp) / (yc - yp), 0.0, None)
        return ClothCarrier(ClothType.SKIRT, None, verts, normals, faces.astype(np.int64), a1, a2)


def build_carriers(tpose: TPoseBody) -> Dict[ClothType, List[ClothCarrier]]:
    rb = _RegionBuilder(tpose)
    carriers = {
        ClothType.UPPER: [rb.upper(ClothType.UPPER)],
        ClothType.COAT: [rb.upper(ClothType.COAT)],
        ClothType.PANTS: [rb.pants()],
        ClothType.SKIRT: [rb.skirt()],
        ClothType.SHOES: [rb.shoe(side) for side in SIDES],
    }
    for cloth, items in carriers.items():
        logger.debug("%s carrier: %s faces", cloth.value, [len(c.faces) for c in items])
    return carriers
