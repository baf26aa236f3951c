"""Orthographic z-buffer rasterizer.

A pixel (x, y) is sampled at its center (x + 0.5, y + 0.5) and is covered by a
triangle when all three edge functions agree in sign there. The nearest depth
wins; equal depths go to the lower face index.
"""

from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from app.errors import ValidationError
from app.models import Camera, FaceIndexMap, Mesh
from app.workers import chunked, ordered_map

logger = logging.getLogger(__name__)

MIN_AREA = 1e-12
_FACE_CHUNK = 4096


def _cross2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _fragments(screen: np.ndarray, faces: np.ndarray, face_ids: np.ndarray, width: int, height: int):
    """Covered (pixel, face, bary, depth) fragments of one batch of triangles."""
    tri = screen[faces]  # (F, 3, 3): u, v, depth per corner
    uv = tri[:, :, :2]
    area = _cross2(uv[:, 1] - uv[:, 0], uv[:, 2] - uv[:, 0])
    ok = np.abs(area) >= MIN_AREA
    tri, uv, area, face_ids = tri[ok], uv[ok], area[ok], face_ids[ok]

    x0 = np.clip(np.ceil(uv[:, :, 0].min(axis=1) - 0.5), 0, width).astype(np.int64)
    x1 = np.clip(np.floor(uv[:, :, 0].max(axis=1) - 0.5), -1, width - 1).astype(np.int64)
    y0 = np.clip(np.ceil(uv[:, :, 1].min(axis=1) - 0.5), 0, height).astype(np.int64)
    y1 = np.clip(np.floor(uv[:, :, 1].max(axis=1) - 0.5), -1, height - 1).astype(np.int64)
    bw = np.maximum(x1 - x0 + 1, 0)
    bh = np.maximum(y1 - y0 + 1, 0)
    counts = bw * bh
    total = int(counts.sum())
    if total == 0:
        return None

    owner = np.repeat(np.arange(len(tri)), counts)
    start = np.repeat(np.cumsum(counts) - counts, counts)
    local = np.arange(total) - start
    px = x0[owner] + local % bw[owner]
    py = y0[owner] + local // bw[owner]
    p = np.stack([px + 0.5, py + 0.5], axis=1)

    a, b, c = uv[owner, 0], uv[owner, 1], uv[owner, 2]
    w0 = _cross2(b - p, c - p) / area[owner]
    w1 = _cross2(c - p, a - p) / area[owner]
    w2 = _cross2(a - p, b - p) / area[owner]
    bary = np.stack([w0, w1, w2], axis=1)
    inside = np.all(bary >= 0.0, axis=1)

    owner, bary = owner[inside], bary[inside]
    bary /= bary.sum(axis=1, keepdims=True)
    depth = np.einsum("nk,nk->n", bary, tri[owner, :, 2])
    pixel = py[inside] * width + px[inside]
    return _nearest(pixel, face_ids[owner], bary, depth)


def _nearest(pixel, face, bary, depth):
    order = np.lexsort((face, depth, pixel))
    first = np.ones(len(order), dtype=bool)
    first[1:] = pixel[order][1:] != pixel[order][:-1]
    pick = order[first]
    return pixel[pick], face[pick], bary[pick], depth[pick]


def rasterize(mesh: Mesh, camera: Camera, workers: Optional[int] = 1) -> FaceIndexMap:
    if mesh.is_empty:
        raise ValidationError("cannot rasterize an empty mesh")
    w, h = camera.width, camera.height
    screen = camera.project(mesh.vertices)
    face_ids = np.arange(len(mesh.faces), dtype=np.int64)

    def run(sl: slice):
        return _fragments(screen, mesh.faces[sl], face_ids[sl], w, h)

    parts = [p for p in ordered_map(run, chunked(len(mesh.faces), _FACE_CHUNK), workers) if p is not None]
    out = FaceIndexMap.blank(w, h)
    if not parts:
        return out
    pixel, face, bary, depth = _nearest(*(np.concatenate(cols) for cols in zip(*parts)))

    rows, cols = np.divmod(pixel, w)
    out.face[rows, cols] = face
    out.bary[rows, cols] = bary
    out.depth[rows, cols] = depth
    logger.debug("rasterized %d faces onto %d pixels", len(mesh.faces), len(pixel))
    return out


def lift(fmap: FaceIndexMap, vertices: np.ndarray, faces: np.ndarray, mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Barycentric points on (vertices, faces) for covered pixels (row-major), or for ``mask``."""
    sel = fmap.covered if mask is None else (mask & fmap.covered)
    f = fmap.face[sel]
    b = fmap.bary[sel]
    return np.einsum("nk,nkd->nd", b, np.asarray(vertices)[np.asarray(faces)[f]])
