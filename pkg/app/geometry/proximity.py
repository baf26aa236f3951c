from __future__ import annotations

import logging
from typing import Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

logger = logging.getLogger(__name__)

BRUTE_FORCE_VERTEX_LIMIT = 10_000
_CHUNK = 2048


def closest_points_on_triangles(triangles: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Closest point on triangle k to query k, for n (triangle, query) pairs.

    Region tests follow "ClosestPtPointTriangle" from Real-Time Collision
    Detection; points resolved by an earlier region are masked out of later ones.
    """
    triangles = np.asarray(triangles, dtype=np.float64)
    queries = np.asarray(queries, dtype=np.float64)
    tol = np.finfo(np.float64).tiny
    result = np.zeros_like(queries)
    remain = np.ones(len(queries), dtype=bool)

    a = triangles[:, 0, :]
    b = triangles[:, 1, :]
    c = triangles[:, 2, :]

    ab = b - a
    ac = c - a
    ap = queries - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)

    is_a = (d1 < tol) & (d2 < tol)
    result[is_a] = a[is_a]
    remain &= ~is_a

    bp = queries - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    is_b = (d3 > -tol) & (d4 <= d3) & remain
    result[is_b] = b[is_b]
    remain &= ~is_b

    vc = d1 * d4 - d3 * d2
    is_ab = (vc < tol) & (d1 > -tol) & (d3 < tol) & remain
    if np.any(is_ab):
        v = (d1[is_ab] / (d1[is_ab] - d3[is_ab]))[:, None]
        result[is_ab] = a[is_ab] + v * ab[is_ab]
        remain &= ~is_ab

    cp = queries - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    is_c = (d6 > -tol) & (d5 <= d6) & remain
    result[is_c] = c[is_c]
    remain &= ~is_c

    vb = d5 * d2 - d1 * d6
    is_ac = (vb < tol) & (d2 > -tol) & (d6 < tol) & remain
    if np.any(is_ac):
        w = (d2[is_ac] / (d2[is_ac] - d6[is_ac]))[:, None]
        result[is_ac] = a[is_ac] + w * ac[is_ac]
        remain &= ~is_ac

    va = d3 * d6 - d5 * d4
    is_bc = (va < tol) & ((d4 - d3) > -tol) & ((d5 - d6) > -tol) & remain
    if np.any(is_bc):
        d43 = d4[is_bc] - d3[is_bc]
        w = (d43 / (d43 + (d5[is_bc] - d6[is_bc])))[:, None]
        result[is_bc] = b[is_bc] + w * (c[is_bc] - b[is_bc])
        remain &= ~is_bc

    if np.any(remain):
        denom = va[remain] + vb[remain] + vc[remain]
        with np.errstate(divide="ignore", invalid="ignore"):
            v = (vb[remain] / denom)[:, None]
            w = (vc[remain] / denom)[:, None]
        inside = a[remain] + ab[remain] * v + ac[remain] * w
        # zero-area slivers that slipped through every edge test
        bad = ~np.all(np.isfinite(inside), axis=1)
        inside[bad] = a[remain][bad]
        result[remain] = inside

    return result


def point_triangle_distances(triangles: np.ndarray, queries: np.ndarray) -> np.ndarray:
    closest = closest_points_on_triangles(triangles, queries)
    return np.linalg.norm(np.asarray(queries, dtype=np.float64) - closest, axis=1)


class TriangleSoupIndex:
    """Exact nearest-triangle queries over an unstructured triangle soup.

    A k-d tree over triangle centroids gives an upper bound from the nearest
    few triangles; every triangle that could beat it has its centroid within
    ``bound + max_radius`` and is checked exactly.
    """

    def __init__(self, triangles: np.ndarray, k: int = 8) -> None:
        self.triangles = np.asarray(triangles, dtype=np.float64).reshape(-1, 3, 3)
        self.k = k
        if len(self.triangles):
            self.centroids = self.triangles.mean(axis=1)
            self.radius = float(np.linalg.norm(self.triangles - self.centroids[:, None, :], axis=2).max())
            self.tree = cKDTree(self.centroids)
        else:
            self.centroids = np.zeros((0, 3))
            self.radius = 0.0
            self.tree = None

    def __len__(self) -> int:
        return len(self.triangles)

    def query(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (distance, face index, closest point) per query point.

        Empty soups give +inf distances and face -1. Ties pick the lowest face.
        """
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        n = len(points)
        dist = np.full(n, np.inf)
        face = np.full(n, -1, dtype=np.int64)
        closest = np.full((n, 3), np.nan)
        if self.tree is None or n == 0:
            return dist, face, closest
        for start in range(0, n, _CHUNK):
            sl = slice(start, start + _CHUNK)
            d, f, c = self._query_chunk(points[sl])
            dist[sl], face[sl], closest[sl] = d, f, c
        return dist, face, closest

    def distance(self, points: np.ndarray) -> np.ndarray:
        return self.query(points)[0]

    def _query_chunk(self, points: np.ndarray):
        k = min(self.k, len(self.triangles))
        _, near = self.tree.query(points, k=k)
        near = np.asarray(near).reshape(len(points), k)
        ub = point_triangle_distances(
            self.triangles[near.ravel()], np.repeat(points, k, axis=0)
        ).reshape(len(points), k).min(axis=1)

        # slack for rounding at the bound
        radii = ub + self.radius + 1e-12
        candidates = self.tree.query_ball_point(points, radii)
        counts = np.fromiter((len(c) for c in candidates), dtype=np.int64, count=len(points))
        point_idx = np.repeat(np.arange(len(points)), counts)
        face_idx = np.fromiter(
            (f for cand in candidates for f in cand), dtype=np.int64, count=int(counts.sum())
        )
        closest = closest_points_on_triangles(self.triangles[face_idx], points[point_idx])
        d = np.linalg.norm(points[point_idx] - closest, axis=1)

        order = np.lexsort((face_idx, d, point_idx))
        first = np.ones(len(order), dtype=bool)
        first[1:] = point_idx[order][1:] != point_idx[order][:-1]
        pick = order[first]
        return d[pick], face_idx[pick], closest[pick]


def nearest_vertex(vertices: np.ndarray, points: np.ndarray, tree: Optional[cKDTree] = None) -> np.ndarray:
    """Index of the nearest vertex for each point, lowest index on ties."""
    vertices = np.asarray(vertices, dtype=np.float64)
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(points) == 0:
        return np.zeros(0, dtype=np.int64)
    if len(vertices) < BRUTE_FORCE_VERTEX_LIMIT and tree is None:
        out = np.empty(len(points), dtype=np.int64)
        step = max(1, 4_000_000 // max(1, len(vertices)))
        for start in range(0, len(points), step):
            chunk = points[start:start + step]
            d2 = ((chunk[:, None, :] - vertices[None, :, :]) ** 2).sum(axis=2)
            out[start:start + step] = np.argmin(d2, axis=1)
        return out

    tree = tree if tree is not None else cKDTree(vertices)
    k = min(4, len(vertices))
    dist, idx = tree.query(points, k=k)
    dist = np.asarray(dist).reshape(len(points), k)
    idx = np.asarray(idx).reshape(len(points), k)
    # re-rank the short list exactly so equal distances resolve to the lowest index
    exact = ((points[:, None, :] - vertices[idx]) ** 2).sum(axis=2)
    best = exact.min(axis=1, keepdims=True)
    masked = np.where(exact == best, idx, np.iinfo(np.int64).max)
    return masked.min(axis=1)
