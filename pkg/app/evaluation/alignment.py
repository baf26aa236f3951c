from __future__ import annotations

import numpy as np

from app.errors import DegenerateInputError
from app.models import SimilarityTransform


def estimate_similarity(src: np.ndarray, dst: np.ndarray) -> SimilarityTransform:
    """Closed-form least-squares similarity taking ``src`` onto ``dst`` (Umeyama), det R = +1."""
    src = np.asarray(src, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 3)
    if len(src) != len(dst):
        raise DegenerateInputError("point sets must pair up one to one")
    if len(src) < 3:
        raise DegenerateInputError(f"need at least 3 pairs, got {len(src)}")

    src_mean = src.mean(axis=0)
    dst_mean = dst.mean(axis=0)
    src_c = src - src_mean
    dst_c = dst - dst_mean

    sv = np.linalg.svd(src_c, compute_uv=False)
    if sv[0] == 0.0 or sv[1] <= 1e-12 * sv[0]:
        raise DegenerateInputError("source points are coincident or collinear")

    cov = dst_c.T @ src_c / len(src)
    u, s, vt = np.linalg.svd(cov)
    d = np.ones(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        d[2] = -1.0
    rotation = u @ np.diag(d) @ vt
    var = (src_c**2).sum() / len(src)
    scale = float(s @ d / var)
    translation = dst_mean - scale * rotation @ src_mean
    return SimilarityTransform(scale, rotation, translation)


def alignment_residual(transform: SimilarityTransform, src: np.ndarray, dst: np.ndarray) -> float:
    return float(np.sum((transform.apply(src) - dst) ** 2))
