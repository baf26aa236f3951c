"""Weak-supervision losses over a ClothState."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import numpy as np
from scipy.ndimage import binary_dilation

from app import constants
from app.body.model import TPoseBody
from app.body.skinning import attach_to_body, pose_attached
from app.clothfield.backend import Backend
from app.models import ClothLatent, ClothState, ClothType, LossBreakdown, LossWeights, ObservationSet, QuerySet
from app.supervision.query import cloth_query_boxes, grid_points

logger = logging.getLogger(__name__)


def _clothes(state: ClothState, gated: bool) -> Iterable[ClothType]:
    return state.gated() if gated else list(ClothType)


def densepose_loss(
    querysets: Mapping[ClothType, QuerySet],
    state: ClothState,
    backend: Backend,
    body: TPoseBody,
    weights: Optional[LossWeights] = None,
    gated: bool = True,
    workers: Optional[int] = 1,
) -> float:
    """Mean over garments of the per-point membership error, divided by N_c.

    Distances are clamped to the garment's d_max, so an empty decoded surface
    reads as "far" and the loss stays within [0, max d_max].
    """
    weights = weights or LossWeights()
    total, any_points = 0.0, False
    for cloth in _clothes(state, gated):
        qs = querysets.get(cloth)
        if qs is None or len(qs) == 0:
            continue
        any_points = True
        total += densepose_term(qs, state.latent(cloth), backend, weights.d_max[cloth.value], workers)
    if not any_points:
        return 0.0
    return total / constants.N_CLOTH


def densepose_term(qs: QuerySet, latent: ClothLatent, backend: Backend, d_max: float, workers: Optional[int] = 1) -> float:
    """Mean membership error of one garment over its query points."""
    c = np.minimum(backend.evaluate(qs.points, qs.cloth_type, latent, workers=workers), d_max)
    s = qs.membership
    return float(np.mean(s * c + (1.0 - s) * (d_max - c)))


def reg_loss(state: ClothState, weights: Optional[LossWeights] = None, gated: bool = True) -> float:
    weights = weights or LossWeights()
    return float(sum(weights.alpha[c.value] * np.linalg.norm(state.latent(c).z) for c in _clothes(state, gated)))


def _clamp(p):
    return np.clip(np.asarray(p, dtype=np.float64), constants.PROB_EPS, 1.0 - constants.PROB_EPS)


def existence_loss(scores: np.ndarray, truth: Mapping[ClothType, Optional[bool]]) -> float:
    """Binary cross-entropy over supervised garments, averaged over all N_c garments."""
    c = _clamp(scores)
    total = 0.0
    for i, cloth in enumerate(ClothType):
        t = truth.get(cloth)
        if t is None:
            continue
        total += np.log(c[i]) if t else np.log(1.0 - c[i])
    return float(-total / constants.N_CLOTH)


def gender_loss(g: np.ndarray, truth: str) -> float:
    g = _clamp(g)
    target = np.array([1.0, 0.0]) if truth == "male" else np.array([0.0, 1.0])
    return float(-np.sum(target * np.log(g)))


@dataclass(frozen=True)
class SilhouetteGrid:
    """Query grid of one garment with the image pixel each posed grid point lands on."""

    cloth_type: ClothType
    points: np.ndarray  # (M, 3) canonical
    pixels: np.ndarray  # (M, 2) integer (x, y), may fall outside the image


def silhouette_grid(
    body: TPoseBody,
    obs: ObservationSet,
    cloth: ClothType,
    resolution: int = constants.QUERY_GRID_RESOLUTION,
    abduction_deg: float = constants.DEFAULT_ABDUCTION_DEG,
) -> SilhouetteGrid:
    points = np.concatenate([grid_points(b, resolution) for b in cloth_query_boxes(body, cloth, abduction_deg)])
    posed = pose_attached(body, points, attach_to_body(body, points), obs.theta)
    pixels = np.floor(obs.camera.project(posed)[:, :2]).astype(np.int64)
    return SilhouetteGrid(cloth, points, pixels)


def silhouette_term(pixels: np.ndarray, own: np.ndarray) -> Optional[float]:
    """Average of the off-label fraction of projected pixels and the unreached fraction of labelled pixels.

    None when there are neither projected points nor labelled pixels.
    """
    h, w = own.shape
    if len(pixels) == 0:
        return 1.0 if own.any() else None
    inside = (pixels[:, 0] >= 0) & (pixels[:, 0] < w) & (pixels[:, 1] >= 0) & (pixels[:, 1] < h)
    px = pixels[inside]
    on_label = np.zeros(len(pixels), dtype=bool)
    on_label[inside] = own[px[:, 1], px[:, 0]]
    off = float(np.mean(~on_label))
    if not own.any():
        return 0.5 * off
    hit = np.zeros_like(own)
    hit[px[:, 1], px[:, 0]] = True
    reached = binary_dilation(hit, structure=np.ones((3, 3), dtype=bool))
    return 0.5 * (off + float(np.mean(~reached[own])))


def silhouette_loss(
    state: ClothState,
    backend: Backend,
    body: TPoseBody,
    obs: ObservationSet,
    iso: float = constants.DEFAULT_ISO,
    gated: bool = True,
    resolution: int = constants.QUERY_GRID_RESOLUTION,
    abduction_deg: float = constants.DEFAULT_ABDUCTION_DEG,
) -> float:
    """2D coverage penalty between near-surface query points and the segmentation.

    Query-grid points with C < iso are posed with the observed pose and
    projected. Each garment scores the mean of two fractions: projected
    points off its label, and its labelled pixels with no projected point
    within one pixel. Garments are averaged.
    """
    terms = []
    for cloth in _clothes(state, gated):
        sg = silhouette_grid(body, obs, cloth, resolution, abduction_deg)
        near = backend.evaluate(sg.points, cloth, state.latent(cloth)) < iso
        term = silhouette_term(sg.pixels[near], obs.segmentation.labels == cloth.label)
        if term is not None:
            terms.append(term)
    return float(np.mean(terms)) if terms else 0.0


def total_loss(
    dp: float,
    reg: float,
    exist: float,
    gender: float,
    weights: Optional[LossWeights] = None,
    silhouette: float = 0.0,
) -> LossBreakdown:
    """Weighted sum; the silhouette term shares the DensePose weight."""
    weights = weights or LossWeights()
    total = (
        weights.lambda_dp * (dp + silhouette)
        + weights.lambda_reg * reg
        + weights.lambda_exist * exist
        + weights.lambda_gender * gender
    )
    return LossBreakdown(dp=dp, reg=reg, exist=exist, gender=gender, silhouette=silhouette, total=total, weights=weights)
