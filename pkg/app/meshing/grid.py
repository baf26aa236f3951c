"""Dense sampling of a garment field onto a regular grid."""

from __future__ import annotations

import logging
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from app import constants
from app.body.model import TPoseBody
from app.clothfield.backend import Backend, GridBackend, GridField, field_keys, udf_eval
from app.errors import ValidationError
from app.models import ClothState, ClothType, LossWeights, QueryBox, ScalarGrid
from app.supervision.query import cloth_query_boxes

logger = logging.getLogger(__name__)

Resolution = Union[int, Sequence[int]]


def default_region(
    body: TPoseBody,
    cloth: ClothType,
    side: Optional[str] = None,
    weights: Optional[LossWeights] = None,
    abduction_deg: float = constants.DEFAULT_ABDUCTION_DEG,
) -> QueryBox:
    """The garment's query box grown by 2 d_max; both shoe boxes are merged when no side is given."""
    weights = weights or LossWeights()
    boxes = [b for b in cloth_query_boxes(body, cloth, abduction_deg) if side is None or b.side == side]
    lo = np.min([b.lo for b in boxes], axis=0)
    hi = np.max([b.hi for b in boxes], axis=0)
    box = QueryBox(cloth, np.concatenate([lo, hi]), side)
    return box.inflated(2.0 * weights.d_max[cloth.value])


def _dims(resolution: Resolution) -> np.ndarray:
    dims = np.broadcast_to(np.asarray(resolution, dtype=np.int64), (3,)).copy()
    if np.any(dims < 2):
        raise ValidationError("grid resolution must be at least 2 per axis")
    return dims


def sample_field(
    backend: Backend,
    state: ClothState,
    cloth: ClothType,
    body: TPoseBody,
    region: Optional[QueryBox] = None,
    resolution: Resolution = constants.DEFAULT_RESOLUTION,
    side: Optional[str] = None,
    workers: Optional[int] = 1,
) -> ScalarGrid:
    """C sampled at every node of a grid spanning ``region`` (corners included).

    An empty decoded surface has no finite distance; such samples are stored
    as the region diagonal, which is farther than any point of the region.
    """
    region = region if region is not None else default_region(body, cloth, side)
    dims = _dims(resolution)
    extent = region.hi - region.lo
    if np.any(extent <= 0):
        raise ValidationError("sampling region must have positive extent on every axis")
    spacing = extent / (dims - 1)
    axes = [region.lo[a] + spacing[a] * np.arange(dims[a]) for a in range(3)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    points = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)

    values = np.asarray(udf_eval(backend, points, state, cloth, body, side=side, workers=workers))
    far = float(np.linalg.norm(extent))
    values = np.where(np.isfinite(values), values, far)
    logger.debug("sampled %s field on %s grid, min %.4f", cloth.value, dims.tolist(), float(values.min()))
    return ScalarGrid(region.lo, spacing, values.reshape(tuple(dims)))


def tabulate_backend(
    backend: Backend,
    state: ClothState,
    body: TPoseBody,
    resolution: Resolution = constants.DEFAULT_RESOLUTION,
    clothes: Optional[Iterable[ClothType]] = None,
    workers: Optional[int] = 1,
) -> GridBackend:
    """Grid backend reproducing ``backend`` at the latents of ``state`` (one field per shoe side)."""
    fields = []
    for cloth in clothes if clothes is not None else ClothType:
        for _, side in field_keys(cloth):
            grid = sample_field(backend, state, cloth, body, resolution=resolution, side=side, workers=workers)
            fields.append(GridField(cloth, side, np.array(state.latent(cloth).z), grid))
    return GridBackend(body, fields)
