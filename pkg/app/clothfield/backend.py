"""Cloth distance-field backends.

Both backends answer ``evaluate(points, cloth, latent, side)`` with unsigned
distances in meters. The procedural backend measures exact distances to the
decoded garment surface built on the body carriers; the grid backend
interpolates a tabulated field.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
from scipy.ndimage import map_coordinates

from app.body.model import TPoseBody
from app.clothfield.latent import ClothParams, decode_params
from app.clothfield.regions import SIDES, ClothCarrier, build_carriers
from app.errors import ValidationError
from app.geometry.proximity import TriangleSoupIndex
from app.models import ClothLatent, ClothState, ClothType, ScalarGrid
from app.workers import chunked, ordered_map

logger = logging.getLogger(__name__)

_EVAL_CHUNK = 4096

FieldKey = Tuple[ClothType, Optional[str]]


def field_keys(cloth: ClothType, side: Optional[str] = None) -> List[FieldKey]:
    """Per-side keys for shoes, a single side-less key for everything else."""
    if cloth is not ClothType.SHOES:
        return [(cloth, None)]
    return [(cloth, s) for s in ((side,) if side else SIDES)]


class ProceduralBackend:
    kind = "procedural"

    def __init__(self, body: TPoseBody, cache_size: int = 128) -> None:
        self.body = body
        self.carriers: Dict[ClothType, List[ClothCarrier]] = build_carriers(body)
        self._index = lru_cache(maxsize=cache_size)(self._build_index)

    def decode(self, latent: ClothLatent) -> ClothParams:
        return decode_params(latent)

    def _carriers(self, cloth: ClothType, side: Optional[str]) -> List[ClothCarrier]:
        items = self.carriers[cloth]
        if side is None:
            return items
        if side not in SIDES:
            raise ValidationError(f"side must be one of {SIDES}, got {side!r}")
        return [c for c in items if c.side == side]

    def surface(self, cloth: ClothType, latent: ClothLatent, side: Optional[str] = None) -> np.ndarray:
        params = self.decode(latent)
        parts = [c.surface(params) for c in self._carriers(cloth, side)]
        return np.concatenate(parts) if parts else np.zeros((0, 3, 3))

    def covered_vertices(self, cloth: ClothType, latent: ClothLatent, side: Optional[str] = None) -> np.ndarray:
        params = self.decode(latent)
        return np.concatenate([c.covered_vertices(params) for c in self._carriers(cloth, side)])

    def _build_index(self, params: ClothParams, side: Optional[str]) -> TriangleSoupIndex:
        parts = [c.surface(params) for c in self._carriers(params.cloth_type, side)]
        index = TriangleSoupIndex(np.concatenate(parts) if parts else np.zeros((0, 3, 3)))
        logger.debug("indexed %s/%s surface: %d triangles", params.cloth_type.value, side, len(index))
        return index

    def index(self, cloth: ClothType, latent: ClothLatent, side: Optional[str] = None) -> TriangleSoupIndex:
        if latent.cloth_type is not cloth:
            raise ValidationError(f"latent for {latent.cloth_type.value} used to evaluate {cloth.value}")
        return self._index(self.decode(latent), side)

    def evaluate(
        self,
        points: np.ndarray,
        cloth: ClothType,
        latent: ClothLatent,
        side: Optional[str] = None,
        workers: Optional[int] = 1,
    ) -> np.ndarray:
        """Distances (N,) to the decoded surface; +inf when the decoded region is empty."""
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        index = self.index(cloth, latent, side)
        parts = ordered_map(lambda sl: index.distance(points[sl]), chunked(len(points), _EVAL_CHUNK), workers)
        return np.concatenate(parts) if parts else np.zeros(0)


@dataclass(frozen=True)
class GridField:
    """Tabulated UDF of one garment (one side for shoes) at a fixed latent."""

    cloth_type: ClothType
    side: Optional[str]
    latent: np.ndarray
    grid: ScalarGrid

    def interpolate(self, points: np.ndarray) -> np.ndarray:
        """Trilinear interpolation; out-of-bounds points read the clamped boundary value."""
        g = self.grid
        coords = (np.asarray(points, dtype=np.float64).reshape(-1, 3) - g.origin) / g.spacing
        coords = np.clip(coords, 0.0, np.array(g.dims, dtype=np.float64) - 1.0)
        values = map_coordinates(g.samples, coords.T, order=1, mode="nearest")
        return np.maximum(values, 0.0)


class GridBackend:
    kind = "grid"

    def __init__(self, body: TPoseBody, fields: Iterable[GridField]) -> None:
        self.body = body
        self.fields: Dict[FieldKey, GridField] = {(f.cloth_type, f.side): f for f in fields}

    def evaluate(
        self,
        points: np.ndarray,
        cloth: ClothType,
        latent: ClothLatent,
        side: Optional[str] = None,
        workers: Optional[int] = 1,
    ) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        out = np.full(len(points), np.inf)
        for key in field_keys(cloth, side):
            f = self.fields.get(key)
            if f is None:
                raise ValidationError(f"grid backend holds no field for {key[0].value}/{key[1]}")
            if f.latent.shape != latent.z.shape or not np.array_equal(f.latent, latent.z):
                raise ValidationError(f"{cloth.value} grid was tabulated for a different latent code")
            out = np.minimum(out, f.interpolate(points))
        return out


Backend = Union[ProceduralBackend, GridBackend]


def decode_latent(backend: Backend, latent: ClothLatent) -> ClothParams:
    if getattr(backend, "kind", None) != "procedural":
        raise ValidationError("latent decoding needs the procedural backend")
    return backend.decode(latent)


def udf_eval(
    backend: Backend,
    x: np.ndarray,
    state: ClothState,
    cloth: ClothType,
    body: TPoseBody,
    side: Optional[str] = None,
    workers: Optional[int] = 1,
) -> Union[float, np.ndarray]:
    """C(x, z, g, beta): a float for one point, an array for a batch.

    The gender of ``state`` selects the body variant, so it is carried by
    ``body``; the backend must have been built for that body.
    """
    if backend.body is not body and not np.array_equal(backend.body.vertices, body.vertices):
        raise ValidationError("backend was built for a different body")
    x = np.asarray(x, dtype=np.float64)
    values = backend.evaluate(x.reshape(-1, 3), cloth, state.latent(cloth), side=side, workers=workers)
    if x.ndim == 1:
        return float(values[0])
    return values
