from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import expit

from app import constants
from app.errors import ValidationError
from app.models import ClothLatent, ClothType


@dataclass(frozen=True)
class ClothParams:
    """Decoded garment: coverage fractions along the two cut axes plus offset thickness (m)."""

    cloth_type: ClothType
    coverage: Tuple[float, float]
    thickness: float

    @property
    def key(self) -> Tuple[str, float, float, float]:
        return (self.cloth_type.value, self.coverage[0], self.coverage[1], self.thickness)


def decode_params(latent: ClothLatent) -> ClothParams:
    z = latent.z
    if len(z) != latent.cloth_type.latent_dim:
        raise ValidationError(f"latent length {len(z)} does not match {latent.cloth_type.value}")
    if latent.cloth_type is ClothType.SHOES:
        # single coverage (shoe height); the second cut axis is unused
        coverage = (float(expit(z[0])), 1.0)
        t_logit = z[1]
    else:
        coverage = (float(expit(z[0])), float(expit(z[1])))
        t_logit = z[2]
    thickness = constants.THICKNESS_MIN + constants.THICKNESS_RANGE * float(expit(t_logit))
    return ClothParams(latent.cloth_type, coverage, thickness)


def existence_gate(score: float) -> bool:
    """A garment is decoded only when its existence score is strictly above 0.25."""
    score = float(score)
    if not 0.0 <= score <= 1.0 or np.isnan(score):
        raise ValidationError(f"existence score must lie in [0, 1], got {score}")
    return score > constants.EXISTENCE_THRESHOLD
