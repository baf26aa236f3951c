"""Recover a ClothState from one observation by minimizing the total loss.

The free parameters are packed into one vector: the five latent codes in
ClothType order, five existence logits, then two gender logits. Supervision
(mapped points and query sets) is built once before the first iteration.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import expit, softmax

from app import constants
from app.body.model import TPoseBody
from app.clothfield.backend import Backend
from app.errors import ValidationError
from app.fitting.optim import AdamConfig, AdamState, adam_step, fd_gradient
from app.models import ClothLatent, ClothState, ClothType, LossBreakdown, LossWeights, ObservationSet, QuerySet
from app.supervision.densepose_map import cloth_to_body_map, existence_labels, part_visibility
from app.supervision.losses import (
    densepose_term,
    existence_loss,
    gender_loss,
    reg_loss,
    silhouette_grid,
    silhouette_term,
    total_loss,
)
from app.supervision.query import build_query_sets

logger = logging.getLogger(__name__)

_LATENT_SIZE = sum(c.latent_dim for c in ClothType)
PARAM_SIZE = _LATENT_SIZE + constants.N_CLOTH + 2


class Ablation(Enum):
    FULL = "full"
    NO_REG = "no-reg"
    NO_DP = "no-dp"
    SILHOUETTE_FOR_DP = "silhouette-for-dp"


@dataclass(frozen=True)
class FitConfig:
    learning_rate: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_iterations: int = 300
    fd_step: float = 1e-3
    tolerance: float = 1e-6
    patience: int = 10
    seed: int = 0
    n_points: int = constants.N_SAMPLED_POINTS
    query_resolution: int = constants.QUERY_GRID_RESOLUTION
    abduction_deg: float = constants.DEFAULT_ABDUCTION_DEG
    silhouette_iso: float = constants.DEFAULT_ISO
    ablation: Ablation = Ablation.FULL
    log_every: int = 25
    workers: Optional[int] = 1

    def __post_init__(self) -> None:
        if not self.learning_rate > 0 or not self.fd_step > 0:
            raise ValidationError("learning rate and finite-difference step must be positive")
        if self.max_iterations < 0 or self.patience < 1:
            raise ValidationError("max_iterations must be >= 0 and patience >= 1")
        if isinstance(self.ablation, str):
            object.__setattr__(self, "ablation", Ablation(self.ablation))

    @property
    def adam(self) -> AdamConfig:
        return AdamConfig(self.learning_rate, self.beta1, self.beta2, self.eps)

    @classmethod
    def from_dict(cls, obj: dict) -> "FitConfig":
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in obj.items() if k in known})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ablation"] = self.ablation.value
        return d


@dataclass
class FitTrace:
    records: List[dict] = field(default_factory=list)
    state: Optional[ClothState] = None
    iterations: int = 0
    converged: bool = False
    interrupted: bool = False
    diagnostic: Optional[str] = None

    @property
    def totals(self) -> List[float]:
        return [r["total"] for r in self.records]

    def summary(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "interrupted": self.interrupted,
            "diagnostic": self.diagnostic,
            "initial_total": self.records[0]["total"] if self.records else None,
            "best_total": self.records[-1]["best_total"] if self.records else None,
            "state": self.state.to_dict() if self.state else None,
        }


def pack_state(state: ClothState) -> np.ndarray:
    """Inverse of ``unpack_state`` for scores strictly inside (0, 1)."""
    p = np.clip(state.existence, constants.PROB_EPS, 1.0 - constants.PROB_EPS)
    g = np.clip(state.gender, constants.PROB_EPS, 1.0)
    return np.concatenate([*(l.z for l in state.latents), np.log(p / (1.0 - p)), np.log(g)])


def unpack_state(x: np.ndarray) -> ClothState:
    if x.shape != (PARAM_SIZE,):
        raise ValidationError(f"parameter vector must have length {PARAM_SIZE}")
    latents, offset = [], 0
    for cloth in ClothType:
        latents.append(ClothLatent(cloth, x[offset:offset + cloth.latent_dim]))
        offset += cloth.latent_dim
    existence = expit(x[offset:offset + constants.N_CLOTH])
    gender = softmax(x[offset + constants.N_CLOTH:])
    return ClothState(existence=existence, latents=tuple(latents), gender=gender)


class FitObjective:
    """Total loss as a function of the packed parameter vector.

    Per-garment DensePose and silhouette terms depend only on the decoded
    garment parameters, so they are memoized on them; finite-difference
    perturbations along unused latent dimensions cost nothing.
    """

    def __init__(
        self,
        obs: ObservationSet,
        body: TPoseBody,
        backend: Backend,
        querysets: Dict[ClothType, QuerySet],
        truth: Dict[ClothType, Optional[bool]],
        config: FitConfig,
        weights: LossWeights,
    ) -> None:
        self.obs = obs
        self.body = body
        self.backend = backend
        self.querysets = querysets
        self.truth = truth
        self.config = config
        self.weights = weights
        self._lock = threading.Lock()
        self._dp: Dict[Tuple, float] = {}
        self._sil: Dict[Tuple, Optional[float]] = {}
        self._sil_grids = {}
        if config.ablation is Ablation.SILHOUETTE_FOR_DP:
            self._sil_grids = {
                c: silhouette_grid(body, obs, c, config.query_resolution, config.abduction_deg) for c in ClothType
            }

    def _memo(self, table: dict, key, compute):
        with self._lock:
            if key in table:
                return table[key]
        value = compute()
        with self._lock:
            table[key] = value
        return value

    def densepose(self, state: ClothState) -> float:
        total, any_points = 0.0, False
        for cloth in ClothType:
            qs = self.querysets.get(cloth)
            if qs is None or len(qs) == 0:
                continue
            any_points = True
            latent = state.latent(cloth)
            key = self.backend.decode(latent).key
            total += self._memo(
                self._dp, key,
                lambda: densepose_term(qs, latent, self.backend, self.weights.d_max[cloth.value]),
            )
        return total / constants.N_CLOTH if any_points else 0.0

    def silhouette(self, state: ClothState) -> float:
        terms = []
        for cloth, sg in self._sil_grids.items():
            latent = state.latent(cloth)
            own = self.obs.segmentation.labels == cloth.label

            def compute():
                near = self.backend.evaluate(sg.points, cloth, latent) < self.config.silhouette_iso
                return silhouette_term(sg.pixels[near], own)

            term = self._memo(self._sil, self.backend.decode(latent).key, compute)
            if term is not None:
                terms.append(term)
        return float(np.mean(terms)) if terms else 0.0

    def breakdown(self, x: np.ndarray) -> LossBreakdown:
        state = unpack_state(x)
        ablation = self.config.ablation
        dp = self.densepose(state) if ablation in (Ablation.FULL, Ablation.NO_REG) else 0.0
        sil = self.silhouette(state) if ablation is Ablation.SILHOUETTE_FOR_DP else 0.0
        reg = 0.0 if ablation is Ablation.NO_REG else reg_loss(state, self.weights, gated=False)
        return total_loss(
            dp=dp,
            reg=reg,
            exist=existence_loss(state.existence, self.truth),
            gender=gender_loss(state.gender, self.obs.gender),
            weights=self.weights,
            silhouette=sil,
        )

    def __call__(self, x: np.ndarray) -> float:
        return self.breakdown(x).total


def observation_truth(obs: ObservationSet, body: TPoseBody) -> Dict[ClothType, Optional[bool]]:
    if obs.existence:
        return {c: obs.existence.get(c) for c in ClothType}
    return existence_labels(obs, part_visibility(obs, body.model))


def fit_clothes(
    obs: ObservationSet,
    body: TPoseBody,
    backend: Backend,
    config: Optional[FitConfig] = None,
    weights: Optional[LossWeights] = None,
    init: Optional[ClothState] = None,
    stop: Optional[threading.Event] = None,
) -> FitTrace:
    config = config or FitConfig()
    weights = weights or LossWeights()
    if getattr(backend, "kind", None) != "procedural":
        raise ValidationError("fitting needs the procedural backend")
    if backend.body is not body:
        raise ValidationError("backend was built for a different body")

    mapped = cloth_to_body_map(obs, body, config.n_points, config.seed)
    querysets = build_query_sets(body, mapped, weights, config.query_resolution, config.abduction_deg)
    # default start: mean latents, existence 0.5, gender 50/50
    x = pack_state(init) if init is not None else np.zeros(PARAM_SIZE)

    trace = FitTrace(state=unpack_state(x))
    if all(len(q) == 0 for q in querysets.values()):
        trace.diagnostic = "no query points: nothing supervises the garment fields"
        logger.warning(trace.diagnostic)
        return trace

    objective = FitObjective(obs, body, backend, querysets, observation_truth(obs, body), config, weights)
    adam = AdamState.fresh(len(x))
    best_x, best_total = x.copy(), np.inf

    for it in range(config.max_iterations):
        if stop is not None and stop.is_set():
            trace.interrupted = True
            logger.info("fit interrupted after %d iterations", it)
            break
        current = objective.breakdown(x)
        if current.total < best_total:
            best_x, best_total = x.copy(), current.total
        trace.records.append({"iteration": it, **current.to_dict(), "best_total": best_total})
        trace.iterations = it + 1
        if it % config.log_every == 0:
            logger.info("iter %d: total %.6f (dp %.6f reg %.4f exist %.4f gender %.4f sil %.4f)",
                        it, current.total, current.dp, current.reg, current.exist, current.gender,
                        current.silhouette)

        totals = trace.totals
        if len(totals) > config.patience and abs(totals[-1 - config.patience] - totals[-1]) < config.tolerance:
            trace.converged = True
            break
        grad = fd_gradient(objective, x, config.fd_step, config.workers)
        x, adam = adam_step(x, adam, grad, config.adam)

    trace.state = unpack_state(best_x)
    logger.info("fit finished: %d iterations, best total %.6f, gated %s", trace.iterations, best_total,
                [c.value for c in trace.state.gated()])
    return trace
