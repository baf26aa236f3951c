from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Tuple

import numpy as np

from app.errors import FiniteDifferenceError, ValidationError
from app.workers import ordered_map


def fd_gradient(
    objective: Callable[[np.ndarray], float],
    point: np.ndarray,
    h: float = 1e-3,
    workers: Optional[int] = 1,
) -> np.ndarray:
    """Central differences, one evaluation pair per component."""
    if not h > 0:
        raise ValidationError("finite-difference step must be positive")
    x = np.asarray(point, dtype=np.float64)

    def partial(k: int) -> float:
        step = np.zeros_like(x)
        step[k] = h
        hi = float(objective(x + step))
        lo = float(objective(x - step))
        if not np.isfinite(hi):
            raise FiniteDifferenceError(k, hi)
        if not np.isfinite(lo):
            raise FiniteDifferenceError(k, lo)
        return (hi - lo) / (2.0 * h)

    return np.array(ordered_map(partial, range(len(x)), workers), dtype=np.float64)


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ValidationError("learning rate must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValidationError("Adam betas must lie in [0, 1)")


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def fresh(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0)


def adam_step(
    params: np.ndarray,
    state: AdamState,
    grad: np.ndarray,
    config: AdamConfig = AdamConfig(),
) -> Tuple[np.ndarray, AdamState]:
    grad = np.asarray(grad, dtype=np.float64)
    t = state.step + 1
    m = config.beta1 * state.m + (1.0 - config.beta1) * grad
    v = config.beta2 * state.v + (1.0 - config.beta2) * grad**2
    m_hat = m / (1.0 - config.beta1**t)
    v_hat = v / (1.0 - config.beta2**t)
    new_params = np.asarray(params, dtype=np.float64) - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps)
    return new_params, replace(state, m=m, v=v, step=t)
