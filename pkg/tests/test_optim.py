import numpy as np
import pytest

from app.errors import FiniteDifferenceError, ValidationError
from app.fitting.optim import AdamConfig, AdamState, adam_step, fd_gradient

A = np.array([1.0, 2.0, 0.5, 3.0])


def quadratic(x):
    return float(np.sum(A * x**2))


def test_central_differences_are_exact_on_quadratics():
    x = np.array([0.3, -1.2, 2.0, 0.0])
    assert np.allclose(fd_gradient(quadratic, x, h=1e-3), 2.0 * A * x, atol=1e-8)


def test_gradient_does_not_depend_on_workers():
    x = np.array([0.3, -1.2, 2.0, 0.7])
    assert np.array_equal(fd_gradient(quadratic, x, workers=1), fd_gradient(quadratic, x, workers=4))


def test_non_finite_step_names_the_component():
    def blows_up(x):
        return np.inf if x[2] > 0.5 else 0.0

    with pytest.raises(FiniteDifferenceError) as info:
        fd_gradient(blows_up, np.array([0.0, 0.0, 0.5, 0.0]), h=0.1)
    assert info.value.component == 2


def test_step_must_be_positive():
    with pytest.raises(ValidationError):
        fd_gradient(quadratic, np.zeros(4), h=0.0)


def test_first_adam_step_moves_by_learning_rate():
    grad = np.array([4.0, -0.01, 250.0])
    params, state = adam_step(np.zeros(3), AdamState.fresh(3), grad, AdamConfig(learning_rate=0.1))
    assert state.step == 1
    assert np.allclose(params, -0.1 * np.sign(grad), atol=1e-6)


def test_adam_minimizes_a_quadratic():
    x = np.array([1.0, -2.0, 0.5, 1.5])
    state = AdamState.fresh(4)
    config = AdamConfig(learning_rate=0.05)
    for _ in range(600):
        x, state = adam_step(x, state, 2.0 * A * x, config)
    assert quadratic(x) < 1e-3


def test_adam_config_validation():
    with pytest.raises(ValidationError):
        AdamConfig(learning_rate=0.0)
    with pytest.raises(ValidationError):
        AdamConfig(beta1=1.0)
