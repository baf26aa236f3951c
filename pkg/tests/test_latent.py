import numpy as np
import pytest
from scipy.special import expit

from app.clothfield.latent import decode_params, existence_gate
from app.errors import ValidationError
from app.models import ClothLatent, ClothState, ClothType

from conftest import state_with


def test_mean_latent_decodes_to_mid_coverage():
    params = decode_params(ClothLatent.mean(ClothType.UPPER))
    assert params.coverage == (0.5, 0.5)
    assert params.thickness == pytest.approx(0.015)


def test_shoes_use_one_coverage_axis():
    params = decode_params(ClothLatent(ClothType.SHOES, [1.0, -2.0, 5.0, 5.0]))
    assert params.coverage == (pytest.approx(expit(1.0)), 1.0)
    assert params.thickness == pytest.approx(0.005 + 0.02 * expit(-2.0))


def test_unused_dimensions_do_not_change_decoding():
    z = np.zeros(18)
    z[3:] = np.linspace(-3, 3, 15)
    assert decode_params(ClothLatent(ClothType.PANTS, z)) == decode_params(ClothLatent.mean(ClothType.PANTS))


def test_thickness_stays_in_range():
    for t in (-50.0, 0.0, 50.0):
        params = decode_params(ClothLatent(ClothType.COAT, [0.0, 0.0, t] + [0.0] * 15))
        assert 0.005 <= params.thickness <= 0.025


def test_latent_length_is_checked():
    with pytest.raises(ValidationError):
        ClothLatent(ClothType.SHOES, np.zeros(18))
    with pytest.raises(ValidationError):
        ClothLatent(ClothType.SKIRT, np.zeros(4))


def test_existence_gate_is_strict():
    assert not existence_gate(0.25)
    assert existence_gate(0.2500001)
    assert not existence_gate(0.0)
    assert existence_gate(1.0)
    with pytest.raises(ValidationError):
        existence_gate(1.5)


def test_gated_follows_scores():
    state = state_with(ClothType.COAT, ClothType.SHOES)
    assert state.gated() == [ClothType.COAT, ClothType.SHOES]
    assert ClothState.mean(existence=0.25).gated() == []


def test_state_round_trips_through_dict():
    state = state_with(ClothType.UPPER, gender="female", upper=np.arange(18) / 10.0)
    again = ClothState.from_dict(state.to_dict())
    assert np.array_equal(again.existence, state.existence)
    assert np.array_equal(again.latent(ClothType.UPPER).z, state.latent(ClothType.UPPER).z)
    assert np.array_equal(again.gender, [0.0, 1.0])


def test_state_rejects_bad_gender():
    with pytest.raises(ValidationError):
        ClothState(np.zeros(5), tuple(ClothLatent.mean(c) for c in ClothType), np.array([0.6, 0.6]))


def test_malformed_state_dict():
    with pytest.raises(ValidationError):
        ClothState.from_dict({"existence": {}})
