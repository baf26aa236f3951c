import threading

import numpy as np
import pytest

from app.body.model import shape_body
from app.errors import ValidationError
from app.fitting.fitter import (
    PARAM_SIZE,
    Ablation,
    FitConfig,
    FitObjective,
    fit_clothes,
    observation_truth,
    pack_state,
    unpack_state,
)
from app.models import LABEL_BACKGROUND, ClothSegmentation, ClothState, ClothType, LossWeights, ObservationSet
from app.supervision.densepose_map import cloth_to_body_map
from app.supervision.query import build_query_sets

from conftest import state_with

UPPER = ClothType.UPPER.label
PANTS = ClothType.PANTS.label


def small_config(**overrides):
    base = dict(max_iterations=3, n_points=196, query_resolution=15, learning_rate=0.05, seed=3)
    base.update(overrides)
    return FitConfig(**base)


@pytest.fixture
def dressed(make_observation):
    return make_observation({(0, 62): UPPER, (62, 100): PANTS})


def test_parameter_vector_layout():
    assert PARAM_SIZE == 4 * 18 + 4 + 5 + 2 == 83
    x = pack_state(state_with(gender="female"))
    assert x.shape == (PARAM_SIZE,)


def test_pack_unpack_round_trip():
    state = state_with(ClothType.SKIRT, skirt=np.linspace(-1, 1, 18))
    state = state.with_cloth(ClothType.UPPER, score=0.3).with_cloth(ClothType.SKIRT, score=0.9)
    state = ClothState(state.existence, state.latents, np.array([0.3, 0.7]))
    again = unpack_state(pack_state(state))
    assert np.allclose(again.existence, state.existence, atol=1e-6)
    assert np.allclose(again.gender, state.gender)
    assert np.allclose(again.latent(ClothType.SKIRT).z, state.latent(ClothType.SKIRT).z)


def test_zero_vector_is_the_mean_state():
    state = unpack_state(np.zeros(PARAM_SIZE))
    assert np.allclose(state.existence, 0.5)
    assert np.allclose(state.gender, [0.5, 0.5])
    assert all(np.all(l.z == 0.0) for l in state.latents)
    with pytest.raises(ValidationError):
        unpack_state(np.zeros(PARAM_SIZE - 1))


def test_config_from_dict():
    config = FitConfig.from_dict({"ablation": "no-dp", "max_iterations": 7, "unrelated": 1})
    assert config.ablation is Ablation.NO_DP
    assert config.max_iterations == 7
    assert config.to_dict()["ablation"] == "no-dp"
    with pytest.raises(ValidationError):
        FitConfig(patience=0)
    with pytest.raises(ValueError):
        FitConfig(ablation="no-gender")


def test_unsegmented_observation_stops_with_diagnostic(make_observation, tpose, backend):
    obs = make_observation()
    blank = ObservationSet(ClothSegmentation(np.full_like(obs.segmentation.labels, LABEL_BACKGROUND)),
                           obs.densepose, obs.camera, "male")
    trace = fit_clothes(blank, tpose, backend, small_config())
    assert trace.iterations == 0
    assert trace.diagnostic
    assert np.allclose(trace.state.existence, 0.5)


def test_fit_records_every_iteration(dressed, tpose, backend):
    trace = fit_clothes(dressed, tpose, backend, small_config())
    assert trace.iterations == 3
    assert len(trace.records) == 3
    assert [r["iteration"] for r in trace.records] == [0, 1, 2]
    best = [r["best_total"] for r in trace.records]
    assert all(b <= a for a, b in zip(best, best[1:]))
    assert best[-1] <= trace.records[0]["total"]
    summary = trace.summary()
    assert summary["iterations"] == 3
    assert summary["state"]["existence"].keys() == {c.value for c in ClothType}


def test_observed_existence_takes_precedence(make_observation, tpose):
    obs = make_observation({(0, 62): UPPER}, existence={ClothType.SHOES: True})
    truth = observation_truth(obs, tpose)
    assert truth[ClothType.SHOES] is True
    assert truth[ClothType.UPPER] is None

    derived = observation_truth(make_observation({(0, 62): UPPER}), tpose)
    assert derived[ClothType.UPPER] is True


def test_no_reg_ablation_drops_the_prior(dressed, tpose, backend):
    trace = fit_clothes(dressed, tpose, backend, small_config(max_iterations=2, ablation="no-reg"))
    assert all(r["reg"] == 0.0 for r in trace.records)
    assert any(r["dp"] > 0.0 for r in trace.records)


def test_no_dp_ablation_drops_densepose(dressed, tpose, backend):
    trace = fit_clothes(dressed, tpose, backend, small_config(max_iterations=1, ablation="no-dp"))
    assert trace.records[0]["dp"] == 0.0
    assert trace.records[0]["silhouette"] == 0.0


def test_silhouette_ablation_swaps_the_term(dressed, tpose, backend):
    trace = fit_clothes(dressed, tpose, backend, small_config(max_iterations=1, ablation="silhouette-for-dp"))
    record = trace.records[0]
    assert record["dp"] == 0.0
    assert 0.0 <= record["silhouette"] <= 1.0


def test_stop_event_interrupts_before_the_first_step(dressed, tpose, backend):
    stop = threading.Event()
    stop.set()
    trace = fit_clothes(dressed, tpose, backend, small_config(), stop=stop)
    assert trace.interrupted
    assert trace.iterations == 0


def test_backend_must_match_the_body(dressed, tpose, backend):
    other = shape_body(tpose.model)
    with pytest.raises(ValidationError):
        fit_clothes(dressed, other, backend, small_config())


def test_unused_latent_dimensions_leave_densepose_unchanged(dressed, tpose, backend):
    config = small_config()
    weights = LossWeights()
    mapped = cloth_to_body_map(dressed, tpose, config.n_points, config.seed)
    querysets = build_query_sets(tpose, mapped, weights, config.query_resolution)
    objective = FitObjective(dressed, tpose, backend, querysets, observation_truth(dressed, tpose), config, weights)

    x = np.zeros(PARAM_SIZE)
    y = x.copy()
    y[10] = 1.5  # upper latent, past the decoded dimensions
    a, b = objective.breakdown(x), objective.breakdown(y)
    assert a.dp == b.dp
    assert b.reg > a.reg
