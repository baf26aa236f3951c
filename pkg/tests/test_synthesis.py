import os

import numpy as np
import pytest

from app.config_loader import load_config
from app.errors import ConfigError, MissingInputError
from app.models import ClothType, Mesh
from app.scene import load_scene
from app.services.synthesis import (
    GT_SURFACE_KEY,
    pose_preset,
    sample_gt_state,
    synthesize_scene,
    write_reconstruction,
    write_scene,
)
from app.storage import load_json

from conftest import state_with


def small_config(**synth):
    cfg = load_config("")
    cfg["camera"].update(width=96, height=96, scale=0.02)
    cfg["cloth"].update(resolution=40, iso=0.02)
    cfg["synth"].update(outfit=["upper", "pants"], gender="female", **synth)
    return cfg


@pytest.fixture(scope="module")
def scene():
    return synthesize_scene(small_config(), seed=5)


def test_outfit_is_respected(scene):
    assert set(scene.state.gated()) == {ClothType.UPPER, ClothType.PANTS}
    assert scene.obs.gender == "female"
    assert not scene.cloth_meshes["upper"].is_empty
    assert scene.cloth_meshes["coat"].is_empty


def test_segmentation_sees_the_outfit(scene):
    assert scene.obs.segmentation.contains(ClothType.UPPER)
    assert scene.obs.segmentation.contains(ClothType.PANTS)
    assert scene.obs.existence[ClothType.UPPER] is True
    assert scene.obs.existence[ClothType.COAT] is not True


def test_gt_surface_shares_body_topology(scene):
    assert np.array_equal(scene.gt_surface.faces, scene.tpose.faces)
    assert len(scene.gt_surface.vertices) == len(scene.tpose.vertices)
    assert np.array_equal(scene.registered.faces, scene.tpose.faces)


def test_scenes_are_deterministic(scene):
    again = synthesize_scene(small_config(), seed=5)
    assert np.array_equal(again.obs.segmentation.labels, scene.obs.segmentation.labels)
    assert np.array_equal(again.state.latent(ClothType.UPPER).z, scene.state.latent(ClothType.UPPER).z)
    assert np.array_equal(again.gt_surface.vertices, scene.gt_surface.vertices)


def test_unknown_pose_preset(tpose):
    with pytest.raises(ConfigError):
        pose_preset(tpose, "cartwheel", np.random.default_rng(0), small_config())


def test_pose_presets(tpose):
    cfg = small_config()
    rng = np.random.default_rng(0)
    assert not np.any(pose_preset(tpose, "t-pose", rng, cfg).theta)
    relaxed = pose_preset(tpose, "relaxed", rng, cfg).theta
    shoulder = tpose.model.joint("L_shoulder")
    assert relaxed[shoulder][2] == pytest.approx(-np.deg2rad(45.0))
    jittered = pose_preset(tpose, "random", rng, cfg).theta
    assert not np.array_equal(jittered, relaxed)


@pytest.mark.parametrize("seed", range(6))
def test_random_outfit_has_one_top_and_one_bottom(seed):
    cfg = small_config()["synth"]
    cfg["outfit"] = []
    gated = set(sample_gt_state(np.random.default_rng(seed), cfg).gated())
    assert len(gated & {ClothType.UPPER, ClothType.COAT}) == 1
    assert len(gated & {ClothType.PANTS, ClothType.SKIRT}) == 1
    assert gated <= set(ClothType)


def test_explicit_state_wins():
    state = state_with(ClothType.SKIRT, gender="female")
    cfg = small_config(state=state.to_dict())["synth"]
    assert sample_gt_state(np.random.default_rng(0), cfg).gated() == [ClothType.SKIRT]


def test_written_scene_loads_back(scene, tmp_path):
    root = str(tmp_path / "scene")
    manifest = write_scene(scene, root, seed=5)
    assert set(manifest.gt_meshes) == {"upper", "pants"}

    loaded = load_scene(root)
    assert np.array_equal(loaded.obs.segmentation.labels, scene.obs.segmentation.labels)
    assert np.array_equal(loaded.obs.densepose.face, scene.obs.densepose.face)
    assert loaded.obs.existence == scene.obs.existence
    assert np.allclose(loaded.tpose.vertices, scene.tpose.vertices)
    assert loaded.gt_state().gated() == scene.state.gated()
    assert np.allclose(loaded.gt_surface().vertices, scene.gt_surface.vertices, atol=1e-8)
    assert all(os.path.isfile(loaded.path(rel)) for rel in loaded.manifest.gt_meshes.values())


def test_incomplete_scene_is_rejected(scene, tmp_path):
    root = tmp_path / "scene"
    write_scene(scene, str(root), seed=5)
    (root / "densepose.dpm").unlink()
    with pytest.raises(MissingInputError):
        load_scene(str(root))


def test_reconstruction_layout_skips_empty_meshes(tmp_path):
    patch = Mesh([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], [[0, 1, 2]])
    written = write_reconstruction(str(tmp_path), state_with(ClothType.UPPER), {"upper": patch, "coat": Mesh.empty()},
                                   {GT_SURFACE_KEY: patch, "coat": Mesh.empty()})
    assert written == {"upper": "tpose/upper.obj"}
    assert (tmp_path / "posed" / f"{GT_SURFACE_KEY}.obj").exists()
    assert not (tmp_path / "posed" / "coat.obj").exists()
    assert load_json(str(tmp_path / "state.json"))["existence"]["upper"] == 1.0
