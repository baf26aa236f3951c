"""Synthetic scenes with known garments: the supervision a fit consumes plus the meshes it is scored against."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from app.body.io import save_body_model
from app.body.model import TPoseBody, shape_body
from app.body.procedural import BodySpec, make_procedural_body
from app.clothfield.backend import ProceduralBackend
from app.errors import ConfigError
from app.evaluation.gt import build_gt_surface, register_clothed_body
from app.meshing.extract import extract_cloth_meshes, pose_deform
from app.meshing.obj import save_obj
from app.models import (
    GENDERS,
    LABEL_BACKGROUND,
    LABEL_NON_CLOTH,
    Camera,
    ClothSegmentation,
    ClothState,
    ClothType,
    Mesh,
    ObservationSet,
    PoseParams,
    SceneManifest,
    ShapeParams,
    merge_meshes,
)
from app.raster.io import save_face_index_map
from app.raster.rasterizer import rasterize
from app.scene import save_manifest
from app.storage import ensure_dir, save_json, save_pgm
from app.supervision.densepose_map import existence_labels, part_visibility
from app.supervision.query import a_pose

logger = logging.getLogger(__name__)

POSE_PRESETS = ("t-pose", "a-pose", "relaxed", "random")
GT_SURFACE_KEY = "clothed"

# latent dims a sampled garment varies; the rest stay at the mean
_SAMPLED_DIMS = {ClothType.SHOES: 2}
_DEFAULT_SAMPLED_DIMS = 3


@dataclass
class SynthScene:
    tpose: TPoseBody
    state: ClothState
    theta: PoseParams
    obs: ObservationSet
    cloth_meshes: Dict[str, Mesh]
    posed_meshes: Dict[str, Mesh]
    posed_body: Mesh
    registered: Mesh
    gt_surface: Mesh


def body_from_config(config: dict) -> TPoseBody:
    body_cfg = config["body"]
    model = make_procedural_body(BodySpec.from_dict(body_cfg["spec"]), body_cfg["gender_variant"])
    return shape_body(model, ShapeParams(body_cfg["beta"]))


def camera_from_config(config: dict) -> Camera:
    cam = config["camera"]
    return Camera.centered(cam["width"], cam["height"], cam["scale"], cam["center"])


def sample_gt_state(rng: np.random.Generator, synth_cfg: dict) -> ClothState:
    """One top (upper or coat), one bottom (pants or skirt), shoes by chance, then random cut and thickness."""
    if synth_cfg.get("state"):
        return ClothState.from_dict(synth_cfg["state"])

    outfit = synth_cfg.get("outfit") or []
    if outfit:
        present = {ClothType(c) for c in outfit}
    else:
        present = {
            (ClothType.UPPER, ClothType.COAT)[rng.integers(2)],
            (ClothType.PANTS, ClothType.SKIRT)[rng.integers(2)],
        }
        if rng.random() < synth_cfg["shoes_probability"]:
            present.add(ClothType.SHOES)

    gender = synth_cfg.get("gender", "random")
    if gender == "random":
        gender = "male" if rng.random() < 0.5 else "female"
    state = ClothState.mean(existence=0.0, gender=gender)

    scale = synth_cfg["latent_scale"]
    for cloth in ClothType:
        z = np.zeros(cloth.latent_dim)
        n = _SAMPLED_DIMS.get(cloth, _DEFAULT_SAMPLED_DIMS)
        # draw for every garment so the stream does not depend on the outfit
        draw = np.clip(rng.normal(0.0, scale, n), -2.0, 2.0)
        if cloth in present:
            z[:n] = draw
            state = state.with_cloth(cloth, score=1.0, z=z)
    return state


def pose_preset(tpose: TPoseBody, preset: str, rng: np.random.Generator, config: dict) -> PoseParams:
    if preset not in POSE_PRESETS:
        raise ConfigError(f"unknown pose preset {preset!r}; expected one of {POSE_PRESETS}")
    if preset == "t-pose":
        return PoseParams.zeros()
    if preset == "a-pose":
        return a_pose(tpose, config["cloth"]["abduction_deg"])

    model = tpose.model
    drop = np.deg2rad(config["synth"]["arm_drop_deg"])
    theta = PoseParams.zeros()
    theta = theta.with_joint(model.joint("L_shoulder"), (0.0, 0.0, -drop))
    theta = theta.with_joint(model.joint("R_shoulder"), (0.0, 0.0, drop))
    theta = theta.with_joint(model.joint("L_elbow"), (0.0, -0.3, 0.0))
    theta = theta.with_joint(model.joint("R_elbow"), (0.0, 0.3, 0.0))
    if preset == "relaxed":
        return theta

    jitter = np.zeros_like(theta.theta)
    limbs = [model.joint(n) for n in ("L_hip", "R_hip", "L_knee", "R_knee", "L_elbow", "R_elbow", "spine2")]
    jitter[limbs] = rng.normal(0.0, 0.08, (len(limbs), 3))
    return PoseParams(theta.theta + jitter)


def render_observation(
    posed_body: Mesh,
    posed_meshes: Dict[str, Mesh],
    camera: Camera,
    gender: str,
    theta: PoseParams,
    beta: ShapeParams,
    tpose: TPoseBody,
    workers: Optional[int] = 1,
) -> ObservationSet:
    """DensePose from the bare body; segmentation from the body and garments rendered together."""
    densepose = rasterize(posed_body, camera, workers)

    parts = [posed_body]
    face_labels = [np.full(len(posed_body.faces), LABEL_NON_CLOTH, dtype=np.uint8)]
    for key, mesh in posed_meshes.items():
        if mesh.is_empty:
            continue
        parts.append(mesh)
        face_labels.append(np.full(len(mesh.faces), ClothType(key.split("_")[0]).label, dtype=np.uint8))
    labelled = rasterize(merge_meshes(parts), camera, workers)
    labels = np.full((camera.height, camera.width), LABEL_BACKGROUND, dtype=np.uint8)
    covered = labelled.covered
    labels[covered] = np.concatenate(face_labels)[labelled.face[covered]]

    obs = ObservationSet(ClothSegmentation(labels), densepose, camera, gender, theta=theta, beta=beta)
    existence = existence_labels(obs, part_visibility(obs, tpose.model))
    return ObservationSet(ClothSegmentation(labels), densepose, camera, gender, existence, theta, beta)


def synthesize_scene(config: dict, seed: int) -> SynthScene:
    rng = np.random.default_rng(seed)
    workers = config["runtime"]["workers"]
    tpose = body_from_config(config)
    backend = ProceduralBackend(tpose)
    state = sample_gt_state(rng, config["synth"])
    theta = pose_preset(tpose, config["synth"]["pose"], rng, config)
    gender = GENDERS[int(np.argmax(state.gender))]
    logger.info("scene seed %d: garments %s, %s", seed, [c.value for c in state.gated()], gender)

    cloth_meshes = extract_cloth_meshes(state, backend, tpose, config["cloth"]["resolution"],
                                        config["cloth"]["iso"], workers)
    posed_body, posed_meshes = pose_deform(tpose, cloth_meshes, theta)
    obs = render_observation(posed_body, posed_meshes, camera_from_config(config), gender, theta, tpose.beta,
                             tpose, workers)
    for cloth in state.gated():
        if not obs.segmentation.contains(cloth):
            logger.warning("%s is present but not visible in the segmentation", cloth.value)

    registered = register_clothed_body(tpose, backend, state)
    return SynthScene(
        tpose=tpose,
        state=state,
        theta=theta,
        obs=obs,
        cloth_meshes=cloth_meshes,
        posed_meshes=posed_meshes,
        posed_body=posed_body,
        registered=registered,
        gt_surface=build_gt_surface(registered, tpose, theta),
    )


def write_reconstruction(out_dir: str, state: ClothState, tpose_meshes: Dict[str, Mesh],
                         posed_meshes: Dict[str, Mesh]) -> Dict[str, str]:
    """``state.json`` plus ``tpose/<key>.obj`` and ``posed/<key>.obj`` for every non-empty mesh.

    Returns the T-pose files written, keyed like ``tpose_meshes``, relative to ``out_dir``.
    """
    ensure_dir(os.path.join(out_dir, "tpose"))
    ensure_dir(os.path.join(out_dir, "posed"))
    save_json(os.path.join(out_dir, "state.json"), state.to_dict())
    written: Dict[str, str] = {}
    for key, mesh in tpose_meshes.items():
        if mesh.is_empty:
            continue
        rel = os.path.join("tpose", f"{key}.obj")
        save_obj(os.path.join(out_dir, rel), mesh)
        written[key] = rel
    for key, mesh in posed_meshes.items():
        if not mesh.is_empty:
            save_obj(os.path.join(out_dir, "posed", f"{key}.obj"), mesh)
    return written


def write_scene(scene: SynthScene, out_dir: str, seed: int) -> SceneManifest:
    ensure_dir(out_dir)
    save_body_model(scene.tpose.model, os.path.join(out_dir, "body"))
    save_pgm(os.path.join(out_dir, "segmentation.pgm"), scene.obs.segmentation.labels)
    save_face_index_map(os.path.join(out_dir, "densepose.dpm"), scene.obs.densepose)

    # laid out like a reconstruction so a scene can be scored against itself
    gt_dir = os.path.join(out_dir, "gt")
    written = write_reconstruction(gt_dir, scene.state, scene.cloth_meshes, {GT_SURFACE_KEY: scene.gt_surface})
    save_obj(os.path.join(gt_dir, "registered.obj"), scene.registered)

    manifest = SceneManifest(
        seed=seed,
        body_model="body",
        segmentation="segmentation.pgm",
        densepose="densepose.dpm",
        camera=scene.obs.camera,
        gender=scene.obs.gender,
        theta=scene.theta,
        beta=scene.tpose.beta,
        existence=dict(scene.obs.existence),
        gt_state=os.path.join("gt", "state.json"),
        gt_meshes={key: os.path.join("gt", rel) for key, rel in written.items()},
        gt_surface=os.path.join("gt", "posed", f"{GT_SURFACE_KEY}.obj"),
        registered=os.path.join("gt", "registered.obj"),
    )
    path = save_manifest(out_dir, manifest)
    logger.info("scene written to %s", path)
    return manifest
