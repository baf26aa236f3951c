"""Turn a fitted state into meshes, and score a reconstruction directory against a scene."""

from __future__ import annotations

import glob
import logging
import os
from typing import Dict, Optional, Tuple

import numpy as np

from app.clothfield.backend import ProceduralBackend
from app.evaluation.bcc import evaluate_bcc
from app.evaluation.chamfer import evaluate_cd
from app.evaluation.pairs import VertexPairs
from app.errors import MissingInputError
from app.meshing.extract import BODY_KEY, extract_cloth_meshes, pose_deform
from app.meshing.obj import load_obj
from app.models import GENDERS, ClothState, ClothType, Mesh, MetricReport, merge_meshes
from app.scene import Scene
from app.services.synthesis import write_reconstruction
from app.storage import load_json

logger = logging.getLogger(__name__)


def reconstruct(scene: Scene, state: ClothState, out_dir: str, config: dict) -> Dict[str, str]:
    """Extract the gated garments in T-pose, pose them with the scene's pose and write both sets."""
    cloth_cfg = config["cloth"]
    workers = config["runtime"]["workers"]
    backend = ProceduralBackend(scene.tpose)
    meshes = extract_cloth_meshes(state, backend, scene.tpose, cloth_cfg["resolution"], cloth_cfg["iso"], workers)
    posed_body, posed = pose_deform(scene.tpose, meshes, scene.obs.theta)
    written = write_reconstruction(out_dir, state, meshes, {BODY_KEY: posed_body, **posed})
    logger.info("reconstruction written to %s (%s)", out_dir, ", ".join(sorted(written)))
    return written


def _load_dir(directory: str) -> Dict[str, Mesh]:
    return {
        os.path.splitext(os.path.basename(p))[0]: load_obj(p)
        for p in sorted(glob.glob(os.path.join(directory, "*.obj")))
    }


def load_reconstruction(recon_dir: str) -> Tuple[Dict[str, Mesh], Mesh, Optional[ClothState]]:
    """T-pose garments, the merged posed meshes, and the fitted state when one was saved."""
    if not os.path.isdir(recon_dir):
        raise MissingInputError(f"reconstruction directory not found: {recon_dir}")
    posed = _load_dir(os.path.join(recon_dir, "posed"))
    if not posed:
        raise MissingInputError(f"{recon_dir}: no posed meshes to evaluate")
    tpose = {k: m for k, m in _load_dir(os.path.join(recon_dir, "tpose")).items() if k != BODY_KEY}
    state_path = os.path.join(recon_dir, "state.json")
    state = ClothState.from_dict(load_json(state_path)) if os.path.isfile(state_path) else None
    return tpose, merge_meshes(list(posed.values())), state


def existence_accuracy(predicted: ClothState, truth: ClothState) -> float:
    """Share of garments whose gate decision matches the ground truth."""
    got, want = set(predicted.gated()), set(truth.gated())
    return float(np.mean([(c in got) == (c in want) for c in ClothType]))


def evaluate_reconstruction(scene: Scene, recon_dir: str, config: dict) -> Tuple[MetricReport, VertexPairs]:
    eval_cfg = config["eval"]
    cloths, posed, state = load_reconstruction(recon_dir)
    cd, transform, pairs = evaluate_cd(posed, scene.gt_surface(), scene.obs.camera, config["runtime"]["workers"])
    scores, average, flagged = evaluate_bcc(
        cloths, scene.obs, scene.tpose, eval_cfg["bcc_points"], scene.manifest.seed, eval_cfg["bcc_radius"],
    )

    report = MetricReport(
        cd_mm=cd,
        bcc=scores,
        bcc_average=average,
        pair_count=len(pairs),
        transform=transform,
        flagged=flagged,
    )
    if state is not None:
        truth = scene.gt_state()
        report.existence_accuracy = existence_accuracy(state, truth)
        report.gender_correct = GENDERS[int(np.argmax(state.gender))] == scene.manifest.gender
    logger.info("CD %.3f mm, BCC %s (average %.3f)", cd, {k: round(v, 3) for k, v in scores.items()}, average)
    return report, pairs
