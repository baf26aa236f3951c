"""Scene directories: a ``manifest.json`` naming every file the commands consume."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

from app.body.io import load_body_model
from app.body.model import TPoseBody, shape_body
from app.meshing.obj import load_obj
from app.models import ClothSegmentation, ClothState, Mesh, ObservationSet, SceneManifest
from app.raster.io import load_face_index_map
from app.storage import load_json, load_pgm, require_file, save_json

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"


@dataclass(frozen=True)
class Scene:
    root: str
    manifest: SceneManifest
    tpose: TPoseBody
    obs: ObservationSet

    def path(self, relative: str) -> str:
        return os.path.join(self.root, relative)

    def gt_state(self) -> ClothState:
        return ClothState.from_dict(load_json(self.path(self.manifest.gt_state)))

    def gt_surface(self) -> Mesh:
        return load_obj(self.path(self.manifest.gt_surface))


def manifest_path(path: str) -> str:
    """Accept either the manifest itself or the scene directory holding it."""
    return os.path.join(path, MANIFEST) if os.path.isdir(path) else path


def save_manifest(root: str, manifest: SceneManifest) -> str:
    path = os.path.join(root, MANIFEST)
    save_json(path, manifest.to_dict())
    return path


def load_scene(path: str) -> Scene:
    path = manifest_path(path)
    manifest = SceneManifest.from_dict(load_json(path))
    root = os.path.dirname(os.path.abspath(path))
    for rel in (manifest.segmentation, manifest.densepose, manifest.gt_state, manifest.gt_surface,
                manifest.registered, *manifest.gt_meshes.values()):
        require_file(os.path.join(root, rel))

    model = load_body_model(os.path.join(root, manifest.body_model))
    tpose = shape_body(model, manifest.beta)
    obs = ObservationSet(
        segmentation=ClothSegmentation(load_pgm(os.path.join(root, manifest.segmentation))),
        densepose=load_face_index_map(os.path.join(root, manifest.densepose)),
        camera=manifest.camera,
        gender=manifest.gender,
        existence=dict(manifest.existence),
        theta=manifest.theta,
        beta=manifest.beta,
    )
    logger.debug("scene %s loaded (%d body vertices)", root, len(tpose.vertices))
    return Scene(root=root, manifest=manifest, tpose=tpose, obs=obs)
