import os
import sys
from pathlib import Path

import numpy as np
import pytest

project_root = Path(__file__).resolve().parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from app.body.model import shape_body
from app.body.procedural import make_procedural_body
from app.body.skinning import pose_body
from app.clothfield.backend import ProceduralBackend
from app.models import (
    LABEL_BACKGROUND,
    LABEL_NON_CLOTH,
    Camera,
    ClothSegmentation,
    ClothState,
    ClothType,
    Mesh,
    ObservationSet,
    PoseParams,
)
from app.raster.rasterizer import rasterize

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


@pytest.fixture(scope="session")
def body_model():
    return make_procedural_body()


@pytest.fixture(scope="session")
def tpose(body_model):
    return shape_body(body_model)


@pytest.fixture(scope="session")
def backend(tpose):
    return ProceduralBackend(tpose)


@pytest.fixture
def camera():
    # 128 px at 1.5 cm frames the whole T-posed body
    return Camera.centered(128, 128, 0.015, (0.0, -0.13))


@pytest.fixture(scope="session")
def tpose_mesh(tpose):
    return pose_body(tpose, PoseParams.zeros())


def observation(tpose_mesh: Mesh, camera: Camera, label_rows=None, gender="male", existence=None) -> ObservationSet:
    """T-pose observation of the bare body; ``label_rows`` maps a row range to a segmentation label."""
    dp = rasterize(tpose_mesh, camera)
    labels = np.full((camera.height, camera.width), LABEL_BACKGROUND, dtype=np.uint8)
    labels[dp.covered] = LABEL_NON_CLOTH
    for (start, stop), label in (label_rows or {}).items():
        band = np.zeros_like(dp.covered)
        band[start:stop] = True
        labels[band & dp.covered] = label
    return ObservationSet(ClothSegmentation(labels), dp, camera, gender, existence or {})


@pytest.fixture
def make_observation(tpose_mesh, camera):
    def build(label_rows=None, gender="male", existence=None):
        return observation(tpose_mesh, camera, label_rows, gender, existence)

    return build


def state_with(*clothes: ClothType, gender: str = "male", **latents) -> ClothState:
    """Mean state with ``clothes`` switched on; keyword latents override by cloth value."""
    state = ClothState.mean(existence=0.0, gender=gender)
    for cloth in clothes:
        state = state.with_cloth(cloth, score=1.0)
    for name, z in latents.items():
        state = state.with_cloth(ClothType(name), z=np.asarray(z, dtype=np.float64))
    return state


class DistanceStub:
    """Backend answering with the distance to a fixed point, for every garment."""

    kind = "stub"

    def __init__(self, body, center, offset=0.0):
        self.body = body
        self.center = np.asarray(center, dtype=np.float64)
        self.offset = offset

    def evaluate(self, points, cloth, latent, side=None, workers=1):
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        return np.abs(np.linalg.norm(points - self.center, axis=1) - self.offset)
