from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from app import constants
from app.errors import ValidationError


# -----------------------------
# Cloth vocabulary
# -----------------------------

class ClothType(Enum):
    UPPER = "upper"
    COAT = "coat"
    PANTS = "pants"
    SKIRT = "skirt"
    SHOES = "shoes"

    @property
    def latent_dim(self) -> int:
        return constants.SHOES_LATENT_DIM if self is ClothType.SHOES else constants.LATENT_DIM

    @property
    def label(self) -> int:
        return _CLOTH_LABELS[self]


_CLOTH_LABELS = {
    ClothType.UPPER: 1,
    ClothType.COAT: 2,
    ClothType.PANTS: 3,
    ClothType.SKIRT: 4,
    ClothType.SHOES: 5,
}

LABEL_BACKGROUND = 255
LABEL_NON_CLOTH = 0
SEGMENTATION_LABELS = frozenset({LABEL_BACKGROUND, LABEL_NON_CLOTH, *(_CLOTH_LABELS.values())})

GENDERS = ("male", "female")


def _as_float_array(value, shape: Optional[Tuple[int, ...]] = None, name: str = "array") -> np.ndarray:
    arr = np.array(value, dtype=np.float64)
    if shape is not None and arr.shape != shape:
        raise ValidationError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


# -----------------------------
# Body parameters
# -----------------------------

@dataclass(frozen=True)
class ShapeParams:
    beta: np.ndarray

    def __post_init__(self) -> None:
        beta = _as_float_array(self.beta, (constants.SHAPE_DIM,), "beta")
        if np.any(np.abs(beta) > 5.0):
            raise ValidationError("shape coefficients must satisfy |beta_k| <= 5")
        object.__setattr__(self, "beta", beta)

    @classmethod
    def zeros(cls) -> "ShapeParams":
        return cls(np.zeros(constants.SHAPE_DIM))


@dataclass(frozen=True)
class PoseParams:
    theta: np.ndarray  # (24, 3) axis-angle

    def __post_init__(self) -> None:
        theta = np.array(self.theta, dtype=np.float64)
        if theta.shape == (constants.JOINT_COUNT * 3,):
            theta = theta.reshape(constants.JOINT_COUNT, 3)
        theta = _as_float_array(theta, (constants.JOINT_COUNT, 3), "theta")
        if np.any(np.linalg.norm(theta, axis=1) > np.pi + 1e-12):
            raise ValidationError("axis-angle rotations must have norm <= pi")
        object.__setattr__(self, "theta", theta)

    @classmethod
    def zeros(cls) -> "PoseParams":
        return cls(np.zeros((constants.JOINT_COUNT, 3)))

    def with_joint(self, joint: int, rotvec: Sequence[float]) -> "PoseParams":
        theta = np.array(self.theta)
        theta[joint] = rotvec
        return PoseParams(theta)


# -----------------------------
# Cloth state
# -----------------------------

@dataclass(frozen=True)
class ClothLatent:
    cloth_type: ClothType
    z: np.ndarray

    def __post_init__(self) -> None:
        z = _as_float_array(self.z, None, f"{self.cloth_type.value} latent")
        if z.shape != (self.cloth_type.latent_dim,):
            raise ValidationError(
                f"{self.cloth_type.value} latent must have length {self.cloth_type.latent_dim}, got {z.shape}"
            )
        object.__setattr__(self, "z", z)

    @classmethod
    def mean(cls, cloth_type: ClothType) -> "ClothLatent":
        return cls(cloth_type, np.zeros(cloth_type.latent_dim))


@dataclass(frozen=True)
class ClothState:
    existence: np.ndarray  # (5,) in ClothType order
    latents: Tuple[ClothLatent, ...]
    gender: np.ndarray  # (g_m, g_f)

    def __post_init__(self) -> None:
        existence = _as_float_array(self.existence, (constants.N_CLOTH,), "existence")
        if np.any(existence < 0.0) or np.any(existence > 1.0):
            raise ValidationError("existence scores must lie in [0, 1]")
        latents = tuple(self.latents)
        if tuple(l.cloth_type for l in latents) != tuple(ClothType):
            raise ValidationError("latents must hold one ClothLatent per cloth type, in ClothType order")
        gender = _as_float_array(self.gender, (2,), "gender")
        if np.any(gender < 0.0) or np.any(gender > 1.0) or abs(gender.sum() - 1.0) > 1e-9:
            raise ValidationError("gender must be a probability pair summing to 1")
        object.__setattr__(self, "existence", existence)
        object.__setattr__(self, "latents", latents)
        object.__setattr__(self, "gender", gender)

    @classmethod
    def mean(cls, existence: float = 0.5, gender: str = "male") -> "ClothState":
        g = np.array([1.0, 0.0]) if gender == "male" else np.array([0.0, 1.0])
        return cls(
            existence=np.full(constants.N_CLOTH, existence),
            latents=tuple(ClothLatent.mean(c) for c in ClothType),
            gender=g,
        )

    def latent(self, cloth: ClothType) -> ClothLatent:
        return self.latents[_index(cloth)]

    def score(self, cloth: ClothType) -> float:
        return float(self.existence[_index(cloth)])

    def gated(self) -> List[ClothType]:
        from app.clothfield.latent import existence_gate

        return [c for c in ClothType if existence_gate(self.score(c))]

    def with_cloth(self, cloth: ClothType, score: Optional[float] = None, z: Optional[np.ndarray] = None) -> "ClothState":
        """Swap one garment (score and/or latent) leaving the others untouched."""
        existence = np.array(self.existence)
        latents = list(self.latents)
        if score is not None:
            existence[_index(cloth)] = score
        if z is not None:
            latents[_index(cloth)] = ClothLatent(cloth, z)
        return replace(self, existence=existence, latents=tuple(latents))

    def to_dict(self) -> dict:
        return {
            "existence": {c.value: float(s) for c, s in zip(ClothType, self.existence)},
            "latents": {l.cloth_type.value: [float(v) for v in l.z] for l in self.latents},
            "gender": {"male": float(self.gender[0]), "female": float(self.gender[1])},
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "ClothState":
        try:
            existence = [float(obj["existence"][c.value]) for c in ClothType]
            latents = tuple(ClothLatent(c, obj["latents"][c.value]) for c in ClothType)
            gender = [float(obj["gender"]["male"]), float(obj["gender"]["female"])]
        except (KeyError, TypeError) as e:
            raise ValidationError(f"malformed cloth state: {e}") from e
        return cls(existence=np.array(existence), latents=latents, gender=np.array(gender))


def _index(cloth: ClothType) -> int:
    return list(ClothType).index(cloth)


# -----------------------------
# Geometry containers
# -----------------------------

@dataclass(frozen=True)
class Mesh:
    vertices: np.ndarray  # (N, 3) meters
    faces: np.ndarray  # (F, 3) int64
    attachment: Optional[np.ndarray] = None  # (N,) nearest body vertex

    def __post_init__(self) -> None:
        vertices = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.array(self.faces, dtype=np.int64).reshape(-1, 3)
        if np.any(np.isnan(vertices)):
            raise ValidationError("mesh vertices contain NaN")
        if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
            raise ValidationError("mesh face indices out of range")
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "faces", faces)
        if self.attachment is not None:
            attachment = np.array(self.attachment, dtype=np.int64).reshape(-1)
            if attachment.shape != (len(vertices),):
                raise ValidationError("attachment must have one entry per vertex")
            object.__setattr__(self, "attachment", attachment)

    @classmethod
    def empty(cls) -> "Mesh":
        return cls(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))

    @property
    def is_empty(self) -> bool:
        return len(self.faces) == 0

    @property
    def triangles(self) -> np.ndarray:
        return self.vertices[self.faces]

    def with_vertices(self, vertices: np.ndarray) -> "Mesh":
        return Mesh(vertices, self.faces, self.attachment)


def merge_meshes(meshes: Sequence[Mesh]) -> Mesh:
    """Concatenate meshes; face indices are shifted, attachments dropped."""
    verts, faces, offset = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        faces.append(m.faces + offset)
        offset += len(m.vertices)
    if not verts:
        return Mesh.empty()
    return Mesh(np.concatenate(verts), np.concatenate(faces))


@dataclass(frozen=True)
class ScalarGrid:
    origin: np.ndarray  # (3,)
    spacing: np.ndarray  # (3,) cell size per axis
    samples: np.ndarray  # (nx, ny, nz), index [i, j, k] <-> (x, y, z)

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 3 or min(samples.shape) < 2:
            raise ValidationError("scalar grid needs at least 2 samples per axis")
        if not np.all(np.isfinite(samples)):
            raise ValidationError("scalar grid samples must be finite")
        spacing = _as_float_array(self.spacing, (3,), "spacing")
        if np.any(spacing <= 0):
            raise ValidationError("grid spacing must be positive")
        object.__setattr__(self, "origin", _as_float_array(self.origin, (3,), "origin"))
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "samples", samples)

    @property
    def dims(self) -> Tuple[int, int, int]:
        return tuple(int(n) for n in self.samples.shape)

    def node(self, i: int, j: int, k: int) -> np.ndarray:
        return self.origin + self.spacing * np.array([i, j, k], dtype=np.float64)


@dataclass(frozen=True)
class Camera:
    """Orthographic camera looking down -z; y is up, image rows grow downward."""

    width: int
    height: int
    scale: float  # meters per pixel
    cx: float
    cy: float
    kind: str = "orthographic"

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0 or not self.scale > 0:
            raise ValidationError("camera dimensions and scale must be positive")
        if self.kind != "orthographic":
            raise ValidationError(f"unsupported camera kind: {self.kind}")

    @classmethod
    def centered(cls, width: int, height: int, scale: float, center: Sequence[float] = (0.0, 0.0)) -> "Camera":
        """Camera whose image center sees the world point (center_x, center_y)."""
        return cls(
            width=width,
            height=height,
            scale=scale,
            cx=width / 2.0 - center[0] / scale,
            cy=height / 2.0 + center[1] / scale,
        )

    def project(self, points: np.ndarray) -> np.ndarray:
        """(N, 3) world points -> (N, 3) continuous (u, v, depth); depth grows away from camera."""
        p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        u = p[:, 0] / self.scale + self.cx
        v = self.cy - p[:, 1] / self.scale
        return np.stack([u, v, -p[:, 2]], axis=1)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "width": self.width, "height": self.height,
                "scale": self.scale, "cx": self.cx, "cy": self.cy}

    @classmethod
    def from_dict(cls, obj: Mapping) -> "Camera":
        return cls(int(obj["width"]), int(obj["height"]), float(obj["scale"]),
                   float(obj["cx"]), float(obj["cy"]), obj.get("kind", "orthographic"))


@dataclass(frozen=True)
class FaceIndexMap:
    face: np.ndarray  # (H, W) int32, -1 = empty
    bary: np.ndarray  # (H, W, 3)
    depth: np.ndarray  # (H, W), +inf where empty

    @property
    def width(self) -> int:
        return int(self.face.shape[1])

    @property
    def height(self) -> int:
        return int(self.face.shape[0])

    @property
    def covered(self) -> np.ndarray:
        return self.face >= 0

    @classmethod
    def blank(cls, width: int, height: int) -> "FaceIndexMap":
        return cls(
            face=np.full((height, width), -1, dtype=np.int32),
            bary=np.zeros((height, width, 3)),
            depth=np.full((height, width), np.inf),
        )


# -----------------------------
# Observations and supervision
# -----------------------------

@dataclass(frozen=True)
class ClothSegmentation:
    labels: np.ndarray  # (H, W) uint8

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise ValidationError("segmentation must be a 2D label raster")
        bad = set(np.unique(labels).tolist()) - SEGMENTATION_LABELS
        if bad:
            raise ValidationError(f"segmentation contains unknown labels {sorted(bad)}")
        object.__setattr__(self, "labels", labels.astype(np.uint8))

    @property
    def width(self) -> int:
        return int(self.labels.shape[1])

    @property
    def height(self) -> int:
        return int(self.labels.shape[0])

    def contains(self, cloth: ClothType) -> bool:
        return bool(np.any(self.labels == cloth.label))


@dataclass(frozen=True)
class ObservationSet:
    segmentation: ClothSegmentation
    densepose: FaceIndexMap
    camera: Camera
    gender: str
    existence: Dict[ClothType, Optional[bool]] = field(default_factory=dict)
    theta: PoseParams = field(default_factory=PoseParams.zeros)
    beta: ShapeParams = field(default_factory=ShapeParams.zeros)

    def __post_init__(self) -> None:
        seg, dp = self.segmentation, self.densepose
        if (seg.width, seg.height) != (dp.width, dp.height):
            raise ValidationError("segmentation and densepose dimensions differ")
        if (seg.width, seg.height) != (self.camera.width, self.camera.height):
            raise ValidationError("camera resolution does not match the observation rasters")
        if self.gender not in GENDERS:
            raise ValidationError(f"gender must be one of {GENDERS}")


@dataclass(frozen=True)
class MappedClothPoint:
    position: np.ndarray
    label: int
    pixel: Tuple[int, int]  # (x, y)


@dataclass(frozen=True)
class MappedClothPoints:
    """Columnar batch of cloth points lifted onto the T-pose surface."""

    positions: np.ndarray  # (K, 3)
    labels: np.ndarray  # (K,)
    pixels: np.ndarray  # (K, 2) (x, y)
    faces: np.ndarray  # (K,)
    barycentrics: np.ndarray  # (K, 3)

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self) -> Iterator[MappedClothPoint]:
        for pos, lab, pix in zip(self.positions, self.labels, self.pixels):
            yield MappedClothPoint(pos, int(lab), (int(pix[0]), int(pix[1])))

    @classmethod
    def empty(cls) -> "MappedClothPoints":
        return cls(np.zeros((0, 3)), np.zeros(0, dtype=np.int64), np.zeros((0, 2), dtype=np.int64),
                   np.zeros(0, dtype=np.int64), np.zeros((0, 3)))


@dataclass(frozen=True)
class QueryBox:
    cloth_type: ClothType
    corners: np.ndarray  # [x_min, y_min, z_min, x_max, y_max, z_max]
    side: Optional[str] = None

    def __post_init__(self) -> None:
        corners = _as_float_array(self.corners, (6,), "corners")
        if np.any(corners[:3] > corners[3:]):
            raise ValidationError(f"box corners must satisfy min <= max: {corners.tolist()}")
        object.__setattr__(self, "corners", corners)

    @property
    def lo(self) -> np.ndarray:
        return self.corners[:3]

    @property
    def hi(self) -> np.ndarray:
        return self.corners[3:]

    def inflated(self, margin: float) -> "QueryBox":
        return QueryBox(self.cloth_type, np.concatenate([self.lo - margin, self.hi + margin]), self.side)


@dataclass(frozen=True)
class QuerySet:
    cloth_type: ClothType
    points: np.ndarray  # (M, 3)
    labels: np.ndarray  # (M,) label of the nearest mapped point

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def membership(self) -> np.ndarray:
        """S_i(x_j): 1 where the nearest mapped point carries this cloth's label."""
        return (self.labels == self.cloth_type.label).astype(np.float64)

    @classmethod
    def empty(cls, cloth: ClothType) -> "QuerySet":
        return cls(cloth, np.zeros((0, 3)), np.zeros(0, dtype=np.int64))


@dataclass(frozen=True)
class LossWeights:
    lambda_dp: float = constants.LAMBDA_DP
    lambda_reg: float = constants.LAMBDA_REG
    lambda_exist: float = constants.LAMBDA_EXIST
    lambda_gender: float = constants.LAMBDA_GENDER
    alpha: Mapping[str, float] = field(default_factory=lambda: dict(constants.REG_ALPHA))
    d_max: Mapping[str, float] = field(default_factory=lambda: dict(constants.D_MAX))
    tau: Mapping[str, float] = field(default_factory=lambda: dict(constants.TAU))

    def __post_init__(self) -> None:
        scalars = (self.lambda_dp, self.lambda_reg, self.lambda_exist, self.lambda_gender)
        tables = [*self.alpha.values(), *self.d_max.values(), *self.tau.values()]
        if any(not v > 0 for v in (*scalars, *tables)):
            raise ValidationError("loss weights must all be positive")
        for table in (self.alpha, self.d_max, self.tau):
            missing = {c.value for c in ClothType} - set(table)
            if missing:
                raise ValidationError(f"loss weight table missing cloth types {sorted(missing)}")

    def to_dict(self) -> dict:
        return {
            "lambda_dp": self.lambda_dp,
            "lambda_reg": self.lambda_reg,
            "lambda_exist": self.lambda_exist,
            "lambda_gender": self.lambda_gender,
            "alpha": dict(self.alpha),
            "d_max": dict(self.d_max),
            "tau": dict(self.tau),
        }


@dataclass(frozen=True)
class LossBreakdown:
    dp: float
    reg: float
    exist: float
    gender: float
    silhouette: float
    total: float
    weights: LossWeights

    def to_dict(self) -> dict:
        return {
            "dp": self.dp,
            "reg": self.reg,
            "exist": self.exist,
            "gender": self.gender,
            "silhouette": self.silhouette,
            "total": self.total,
            "weights": self.weights.to_dict(),
        }


# -----------------------------
# Evaluation
# -----------------------------

@dataclass(frozen=True)
class SimilarityTransform:
    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        if not self.scale > 0:
            raise ValidationError("similarity scale must be positive")
        rotation = _as_float_array(self.rotation, (3, 3), "rotation")
        if not np.allclose(rotation @ rotation.T, np.eye(3), atol=1e-8) or np.linalg.det(rotation) < 0:
            raise ValidationError("rotation must be orthonormal with det +1")
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", _as_float_array(self.translation, (3,), "translation"))

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls(1.0, np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.scale * np.asarray(points) @ self.rotation.T + self.translation

    def to_dict(self) -> dict:
        return {"scale": self.scale, "rotation": self.rotation.tolist(), "translation": self.translation.tolist()}


@dataclass
class MetricReport:
    cd_mm: float
    bcc: Dict[str, float]
    bcc_average: float
    pair_count: int
    transform: SimilarityTransform
    flagged: List[str] = field(default_factory=list)
    existence_accuracy: Optional[float] = None
    gender_correct: Optional[bool] = None

    def to_dict(self) -> dict:
        return {
            "cd_mm": self.cd_mm,
            "bcc": dict(self.bcc),
            "bcc_average": self.bcc_average,
            "pair_count": self.pair_count,
            "transform": self.transform.to_dict(),
            "flagged": list(self.flagged),
            "existence_accuracy": self.existence_accuracy,
            "gender_correct": self.gender_correct,
        }


# -----------------------------
# Scenes
# -----------------------------

@dataclass(frozen=True)
class SceneManifest:
    """Everything a synthetic scene consists of; paths are relative to the manifest file."""

    seed: int
    body_model: str
    segmentation: str
    densepose: str
    camera: Camera
    gender: str
    theta: PoseParams
    beta: ShapeParams
    existence: Dict[ClothType, Optional[bool]]
    gt_state: str
    gt_meshes: Dict[str, str]
    gt_surface: str
    registered: str

    def to_dict(self) -> dict:
        return {
            "format": "scene/1",
            "seed": self.seed,
            "body_model": self.body_model,
            "segmentation": self.segmentation,
            "densepose": self.densepose,
            "camera": self.camera.to_dict(),
            "gender": self.gender,
            "theta": self.theta.theta.tolist(),
            "beta": self.beta.beta.tolist(),
            "existence": {c.value: self.existence.get(c) for c in ClothType},
            "gt_state": self.gt_state,
            "gt_meshes": dict(self.gt_meshes),
            "gt_surface": self.gt_surface,
            "registered": self.registered,
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "SceneManifest":
        if obj.get("format") != "scene/1":
            raise ValidationError(f"unsupported scene format {obj.get('format')!r}")
        try:
            return cls(
                seed=int(obj["seed"]),
                body_model=obj["body_model"],
                segmentation=obj["segmentation"],
                densepose=obj["densepose"],
                camera=Camera.from_dict(obj["camera"]),
                gender=obj["gender"],
                theta=PoseParams(obj["theta"]),
                beta=ShapeParams(obj["beta"]),
                existence={ClothType(k): v for k, v in obj["existence"].items()},
                gt_state=obj["gt_state"],
                gt_meshes=dict(obj["gt_meshes"]),
                gt_surface=obj["gt_surface"],
                registered=obj["registered"],
            )
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, ValidationError):
                raise
            raise ValidationError(f"malformed scene manifest: {e}") from e
