import json
import os
from copy import deepcopy
from typing import Any, Dict

from app import constants
from app.errors import ConfigError


DEFAULT_CONFIG: Dict[str, Any] = {
    "body": {
        "gender_variant": "neutral",
        "beta": [0.0] * constants.SHAPE_DIM,
        "spec": {},
    },
    "camera": {
        "width": 256,
        "height": 256,
        "scale": 0.0075,
        "center": [0.0, -0.13],
    },
    "cloth": {
        "iso": constants.DEFAULT_ISO,
        "resolution": constants.DEFAULT_RESOLUTION,
        "abduction_deg": constants.DEFAULT_ABDUCTION_DEG,
    },
    "loss": {
        "lambda_dp": constants.LAMBDA_DP,
        "lambda_reg": constants.LAMBDA_REG,
        "lambda_exist": constants.LAMBDA_EXIST,
        "lambda_gender": constants.LAMBDA_GENDER,
        "alpha": dict(constants.REG_ALPHA),
        "d_max": dict(constants.D_MAX),
        "tau": dict(constants.TAU),
        "n_points": constants.N_SAMPLED_POINTS,
        "query_resolution": constants.QUERY_GRID_RESOLUTION,
        "silhouette_iso": constants.DEFAULT_ISO,
    },
    "fit": {
        "learning_rate": 0.05,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps": 1e-8,
        "max_iterations": 300,
        "fd_step": 1e-3,
        "tolerance": 1e-6,
        "patience": 10,
        "ablation": "full",
        "log_every": 25,
    },
    "synth": {
        "pose": "relaxed",
        "arm_drop_deg": 45.0,
        "gender": "random",
        "outfit": [],
        "shoes_probability": 0.5,
        "latent_scale": 0.8,
        "state": None,
    },
    "eval": {
        "bcc_radius": constants.BCC_RADIUS,
        "bcc_points": 2000,
    },
    "runtime": {
        "workers": 1,
        "log_level": "INFO",
    },
    "paths": {
        "out_dir": "./out",
    },
}


def _merge_section(dst: Dict[str, Any], key: str, overrides: Dict[str, Any]) -> None:
    base = deepcopy(DEFAULT_CONFIG.get(key, {}))
    if overrides:
        if not isinstance(overrides, dict):
            raise ConfigError(f"config section {key!r} must be a mapping")
        base.update(overrides)
    dst[key] = base


def _normalize_body(cfg: Dict[str, Any]) -> None:
    body = cfg.get("body", {})
    # legacy key
    if "gender" in body and "gender_variant" not in body:
        body["gender_variant"] = body.pop("gender")
    beta = list(body.get("beta") or [])
    if len(beta) > constants.SHAPE_DIM:
        raise ConfigError(f"body.beta has more than {constants.SHAPE_DIM} entries")
    body["beta"] = [float(b) for b in beta] + [0.0] * (constants.SHAPE_DIM - len(beta))
    body["spec"] = dict(body.get("spec") or {})
    cfg["body"] = body


def _normalize_camera(cfg: Dict[str, Any]) -> None:
    cam = cfg.get("camera", {})
    # w/h aliases
    cam["width"] = int(cam.get("w") or cam["width"])
    cam["height"] = int(cam.get("h") or cam["height"])
    cam.pop("w", None)
    cam.pop("h", None)
    cam["scale"] = float(cam["scale"])
    center = cam.get("center")
    if not isinstance(center, (list, tuple)) or len(center) != 2:
        raise ConfigError("camera.center must be a pair [x, y] in meters")
    cam["center"] = [float(center[0]), float(center[1])]
    cfg["camera"] = cam


def _normalize_cloth(cfg: Dict[str, Any]) -> None:
    cloth = cfg.get("cloth", {})
    cloth["iso"] = float(cloth["iso"])
    if not cloth["iso"] > 0:
        raise ConfigError("cloth.iso must be positive")
    cloth["resolution"] = int(cloth["resolution"])
    cloth["abduction_deg"] = float(cloth["abduction_deg"])
    cfg["cloth"] = cloth


def _normalize_loss(cfg: Dict[str, Any]) -> None:
    loss = cfg.get("loss", {})
    # per-cloth tables may be given partially
    for table in ("alpha", "d_max", "tau"):
        merged = dict(DEFAULT_CONFIG["loss"][table])
        merged.update(loss.get(table) or {})
        loss[table] = {k: float(v) for k, v in merged.items()}
    loss["n_points"] = int(loss["n_points"])
    loss["query_resolution"] = int(loss["query_resolution"])
    cfg["loss"] = loss


def _normalize_fit(cfg: Dict[str, Any]) -> None:
    fit = cfg.get("fit", {})
    # short alias
    if "iterations" in fit:
        fit["max_iterations"] = fit.pop("iterations")
    fit["max_iterations"] = int(fit["max_iterations"])
    fit["ablation"] = str(fit["ablation"])
    cfg["fit"] = fit


def _normalize_runtime(cfg: Dict[str, Any]) -> None:
    rt = cfg.get("runtime", {})
    workers = rt.get("workers")
    # "auto" or 0 -> physical core count at run time
    rt["workers"] = None if workers in (None, "auto", 0) else int(workers)
    rt["log_level"] = str(rt.get("log_level", "INFO")).upper()
    cfg["runtime"] = rt


def _normalize_paths(cfg: Dict[str, Any]) -> None:
    paths = cfg.get("paths", {})
    if "out_dir" in paths:
        paths["out_dir"] = os.path.expanduser(paths["out_dir"])
    cfg["paths"] = paths


def load_config(path: str) -> dict:
    raw: Dict[str, Any] = {}
    if path and os.path.exists(path):
        try:
            import yaml
            with open(path, "r", encoding="utf-8") as f:
                raw = yaml.safe_load(f) or {}
        except ImportError:
            # fallback: minimal JSON-compatible YAML
            with open(path, "r", encoding="utf-8") as f:
                raw = json.loads(f.read())
        except Exception as e:
            raise ConfigError(f"{path}: cannot parse config ({e})") from e
    elif path:
        raise ConfigError(f"config file not found: {path}")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")

    cfg: Dict[str, Any] = {}
    # start with user-provided sections and fill defaults later
    for section in DEFAULT_CONFIG:
        _merge_section(cfg, section, raw.get(section, {}))

    # normalize aliases and types
    try:
        _normalize_body(cfg)
        _normalize_camera(cfg)
        _normalize_cloth(cfg)
        _normalize_loss(cfg)
        _normalize_fit(cfg)
        _normalize_runtime(cfg)
        _normalize_paths(cfg)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"invalid config value: {e}") from e

    return cfg
