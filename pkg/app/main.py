#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
clothfield: layered cloth fields on a parametric body
- synth        synthetic scene with known garments (segmentation, densepose, GT meshes)
- fit          fit garment latents, existence and gender to a scene's 2D supervision
- reconstruct  extract and pose garment meshes from a fitted state
- eval         Chamfer distance and body-cloth correspondence against a scene
"""

import argparse
import importlib.metadata
import logging
import os
import signal
import sys
from pathlib import Path
from typing import Optional

# Ensure the project root is on sys.path when running as a script (e.g. `python app/main.py`).
project_root = Path(__file__).resolve().parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from app.config_loader import load_config
from app.errors import ClothFieldError, MissingInputError
from app.fitting.fitter import Ablation, FitConfig
from app.models import ClothState, LossWeights
from app.scene import load_scene
from app.services.fit_service import FitService, save_fit
from app.services.reconstruction import evaluate_reconstruction, reconstruct
from app.services.synthesis import synthesize_scene, write_scene
from app.storage import ensure_dir, load_json, save_json
from app.ui.preview import save_preview

DEFAULT_CONFIG_PATH = os.path.join(os.path.dirname(__file__), "config.yaml")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_MISSING = 2

logger = logging.getLogger("app.main")

_service: Optional[FitService] = None


# -----------------------------
# Config -> domain values
# -----------------------------

def loss_weights(cfg: dict) -> LossWeights:
    loss = cfg["loss"]
    return LossWeights(
        lambda_dp=loss["lambda_dp"],
        lambda_reg=loss["lambda_reg"],
        lambda_exist=loss["lambda_exist"],
        lambda_gender=loss["lambda_gender"],
        alpha=loss["alpha"],
        d_max=loss["d_max"],
        tau=loss["tau"],
    )


def fit_config(cfg: dict, seed: int) -> FitConfig:
    return FitConfig.from_dict({
        **cfg["fit"],
        "seed": seed,
        "n_points": cfg["loss"]["n_points"],
        "query_resolution": cfg["loss"]["query_resolution"],
        "silhouette_iso": cfg["loss"]["silhouette_iso"],
        "abduction_deg": cfg["cloth"]["abduction_deg"],
        "workers": cfg["runtime"]["workers"],
    })


def _apply_overrides(cfg: dict, args: argparse.Namespace) -> dict:
    """Command-line flags win over the config file."""
    if args.resolution is not None:
        cfg["cloth"]["resolution"] = args.resolution
    if args.iso is not None:
        cfg["cloth"]["iso"] = args.iso
    if getattr(args, "ablate", None) is not None:
        cfg["fit"]["ablation"] = args.ablate
    if getattr(args, "iterations", None) is not None:
        cfg["fit"]["max_iterations"] = args.iterations
    if args.workers is not None:
        cfg["runtime"]["workers"] = args.workers or None
    if args.verbose:
        cfg["runtime"]["log_level"] = "DEBUG"
    return cfg


# -----------------------------
# Commands
# -----------------------------

def cmd_synth(args: argparse.Namespace, cfg: dict) -> int:
    seed = args.seed if args.seed is not None else 0
    out = args.out or cfg["paths"]["out_dir"]
    scene = synthesize_scene(cfg, seed)
    write_scene(scene, out, seed)
    if args.preview:
        save_preview(os.path.join(out, "preview.png"), scene.obs.segmentation)
    return EXIT_OK


def cmd_fit(args: argparse.Namespace, cfg: dict) -> int:
    global _service
    scene = load_scene(args.scene)
    seed = args.seed if args.seed is not None else scene.manifest.seed
    config = fit_config(cfg, seed)
    init = ClothState.from_dict(load_json(args.init)) if args.init else None
    out = args.out or os.path.join(scene.root, "fit")

    _service = FitService(scene, config, loss_weights(cfg), init)
    _service.start()
    trace = _service.join()
    _service = None
    if trace.interrupted:
        logger.warning("fit interrupted; writing the best state so far")
    save_fit(out, trace, config)
    return EXIT_OK


def cmd_reconstruct(args: argparse.Namespace, cfg: dict) -> int:
    scene = load_scene(args.scene)
    state_path = args.state or os.path.join(scene.root, "fit", "state.json")
    state = ClothState.from_dict(load_json(state_path))
    out = args.out or os.path.join(scene.root, "recon")
    reconstruct(scene, state, out, cfg)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, cfg: dict) -> int:
    scene = load_scene(args.scene)
    recon = args.recon or os.path.join(scene.root, "recon")
    report, pairs = evaluate_reconstruction(scene, recon, cfg)
    out = args.out or os.path.join(recon, "metrics.json")
    ensure_dir(os.path.dirname(os.path.abspath(out)))
    save_json(out, report.to_dict())
    if args.dump_pairs:
        with open(args.dump_pairs, "w", encoding="utf-8") as f:
            f.write(pairs.to_points_text())
    logger.info("metrics written to %s", out)
    return EXIT_OK


# -----------------------------
# Entry point
# -----------------------------

def _handle_signal(signum, frame):
    if _service is not None:
        logger.warning("signal %d: stopping the fit after the current iteration", signum)
        _service.stop()
    else:
        raise KeyboardInterrupt


def _app_version() -> str:
    try:
        return importlib.metadata.version("layered-cloth-fields")
    except importlib.metadata.PackageNotFoundError:
        return "unknown"


def _parse_args(argv=None) -> argparse.Namespace:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=DEFAULT_CONFIG_PATH, help="YAML config file")
    common.add_argument("--seed", type=int, help="random seed (default: 0, or the scene's seed)")
    common.add_argument("--out", help="output directory (eval: report file)")
    common.add_argument("--workers", type=int, help="worker threads, 0 = one per physical core")
    common.add_argument("--resolution", type=int, help="marching-cubes grid resolution per axis")
    common.add_argument("--iso", type=float, help="extraction iso-level in meters")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(prog="clothfield", description="Layered cloth fields on a parametric body")
    parser.add_argument("--version", action="version", version=f"%(prog)s {_app_version()}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic scene")
    p.add_argument("--preview", action="store_true", help="also write preview.png")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", parents=[common], help="fit a cloth state to a scene")
    p.add_argument("scene", help="scene directory or manifest.json")
    p.add_argument("--ablate", choices=[a.value for a in Ablation if a is not Ablation.FULL],
                   help="drop or swap a loss term")
    p.add_argument("--iterations", type=int, help="maximum optimizer iterations")
    p.add_argument("--init", help="start from this state JSON instead of the mean")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("reconstruct", parents=[common], help="export T-pose and posed meshes of a state")
    p.add_argument("scene", help="scene directory or manifest.json")
    p.add_argument("--state", help="state JSON (default: <scene>/fit/state.json)")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("eval", parents=[common], help="score a reconstruction directory")
    p.add_argument("scene", help="scene directory or manifest.json")
    p.add_argument("--recon", help="reconstruction directory (default: <scene>/recon)")
    p.add_argument("--dump-pairs", help="write the CD vertex pairs as an x y z point file")
    p.set_defaults(func=cmd_eval)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = _parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
    except ClothFieldError as e:
        print(f"clothfield: {e}", file=sys.stderr)
        return EXIT_INVALID

    logging.basicConfig(
        level=getattr(logging, cfg["runtime"]["log_level"], logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    previous = {s: signal.signal(s, _handle_signal) for s in (signal.SIGINT, signal.SIGTERM)}
    try:
        return args.func(args, cfg)
    except MissingInputError as e:
        print(f"clothfield: {e}", file=sys.stderr)
        return EXIT_MISSING
    except ClothFieldError as e:
        print(f"clothfield: {e}", file=sys.stderr)
        return EXIT_INVALID
    finally:
        for signum, handler in previous.items():
            signal.signal(signum, handler)


if __name__ == "__main__":
    sys.exit(main())
