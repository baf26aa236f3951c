import logging
import os
from threading import Event, Lock, Thread
from typing import Optional

from app.clothfield.backend import ProceduralBackend
from app.fitting.fitter import FitConfig, FitTrace, fit_clothes
from app.models import ClothState, LossWeights
from app.scene import Scene
from app.storage import ensure_dir, save_json, save_jsonl

logger = logging.getLogger(__name__)


class FitService:
    """Runs one fit on a worker thread so a signal handler can stop it between iterations."""

    def __init__(self, scene: Scene, config: FitConfig, weights: LossWeights,
                 init: Optional[ClothState] = None):
        self.scene = scene
        self.config = config
        self.weights = weights
        self.init = init
        self._lock = Lock()
        self._trace: Optional[FitTrace] = None
        self._error: Optional[BaseException] = None
        self._stop = Event()
        self._worker: Optional[Thread] = None

    def start(self) -> None:
        if self._worker and self._worker.is_alive():
            return
        self._stop.clear()
        self._worker = Thread(target=self._worker_loop, daemon=True)
        self._worker.start()

    def stop(self) -> None:
        self._stop.set()

    def join(self, poll_seconds: float = 0.5) -> FitTrace:
        """Wait for the fit; short polls keep the main thread responsive to signals."""
        while self._worker and self._worker.is_alive():
            self._worker.join(timeout=poll_seconds)
        with self._lock:
            if self._error is not None:
                raise self._error
            return self._trace

    def result(self) -> Optional[FitTrace]:
        with self._lock:
            return self._trace

    # internal
    def _worker_loop(self):
        try:
            backend = ProceduralBackend(self.scene.tpose)
            trace = fit_clothes(self.scene.obs, self.scene.tpose, backend, self.config, self.weights,
                                init=self.init, stop=self._stop)
            with self._lock:
                self._trace = trace
        except BaseException as e:
            with self._lock:
                self._error = e


def save_fit(out_dir: str, trace: FitTrace, config: FitConfig) -> str:
    """``state.json`` (final state), ``trace.jsonl`` (one record per iteration) and a ``fit.json`` summary."""
    ensure_dir(out_dir)
    save_jsonl(os.path.join(out_dir, "trace.jsonl"), trace.records)
    summary = trace.summary()
    summary["config"] = {k: v for k, v in config.to_dict().items() if k != "workers"}
    save_json(os.path.join(out_dir, "fit.json"), summary)
    path = os.path.join(out_dir, "state.json")
    save_json(path, trace.state.to_dict())
    logger.info("fit written to %s (%d iterations, converged=%s)", out_dir, trace.iterations, trace.converged)
    return path
