"""Out-of-process adapters driven by a request/response file exchange.

For every call a fresh directory is created under ``work_dir`` holding
``request.json`` and, where the role needs them, ``image.png`` and
``mask.png``. The backend command runs with that directory as its last
argument and must leave ``response.json`` (plus ``output.png`` or
``mask_out.png`` for the generator and segmenter) in the same directory.
A response containing ``{"error": "..."}`` is reported as a backend
failure.

Running ``python -m cxrval.adapters.external <request_dir>`` answers a
request with the phantom backends, which is handy as a reference server.
"""

from __future__ import annotations

import itertools
import json
import shlex
import subprocess
import sys
import tempfile
import threading
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from ..core import Box, GenerationResult, LungMask, PathologyLabel, RegionDetection
from ..io import load_image, save_image
from .base import AdapterError, GroundingRequest, GroundingResponse, ROLES
from .text import Extraction

DEFAULT_TIMEOUT = 120.0

_counter = itertools.count()
_counter_lock = threading.Lock()


def _mask_png(mask: LungMask, path: Path) -> None:
    save_image(mask.pixels.astype(np.uint8) * 255, path)


def _read_mask(path: Path) -> np.ndarray:
    return np.asarray(load_image(path)) > 127


class ExternalAdapter:
    """Bind one role to an external command.

    The same class serves every role; only the method matching ``role`` is
    meant to be called.
    """

    def __init__(self, role: str, command: str | Sequence[str], work_dir: Optional[str | Path] = None,
                 timeout: float = DEFAULT_TIMEOUT, backend_id: Optional[str] = None, thread_safe: bool = False):
        if role not in ROLES:
            raise ValueError(f"unknown role {role!r}")
        self.role = role
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.work_dir = Path(work_dir) if work_dir else Path(tempfile.mkdtemp(prefix="cxrval-"))
        self.timeout = float(timeout)
        self.backend_id = backend_id or f"external:{Path(self.command[0]).name}"
        self.thread_safe = thread_safe

    def _exchange(self, method: str, params: dict[str, Any], image: Optional[np.ndarray] = None,
                  mask: Optional[LungMask] = None) -> tuple[dict[str, Any], Path]:
        with _counter_lock:
            n = next(_counter)
        self.work_dir.mkdir(parents=True, exist_ok=True)
        req_dir = Path(tempfile.mkdtemp(prefix=f"{self.role}-{n:06d}-", dir=self.work_dir))
        request: dict[str, Any] = {"role": self.role, "method": method, "params": params}
        if image is not None:
            save_image(image, req_dir / "image.png")
            request["image"] = "image.png"
        if mask is not None:
            _mask_png(mask, req_dir / "mask.png")
            request["mask"] = "mask.png"
        (req_dir / "request.json").write_text(json.dumps(request, sort_keys=True), encoding="utf-8")
        try:
            proc = subprocess.run(self.command + [str(req_dir)], capture_output=True, text=True,
                                  timeout=self.timeout)
        except subprocess.TimeoutExpired:
            raise AdapterError(self.backend_id, f"timed out after {self.timeout:g} s") from None
        except OSError as exc:
            raise AdapterError(self.backend_id, f"could not start backend: {exc}") from None
        if proc.returncode != 0:
            tail = proc.stderr.strip().splitlines()[-1:] or ["no stderr"]
            raise AdapterError(self.backend_id, f"exit status {proc.returncode}: {tail[0]}")
        resp_path = req_dir / "response.json"
        if not resp_path.exists():
            raise AdapterError(self.backend_id, "backend wrote no response.json")
        response = json.loads(resp_path.read_text(encoding="utf-8"))
        if response.get("error"):
            raise AdapterError(self.backend_id, str(response["error"]))
        return response, req_dir

    def localize(self, req: GroundingRequest) -> GroundingResponse:
        resp, _ = self._exchange("localize", {"prompt": req.prompt}, image=req.image)
        return GroundingResponse(tuple(Box.from_dict(b) for b in resp.get("boxes", [])))

    def generate(self, prompt: str, mask: LungMask, seed: int) -> GenerationResult:
        resp, d = self._exchange("generate", {"prompt": prompt, "seed": int(seed)}, mask=mask)
        image = load_image(d / resp.get("image", "output.png"))
        return GenerationResult(image, prompt, mask, self.backend_id, seed)

    def segment(self, image: np.ndarray) -> LungMask:
        resp, d = self._exchange("segment", {}, image=image)
        return LungMask(_read_mask(d / resp.get("mask", "mask_out.png")), warning=resp.get("warning"))

    def detect(self, image: np.ndarray) -> list[RegionDetection]:
        resp, _ = self._exchange("detect", {}, image=image)
        return [RegionDetection.from_dict(r) for r in resp.get("regions", [])]

    def classify(self, image: np.ndarray) -> dict[PathologyLabel, float]:
        resp, _ = self._exchange("classify", {}, image=image)
        return {PathologyLabel.parse(k): float(v) for k, v in resp.get("probabilities", {}).items()}

    def extract(self, report: str) -> Extraction:
        resp, _ = self._exchange("extract", {"report": report})
        return Extraction(
            frozenset(PathologyLabel.parse(p) for p in resp.get("pathologies", [])),
            {PathologyLabel.parse(k): v for k, v in resp.get("laterality", {}).items()},
            list(resp.get("entities", [])),
        )


def answer_request(req_dir: str | Path, registry: Any) -> None:
    """Serve one request directory with the adapters bound in ``registry``."""
    d = Path(req_dir)
    request = json.loads((d / "request.json").read_text(encoding="utf-8"))
    method, params = request["method"], request.get("params", {})
    image = load_image(d / request["image"]) if "image" in request else None
    response: dict[str, Any]
    try:
        if method == "localize":
            boxes = registry.localize(image, params["prompt"]).boxes
            response = {"boxes": [b.to_dict() for b in boxes]}
        elif method == "generate":
            mask = LungMask(_read_mask(d / request["mask"]))
            result = registry.generate(params["prompt"], mask, int(params["seed"]))
            save_image(result.image, d / "output.png")
            response = {"image": "output.png"}
        elif method == "segment":
            mask = registry.segment(image)
            _mask_png(mask, d / "mask_out.png")
            response = {"mask": "mask_out.png", "warning": mask.warning}
        elif method == "detect":
            response = {"regions": [r.to_dict() for r in registry.detect(image)]}
        elif method == "classify":
            response = {"probabilities": {k.value: v for k, v in registry.classify(image).items()}}
        elif method == "extract":
            ex = registry.extract(params["report"])
            response = {
                "pathologies": sorted(p.value for p in ex.pathologies),
                "laterality": {k.value: v for k, v in ex.laterality.items()},
                "entities": ex.entities,
            }
        else:
            response = {"error": f"unknown method {method!r}"}
    except Exception as exc:  # noqa: BLE001 - reported through the response file
        response = {"error": f"{type(exc).__name__}: {exc}"}
    (d / "response.json").write_text(json.dumps(response, sort_keys=True), encoding="utf-8")


def main(argv: Optional[Sequence[str]] = None) -> int:
    from .phantom import phantom_registry

    args = list(sys.argv[1:] if argv is None else argv)
    if len(args) != 1:
        print("usage: python -m cxrval.adapters.external REQUEST_DIR", file=sys.stderr)
        return 2
    answer_request(args[0], phantom_registry())
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
