"""Contracts for the six pluggable model roles and the registry that binds them."""

from __future__ import annotations

import abc
import threading
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from ..core import Box, GenerationResult, LungMask, PathologyLabel, RegionDetection, as_raster
from .text import Extraction

ROLES = ("grounder", "generator", "segmenter", "anatomy_detector", "pathology_classifier", "text_extractor")


class AdapterError(RuntimeError):
    """A backend failed; carries the backend id so records can name it."""

    def __init__(self, backend_id: str, message: str):
        super().__init__(f"[{backend_id}] {message}")
        self.backend_id = backend_id
        self.message = message


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GroundingRequest:
    image: np.ndarray = field(repr=False)
    prompt: str

    def __post_init__(self) -> None:
        as_raster(self.image)
        if not self.prompt or not self.prompt.strip():
            raise ValueError("grounding prompt must be non-empty")


@dataclass(frozen=True)
class GroundingResponse:
    boxes: tuple[Box, ...] = ()

    def __post_init__(self) -> None:
        for b in self.boxes:
            if b.probability is None:
                raise ValueError("grounded boxes must carry a probability")


class Adapter(abc.ABC):
    backend_id: str = "unnamed"
    thread_safe: bool = False


class Grounder(Adapter):
    @abc.abstractmethod
    def localize(self, req: GroundingRequest) -> GroundingResponse: ...


class Generator(Adapter):
    @abc.abstractmethod
    def generate(self, prompt: str, mask: LungMask, seed: int) -> GenerationResult: ...


class Segmenter(Adapter):
    @abc.abstractmethod
    def segment(self, image: np.ndarray) -> LungMask: ...


class AnatomyDetector(Adapter):
    @abc.abstractmethod
    def detect(self, image: np.ndarray) -> list[RegionDetection]: ...


class PathologyClassifier(Adapter):
    @abc.abstractmethod
    def classify(self, image: np.ndarray) -> dict[PathologyLabel, float]: ...


class TextExtractor(Adapter):
    @abc.abstractmethod
    def extract(self, report: str) -> Extraction: ...


@dataclass
class Binding:
    adapter: Any
    backend_id: str
    thread_safe: bool
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


class AdapterRegistry:
    """Named bindings for the six roles.

    Calls into a backend that is not declared thread-safe are serialized
    through a per-binding lock. Backend exceptions are re-raised as
    :class:`AdapterError` carrying the backend id.
    """

    def __init__(self, **adapters: Any):
        self._bindings: dict[str, Binding] = {}
        for role, adapter in adapters.items():
            self.bind(role, adapter)

    def bind(self, role: str, adapter: Any, backend_id: Optional[str] = None,
             thread_safe: Optional[bool] = None) -> "AdapterRegistry":
        if role not in ROLES:
            raise ConfigError(f"unknown adapter role {role!r}")
        self._bindings[role] = Binding(
            adapter,
            backend_id or getattr(adapter, "backend_id", type(adapter).__name__),
            bool(getattr(adapter, "thread_safe", False) if thread_safe is None else thread_safe),
        )
        return self

    def require_all(self) -> None:
        missing = [r for r in ROLES if r not in self._bindings]
        if missing:
            raise ConfigError(f"unbound adapter roles: {', '.join(missing)}")

    def binding(self, role: str) -> Binding:
        try:
            return self._bindings[role]
        except KeyError:
            raise ConfigError(f"adapter role {role!r} is not bound") from None

    def backend_ids(self) -> dict[str, str]:
        return {r: b.backend_id for r, b in sorted(self._bindings.items())}

    def _call(self, role: str, method: str, *args: Any) -> Any:
        b = self.binding(role)
        fn = getattr(b.adapter, method)
        try:
            if b.thread_safe:
                return fn(*args)
            with b.lock:
                return fn(*args)
        except AdapterError:
            raise
        except Exception as exc:  # noqa: BLE001 - any backend failure is isolated per study
            raise AdapterError(b.backend_id, f"{type(exc).__name__}: {exc}") from exc

    def localize(self, image: np.ndarray, prompt: str) -> GroundingResponse:
        return self._call("grounder", "localize", GroundingRequest(image, prompt))

    def generate(self, prompt: str, mask: LungMask, seed: int) -> GenerationResult:
        return self._call("generator", "generate", prompt, mask, seed)

    def segment(self, image: np.ndarray) -> LungMask:
        return self._call("segmenter", "segment", image)

    def detect(self, image: np.ndarray) -> list[RegionDetection]:
        return self._call("anatomy_detector", "detect", image)

    def classify(self, image: np.ndarray) -> dict[PathologyLabel, float]:
        return self._call("pathology_classifier", "classify", image)

    def extract(self, report: str) -> Extraction:
        return self._call("text_extractor", "extract", report)
