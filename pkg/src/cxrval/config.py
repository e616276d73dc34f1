"""Run configuration from a TOML file plus command-line overrides.

Example::

    manifest = "studies.jsonl"
    output_dir = "out"
    seed = 7
    workers = 2
    default_backend = "phantom"

    [ssim]
    window = 11

    [adapters.grounder]
    backend = "external"
    command = "python3 serve_grounder.py"
    timeout = 60
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

from .adapters.base import ROLES, AdapterRegistry, ConfigError
from .scoring.dual import ScoreConfig
from .scoring.ssim import SsimConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

BACKENDS = ("phantom", "external", "none")
_SSIM_KEYS = {"window", "window_sigma", "k1", "k2", "dynamic_range", "scale_weights"}
_TOP_KEYS = {"manifest", "output_dir", "seed", "workers", "tau_det", "pad", "best_of_n", "delta",
             "default_backend", "ssim", "adapters"}


@dataclass(frozen=True)
class AdapterSpec:
    backend: str = "phantom"
    command: Optional[str] = None
    work_dir: Optional[str] = None
    timeout: float = 120.0
    thread_safe: bool = False
    backend_id: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    manifest: Optional[str] = None
    output_dir: str = "out"
    seed: int = 0
    workers: int = 1
    tau_det: float = 0.25
    pad: float = 0.05
    best_of_n: int = 1
    delta: float = 0.0
    default_backend: str = "phantom"
    ssim: dict[str, Any] = field(default_factory=dict)
    adapters: dict[str, AdapterSpec] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau_det <= 1.0:
            raise ConfigError(f"tau_det must lie in [0, 1], got {self.tau_det}")
        if int(self.workers) < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.best_of_n < 1:
            raise ConfigError("best_of_n must be at least 1")
        if self.pad < 0:
            raise ConfigError("pad must be non-negative")
        if self.default_backend not in BACKENDS:
            raise ConfigError(f"default_backend must be one of {BACKENDS}, got {self.default_backend!r}")
        unknown = set(self.ssim) - _SSIM_KEYS
        if unknown:
            raise ConfigError(f"unknown ssim settings: {', '.join(sorted(unknown))}")
        for role, spec in self.adapters.items():
            if role not in ROLES:
                raise ConfigError(f"unknown adapter role {role!r}")
            if spec.backend not in BACKENDS:
                raise ConfigError(f"{role}: unknown backend {spec.backend!r}")
            if spec.backend == "external" and not spec.command:
                raise ConfigError(f"{role}: external backend needs a command")

    def ssim_config(self) -> SsimConfig:
        try:
            return SsimConfig(**{k: (tuple(v) if k == "scale_weights" else v) for k, v in self.ssim.items()})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad ssim settings: {exc}") from None

    def score_config(self) -> ScoreConfig:
        return ScoreConfig(ssim=self.ssim_config(), pad=self.pad, best_of_n=self.best_of_n, seed=self.seed,
                           tau_det=self.tau_det)

    def with_overrides(self, **kw: Any) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        ssim = dict(self.ssim)
        for k in list(kw):
            if k.startswith("ssim_"):
                ssim[k[len("ssim_"):]] = kw.pop(k)
        return replace(self, ssim=ssim, **kw)

    def build_registry(self) -> AdapterRegistry:
        """Bind every role; unbound roles fall back to ``default_backend``."""
        from .adapters.external import ExternalAdapter
        from .adapters.phantom import phantom_registry

        phantoms = phantom_registry()
        reg = AdapterRegistry()
        for role in ROLES:
            spec = self.adapters.get(role, AdapterSpec(backend=self.default_backend))
            if spec.backend == "none":
                continue
            if spec.backend == "phantom":
                b = phantoms.binding(role)
                reg.bind(role, b.adapter, spec.backend_id or b.backend_id)
            else:
                work = spec.work_dir or str(Path(self.output_dir) / "work" / role)
                adapter = ExternalAdapter(role, spec.command, work, spec.timeout, spec.backend_id,  # type: ignore[arg-type]
                                          spec.thread_safe)
                reg.bind(role, adapter)
        reg.require_all()
        return reg


def config_from_dict(d: dict[str, Any]) -> RunConfig:
    unknown = set(d) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    adapters = {}
    for role, spec in (d.get("adapters") or {}).items():
        if not isinstance(spec, dict):
            raise ConfigError(f"adapters.{role} must be a table")
        try:
            adapters[role] = AdapterSpec(**spec)
        except TypeError as exc:
            raise ConfigError(f"adapters.{role}: {exc}") from None
    kw = {k: v for k, v in d.items() if k != "adapters"}
    return RunConfig(adapters=adapters, **kw)


def load_config(path: Optional[str | Path]) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data)
