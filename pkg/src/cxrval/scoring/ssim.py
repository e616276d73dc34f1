"""Single- and multi-scale structural similarity, plus ROI cropping."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..core import Box, as_raster

DEFAULT_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


@dataclass(frozen=True)
class SsimConfig:
    window: int = 11
    window_sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 255.0
    scale_weights: tuple[float, ...] = DEFAULT_WEIGHTS

    def __post_init__(self) -> None:
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError(f"window must be a positive odd integer, got {self.window}")
        if self.window_sigma <= 0 or self.dynamic_range <= 0:
            raise ValueError("window_sigma and dynamic_range must be positive")
        w = tuple(float(x) for x in self.scale_weights)
        if not w or any(x <= 0 for x in w) or abs(sum(w) - 1.0) > 1e-3:
            raise ValueError("scale weights must be positive and sum to 1")
        # the customary five weights add up to 1.0001; store them exactly normalized
        total = sum(w)
        object.__setattr__(self, "scale_weights", tuple(x / total for x in w))

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2

    def kernel(self) -> np.ndarray:
        r = np.arange(self.window) - self.window // 2
        g = np.exp(-(r**2) / (2.0 * self.window_sigma**2))
        return g / g.sum()


DEFAULT_CONFIG = SsimConfig()


def _filter(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    # separable valid-mode Gaussian weighting
    x = sliding_window_view(x, g.size, axis=0) @ g
    return sliding_window_view(x, g.size, axis=1) @ g


def _pair(a: np.ndarray, b: np.ndarray, cfg: SsimConfig) -> tuple[np.ndarray, np.ndarray]:
    a = as_raster(a).astype(np.float64)
    b = as_raster(b).astype(np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if min(a.shape) < cfg.window:
        raise ValueError(f"image side {min(a.shape)} is smaller than the {cfg.window}-pixel window")
    return a, b


def _ssim_maps(a: np.ndarray, b: np.ndarray, cfg: SsimConfig) -> tuple[np.ndarray, np.ndarray]:
    """Luminance and contrast-structure maps."""
    g = cfg.kernel()
    mu_a, mu_b = _filter(a, g), _filter(b, g)
    var_a = _filter(a * a, g) - mu_a * mu_a
    var_b = _filter(b * b, g) - mu_b * mu_b
    cov = _filter(a * b, g) - mu_a * mu_b
    lum = (2 * mu_a * mu_b + cfg.c1) / (mu_a * mu_a + mu_b * mu_b + cfg.c1)
    cs = (2 * cov + cfg.c2) / (var_a + var_b + cfg.c2)
    return lum, cs


def ssim(a: np.ndarray, b: np.ndarray, cfg: SsimConfig = DEFAULT_CONFIG) -> float:
    """Mean Gaussian-windowed SSIM over the valid region."""
    a, b = _pair(a, b, cfg)
    lum, cs = _ssim_maps(a, b, cfg)
    return float(np.mean(lum * cs))


def feasible_scales(shape: Sequence[int], cfg: SsimConfig = DEFAULT_CONFIG) -> int:
    """Largest scale count S whose coarsest level still fits the window."""
    side = min(shape)
    if side < cfg.window:
        raise ValueError(f"image side {side} is smaller than the {cfg.window}-pixel window")
    s = 1
    while s < len(cfg.scale_weights) and side >= cfg.window * 2**s:
        s += 1
    return s


def downsample(x: np.ndarray) -> np.ndarray:
    """2x2 mean pooling; a trailing odd row or column is dropped."""
    h, w = x.shape[0] // 2 * 2, x.shape[1] // 2 * 2
    x = x[:h, :w]
    return 0.25 * (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2])


def ms_ssim(a: np.ndarray, b: np.ndarray, cfg: SsimConfig = DEFAULT_CONFIG, full: bool = False):
    """Multi-scale SSIM in [0, 1].

    Contrast-structure means from the finer scales and the full SSIM mean at
    the coarsest scale are clamped at zero and combined as a weighted
    geometric product. When the input is too small for every configured
    scale, the largest feasible count is used with weights renormalized.
    With ``full=True`` returns ``(value, scales_used)``.
    """
    a, b = _pair(a, b, cfg)
    n = feasible_scales(a.shape, cfg)
    w = np.asarray(cfg.scale_weights[:n])
    w = w / w.sum()
    value = 1.0
    for j in range(n):
        lum, cs = _ssim_maps(a, b, cfg)
        term = float(np.mean(lum * cs)) if j == n - 1 else float(np.mean(cs))
        value *= max(term, 0.0) ** w[j]
        if j < n - 1:
            a, b = downsample(a), downsample(b)
    value = min(value, 1.0)
    return (value, n) if full else value


def roi_window(box: Box, shape: Sequence[int], pad: float = 0.05, min_side: int = 11) -> tuple[int, int, int, int]:
    """Integer crop window ``(x0, y0, x1, y1)`` for a box.

    The box grows by ``pad`` of its size on every side, snaps outward to the
    pixel grid and is clamped to the image. Sides shorter than ``min_side``
    grow symmetrically, sliding back inside the frame when they hit an edge.
    """
    h, w = int(shape[0]), int(shape[1])
    if box.x_max <= 0 or box.y_max <= 0 or box.x_min >= w or box.y_min >= h:
        raise ValueError(f"box {box.coords()} lies outside the {w}x{h} image")
    if pad < 0:
        raise ValueError("pad must be non-negative")
    px, py = pad * box.width, pad * box.height
    x0 = max(0, math.floor(box.x_min - px))
    y0 = max(0, math.floor(box.y_min - py))
    x1 = min(w, math.ceil(box.x_max + px))
    y1 = min(h, math.ceil(box.y_max + py))
    x0, x1 = _grow(x0, x1, min_side, w)
    y0, y1 = _grow(y0, y1, min_side, h)
    return x0, y0, x1, y1


def _grow(lo: int, hi: int, need: int, limit: int) -> tuple[int, int]:
    if hi - lo >= need:
        return lo, hi
    if limit < need:
        raise ValueError(f"image side {limit} cannot hold a {need}-pixel crop")
    extra = need - (hi - lo)
    lo -= extra // 2
    hi += extra - extra // 2
    if lo < 0:
        lo, hi = 0, hi - lo
    if hi > limit:
        lo, hi = lo - (hi - limit), limit
    return lo, hi


def crop(image: np.ndarray, window: tuple[int, int, int, int]) -> np.ndarray:
    x0, y0, x1, y1 = window
    return as_raster(image)[y0:y1, x0:x1]


def extract_roi(image: np.ndarray, box: Box, pad: float = 0.05, min_side: int = 11) -> np.ndarray:
    """Padded, clamped crop of ``box`` at least ``min_side`` pixels on each side."""
    return crop(image, roi_window(box, np.shape(image), pad, min_side))
