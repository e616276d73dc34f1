"""ROI feature histograms and the chi-square divergence between them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import as_raster

INTENSITY_BINS = 64
ORIENTATION_BINS = 16


@dataclass(frozen=True)
class FeatureHistogram:
    bins: np.ndarray
    scheme_id: str

    def __post_init__(self) -> None:
        b = np.asarray(self.bins, dtype=np.float64).ravel().copy()
        if b.size == 0 or np.any(b < 0) or not np.all(np.isfinite(b)):
            raise ValueError("histogram bins must be finite and non-negative")
        if abs(b.sum() - 1.0) > 1e-9:
            raise ValueError(f"histogram must sum to 1, got {b.sum():.12f}")
        b.setflags(write=False)
        object.__setattr__(self, "bins", b)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureHistogram):
            return NotImplemented
        return self.scheme_id == other.scheme_id and np.array_equal(self.bins, other.bins)

    __hash__ = None  # type: ignore[assignment]


def intensity_histogram(roi: np.ndarray, bins: int = INTENSITY_BINS, dynamic_range: float = 255.0) -> np.ndarray:
    x = as_raster(roi).astype(np.float64).ravel()
    edges = np.linspace(0.0, dynamic_range, bins + 1)
    idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, bins - 1)
    h = np.bincount(idx, minlength=bins).astype(np.float64)
    return h / h.sum()


def orientation_histogram(roi: np.ndarray, bins: int = ORIENTATION_BINS) -> np.ndarray:
    """Magnitude-weighted gradient directions over [0, 2pi).

    Gradients are central differences on the interior pixels. A crop with no
    gradient anywhere gets the uniform histogram.
    """
    x = as_raster(roi).astype(np.float64)
    if x.shape[0] < 3 or x.shape[1] < 3:
        return np.full(bins, 1.0 / bins)
    gx = 0.5 * (x[1:-1, 2:] - x[1:-1, :-2])
    gy = 0.5 * (x[2:, 1:-1] - x[:-2, 1:-1])
    mag = np.hypot(gx, gy).ravel()
    total = mag.sum()
    if total <= 0:
        return np.full(bins, 1.0 / bins)
    theta = np.mod(np.arctan2(gy, gx).ravel(), 2 * np.pi)
    idx = np.minimum((theta / (2 * np.pi) * bins).astype(np.int64), bins - 1)
    h = np.bincount(idx, weights=mag, minlength=bins)
    return h / h.sum()


def default_features(roi: np.ndarray, dynamic_range: float = 255.0) -> FeatureHistogram:
    """64 intensity bins followed by 16 orientation bins, each half the mass."""
    h = np.concatenate([0.5 * intensity_histogram(roi, dynamic_range=dynamic_range),
                        0.5 * orientation_histogram(roi)])
    return FeatureHistogram(h / h.sum(), f"intensity{INTENSITY_BINS}+gradient{ORIENTATION_BINS}")


def chi2(h1: FeatureHistogram, h2: FeatureHistogram) -> float:
    """Half the symmetric chi-square divergence; 0 for equal histograms, at most 1."""
    if h1.scheme_id != h2.scheme_id or h1.bins.size != h2.bins.size:
        raise ValueError(f"histogram scheme mismatch: {h1.scheme_id}/{h1.bins.size} vs {h2.scheme_id}/{h2.bins.size}")
    a, b = h1.bins, h2.bins
    # bins empty in both contribute nothing; skipping them avoids 0/0 without biasing the rest
    s = a + b
    keep = s > 0
    return float(0.5 * np.sum((a[keep] - b[keep]) ** 2 / s[keep]))
