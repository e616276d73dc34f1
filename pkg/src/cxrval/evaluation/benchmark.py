"""Whole-image generation quality: MS-SSIM, mask Dice and Fréchet distance."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ..core import LungMask
from ..geometry import dice
from ..scoring.features import default_features
from ..scoring.frechet import frechet_distance
from ..scoring.ssim import DEFAULT_CONFIG, SsimConfig, ms_ssim


@dataclass(frozen=True)
class GenerationPair:
    original: np.ndarray
    generated: np.ndarray
    orig_mask: LungMask | np.ndarray
    gen_mask: LungMask | np.ndarray


def histogram_features(image: np.ndarray) -> np.ndarray:
    return default_features(image).bins


def generation_benchmark(pairs: Sequence[GenerationPair | tuple], features: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                         cfg: SsimConfig = DEFAULT_CONFIG) -> dict[str, Optional[float]]:
    """Mean full-image MS-SSIM, mean mask Dice and the Fréchet distance
    between pooled original and generated features.

    The Fréchet term needs two pairs or more and is ``None`` otherwise.
    """
    if not pairs:
        raise ValueError("generation benchmark needs at least one pair")
    feats = features or histogram_features
    ssims, dices, fa, fb = [], [], [], []
    for p in pairs:
        o, g, om, gm = (p.original, p.generated, p.orig_mask, p.gen_mask) if isinstance(p, GenerationPair) else p
        ssims.append(ms_ssim(o, g, cfg))
        dices.append(dice(om, gm))
        fa.append(np.ravel(feats(o)))
        fb.append(np.ravel(feats(g)))
    fd = frechet_distance(np.stack(fa), np.stack(fb)) if len(pairs) >= 2 else None
    return {"ms_ssim_mean": float(np.mean(ssims)), "dice_mean": float(np.mean(dices)), "frechet": fd, "n": len(pairs)}
