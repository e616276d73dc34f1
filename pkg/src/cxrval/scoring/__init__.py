"""Pixel- and feature-level similarity of ROI pairs, and the dual score."""

from .dual import Scenario, ScoreConfig, categorize_scenario, dual_score, is_valid
from .features import FeatureHistogram, chi2, default_features
from .frechet import frechet_distance
from .ssim import SsimConfig, extract_roi, ms_ssim, roi_window, ssim

__all__ = [
    "FeatureHistogram", "Scenario", "ScoreConfig", "SsimConfig", "categorize_scenario", "chi2",
    "default_features", "dual_score", "extract_roi", "frechet_distance", "is_valid", "ms_ssim",
    "roi_window", "ssim",
]
