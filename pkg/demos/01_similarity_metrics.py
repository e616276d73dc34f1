"""
Similarity metrics on a phantom ROI
===================================

MS-SSIM compares pixels, chi-square compares intensity and gradient
histograms, and the Fréchet distance compares whole feature populations.
"""

import numpy as np

from cxrval.core import Box
from cxrval.phantom import make_phantom_study, render, resolve_findings
from cxrval.scoring import chi2, default_features, extract_roi, frechet_distance, ms_ssim

# a phantom with a left pleural effusion, and a re-render under a new seed
study, layout = make_phantom_study({"pathologies": ["Pleural Effusion"], "seed": 1})
same = render(layout.findings, 256, seed=2)
other = render(resolve_findings(["Cardiomegaly"]), 256, seed=2)

box = layout.finding_boxes[0]
print("finding box:", box.coords())

# crop the padded ROI from each image
roi = extract_roi(study.image, box)
roi_same = extract_roi(same, box)
roi_other = extract_roi(other, box)

value, scales = ms_ssim(roi, roi_same, full=True)
print(f"MS-SSIM same findings  {value:.3f}  ({scales} scales)")
print(f"MS-SSIM other findings {ms_ssim(roi, roi_other):.3f}")

f = default_features(roi)
print(f"chi2 same  {chi2(f, default_features(roi_same)):.4f}")
print(f"chi2 other {chi2(f, default_features(roi_other)):.4f}")

# Fréchet distance between two feature populations drawn from jittered renders
feats = lambda imgs: np.stack([default_features(extract_roi(im, box)).bins for im in imgs])
pop_a = feats([render(layout.findings, 256, seed=s) for s in range(20)])
pop_b = feats([render(resolve_findings(["Cardiomegaly"]), 256, seed=s) for s in range(20)])
print(f"Frechet a vs a {frechet_distance(pop_a, pop_a):.2e}")
print(f"Frechet a vs b {frechet_distance(pop_a, pop_b):.4f}")

# tiny boxes still get an 11-pixel window
print("tiny box window:", extract_roi(study.image, Box(100, 100, 102, 103)).shape)
