"""
Dual score for one study
========================

Ground the report, regenerate the image from it over the original lung
mask, register the two with the SVC anchor and compare every grounded ROI.
A report that matches the image scores high on both counts; a borrowed
report does not.
"""

from cxrval.adapters.phantom import phantom_registry
from cxrval.phantom import make_phantom_study
from cxrval.scoring import categorize_scenario, dual_score

registry = phantom_registry()
study, _ = make_phantom_study({
    "study_id": "demo",
    "pathologies": [{"label": "Pneumothorax", "zone": "right upper lung zone"}],
    "seed": 11,
    "offset": [2, -1],
})
print("report:", study.report_text)

real = dual_score(study, registry)
false = dual_score(study, registry, report="Cardiomegaly.")

for name, s in (("real", real), ("false", false)):
    print(f"\n{name} report")
    print(f"  detection  {s.aggregate_detection:.3f}")
    print(f"  MS-SSIM    {s.aggregate_ms_ssim:.3f}")
    print(f"  chi2       {s.aggregate_chi2:.4f}")
    print(f"  shift      ({s.shift.dx:+.0f}, {s.shift.dy:+.0f}) via {s.shift.anchor_region}")
    for roi in s.per_roi:
        print(f"  roi {roi.box.phrase!r}: p={roi.detection_accuracy:.2f} ms_ssim={roi.ms_ssim:.3f}")

print("\nscenario:", categorize_scenario(real, false))
